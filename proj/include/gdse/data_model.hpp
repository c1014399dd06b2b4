#pragma once

#include <Eigen/Dense>
#include <random>
#include <stdexcept>
#include <string>

#include "gdse/activations.hpp"
#include "gdse/gaussian.hpp"

namespace gdse {

struct FeatureDist {
  enum Kind { gaussian, student_t_normalized } kind = gaussian;
  double df = 10.0;

  static FeatureDist parse(const std::string& s) {
    if (s == "gaussian") return {gaussian, 0.0};
    if (s == "student_t" || s == "student_t_10")
      return {student_t_normalized, 10.0};
    throw std::invalid_argument("unknown feature distribution '" + s + "'");
  }
  std::string name() const {
    return kind == gaussian ? "gaussian" : "student_t";
  }
};

struct SingleIndexInstance {
  Eigen::MatrixXd X;        // m x n
  Eigen::VectorXd mu_star;  // n
  Eigen::VectorXd xi;       // m
  Eigen::VectorXd Y;        // m
  ScalarFunction link;
  FeatureDist feature_dist;
};

struct AugmentedViews {
  Eigen::MatrixXd Y_q;       // m x q, first column Y
  Eigen::MatrixXd xi_q;      // m x q, first column xi
  Eigen::MatrixXd mu_star_q; // n x q, first column mu_star
};

inline Eigen::VectorXd generate_signal(int n, std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("generate_signal: n >= 1 required");
  return gaussian_matrix(n, 1, rng) / std::sqrt(double(n));
}

inline Eigen::MatrixXd generate_features(int m, int n, FeatureDist dist,
                                         std::mt19937_64& rng) {
  if (dist.kind == FeatureDist::gaussian) return gaussian_matrix(m, n, rng);
  if (dist.df <= 2.0)
    throw std::invalid_argument("generate_features: need df > 2");
  std::student_t_distribution<double> td(dist.df);
  double scale = std::sqrt((dist.df - 2.0) / dist.df);  // unit variance
  Eigen::MatrixXd X(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) X(i, j) = scale * td(rng);
  return X;
}

inline std::pair<Eigen::VectorXd, Eigen::VectorXd> generate_responses(
    const Eigen::MatrixXd& X, const Eigen::VectorXd& mu_star,
    const ScalarFunction& link, double sigma_xi, std::mt19937_64& rng) {
  Eigen::VectorXd proj = X * mu_star;
  Eigen::VectorXd xi = sigma_xi == 0.0
                           ? Eigen::VectorXd::Zero(X.rows())
                           : Eigen::VectorXd(sigma_xi *
                                             gaussian_matrix(X.rows(), 1, rng));
  Eigen::VectorXd Y = proj.unaryExpr([&](double v) { return link(v); }) + xi;
  return {Y, xi};
}

inline std::pair<Eigen::VectorXd, Eigen::VectorXd> generate_multi_index(
    const Eigen::MatrixXd& X, const Eigen::MatrixXd& U_star, double sigma_xi,
    std::mt19937_64& rng) {
  Eigen::MatrixXd proj = X * U_star.transpose();  // m x k
  Eigen::VectorXd xi = sigma_xi == 0.0
                           ? Eigen::VectorXd::Zero(X.rows())
                           : Eigen::VectorXd(sigma_xi *
                                             gaussian_matrix(X.rows(), 1, rng));
  Eigen::VectorXd Y(X.rows());
  for (int i = 0; i < X.rows(); ++i) Y(i) = std::tanh(proj.row(i).norm());
  Y += xi;
  return {Y, xi};
}

struct NetworkParams;  // forward decl, defined in network.hpp
double kappa_star(const Eigen::VectorXd& mu_star, const Eigen::VectorXd& xi,
                  const NetworkParams& W0);

inline AugmentedViews augment(const SingleIndexInstance& inst, int q) {
  if (q < 1) throw std::invalid_argument("augment: q >= 1 required");
  AugmentedViews v;
  v.Y_q = Eigen::MatrixXd::Zero(inst.X.rows(), q);
  v.xi_q = Eigen::MatrixXd::Zero(inst.X.rows(), q);
  v.mu_star_q = Eigen::MatrixXd::Zero(inst.X.cols(), q);
  v.Y_q.col(0) = inst.Y;
  v.xi_q.col(0) = inst.xi;
  v.mu_star_q.col(0) = inst.mu_star;
  return v;
}

}  // namespace gdse
