#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <utility>

#include "gdse/activations.hpp"
#include "gdse/data_model.hpp"
#include "gdse/network.hpp"

namespace gdse {

struct ErrorRecord {
  int t = 0;
  double train = 0.0;
  double test = 0.0;
  double gap = 0.0;
  double test_se = 0.0;
};

inline double train_error(const NetworkParams& W, const Eigen::MatrixXd& X,
                          const Eigen::MatrixXd& Y_q,
                          const ActivationSet& acts) {
  ForwardCache c = forward(X, W, acts);
  return (Y_q - c.G[W.L]).squaredNorm() / double(X.rows());
}

// Monte Carlo generalization error over fresh features against an arbitrary
// regression function. The average over the uniform training-noise index is
// exact: E = E_X(phi-f)^2 + 2 xi_bar E_X(phi-f) + mean(xi^2).
inline std::pair<double, double> test_error_mc_target(
    const NetworkParams& W,
    const std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>& target_fn,
    const Eigen::VectorXd& xi_pool, FeatureDist dist, int N_new,
    std::mt19937_64& rng, const ActivationSet& acts,
    const Eigen::MatrixXd* X_test = nullptr) {
  Eigen::MatrixXd X = X_test ? *X_test
                             : generate_features(N_new, W.n, dist, rng);
  const int N = int(X.rows());
  Eigen::VectorXd target = target_fn(X);
  ForwardCache c = forward(X, W, acts);
  Eigen::VectorXd f = c.G[W.L].col(0);
  Eigen::VectorXd diff = target - f;
  double xi_bar = xi_pool.size() ? xi_pool.mean() : 0.0;
  double xi2 = xi_pool.size() ? xi_pool.squaredNorm() / xi_pool.size() : 0.0;
  // per-draw contribution, with the exact noise terms folded in
  Eigen::ArrayXd per = diff.array().square() + 2.0 * xi_bar * diff.array();
  double mean = per.mean();
  double var = (per - mean).square().sum() / double(N - 1);
  return {mean + xi2, std::sqrt(var / double(N))};
}

inline std::pair<double, double> test_error_mc(
    const NetworkParams& W, const Eigen::VectorXd& mu_star,
    const ScalarFunction& link, const Eigen::VectorXd& xi_pool,
    FeatureDist dist, int N_new, std::mt19937_64& rng,
    const ActivationSet& acts, const Eigen::MatrixXd* X_test = nullptr) {
  auto target = [&](const Eigen::MatrixXd& X) -> Eigen::VectorXd {
    return (X * mu_star).unaryExpr([&](double v) { return link(v); });
  };
  return test_error_mc_target(W, target, xi_pool, dist, N_new, rng, acts,
                              X_test);
}

// Regression function of the multi-index teacher Y = tanh(||Ustar x||) + xi.
inline std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>
multi_index_target(const Eigen::MatrixXd& U_star) {
  return [U_star](const Eigen::MatrixXd& X) -> Eigen::VectorXd {
    return (X * U_star.transpose())
        .rowwise()
        .norm()
        .unaryExpr([](double v) { return std::tanh(v); });
  };
}

inline double gap(const ErrorRecord& r) { return std::abs(r.test - r.train); }

}  // namespace gdse
