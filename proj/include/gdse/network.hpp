#pragma once

#include <Eigen/Dense>
#include <random>
#include <stdexcept>
#include <vector>

#include "gdse/activations.hpp"
#include "gdse/data_model.hpp"
#include "gdse/gaussian.hpp"

namespace gdse {

struct NetworkParams {
  int L = 2;
  int q = 1;
  int n = 1;
  Eigen::MatrixXd W1;                    // n x q
  std::vector<Eigen::MatrixXd> W_alpha;  // q x q, index alpha-2 for alpha in [2:L]

  const Eigen::MatrixXd& W(int alpha) const {
    if (alpha == 1) return W1;
    return W_alpha.at(alpha - 2);
  }
  Eigen::MatrixXd& W(int alpha) {
    if (alpha == 1) return W1;
    return W_alpha.at(alpha - 2);
  }
};

// Last layer keeps the [* | 0] column structure; a nonzero entry there means
// an implementation bug, so it is asserted rather than re-zeroed.
inline void assert_last_layer_structure(const NetworkParams& W) {
  if (W.q > 1 &&
      W.W_alpha.back().rightCols(W.q - 1).cwiseAbs().maxCoeff() != 0.0)
    throw std::logic_error("W_L columns 2..q must be exactly zero");
}

inline NetworkParams init_gaussian(int L, int q, int n, std::mt19937_64& rng) {
  if (L < 2 || q < 1 || n < 1)
    throw std::invalid_argument("init_gaussian: need L >= 2, q >= 1, n >= 1");
  NetworkParams W;
  W.L = L;
  W.q = q;
  W.n = n;
  W.W1 = gaussian_matrix(n, q, rng) / std::sqrt(double(n));
  for (int alpha = 2; alpha <= L; ++alpha)
    W.W_alpha.push_back(gaussian_matrix(q, q, rng) / std::sqrt(double(q)));
  if (q > 1) W.W_alpha.back().rightCols(q - 1).setZero();
  return W;
}

struct ForwardCache {
  // index alpha in [0:L]; H[0] = X, G[alpha] = sigma_alpha(H[alpha]),
  // Gp[alpha] = sigma_alpha'(H[alpha])
  std::vector<Eigen::MatrixXd> H, G, Gp;
};

inline ForwardCache forward(const Eigen::MatrixXd& X, const NetworkParams& W,
                            const ActivationSet& acts) {
  if (acts.L() != W.L) throw std::invalid_argument("forward: L mismatch");
  if (X.cols() != W.n) throw std::invalid_argument("forward: shape mismatch");
  ForwardCache c;
  c.H.resize(W.L + 1);
  c.G.resize(W.L + 1);
  c.Gp.resize(W.L + 1);
  c.H[0] = X;
  c.G[0] = X;  // sigma_0 = id
  c.Gp[0] = Eigen::MatrixXd::Ones(X.rows(), X.cols());
  for (int alpha = 1; alpha <= W.L; ++alpha) {
    c.H[alpha] = c.G[alpha - 1] * W.W(alpha);
    c.G[alpha] = apply(acts.sigma[alpha], c.H[alpha], 0);
    c.Gp[alpha] = apply(acts.sigma[alpha], c.H[alpha], 1);
  }
  return c;
}

inline double loss(const NetworkParams& W, const Eigen::MatrixXd& X,
                   const Eigen::MatrixXd& Y_q, const ActivationSet& acts) {
  ForwardCache c = forward(X, W, acts);
  return (Y_q - c.G[W.L]).squaredNorm() / (2.0 * X.rows());
}

// Per-layer gradients via one backward sweep.
inline std::vector<Eigen::MatrixXd> gradients(const NetworkParams& W,
                                              const Eigen::MatrixXd& X,
                                              const Eigen::MatrixXd& Y_q,
                                              const ActivationSet& acts,
                                              const ForwardCache* cache = nullptr) {
  ForwardCache local;
  if (!cache) {
    local = forward(X, W, acts);
    cache = &local;
  }
  const ForwardCache& c = *cache;
  const double m = double(X.rows());
  std::vector<Eigen::MatrixXd> grads(W.L);  // grads[alpha-1]
  Eigen::MatrixXd z = c.G[W.L] - Y_q;       // back-propagated residual
  for (int alpha = W.L; alpha >= 1; --alpha) {
    Eigen::MatrixXd zg = z.cwiseProduct(c.Gp[alpha]);
    grads[alpha - 1] = c.G[alpha - 1].transpose() * zg / m;
    if (alpha > 1) z = zg * W.W(alpha).transpose();
  }
  return grads;
}

inline NetworkParams gd_step(const NetworkParams& W,
                             const std::vector<Eigen::MatrixXd>& grads,
                             const std::vector<double>& eta) {
  if (grads.size() != size_t(W.L) || eta.size() != size_t(W.L))
    throw std::invalid_argument("gd_step: per-layer sizes mismatch");
  NetworkParams out = W;
  for (int alpha = 1; alpha <= W.L; ++alpha)
    out.W(alpha) -= eta[alpha - 1] * grads[alpha - 1];
  assert_last_layer_structure(out);
  return out;
}

inline double kappa_star(const Eigen::VectorXd& mu_star,
                         const Eigen::VectorXd& xi, const NetworkParams& W0) {
  double n = double(W0.n);
  double k = 1.0 + std::sqrt(n) * mu_star.cwiseAbs().maxCoeff();
  if (xi.size() > 0) k += xi.cwiseAbs().maxCoeff();
  k += std::sqrt(n) * W0.W1.cwiseAbs().maxCoeff();
  double op = 0.0;
  for (const auto& Wa : W0.W_alpha) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Wa);
    op = std::max(op, svd.singularValues()(0));
  }
  return k + op;
}

}  // namespace gdse
