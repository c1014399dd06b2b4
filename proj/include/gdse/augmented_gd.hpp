#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "gdse/activations.hpp"
#include "gdse/block_matrix.hpp"
#include "gdse/network.hpp"

namespace gdse {

struct ForwardDerivs {
  // H[alpha] for alpha in [0:L]; dH[l][alpha] for l in [0:q)
  std::vector<Eigen::MatrixXd> H;
  std::vector<std::vector<Eigen::MatrixXd>> dH;
};

struct BackwardDerivs {
  // P[alpha] for alpha in [1:L]; d1P/d2P[l][alpha]
  std::vector<Eigen::MatrixXd> P;
  std::vector<std::vector<Eigen::MatrixXd>> d1P, d2P;
};

inline ForwardDerivs forward_with_derivs(const NetworkParams& W,
                                         const Eigen::MatrixXd& X,
                                         const ActivationSet& acts) {
  const int L = W.L, q = W.q;
  const long m = X.rows();
  ForwardDerivs f;
  f.H.resize(L + 1);
  f.H[0] = X;
  for (int a = 1; a <= L; ++a)
    f.H[a] = apply(acts.sigma[a - 1], f.H[a - 1], 0) * W.W(a);
  f.dH.assign(q, std::vector<Eigen::MatrixXd>(L + 1));
  for (int l = 0; l < q; ++l) {
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(m, q);
    E.col(l).setOnes();
    f.dH[l][1] = E;
    for (int a = 2; a <= L; ++a)
      f.dH[l][a] = apply(acts.sigma[a - 1], f.H[a - 1], 1)
                       .cwiseProduct(f.dH[l][a - 1]) *
                   W.W(a);
  }
  return f;
}

inline BackwardDerivs backward_with_derivs(const NetworkParams& W,
                                           const ForwardDerivs& f,
                                           const Eigen::MatrixXd& Y_q,
                                           const ActivationSet& acts) {
  const int L = W.L, q = W.q;
  const long m = f.H[0].rows();
  BackwardDerivs b;
  b.P.resize(L + 1);
  b.P[L] = f.H[L] - Y_q;  // sigma_L = id
  for (int a = L - 1; a >= 1; --a)
    b.P[a] = b.P[a + 1].cwiseProduct(apply(acts.sigma[a + 1], f.H[a + 1], 1)) *
             W.W(a + 1).transpose();
  b.d1P.assign(q, std::vector<Eigen::MatrixXd>(L + 1));
  b.d2P.assign(q, std::vector<Eigen::MatrixXd>(L + 1));
  for (int l = 0; l < q; ++l) {
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(m, q);
    E.col(l).setOnes();
    b.d1P[l][L] = Eigen::MatrixXd::Zero(m, q);
    b.d2P[l][L] = E;
    for (int a = L - 1; a >= 1; --a) {
      Eigen::MatrixXd gp = apply(acts.sigma[a + 1], f.H[a + 1], 1);
      Eigen::MatrixXd gpp = apply(acts.sigma[a + 1], f.H[a + 1], 2);
      b.d1P[l][a] = (b.P[a + 1].cwiseProduct(gpp).cwiseProduct(f.dH[l][a + 1]) +
                     gp.cwiseProduct(b.d1P[l][a + 1])) *
                    W.W(a + 1).transpose();
      b.d2P[l][a] = gp.cwiseProduct(b.d2P[l][a + 1]) * W.W(a + 1).transpose();
    }
  }
  return b;
}

// Pre-gradient derivative estimates dS_l, one m x q matrix per column index l.
inline std::vector<Eigen::MatrixXd> pregrad_derivs(const NetworkParams& W,
                                                   const ForwardDerivs& f,
                                                   const BackwardDerivs& b,
                                                   const ActivationSet& acts) {
  const int q = W.q;
  const long m = f.H[0].rows();
  Eigen::MatrixXd s1p = apply(acts.sigma[1], f.H[1], 1);
  Eigen::MatrixXd s1pp = apply(acts.sigma[1], f.H[1], 2);
  Eigen::MatrixXd diag_term = b.P[1].cwiseProduct(s1pp);
  std::vector<Eigen::MatrixXd> dS(q);
  for (int l = 0; l < q; ++l) {
    // Q_l(k,r) = sum_d d2P_d(k,r) * dH_L_l(k,d): the residual's own u_l
    // dependence folded through the z-derivative of the backward map
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(m, q);
    for (int d = 0; d < q; ++d)
      Q += (b.d2P[d][1].array().colwise() * f.dH[l][W.L].col(d).array())
               .matrix();
    dS[l] = (b.d1P[l][1] + Q).cwiseProduct(s1p);
    dS[l].col(l) += diag_term.col(l);
  }
  return dS;
}

struct AugGDState {
  int t = 0;
  NetworkParams W;
  NetworkParams W0;
  // history, one entry per completed iteration s = 1..t:
  std::vector<Eigen::MatrixXd> pregrad_hist;  // P1^(s-1) .* sigma1'(XW1^(s-1))
  // Lhat diagonal entries: Ldiag[s-1][k] is the q x q block whose column l is
  // row k of eta * dS_l^(s-1)
  std::vector<std::vector<Eigen::MatrixXd>> Ldiag;
  BlockMatrix rho_hat;  // t x t after iteration t (empty at t = 0)
  BlockMatrix tau_hat;
  bool out_of_warranty = false;  // weak-derivative activation in use
  bool diverged = false;         // trajectory left the finite range
};

// Step (4): per-row block solves against the unit-lower system.
inline void onsager_update(AugGDState& st, double phi, int m) {
  const int t = st.t, q = st.W.q;
  BlockMatrix shifted = shift_embed(st.rho_hat, q);  // (t x t) for new t
  BlockMatrix tau(t, q);
  BlockMatrix M(t, q), Lk(t, q);
  for (int k = 0; k < m; ++k) {
    for (int s = 0; s < t; ++s) Lk(s, s) = st.Ldiag[s][k];
    // M = I + phi^-1 * Lk * shifted ; Lk block-diagonal so row r of the
    // product is Lk(r,r) * shifted(r, .)
    for (int r = 0; r < t; ++r)
      for (int s = 0; s < t; ++s)
        M(r, s) = (1.0 / phi) * Lk(r, r) * shifted(r, s);
    for (int r = 0; r < t; ++r)
      M(r, r) += Eigen::MatrixXd::Identity(q, q);
    BlockMatrix X = solve_unit_lower(M, Lk);
    for (int r = 0; r < t; ++r)
      for (int s = 0; s < t; ++s) tau(r, s) -= X(r, s) / double(m);
  }
  st.tau_hat = tau;
  BlockMatrix rho = block_identity(t, q);
  BlockMatrix tauI = tau;
  for (int r = 0; r < t; ++r) tauI(r, r) += Eigen::MatrixXd::Identity(q, q);
  st.rho_hat = block_add(rho, block_matmul(tauI, shifted));
}

// Step (5): plain GD update from the cached forward/backward sweeps.
inline NetworkParams gradient_update(const AugGDState& st,
                                     const ForwardDerivs& f,
                                     const BackwardDerivs& b,
                                     const ActivationSet& acts,
                                     const std::vector<double>& eta) {
  const double m = double(f.H[0].rows());
  NetworkParams W = st.W;
  for (int a = 1; a <= W.L; ++a) {
    Eigen::MatrixXd pre =
        b.P[a].cwiseProduct(apply(acts.sigma[a], f.H[a], 1));
    W.W(a) -= (eta[a - 1] / m) * apply(acts.sigma[a - 1], f.H[a - 1], 0)
                                      .transpose() *
              pre;
  }
  assert_last_layer_structure(W);
  return W;
}

// Step (6): debiased statistic and plug-in generalization estimate.
inline std::pair<Eigen::MatrixXd, double> estimate_generalization(
    const AugGDState& st, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y_q,
    const ActivationSet& acts, double phi, double eta1) {
  const int t = st.t;
  Eigen::MatrixXd U = X * st.W.W1;
  for (int s = 1; s <= t; ++s)
    U += (eta1 / phi) * st.pregrad_hist[s - 1] *
         st.rho_hat(t - 1, s - 1).transpose();
  // evaluate the deeper layers on U
  Eigen::MatrixXd G = U;
  for (int a = 2; a <= st.W.L; ++a)
    G = apply(acts.sigma[a - 1], G, 0) * st.W.W(a);
  double e = (Y_q - G).squaredNorm() / double(X.rows());
  return {U, e};
}

struct AugGDRecord {
  int t = 0;
  double e_test_hat = 0.0;
  double e_train = 0.0;
  std::vector<double> reldist;  // per layer
};

struct AugGDHooks {
  // called after each iteration with the live state and fresh record
  std::function<void(const AugGDState&, AugGDRecord&)> per_iteration;
};

inline std::pair<AugGDState, std::vector<AugGDRecord>> run_augmented_gd(
    const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y_q,
    const NetworkParams& W0, const ActivationSet& acts,
    const std::vector<double>& eta, int T, const AugGDHooks& hooks = {}) {
  AugGDState st;
  st.W = W0;
  st.W0 = W0;
  for (const auto& s : acts.sigma)
    if (s.smoothness == Smoothness::weak_first_derivative)
      st.out_of_warranty = true;
  const double phi = double(X.rows()) / double(X.cols());
  std::vector<AugGDRecord> records;
  auto record = [&](double e_hat, double e_train) {
    AugGDRecord r;
    r.t = st.t;
    r.e_test_hat = e_hat;
    r.e_train = e_train;
    for (int a = 1; a <= W0.L; ++a) {
      double base = W0.W(a).norm();
      r.reldist.push_back((st.W.W(a) - W0.W(a)).norm() /
                          (base > 0 ? base : 1.0));
    }
    if (hooks.per_iteration) hooks.per_iteration(st, r);
    records.push_back(std::move(r));
  };
  {
    Eigen::MatrixXd G0 = X * W0.W1;
    for (int a = 2; a <= W0.L; ++a)
      G0 = apply(acts.sigma[a - 1], G0, 0) * W0.W(a);
    double e0 = (Y_q - G0).squaredNorm() / double(X.rows());
    record(e0, e0);  // t = 0: U = XW1, estimate equals training error
  }
  auto all_finite = [](const NetworkParams& W) {
    if (!W.W1.allFinite()) return false;
    for (const auto& Wa : W.W_alpha)
      if (!Wa.allFinite()) return false;
    return true;
  };
  for (int it = 1; it <= T; ++it) {
    // once the trajectory overflows (possible out of warranty, e.g. plain
    // ReLU at a large step size), keep emitting records instead of feeding
    // non-finite blocks into the solvers
    if (st.diverged || !all_finite(st.W)) {
      st.diverged = true;
      st.t = it;
      record(std::numeric_limits<double>::quiet_NaN(),
             std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    ForwardDerivs f = forward_with_derivs(st.W, X, acts);
    BackwardDerivs b = backward_with_derivs(st.W, f, Y_q, acts);
    std::vector<Eigen::MatrixXd> dS = pregrad_derivs(st.W, f, b, acts);
    // archive this iteration's pre-gradient and Lhat diagonal blocks
    Eigen::MatrixXd s1p = apply(acts.sigma[1], f.H[1], 1);
    st.pregrad_hist.push_back(b.P[1].cwiseProduct(s1p));
    const int q = W0.q;
    const long m = X.rows();
    std::vector<Eigen::MatrixXd> blocks(m, Eigen::MatrixXd(q, q));
    for (int l = 0; l < q; ++l)
      for (long k = 0; k < m; ++k)
        blocks[k].col(l) = eta[0] * dS[l].row(k).transpose();
    st.Ldiag.push_back(std::move(blocks));
    st.t = it;
    bool lhat_finite = st.pregrad_hist.back().allFinite();
    for (const auto& blk : st.Ldiag.back())
      lhat_finite = lhat_finite && blk.allFinite();
    if (!lhat_finite) {
      st.diverged = true;
      record(std::numeric_limits<double>::quiet_NaN(),
             std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    onsager_update(st, phi, int(m));
    st.W = gradient_update(st, f, b, acts, eta);
    auto [U, e_hat] = estimate_generalization(st, X, Y_q, acts, phi, eta[0]);
    Eigen::MatrixXd G = X * st.W.W1;
    for (int a = 2; a <= W0.L; ++a)
      G = apply(acts.sigma[a - 1], G, 0) * st.W.W(a);
    record(e_hat, (Y_q - G).squaredNorm() / double(X.rows()));
  }
  return {st, records};
}

}  // namespace gdse
