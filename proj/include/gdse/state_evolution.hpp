#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "gdse/block_matrix.hpp"
#include "gdse/gaussian.hpp"
#include "gdse/network.hpp"
#include "gdse/rng.hpp"
#include "gdse/theoretical.hpp"

namespace gdse {

struct SEConfig {
  int n = 0, q = 0, L = 2, m = 0;
  double phi = 1.0;              // m / n aspect ratio
  std::vector<double> eta;       // per layer, constant over iterations
  const ActivationSet* acts = nullptr;
  ScalarFunction link;
  Eigen::VectorXd xi;            // training noise pool (size m)
  int N = 20000;                 // Monte Carlo ensemble size
  int T_max = 0;                 // horizon (for storage layout)
  uint64_t seed = 0;
  // Jacobian-triangle storage drops to float32 above this budget (bytes);
  // blocks are always computed in double.
  double jac_budget_bytes = 1.5e9;
};

struct SEState {
  int t = 0;
  // lower-triangular histories indexed [t-1][s-1], s in [1:t]
  std::vector<std::vector<Eigen::MatrixXd>> tau, rho, Sigma, Omega;
  std::vector<Eigen::MatrixXd> delta;      // delta[t-1]
  Eigen::MatrixXd D_m1;                    // sqrt(n) * mu_star_q
  std::vector<Eigen::MatrixXd> D;          // D[t], t from 0
  std::vector<std::vector<Eigen::MatrixXd>> V;  // V[t][alpha-2]
  std::vector<Eigen::MatrixXd> M_alpha_prev;    // latest G * T_alpha^T means
  Eigen::MatrixXd U_cov;                   // covariance of (U^0..U^t)
  std::vector<double> train_pred, test_pred;  // per GD iteration 0..t-1

  const Eigen::MatrixXd& rho_at(int tt, int ss) const {
    return rho[tt - 1][ss - 1];
  }
  BlockMatrix rho_block(int q) const {
    BlockMatrix R(t, q);
    for (int r = 1; r <= t; ++r)
      for (int s = 1; s <= r; ++s) R(r - 1, s - 1) = rho[r - 1][s - 1];
    return R;
  }
};

// Contiguous per-sample ensemble. The Jacobian triangle J[s][r] (s in [1:T],
// r in [0:s]) lives in one flat buffer per sample to avoid per-block heap
// traffic at N ~ 2e4.
struct MCEnsemble {
  int N = 0, q = 0, T = 0;
  bool jac_float = false;
  std::vector<int> k;
  std::vector<double> xi_k;
  std::vector<double> u;        // N * (T+1) * q
  std::vector<double> theta;    // N * T * q
  std::vector<double> upsilon;  // N * T * q
  std::vector<double> Su, Sw;   // N * T * q * q
  std::vector<double> Jd;
  std::vector<float> Jf;

  static long tri_idx(int s, int r) {
    return static_cast<long>(s - 1) * (s + 2) / 2 + r;
  }
  long tri_blocks() const { return static_cast<long>(T) * (T + 3) / 2; }

  Eigen::Map<Eigen::RowVectorXd> u_row(int i, int s) {
    return {u.data() + (static_cast<long>(i) * (T + 1) + s) * q, q};
  }
  Eigen::Map<Eigen::RowVectorXd> theta_row(int i, int s) {
    return {theta.data() + (static_cast<long>(i) * T + s - 1) * q, q};
  }
  Eigen::Map<Eigen::RowVectorXd> upsilon_row(int i, int s) {
    return {upsilon.data() + (static_cast<long>(i) * T + s - 1) * q, q};
  }
  Eigen::Map<Eigen::MatrixXd> Su_at(int i, int s) {
    return {Su.data() + (static_cast<long>(i) * T + s - 1) * q * q, q, q};
  }
  Eigen::Map<Eigen::MatrixXd> Sw_at(int i, int s) {
    return {Sw.data() + (static_cast<long>(i) * T + s - 1) * q * q, q, q};
  }
  void jac_get(int i, int s, int r, Eigen::MatrixXd& out) const {
    long off = (static_cast<long>(i) * tri_blocks() + tri_idx(s, r)) * q * q;
    if (jac_float)
      for (int c = 0; c < q * q; ++c) out.data()[c] = Jf[off + c];
    else
      for (int c = 0; c < q * q; ++c) out.data()[c] = Jd[off + c];
  }
  void jac_set(int i, int s, int r, const Eigen::MatrixXd& in) {
    long off = (static_cast<long>(i) * tri_blocks() + tri_idx(s, r)) * q * q;
    if (jac_float)
      for (int c = 0; c < q * q; ++c) Jf[off + c] = float(in.data()[c]);
    else
      for (int c = 0; c < q * q; ++c) Jd[off + c] = in.data()[c];
  }
};

inline SEState se_init(const NetworkParams& W0, const Eigen::VectorXd& mu_star,
                       int q) {
  SEState st;
  st.t = 0;
  const int n = W0.n;
  Eigen::MatrixXd mu_q = Eigen::MatrixXd::Zero(n, q);
  mu_q.col(0) = mu_star;
  st.D_m1 = std::sqrt(double(n)) * mu_q;
  st.D.push_back(std::sqrt(double(n)) * W0.W1);
  st.V.push_back(W0.W_alpha);
  st.U_cov = st.D_m1.transpose() * st.D_m1 / double(n);  // diag(sigma_mu^2,0..)
  return st;
}

inline MCEnsemble se_make_ensemble(const SEConfig& cfg, const SEState& st) {
  MCEnsemble e;
  e.N = cfg.N;
  e.q = cfg.q;
  e.T = cfg.T_max;
  double jac_bytes =
      double(e.N) * double(e.tri_blocks()) * cfg.q * cfg.q * 8.0;
  e.jac_float = jac_bytes > cfg.jac_budget_bytes;
  e.k.resize(e.N);
  e.xi_k.resize(e.N);
  e.u.assign(static_cast<size_t>(e.N) * (e.T + 1) * e.q, 0.0);
  e.theta.assign(static_cast<size_t>(e.N) * e.T * e.q, 0.0);
  e.upsilon.assign(static_cast<size_t>(e.N) * e.T * e.q, 0.0);
  e.Su.assign(static_cast<size_t>(e.N) * e.T * e.q * e.q, 0.0);
  e.Sw.assign(static_cast<size_t>(e.N) * e.T * e.q * e.q, 0.0);
  size_t jsz = static_cast<size_t>(e.N) * e.tri_blocks() * e.q * e.q;
  if (e.jac_float)
    e.Jf.assign(jsz, 0.0f);
  else
    e.Jd.assign(jsz, 0.0);

  auto rk = make_stream(cfg.seed, 0, "se_k");
  std::uniform_int_distribution<int> uk(0, cfg.m - 1);
  for (int i = 0; i < e.N; ++i) {
    e.k[i] = uk(rk);
    e.xi_k[i] = cfg.xi.size() ? cfg.xi(e.k[i]) : 0.0;
  }
  auto r0 = make_stream(cfg.seed, 0, "se_u0");
  std::normal_distribution<double> nd(0.0, 1.0);
  double sigma_mu = std::sqrt(st.U_cov(0, 0));
  for (int i = 0; i < e.N; ++i) e.u_row(i, 0)(0) = sigma_mu * nd(r0);
  return e;
}

// One advance of (S1)-(S5) from iteration t-1 to t.
inline void se_advance(SEState& st, MCEnsemble& ens, const SEConfig& cfg) {
  const int t = st.t + 1;
  const int q = cfg.q, n = cfg.n, L = cfg.L;
  if (t > ens.T) throw std::runtime_error("se_advance: past ensemble horizon");
  const double eta1 = cfg.eta[0];
  const double phi = cfg.phi;

  // ---- (S2): extend the Gaussian path by exact conditional sampling ----
  Eigen::MatrixXd row(q, t * q);  // cov(U^t, U^(0..t-1))
  for (int s = 0; s < t; ++s) {
    Eigen::MatrixXd blk = st.D[t - 1].transpose() *
                          (s == 0 ? st.D_m1 : st.D[s - 1]) / double(n);
    if (t - 1 >= 1 && s - 1 >= 1) blk += st.Omega[t - 2][s - 2];
    row.middleCols(s * q, q) = blk;
  }
  Eigen::MatrixXd Ctt = st.D[t - 1].transpose() * st.D[t - 1] / double(n);
  if (t - 1 >= 1) Ctt += st.Omega[t - 2][t - 2];
  Eigen::MatrixXd A = row * psd_pinv(st.U_cov, 1e-9);
  // the Schur complement shrinks as GD converges; judge its PSD slack
  // against the unconditional scale, where the MC noise actually lives
  Eigen::MatrixXd condS = psd_sqrt(Ctt - A * row.transpose(), 1e-10, 1e-4,
                                   Ctt.cwiseAbs().maxCoeff());
  {
    Eigen::MatrixXd U2((t + 1) * q, (t + 1) * q);
    U2.topLeftCorner(t * q, t * q) = st.U_cov;
    U2.block(t * q, 0, q, t * q) = row;
    U2.block(0, t * q, t * q, q) = row.transpose();
    U2.bottomRightCorner(q, q) = Ctt;
    st.U_cov = U2;
  }

  auto rt = make_stream(cfg.seed, uint64_t(t), "se_ut");
  std::normal_distribution<double> nd(0.0, 1.0);

  TheoreticalContext ctx;
  ctx.acts = cfg.acts;
  ctx.v = st.V[t - 1];  // V^(t-1)
  ctx.link = cfg.link;

  // reduction accumulators
  std::vector<Eigen::MatrixXd> tau_acc(t, Eigen::MatrixXd::Zero(q, q));
  Eigen::MatrixXd delta_acc = Eigen::MatrixXd::Zero(q, q);
  std::vector<Eigen::MatrixXd> Sigma_acc(t, Eigen::MatrixXd::Zero(q, q));
  std::vector<Eigen::MatrixXd> M_acc(L - 1, Eigen::MatrixXd::Zero(q, q));
  double train_acc = 0.0, test_acc = 0.0;

  RowWork wk, wk_test;
  Eigen::RowVectorXd z(q), u_new(q), th(q);
  Eigen::MatrixXd Jprev(q, q), J(q, q), term(q, q);
  for (int i = 0; i < ens.N; ++i) {
    for (int c = 0; c < q; ++c) z(c) = nd(rt);
    Eigen::Map<Eigen::RowVectorXd> past(ens.u.data() +
                                            static_cast<long>(i) *
                                                (ens.T + 1) * q,
                                        t * q);
    u_new = past * A.transpose() + z * condS.transpose();
    ens.u_row(i, t) = u_new;

    // (S1): Theta^(t) = u^(t) - sum_s Upsilon^(s) rho_{t-1,s}^T
    th = u_new;
    for (int s = 1; s <= t - 1; ++s)
      th -= ens.upsilon_row(i, s) * st.rho_at(t - 1, s).transpose();
    ens.theta_row(i, t) = th;

    eval_row(ctx, th, ens.u_row(i, 0), ens.xi_k[i], wk, true);
    ens.upsilon_row(i, t) = (eta1 / phi) * wk.S;
    ens.Su_at(i, t) = wk.Su;
    ens.Sw_at(i, t) = wk.Sw;

    // Jacobian row t: J[t][r] = 1_{r=t} I - phi^-1 sum_{r'} eta1 *
    //   rho_{t-1,r'} (Su[r'] J[r'][r] + 1_{r=0} Sw[r'])
    for (int r = 0; r <= t; ++r) {
      if (r == t) {
        J = Eigen::MatrixXd::Identity(q, q);
      } else {
        J.setZero();
        for (int rp = std::max(r, 1); rp <= t - 1; ++rp) {
          ens.jac_get(i, rp, r, Jprev);
          term.noalias() = ens.Su_at(i, rp) * Jprev;
          if (r == 0) term += ens.Sw_at(i, rp);
          J.noalias() -= (eta1 / phi) * st.rho_at(t - 1, rp) * term;
        }
      }
      ens.jac_set(i, t, r, J);
      // (S3) reductions against Su[t]
      if (r >= 1) {
        tau_acc[r - 1].noalias() -= eta1 * wk.Su * J;
      } else {
        delta_acc.noalias() -= eta1 * (wk.Su * J + wk.Sw);
      }
    }
    // Sigma row: phi * E[Ups^(t)T Ups^(s)]
    for (int s = 1; s <= t; ++s)
      Sigma_acc[s - 1].noalias() += phi * ens.upsilon_row(i, t).transpose() *
                                    ens.upsilon_row(i, s);
    // (S5) accumulators: col(G_{alpha-1}) x row(T_alpha) at Theta^(t)
    for (int a = 2; a <= L; ++a)
      M_acc[a - 2].noalias() += row_script_G(ctx, wk, a - 1).transpose() *
                                row_pregrad_T(ctx, wk, a);
    // error characterization at GD iteration t-1 (uses V^(t-1))
    train_acc += wk.r.squaredNorm();
    eval_row(ctx, u_new, ens.u_row(i, 0), ens.xi_k[i], wk_test, false);
    test_acc += wk_test.r.squaredNorm();
  }
  const double invN = 1.0 / double(ens.N);

  st.tau.emplace_back();
  st.Sigma.emplace_back();
  for (int s = 1; s <= t; ++s) {
    st.tau.back().push_back(tau_acc[s - 1] * invN);
    st.Sigma.back().push_back(Sigma_acc[s - 1] * invN);
  }
  st.delta.push_back(delta_acc * invN);

  // rho row: rho_{t,t} = I; rho_{t,s} = sum_{r in [s+1:t]} (tau_{t,r} +
  // 1_{r=t} I) rho_{r-1,s}
  st.rho.emplace_back();
  std::vector<Eigen::MatrixXd>& rho_row = st.rho.back();
  rho_row.resize(t);
  rho_row[t - 1] = Eigen::MatrixXd::Identity(q, q);
  for (int s = t - 1; s >= 1; --s) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(q, q);
    for (int r = s + 1; r <= t; ++r) {
      Eigen::MatrixXd coef = st.tau.back()[r - 1];
      if (r == t) coef += Eigen::MatrixXd::Identity(q, q);
      acc.noalias() += coef * st.rho[r - 2][s - 1];
    }
    rho_row[s - 1] = acc;
  }

  // Omega row: Omega_{t,s} = sum_{r,r'} rho_{t,r} Sigma_{r,r'} rho_{s,r'}^T
  // (Sigma symmetric across the diagonal: Sigma_{r,r'} = Sigma_{r',r}^T)
  auto Sig = [&](int r, int rp) -> Eigen::MatrixXd {
    if (rp <= r) return st.Sigma[r - 1][rp - 1];
    return st.Sigma[rp - 1][r - 1].transpose();
  };
  st.Omega.emplace_back();
  for (int s = 1; s <= t; ++s) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(q, q);
    for (int r = 1; r <= t; ++r)
      for (int rp = 1; rp <= s; ++rp)
        acc.noalias() +=
            st.rho[t - 1][r - 1] * Sig(r, rp) * st.rho[s - 1][rp - 1].transpose();
    st.Omega.back().push_back(acc);
  }

  // (S4): D_t
  Eigen::MatrixXd Dt = st.D_m1 * st.delta.back().transpose();
  for (int r = 1; r <= t; ++r) {
    Eigen::MatrixXd coef = st.tau.back()[r - 1].transpose();
    if (r == t) coef += Eigen::MatrixXd::Identity(q, q);
    Dt.noalias() += st.D[r - 1] * coef;
  }
  st.D.push_back(Dt);

  // (S5): V update
  std::vector<Eigen::MatrixXd> Vt = st.V[t - 1];
  st.M_alpha_prev.clear();
  for (int a = 2; a <= L; ++a) {
    Eigen::MatrixXd M = M_acc[a - 2] * invN;
    st.M_alpha_prev.push_back(M);
    Vt[a - 2] -= cfg.eta[a - 1] * M;
  }
  st.V.push_back(Vt);

  st.train_pred.push_back(train_acc * invN);
  st.test_pred.push_back(test_acc * invN);
  st.t = t;
}

// Error characterization for GD iteration t requires the SE advanced through
// t+1; returns (train, test) predictions for iteration t.
inline std::pair<double, double> se_errors(const SEState& st, int t_gd) {
  if (t_gd + 1 > st.t)
    throw std::runtime_error("se_errors: advance SE through t+1 first");
  return {st.train_pred[t_gd], st.test_pred[t_gd]};
}

// Independent closed-form oracle for the full tau block triangle at the
// current iteration: pathwise block solve against I + phi^-1 L O(rho).
inline BlockMatrix se_tau_oracle(const SEState& st, MCEnsemble& ens,
                                 const SEConfig& cfg) {
  const int t = st.t, q = cfg.q;
  BlockMatrix prev(t - 1, q);
  for (int r = 1; r <= t - 1; ++r)
    for (int s = 1; s <= r; ++s) prev(r - 1, s - 1) = st.rho[r - 1][s - 1];
  BlockMatrix shifted = shift_embed(prev, q);
  BlockMatrix acc(t, q);
  BlockMatrix M(t, q), Lk(t, q);
  for (int i = 0; i < ens.N; ++i) {
    for (int s = 1; s <= t; ++s) Lk(s - 1, s - 1) = cfg.eta[0] * ens.Su_at(i, s);
    for (int r = 0; r < t; ++r)
      for (int s = 0; s < t; ++s)
        M(r, s) = (1.0 / cfg.phi) * Lk(r, r) * shifted(r, s);
    for (int r = 0; r < t; ++r)
      M(r, r) += Eigen::MatrixXd::Identity(q, q);
    BlockMatrix X = solve_unit_lower(M, Lk);
    for (int r = 0; r < t; ++r)
      for (int s = 0; s < t; ++s) acc(r, s) -= X(r, s) / double(ens.N);
  }
  return acc;
}

// Matrix-form rho recursion, used as the oracle for the elementwise row.
inline BlockMatrix rho_matrix_form(const std::vector<BlockMatrix>& tau_rows_asc,
                                   int q) {
  BlockMatrix rho;  // starts empty
  for (const BlockMatrix& tau : tau_rows_asc) {
    int t = tau.t;
    BlockMatrix shifted = shift_embed(rho, q);
    BlockMatrix tauI = tau;
    for (int r = 0; r < t; ++r) tauI(r, r) += Eigen::MatrixXd::Identity(q, q);
    rho = block_add(block_identity(t, q), block_matmul(tauI, shifted));
  }
  return rho;
}

// Recompute a Theta path from a stored u-path (test helper for the pathwise
// finite-difference Jacobian checks).
inline std::vector<Eigen::RowVectorXd> recompute_theta_path(
    const SEState& st, const SEConfig& cfg,
    const std::vector<Eigen::RowVectorXd>& u_path, double xi_k, int t) {
  std::vector<Eigen::RowVectorXd> th(t + 1), ups(t + 1);
  RowWork wk;
  for (int s = 1; s <= t; ++s) {
    th[s] = u_path[s];
    for (int r = 1; r <= s - 1; ++r)
      th[s] -= ups[r] * st.rho_at(s - 1, r).transpose();
    TheoreticalContext ctx;
    ctx.acts = cfg.acts;
    ctx.v = st.V[s - 1];
    ctx.link = cfg.link;
    eval_row(ctx, th[s], u_path[0], xi_k, wk, false);
    ups[s] = (cfg.eta[0] / cfg.phi) * wk.S;
  }
  return th;
}

// ---------------------------------------------------------------------------
// Delta^(t) sampling (the first-layer weight law) and the effective signal.
// ---------------------------------------------------------------------------

struct EffectiveSignal {
  Eigen::VectorXd m_W;   // q
  Eigen::MatrixXd M_W;   // q x q
  Eigen::MatrixXd U_eff; // n x q
};

inline EffectiveSignal effective_signal(const SEState& st,
                                        const NetworkParams& W0,
                                        const Eigen::VectorXd& mu_star) {
  const int q = W0.q;
  Eigen::VectorXd m_W = Eigen::VectorXd::Zero(q);
  Eigen::MatrixXd M_W = Eigen::MatrixXd::Identity(q, q);
  std::vector<Eigen::VectorXd> m_hist{m_W};
  std::vector<Eigen::MatrixXd> M_hist{M_W};
  for (int tt = 1; tt <= st.t; ++tt) {
    Eigen::VectorXd m_new = st.delta[tt - 1].col(0);
    Eigen::MatrixXd M_new = Eigen::MatrixXd::Zero(q, q);
    for (int s = 1; s <= tt; ++s) {
      Eigen::MatrixXd coef = st.tau[tt - 1][s - 1];
      if (s == tt) coef += Eigen::MatrixXd::Identity(q, q);
      m_new += coef * m_hist[s - 1];
      M_new += coef * M_hist[s - 1];
    }
    m_hist.push_back(m_new);
    M_hist.push_back(M_new);
  }
  EffectiveSignal e;
  e.m_W = m_hist[st.t];
  e.M_W = M_hist[st.t];
  e.U_eff = mu_star * e.m_W.transpose() + W0.W1 * e.M_W.transpose();
  return e;
}

// Row-l draws of Delta^(t) = sum_s V^(s) rho_{t,s}^T + D_t, where the V^(s)
// are q-row Gaussians with cov(V^(r), V^(s)) = Sigma_{r,s}.
inline std::vector<Eigen::RowVectorXd> sample_delta(const SEState& st, int ell,
                                                    int N,
                                                    std::mt19937_64& rng) {
  const int t = st.t;
  const int q = int(st.D[0].cols());
  std::vector<Eigen::RowVectorXd> out;
  if (t == 0) {
    out.assign(N, st.D[0].row(ell));
    return out;
  }
  Eigen::MatrixXd C(t * q, t * q);
  for (int r = 1; r <= t; ++r)
    for (int s = 1; s <= t; ++s)
      C.block((r - 1) * q, (s - 1) * q, q, q) =
          s <= r ? st.Sigma[r - 1][s - 1] : st.Sigma[s - 1][r - 1].transpose();
  Eigen::MatrixXd S = psd_sqrt(C);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int i = 0; i < N; ++i) {
    Eigen::VectorXd z(t * q);
    for (int c = 0; c < t * q; ++c) z(c) = nd(rng);
    Eigen::VectorXd v = S * z;  // stacked (V^(1)..V^(t)) row draws
    Eigen::RowVectorXd row = st.D[t].row(ell);
    for (int s = 1; s <= t; ++s)
      row += Eigen::RowVectorXd(v.segment((s - 1) * q, q)) *
             st.rho[t - 1][s - 1].transpose();
    out.push_back(std::move(row));
  }
  return out;
}

// Samples of the learned model's distributional representation
// h_{V_{[2:L]}}(U_eff^T x + Omega_{t,t}^{1/2} Z).
inline Eigen::VectorXd sample_learned_model(const SEState& st,
                                            const SEConfig& cfg,
                                            const Eigen::MatrixXd& U_eff,
                                            int N, std::mt19937_64& rng,
                                            bool with_fluctuation = true) {
  const int q = cfg.q;
  Eigen::MatrixXd Om_sqrt = Eigen::MatrixXd::Zero(q, q);
  if (with_fluctuation && st.t >= 1)
    Om_sqrt = psd_sqrt(st.Omega[st.t - 1][st.t - 1]);
  std::normal_distribution<double> nd(0.0, 1.0);
  TheoreticalContext ctx;
  ctx.acts = cfg.acts;
  ctx.v = st.V[st.t];
  ctx.link = cfg.link;
  Eigen::VectorXd out(N);
  RowWork wk;
  const int n = int(U_eff.rows());
  Eigen::VectorXd x(n);
  Eigen::RowVectorXd zq(q), u(q);
  for (int i = 0; i < N; ++i) {
    for (int c = 0; c < n; ++c) x(c) = nd(rng);
    for (int c = 0; c < q; ++c) zq(c) = nd(rng);
    u = (U_eff.transpose() * x).transpose() + zq * Om_sqrt.transpose();
    eval_row(ctx, u, Eigen::RowVectorXd::Zero(q), 0.0, wk, false);
    out(i) = wk.h[cfg.L](0);  // first output coordinate
  }
  return out;
}

// ---------------------------------------------------------------------------
// Population GD (phi -> infinity limit) and the simplified large-sample SE.
// ---------------------------------------------------------------------------

inline std::vector<NetworkParams> population_gd(
    const NetworkParams& W0, const Eigen::VectorXd& mu_star,
    const ActivationSet& acts, const ScalarFunction& link,
    const Eigen::VectorXd& xi, const std::vector<double>& eta, int T, int N_mc,
    uint64_t seed) {
  const int q = W0.q, L = W0.L, n = W0.n;
  const int m = int(xi.size());
  std::vector<NetworkParams> traj{W0};
  RowWork wk;
  for (int t = 1; t <= T; ++t) {
    const NetworkParams& Wp = traj.back();
    // (u, w1) = (W1^T Z, mu^T Z): (q+1)-dim Gaussian with Gram covariance
    Eigen::MatrixXd B(n, q + 1);
    B.leftCols(q) = Wp.W1;
    B.col(q) = mu_star;
    Eigen::MatrixXd S = psd_sqrt(B.transpose() * B);
    auto rng = make_stream(seed, uint64_t(t), "pop_gd");
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_int_distribution<int> uk(0, std::max(m - 1, 0));
    TheoreticalContext ctx;
    ctx.acts = &acts;
    ctx.v = Wp.W_alpha;
    ctx.link = link;
    Eigen::MatrixXd tau_bar = Eigen::MatrixXd::Zero(q, q);
    Eigen::MatrixXd delta_bar = Eigen::MatrixXd::Zero(q, q);
    std::vector<Eigen::MatrixXd> M_acc(L - 1, Eigen::MatrixXd::Zero(q, q));
    Eigen::VectorXd z(q + 1);
    Eigen::RowVectorXd uw(q + 1), u(q), w(q);
    for (int i = 0; i < N_mc; ++i) {
      for (int c = 0; c < q + 1; ++c) z(c) = nd(rng);
      uw = (S * z).transpose();
      u = uw.head(q);
      w.setZero();
      w(0) = uw(q);
      double xik = m > 0 ? xi(uk(rng)) : 0.0;
      eval_row(ctx, u, w, xik, wk, true);
      tau_bar -= eta[0] * wk.Su / double(N_mc);
      delta_bar -= eta[0] * wk.Sw / double(N_mc);
      for (int a = 2; a <= L; ++a)
        M_acc[a - 2].noalias() += row_script_G(ctx, wk, a - 1).transpose() *
                                  row_pregrad_T(ctx, wk, a) / double(N_mc);
    }
    NetworkParams Wt = Wp;
    Eigen::MatrixXd mu_q = Eigen::MatrixXd::Zero(n, q);
    mu_q.col(0) = mu_star;
    Wt.W1 = Wp.W1 * (tau_bar.transpose() +
                     Eigen::MatrixXd::Identity(q, q)) +
            mu_q * delta_bar.transpose();
    for (int a = 2; a <= L; ++a) Wt.W(a) = Wp.W(a) - eta[a - 1] * M_acc[a - 2];
    traj.push_back(Wt);
  }
  return traj;
}

struct SimplifiedSEStep {
  Eigen::MatrixXd D_bar;                  // n x q
  std::vector<Eigen::MatrixXd> V_bar;     // q x q per alpha
  Eigen::MatrixXd tau_bar, delta_bar;     // q x q
};

inline std::vector<SimplifiedSEStep> simplified_se(
    const NetworkParams& W0, const Eigen::VectorXd& mu_star,
    const ActivationSet& acts, const ScalarFunction& link,
    const Eigen::VectorXd& xi, const std::vector<double>& eta, int T, int N_mc,
    uint64_t seed) {
  const int q = W0.q, L = W0.L, n = W0.n;
  const int m = int(xi.size());
  Eigen::MatrixXd mu_q = Eigen::MatrixXd::Zero(n, q);
  mu_q.col(0) = mu_star;
  Eigen::MatrixXd D_m1 = std::sqrt(double(n)) * mu_q;
  std::vector<SimplifiedSEStep> traj;
  traj.push_back({std::sqrt(double(n)) * W0.W1, W0.W_alpha,
                  Eigen::MatrixXd::Zero(q, q), Eigen::MatrixXd::Zero(q, q)});
  RowWork wk;
  for (int t = 1; t <= T; ++t) {
    const SimplifiedSEStep& prev = traj.back();
    // joint law of (U_bar^(t), U_bar^(0)): Gram of [D_bar_{t-1} | D_m1] / n
    Eigen::MatrixXd B(n, 2 * q);
    B.leftCols(q) = prev.D_bar;
    B.rightCols(q) = D_m1;
    Eigen::MatrixXd S = psd_sqrt(B.transpose() * B / double(n));
    auto rng = make_stream(seed, uint64_t(t), "simplified_se");
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_int_distribution<int> uk(0, std::max(m - 1, 0));
    TheoreticalContext ctx;
    ctx.acts = &acts;
    ctx.v = prev.V_bar;
    ctx.link = link;
    Eigen::MatrixXd tau_bar = Eigen::MatrixXd::Zero(q, q);
    Eigen::MatrixXd delta_bar = Eigen::MatrixXd::Zero(q, q);
    std::vector<Eigen::MatrixXd> M_acc(L - 1, Eigen::MatrixXd::Zero(q, q));
    Eigen::VectorXd z(2 * q);
    Eigen::RowVectorXd uw(2 * q);
    for (int i = 0; i < N_mc; ++i) {
      for (int c = 0; c < 2 * q; ++c) z(c) = nd(rng);
      uw = (S * z).transpose();
      double xik = m > 0 ? xi(uk(rng)) : 0.0;
      eval_row(ctx, uw.head(q), uw.tail(q), xik, wk, true);
      tau_bar -= eta[0] * wk.Su / double(N_mc);
      delta_bar -= eta[0] * wk.Sw / double(N_mc);
      for (int a = 2; a <= L; ++a)
        M_acc[a - 2].noalias() += row_script_G(ctx, wk, a - 1).transpose() *
                                  row_pregrad_T(ctx, wk, a) / double(N_mc);
    }
    SimplifiedSEStep step;
    step.tau_bar = tau_bar;
    step.delta_bar = delta_bar;
    step.D_bar = prev.D_bar * (tau_bar.transpose() +
                               Eigen::MatrixXd::Identity(q, q)) +
                 D_m1 * delta_bar.transpose();
    step.V_bar = prev.V_bar;
    for (int a = 2; a <= L; ++a)
      step.V_bar[a - 2] -= eta[a - 1] * M_acc[a - 2];
    traj.push_back(std::move(step));
  }
  return traj;
}

}  // namespace gdse
