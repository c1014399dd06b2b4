#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "gdse/activations.hpp"
#include "gdse/network.hpp"

namespace gdse {

// The "theoretical" function family: feed-forward/back-propagation maps that
// take XW1-shaped inputs and the deeper weights v = (v_2..v_L) directly.
struct TheoreticalContext {
  const ActivationSet* acts = nullptr;
  std::vector<Eigen::MatrixXd> v;  // v[alpha-2] for alpha in [2:L]
  Eigen::MatrixXd xi_q;            // m x q noise view (rows matched to u)
  ScalarFunction link;

  int L() const { return acts->L(); }
  const Eigen::MatrixXd& V(int alpha) const { return v.at(alpha - 2); }
};

inline TheoreticalContext make_context(const NetworkParams& W,
                                       const ActivationSet& acts,
                                       const Eigen::MatrixXd& xi_q,
                                       const ScalarFunction& link) {
  TheoreticalContext ctx;
  ctx.acts = &acts;
  ctx.v = W.W_alpha;
  ctx.xi_q = xi_q;
  ctx.link = link;
  return ctx;
}

inline Eigen::MatrixXd script_H(const TheoreticalContext& ctx,
                                const Eigen::MatrixXd& u, int alpha) {
  if (alpha < 1 || alpha > ctx.L())
    throw std::out_of_range("script_H: alpha out of range");
  Eigen::MatrixXd h = u;
  for (int b = 2; b <= alpha; ++b)
    h = apply(ctx.acts->sigma[b - 1], h, 0) * ctx.V(b);
  return h;
}

inline Eigen::MatrixXd script_G(const TheoreticalContext& ctx,
                                const Eigen::MatrixXd& u, int alpha) {
  return apply(ctx.acts->sigma[alpha], script_H(ctx, u, alpha), 0);
}

inline Eigen::MatrixXd script_G_prime(const TheoreticalContext& ctx,
                                      const Eigen::MatrixXd& u, int alpha) {
  return apply(ctx.acts->sigma[alpha], script_H(ctx, u, alpha), 1);
}

// Composition of the layer-wise backward maps over beta in (alpha:L];
// identity on z at alpha = L.
inline Eigen::MatrixXd script_P_tail(const TheoreticalContext& ctx,
                                     const Eigen::MatrixXd& u,
                                     const Eigen::MatrixXd& z, int alpha) {
  if (alpha < 1 || alpha > ctx.L())
    throw std::out_of_range("script_P_tail: alpha out of range");
  Eigen::MatrixXd p = z;
  for (int b = ctx.L(); b > alpha; --b)
    p = p.cwiseProduct(script_G_prime(ctx, u, b)) * ctx.V(b).transpose();
  return p;
}

inline Eigen::MatrixXd script_R(const TheoreticalContext& ctx,
                                const Eigen::MatrixXd& u,
                                const Eigen::MatrixXd& w) {
  return script_G(ctx, u, ctx.L()) -
         w.unaryExpr([&](double x) { return ctx.link(x); }) - ctx.xi_q;
}

inline Eigen::MatrixXd pregrad_S(const TheoreticalContext& ctx,
                                 const Eigen::MatrixXd& u,
                                 const Eigen::MatrixXd& w) {
  Eigen::MatrixXd r = script_R(ctx, u, w);
  return script_P_tail(ctx, u, r, 1)
      .cwiseProduct(apply(ctx.acts->sigma[1], u, 1));
}

inline Eigen::MatrixXd pregrad_T(const TheoreticalContext& ctx,
                                 const Eigen::MatrixXd& u,
                                 const Eigen::MatrixXd& w, int alpha) {
  if (alpha < 2 || alpha > ctx.L())
    throw std::out_of_range("pregrad_T: alpha out of range");
  Eigen::MatrixXd r = script_R(ctx, u, w);
  return script_P_tail(ctx, u, r, alpha)
      .cwiseProduct(script_G_prime(ctx, u, alpha));
}

// ---------------------------------------------------------------------------
// Analytic partial derivatives. By row separation, the (k,l) partial of any
// of these maps is supported on row k, so all partials are computed and
// returned as row-k slices (q-dimensional row vectors) against row-k inputs.
// RowWork bundles one row's forward/backward values plus the full dS/du and
// dS/dw matrices needed by the state-evolution engine.
// ---------------------------------------------------------------------------

struct RowWork {
  // forward values, indexed by layer alpha in [1:L]
  std::vector<Eigen::RowVectorXd> h, gp, gpp;
  Eigen::RowVectorXd r;                  // residual row
  std::vector<Eigen::RowVectorXd> p;     // p[alpha] = P^(alpha:L] (u, r) row
  Eigen::RowVectorXd S;                  // pre-gradient row
  // dH[alpha], row l = d h[alpha] / d u_l; Z analogous for d p[1] / d z_l
  std::vector<Eigen::MatrixXd> dH;
  Eigen::MatrixXd Zmat;                  // row l = d_{z_l} P^(1:L] row
  Eigen::MatrixXd dS_du;                 // row l = d S / d u_l
  Eigen::MatrixXd dS_dw;                 // row l = d S / d w_l
  // Su(a,b) = dS_a/du_b, Sw(a,b) = dS_a/dw_b -- the transposed layouts used
  // by the Onsager coefficient reductions.
  Eigen::MatrixXd Su, Sw;
};

// Evaluate one row of the pre-gradient map and (optionally) its u/w partials.
// u, w are 1 x q rows; xi_k is the scalar noise entry attached to the row.
inline void eval_row(const TheoreticalContext& ctx, const Eigen::RowVectorXd& u,
                     const Eigen::RowVectorXd& w, double xi_k, RowWork& wk,
                     bool with_partials) {
  const int L = ctx.L();
  const int q = int(u.cols());
  const ActivationSet& A = *ctx.acts;
  wk.h.assign(L + 1, {});
  wk.gp.assign(L + 1, {});
  wk.gpp.assign(L + 1, {});
  wk.h[1] = u;
  for (int a = 1; a <= L; ++a) {
    if (a >= 2) {
      Eigen::RowVectorXd g =
          wk.h[a - 1].unaryExpr([&](double x) { return A.sigma[a - 1](x); });
      wk.h[a] = g * ctx.V(a);
    }
    wk.gp[a] =
        wk.h[a].unaryExpr([&](double x) { return A.sigma[a].deriv1(x); });
    if (with_partials)
      wk.gpp[a] =
          wk.h[a].unaryExpr([&](double x) { return A.sigma[a].deriv2(x); });
  }
  wk.r = wk.h[L] - w.unaryExpr([&](double x) { return ctx.link(x); });
  wk.r(0) -= xi_k;
  wk.p.assign(L + 1, {});
  wk.p[L] = wk.r;
  for (int a = L - 1; a >= 1; --a)
    wk.p[a] = wk.p[a + 1].cwiseProduct(wk.gp[a + 1]) * ctx.V(a + 1).transpose();
  Eigen::RowVectorXd s1p =
      u.unaryExpr([&](double x) { return A.sigma[1].deriv1(x); });
  wk.S = wk.p[1].cwiseProduct(s1p);
  if (!with_partials) return;

  // dH[alpha] row l = d h[alpha] / d u_l (all l at once)
  wk.dH.assign(L + 1, {});
  wk.dH[1] = Eigen::MatrixXd::Identity(q, q);
  for (int a = 2; a <= L; ++a) {
    Eigen::RowVectorXd gpm = wk.h[a - 1].unaryExpr(
        [&](double x) { return A.sigma[a - 1].deriv1(x); });
    wk.dH[a] = (wk.dH[a - 1] * gpm.asDiagonal()) * ctx.V(a);
  }
  // Zmat row l = d_{z_l} P^(1:L] row (independent of z)
  Eigen::MatrixXd Z = Eigen::MatrixXd::Identity(q, q);
  // duP row l = d_{u_l} P^(alpha:L] (u, z) row, z held fixed
  Eigen::MatrixXd duP = Eigen::MatrixXd::Zero(q, q);
  for (int a = L - 1; a >= 1; --a) {
    Eigen::RowVectorXd mix = wk.p[a + 1].cwiseProduct(wk.gpp[a + 1]);
    duP = (wk.dH[a + 1] * mix.asDiagonal() + duP * wk.gp[a + 1].asDiagonal()) *
          ctx.V(a + 1).transpose();
    Z = (Z * wk.gp[a + 1].asDiagonal()) * ctx.V(a + 1).transpose();
  }
  wk.Zmat = Z;
  Eigen::RowVectorXd s1pp =
      u.unaryExpr([&](double x) { return A.sigma[1].deriv2(x); });
  // total u-derivative of S: explicit u dependence of P plus the residual's
  // dependence z = r(u), plus the sigma_1'' diagonal term
  wk.dS_du = Eigen::MatrixXd(wk.p[1].cwiseProduct(s1pp).asDiagonal());
  wk.dS_du += (duP + wk.dH[L] * Z) * s1p.asDiagonal();
  Eigen::RowVectorXd phip =
      w.unaryExpr([&](double x) { return ctx.link.deriv1(x); });
  wk.dS_dw = -(phip.asDiagonal() * Z * s1p.asDiagonal());
  wk.Su = wk.dS_du.transpose();
  wk.Sw = wk.dS_dw.transpose();
}

// Row of the deeper-layer pre-gradient and the matching script_G row, used by
// the V_alpha updates. Requires eval_row to have been run on wk.
inline Eigen::RowVectorXd row_pregrad_T(const TheoreticalContext& ctx,
                                        const RowWork& wk, int alpha) {
  const ActivationSet& A = *ctx.acts;
  Eigen::RowVectorXd gpa = wk.h[alpha].unaryExpr(
      [&](double x) { return A.sigma[alpha].deriv1(x); });
  return wk.p[alpha].cwiseProduct(gpa);
}

inline Eigen::RowVectorXd row_script_G(const TheoreticalContext& ctx,
                                       const RowWork& wk, int alpha) {
  const ActivationSet& A = *ctx.acts;
  return wk.h[alpha].unaryExpr([&](double x) { return A.sigma[alpha](x); });
}

// ---------------------------------------------------------------------------
// Matrix-level partials (one (k,l) pair at a time), mirroring the analytic
// formulas directly; used by tests and the identification suite.
// ---------------------------------------------------------------------------

enum class PartialKind { H_u, G_u, P_u, P_z, S_u, S_w };

// Returns the full m x q partial matrix; only row k is nonzero.
inline Eigen::MatrixXd partials(const TheoreticalContext& ctx, PartialKind which,
                                const Eigen::MatrixXd& u,
                                const Eigen::MatrixXd& zw, int alpha, int k,
                                int ell) {
  const int q = int(u.cols());
  if (k < 0 || k >= u.rows() || ell < 0 || ell >= q)
    throw std::out_of_range("partials: index out of range");
  RowWork wk;
  Eigen::RowVectorXd wrow =
      (which == PartialKind::S_u || which == PartialKind::S_w)
          ? Eigen::RowVectorXd(zw.row(k))
          : Eigen::RowVectorXd::Zero(q);
  eval_row(ctx, u.row(k), wrow, ctx.xi_q.size() ? ctx.xi_q(k, 0) : 0.0, wk,
           true);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(u.rows(), q);
  switch (which) {
    case PartialKind::H_u:
      out.row(k) = wk.dH.at(alpha).row(ell);
      break;
    case PartialKind::G_u: {
      Eigen::RowVectorXd gpa = wk.h[alpha].unaryExpr(
          [&](double x) { return ctx.acts->sigma[alpha].deriv1(x); });
      out.row(k) = wk.dH.at(alpha).row(ell).cwiseProduct(gpa);
      break;
    }
    case PartialKind::P_u: {
      // d_{u_kl} P^(alpha:L](u, z) with z fixed; recompute the tail partials
      // against the supplied z rather than the residual.
      Eigen::RowVectorXd z = zw.row(k);
      std::vector<Eigen::RowVectorXd> p(ctx.L() + 1);
      p[ctx.L()] = z;
      for (int a = ctx.L() - 1; a >= 1; --a)
        p[a] = p[a + 1].cwiseProduct(wk.gp[a + 1]) * ctx.V(a + 1).transpose();
      Eigen::MatrixXd duP = Eigen::MatrixXd::Zero(q, q);
      for (int a = ctx.L() - 1; a >= alpha; --a) {
        Eigen::RowVectorXd mix = p[a + 1].cwiseProduct(wk.gpp[a + 1]);
        duP = (wk.dH[a + 1] * mix.asDiagonal() +
               duP * wk.gp[a + 1].asDiagonal()) *
              ctx.V(a + 1).transpose();
      }
      out.row(k) = duP.row(ell);
      break;
    }
    case PartialKind::P_z: {
      Eigen::MatrixXd Z = Eigen::MatrixXd::Identity(q, q);
      for (int a = ctx.L() - 1; a >= alpha; --a)
        Z = (Z * wk.gp[a + 1].asDiagonal()) * ctx.V(a + 1).transpose();
      out.row(k) = Z.row(ell);
      break;
    }
    case PartialKind::S_u:
      out.row(k) = wk.dS_du.row(ell);
      break;
    case PartialKind::S_w:
      out.row(k) = wk.dS_dw.row(ell);
      break;
  }
  return out;
}

}  // namespace gdse
