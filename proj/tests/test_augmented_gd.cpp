#include <gtest/gtest.h>

#include "gdse/augmented_gd.hpp"
#include "gdse/data_model.hpp"
#include "gdse/network.hpp"
#include "gdse/rng.hpp"
#include "gdse/theoretical.hpp"

using namespace gdse;

namespace {
struct AugInstance {
  Eigen::MatrixXd X;
  AugmentedViews views;
  SingleIndexInstance inst;
  NetworkParams W;
  ActivationSet acts;
  TheoreticalContext ctx;
};

AugInstance make_setup(int m, int n, int q, int L, const std::string& act,
                 uint64_t seed) {
  AugInstance s;
  auto rng = make_stream(seed, 0, "aug");
  s.inst.X = s.X = generate_features(m, n, {}, rng);
  s.inst.mu_star = generate_signal(n, rng);
  s.inst.link = registry_get("tanh");
  std::tie(s.inst.Y, s.inst.xi) =
      generate_responses(s.X, s.inst.mu_star, s.inst.link, 0.5, rng);
  s.views = augment(s.inst, q);
  s.W = init_gaussian(L, q, n, rng);
  s.acts = make_activation_set(L, act);
  s.ctx = make_context(s.W, s.acts, s.views.xi_q, s.inst.link);
  return s;
}
}  // namespace

// The empirical forward/backward derivative sweeps evaluated at u = XW1,
// w = X mu_q must coincide with the analytic theoretical partials row by row.
TEST(AugmentedGD, IdentificationAgainstTheoreticalPartials) {
  for (uint64_t seed : {50, 51, 52}) {
    AugInstance s = make_setup(6, 5, 3, 3, "sigmoid", seed);
    Eigen::MatrixXd U = s.X * s.W.W1;
    Eigen::MatrixXd Wm = s.X * s.views.mu_star_q;
    ForwardDerivs f = forward_with_derivs(s.W, s.X, s.acts);
    BackwardDerivs b = backward_with_derivs(s.W, f, s.views.Y_q, s.acts);
    auto dS = pregrad_derivs(s.W, f, b, s.acts);
    // forward values and derivatives
    for (int a = 1; a <= 3; ++a)
      EXPECT_LT((f.H[a] - script_H(s.ctx, U, a)).cwiseAbs().maxCoeff(), 1e-12);
    for (int l = 0; l < 3; ++l)
      for (int a = 1; a <= 3; ++a) {
        // dH[l][a] row k is the row-k slice of the (k,l) partial of script_H
        for (int k = 0; k < 6; ++k) {
          Eigen::MatrixXd an = partials(s.ctx, PartialKind::H_u, U,
                                        Eigen::MatrixXd::Zero(6, 3), a, k, l);
          EXPECT_LT((f.dH[l][a].row(k) - an.row(k)).cwiseAbs().maxCoeff(),
                    1e-12);
        }
      }
    // backward residual sweep equals the theoretical backward map on R
    Eigen::MatrixXd R = script_R(s.ctx, U, Wm);
    EXPECT_LT((b.P[3] - R).cwiseAbs().maxCoeff(), 1e-12);
    for (int a = 1; a < 3; ++a)
      EXPECT_LT((b.P[a] - script_P_tail(s.ctx, U, R, a)).cwiseAbs().maxCoeff(),
                1e-12);
    // dS_l row k equals row l of the analytic total S partial at (k, l)
    for (int l = 0; l < 3; ++l)
      for (int k = 0; k < 6; ++k) {
        Eigen::MatrixXd an =
            partials(s.ctx, PartialKind::S_u, U, Wm, 0, k, l);
        EXPECT_LT((dS[l].row(k) - an.row(k)).cwiseAbs().maxCoeff(), 1e-12);
      }
  }
}

// Lhat_k diagonal blocks: column l of Ldiag[s][k] = eta * row k of dS_l. The
// same blocks arise from the row-level evaluator's Su matrix (scaled).
TEST(AugmentedGD, LhatMatchesRowEvaluator) {
  AugInstance s = make_setup(5, 4, 3, 2, "tanh", 53);
  Eigen::MatrixXd U = s.X * s.W.W1;
  Eigen::MatrixXd Wm = s.X * s.views.mu_star_q;
  const double eta = 0.7;
  auto [st, recs] = run_augmented_gd(s.X, s.views.Y_q, s.W, s.acts,
                                     {eta, eta}, 1);
  ASSERT_EQ(int(st.Ldiag.size()), 1);
  RowWork wk;
  for (int k = 0; k < 5; ++k) {
    eval_row(s.ctx, U.row(k), Wm.row(k), s.inst.xi(k), wk, true);
    // Ldiag column l = eta dS_l row k = eta dS_du row l => Ldiag = eta Su
    EXPECT_LT((st.Ldiag[0][k] - eta * wk.Su).cwiseAbs().maxCoeff(), 1e-12);
  }
}

// Step (5) must coincide with the plain gradient computation.
TEST(AugmentedGD, GradientStepMatchesNetwork) {
  AugInstance s = make_setup(8, 6, 3, 3, "sigmoid", 54);
  std::vector<double> eta = {0.9, 0.9, 0.9};
  auto grads = gradients(s.W, s.X, s.views.Y_q, s.acts);
  NetworkParams Wref = gd_step(s.W, grads, eta);
  auto [st, recs] = run_augmented_gd(s.X, s.views.Y_q, s.W, s.acts, eta, 1);
  for (int a = 1; a <= 3; ++a)
    EXPECT_LT((st.W.W(a) - Wref.W(a)).cwiseAbs().maxCoeff(), 1e-12) << a;
}

TEST(AugmentedGD, RhoHatFirstIterationIsIdentity) {
  AugInstance s = make_setup(6, 5, 2, 2, "tanh", 55);
  auto [st, recs] = run_augmented_gd(s.X, s.views.Y_q, s.W, s.acts,
                                     {1.0, 1.0}, 1);
  ASSERT_EQ(st.rho_hat.t, 1);
  EXPECT_TRUE(st.rho_hat(0, 0).isIdentity(1e-14));
  // tau_hat at t = 1: the shifted rho is zero so the solve is trivial,
  // tau = -(1/m) sum_k Lk
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(2, 2);
  for (const auto& blk : st.Ldiag[0]) acc += blk;
  EXPECT_LT((st.tau_hat(0, 0) + acc / 6.0).cwiseAbs().maxCoeff(), 1e-12);
}

// At t = 0 the debiased statistic is XW1 and the estimate equals the training
// error; records carry one entry per iteration including t = 0.
TEST(AugmentedGD, RecordsAndTrivials) {
  AugInstance s = make_setup(6, 5, 2, 2, "sigmoid", 56);
  auto [st, recs] = run_augmented_gd(s.X, s.views.Y_q, s.W, s.acts,
                                     {1.0, 1.0}, 3);
  ASSERT_EQ(int(recs.size()), 4);
  EXPECT_EQ(recs[0].t, 0);
  EXPECT_DOUBLE_EQ(recs[0].e_test_hat, recs[0].e_train);
  EXPECT_EQ(recs[0].reldist[0], 0.0);
  for (const auto& r : recs) ASSERT_EQ(int(r.reldist.size()), 2);
  EXPECT_GT(recs[3].reldist[0], 0.0);
  // training error agrees with the evaluation-form loss (2x the 1/2m loss)
  ForwardCache c = forward(s.X, st.W, s.acts);
  double e = (s.views.Y_q - c.G[2]).squaredNorm() / 6.0;
  EXPECT_NEAR(recs[3].e_train, e, 1e-12);
  EXPECT_FALSE(st.out_of_warranty);
}

TEST(AugmentedGD, ReluFlagsOutOfWarranty) {
  AugInstance s = make_setup(6, 5, 2, 2, "relu", 57);
  auto [st, recs] = run_augmented_gd(s.X, s.views.Y_q, s.W, s.acts,
                                     {0.1, 0.1}, 1);
  EXPECT_TRUE(st.out_of_warranty);
}

TEST(AugmentedGD, LastLayerStructurePreserved) {
  AugInstance s = make_setup(10, 6, 4, 3, "sigmoid", 58);
  auto [st, recs] = run_augmented_gd(s.X, s.views.Y_q, s.W, s.acts,
                                     {2.0, 2.0, 2.0}, 10);
  EXPECT_NO_THROW(assert_last_layer_structure(st.W));
  EXPECT_EQ(st.W.W(3).rightCols(3).cwiseAbs().maxCoeff(), 0.0);
}

TEST(AugmentedGD, DeterministicRerun) {
  AugInstance s = make_setup(8, 5, 3, 2, "tanh", 59);
  auto [st1, r1] = run_augmented_gd(s.X, s.views.Y_q, s.W, s.acts,
                                    {1.5, 1.5}, 5);
  auto [st2, r2] = run_augmented_gd(s.X, s.views.Y_q, s.W, s.acts,
                                    {1.5, 1.5}, 5);
  for (size_t i = 0; i < r1.size(); ++i) {
    EXPECT_EQ(r1[i].e_test_hat, r2[i].e_test_hat);
    EXPECT_EQ(r1[i].e_train, r2[i].e_train);
  }
}
