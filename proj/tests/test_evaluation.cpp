#include <gtest/gtest.h>

#include "gdse/data_model.hpp"
#include "gdse/evaluation.hpp"
#include "gdse/network.hpp"
#include "gdse/rng.hpp"

using namespace gdse;

TEST(Evaluation, TrainErrorIsTwiceHalfLoss) {
  auto rng = make_stream(80, 0, "ev");
  const int m = 12, n = 8, q = 3, L = 2;
  Eigen::MatrixXd X = generate_features(m, n, {}, rng);
  NetworkParams W = init_gaussian(L, q, n, rng);
  ActivationSet acts = make_activation_set(L, "sigmoid");
  Eigen::MatrixXd Y_q = Eigen::MatrixXd::Zero(m, q);
  Y_q.col(0).setOnes();
  EXPECT_NEAR(train_error(W, X, Y_q, acts), 2.0 * loss(W, X, Y_q, acts),
              1e-14);
}

TEST(Evaluation, TestErrorClosedFormLinear) {
  auto rng = make_stream(81, 0, "ev2");
  const int n = 15, q = 2;
  Eigen::VectorXd mu = generate_signal(n, rng);
  // linear network: f(x) = x . (W1 W2 e_1)
  NetworkParams W = init_gaussian(2, q, n, rng);
  ActivationSet acts = make_activation_set(2, "identity");
  Eigen::VectorXd w_eff = W.W1 * W.W(2).col(0);
  double truth = (mu - w_eff).squaredNorm();  // E (x.(mu - w_eff))^2, x iid N(0,1)
  Eigen::VectorXd xi;  // empty: noiseless
  auto [est, se] = test_error_mc(W, mu, registry_get("identity"), xi, {},
                                 40000, rng, acts);
  EXPECT_GT(se, 0.0);
  EXPECT_NEAR(est, truth, 5.0 * se + 1e-8);
}

TEST(Evaluation, PerfectModelLeavesOnlyNoise) {
  auto rng = make_stream(82, 0, "ev3");
  const int n = 10, q = 3;
  Eigen::VectorXd mu = generate_signal(n, rng);
  NetworkParams W = init_gaussian(2, q, n, rng);
  W.W1.setZero();
  W.W1.col(0) = mu;
  W.W(2).setZero();
  W.W(2)(0, 0) = 1.0;  // f(x) = x . mu exactly
  ActivationSet acts = make_activation_set(2, "identity");
  Eigen::VectorXd xi(5);
  xi << 0.1, -0.2, 0.3, 0.0, -0.1;
  auto [est, se] = test_error_mc(W, mu, registry_get("identity"), xi, {}, 5000,
                                 rng, acts);
  EXPECT_NEAR(est, xi.squaredNorm() / 5.0, 1e-12);
  EXPECT_NEAR(se, 0.0, 1e-12);
}

TEST(Evaluation, FixedTestSetIsDeterministic) {
  auto rng = make_stream(83, 0, "ev4");
  const int n = 12, q = 2;
  Eigen::VectorXd mu = generate_signal(n, rng);
  NetworkParams W = init_gaussian(2, q, n, rng);
  ActivationSet acts = make_activation_set(2, "tanh");
  Eigen::MatrixXd Xt = generate_features(2000, n, {}, rng);
  Eigen::VectorXd xi = Eigen::VectorXd::Constant(4, 0.5);
  auto r1 = test_error_mc(W, mu, registry_get("tanh"), xi, {}, 0, rng, acts,
                          &Xt);
  auto r2 = test_error_mc(W, mu, registry_get("tanh"), xi, {}, 0, rng, acts,
                          &Xt);
  EXPECT_EQ(r1.first, r2.first);
  EXPECT_EQ(r1.second, r2.second);
}

TEST(Evaluation, GapHelper) {
  ErrorRecord r;
  r.train = 0.25;
  r.test = 0.5;
  EXPECT_DOUBLE_EQ(gap(r), 0.25);
}
