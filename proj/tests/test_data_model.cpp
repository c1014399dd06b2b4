#include <gtest/gtest.h>

#include "gdse/data_model.hpp"
#include "gdse/network.hpp"
#include "gdse/rng.hpp"

using namespace gdse;

TEST(DataModel, SignalNorm) {
  auto rng = make_stream(11, 0, "sig");
  double acc = 0.0;
  const int reps = 1000, n = 600;
  for (int i = 0; i < reps; ++i) acc += generate_signal(n, rng).squaredNorm();
  acc /= reps;
  EXPECT_GT(acc, 0.95);
  EXPECT_LT(acc, 1.05);
}

TEST(DataModel, FeatureMoments) {
  for (const char* dist : {"gaussian", "student_t"}) {
    auto rng = make_stream(fnv1a(dist), 0, "feat");
    Eigen::MatrixXd X = generate_features(1000, 1000, FeatureDist::parse(dist),
                                          rng);
    double mean = X.mean();
    double var = (X.array() - mean).square().mean();
    EXPECT_NEAR(mean, 0.0, 0.005) << dist;
    EXPECT_NEAR(var, 1.0, 0.01) << dist;
  }
}

TEST(DataModel, ResponsesExact) {
  auto rng = make_stream(13, 0, "resp");
  int m = 50, n = 20;
  Eigen::MatrixXd X = generate_features(m, n, {}, rng);
  Eigen::VectorXd mu = generate_signal(n, rng);
  auto link = registry_get("tanh");
  auto [Y, xi] = generate_responses(X, mu, link, 0.5, rng);
  for (int i = 0; i < m; ++i)
    EXPECT_NEAR(Y(i), std::tanh(X.row(i).dot(mu)) + xi(i), 1e-14);
  auto [Y0, xi0] = generate_responses(X, mu, link, 0.0, rng);
  EXPECT_EQ(xi0.cwiseAbs().maxCoeff(), 0.0);
  // identity link on zero features gives pure noise
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(m, n);
  auto [Yz, xiz] = generate_responses(Z, mu, link, 0.3, rng);
  EXPECT_TRUE(Yz.isApprox(xiz));
}

TEST(DataModel, MultiIndex) {
  auto rng = make_stream(14, 0, "mi");
  int m = 30, n = 15, kdim = 4;
  Eigen::MatrixXd X = generate_features(m, n, {}, rng);
  Eigen::MatrixXd U = gaussian_matrix(kdim, n, rng) / std::sqrt(double(n));
  auto [Y, xi] = generate_multi_index(X, U, 0.0, rng);
  for (int i = 0; i < m; ++i)
    EXPECT_NEAR(Y(i), std::tanh((U * X.row(i).transpose()).norm()), 1e-14);
  // k = 1 reduces to single-index with link tanh(|x|)
  Eigen::MatrixXd U1 = U.topRows(1);
  auto [Y1, xi1] = generate_multi_index(X, U1, 0.0, rng);
  for (int i = 0; i < m; ++i)
    EXPECT_NEAR(Y1(i), std::tanh(std::abs(X.row(i).dot(U1.row(0)))), 1e-14);
}

TEST(DataModel, Determinism) {
  auto r1 = make_stream(15, 3, "feat");
  auto r2 = make_stream(15, 3, "feat");
  Eigen::MatrixXd a = generate_features(10, 10, {}, r1);
  Eigen::MatrixXd b = generate_features(10, 10, {}, r2);
  EXPECT_EQ((a - b).cwiseAbs().maxCoeff(), 0.0);
  auto r3 = make_stream(15, 4, "feat");
  EXPECT_NE((a - generate_features(10, 10, {}, r3)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(DataModel, KappaStar) {
  auto rng = make_stream(16, 0, "ks");
  int n = 12, q = 3, L = 3;
  NetworkParams W = init_gaussian(L, q, n, rng);
  Eigen::VectorXd mu = generate_signal(n, rng);
  Eigen::VectorXd xi = gaussian_matrix(7, 1, rng);
  double k = kappa_star(mu, xi, W);
  // direct recomputation with an SVD operator norm
  double expect = 1.0 + std::sqrt(double(n)) * mu.cwiseAbs().maxCoeff() +
                  xi.cwiseAbs().maxCoeff() +
                  std::sqrt(double(n)) * W.W1.cwiseAbs().maxCoeff();
  double op = 0.0;
  for (const auto& Wa : W.W_alpha) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(Wa);
    op = std::max(op, svd.singularValues()(0));
  }
  EXPECT_NEAR(k, expect + op, 1e-12);
  NetworkParams W0 = W;
  W0.W1.setZero();
  for (auto& Wa : W0.W_alpha) Wa.setZero();
  EXPECT_NEAR(kappa_star(Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(3), W0),
              1.0, 1e-15);
}

TEST(DataModel, Augment) {
  SingleIndexInstance inst;
  inst.X = Eigen::MatrixXd::Zero(2, 4);
  inst.Y = Eigen::VectorXd(2);
  inst.Y << 1, 2;
  inst.xi = Eigen::VectorXd::Zero(2);
  inst.mu_star = Eigen::VectorXd::Zero(4);
  AugmentedViews v = augment(inst, 3);
  EXPECT_EQ(v.Y_q(0, 0), 1.0);
  EXPECT_EQ(v.Y_q(1, 0), 2.0);
  EXPECT_EQ(v.Y_q.rightCols(2).cwiseAbs().maxCoeff(), 0.0);
  AugmentedViews v1 = augment(inst, 1);
  EXPECT_TRUE(v1.Y_q.col(0).isApprox(inst.Y));
}
