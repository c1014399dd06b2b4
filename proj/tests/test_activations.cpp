#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gdse/activations.hpp"
#include "gdse/rng.hpp"

using namespace gdse;

namespace {
// central finite difference away from kinks
void check_derivative(const std::function<double(double)>& f,
                      const std::function<double(double)>& df,
                      const std::vector<double>& kinks, uint64_t seed) {
  auto rng = make_stream(seed, 0, "act_fd");
  std::uniform_real_distribution<double> ud(-4.0, 4.0);
  const double h = 1e-6;
  int checked = 0;
  while (checked < 100) {
    double x = ud(rng);
    bool near_kink = false;
    for (double kk : kinks)
      if (std::abs(x - kk) < 1e-3) near_kink = true;
    if (near_kink) continue;
    double fd = (f(x + h) - f(x - h)) / (2 * h);
    double an = df(x);
    double denom = std::max(std::abs(an), 1.0);
    EXPECT_NEAR(fd, an, 1e-5 * denom) << "at x=" << x;
    ++checked;
  }
}
}  // namespace

TEST(Activations, SigmoidValues) {
  auto f = registry_get("sigmoid");
  EXPECT_DOUBLE_EQ(f(0.0), 0.5);
  EXPECT_DOUBLE_EQ(f.deriv1(0.0), 0.25);
  EXPECT_DOUBLE_EQ(f.deriv2(0.0), 0.0);
}

TEST(Activations, SmoothedReluValues) {
  auto f = registry_get("smoothed_relu");
  EXPECT_DOUBLE_EQ(f(2.0), 1.5);
  EXPECT_DOUBLE_EQ(f(0.5), 0.125);
  EXPECT_DOUBLE_EQ(f(-1.0), 0.0);
  EXPECT_DOUBLE_EQ(f.deriv2(0.5), 1.0);
  EXPECT_DOUBLE_EQ(f.deriv2(1.5), 0.0);
  EXPECT_EQ(f.smoothness, Smoothness::weak_second_derivative);
}

TEST(Activations, ReluConvention) {
  auto f = registry_get("relu");
  EXPECT_EQ(f.smoothness, Smoothness::weak_first_derivative);
  EXPECT_DOUBLE_EQ(f.deriv2(1.0), 0.0);
  EXPECT_DOUBLE_EQ(f.deriv2(-1.0), 0.0);
  Eigen::MatrixXd M = Eigen::MatrixXd::Constant(2, 2, 3.0);
  EXPECT_EQ(apply(f, M, 2).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Activations, TanhDerivatives) {
  auto f = registry_get("tanh");
  double x = 0.7;
  EXPECT_NEAR(f.deriv1(x), 1 - std::tanh(x) * std::tanh(x), 1e-15);
  EXPECT_EQ(f.growth_exponent, 0.0);
}

TEST(Activations, IdentityApply) {
  auto f = registry_get("identity");
  Eigen::MatrixXd M = Eigen::MatrixXd::Random(3, 4);
  EXPECT_TRUE(apply(f, M, 0).isApprox(M));
  EXPECT_TRUE(apply(f, M, 1).isApprox(Eigen::MatrixXd::Ones(3, 4)));
}

TEST(Activations, UnknownName) {
  EXPECT_THROW(registry_get("swish"), std::out_of_range);
}

TEST(Activations, FiniteDifferenceAll) {
  struct Case {
    const char* name;
    std::vector<double> kinks;
  };
  for (const Case& c : std::vector<Case>{{"identity", {}},
                                         {"sigmoid", {}},
                                         {"tanh", {}},
                                         {"relu", {0.0}},
                                         {"smoothed_relu", {0.0, 1.0}}}) {
    auto f = registry_get(c.name);
    check_derivative(f.value, f.deriv1, c.kinks, fnv1a(c.name));
    if (f.smoothness != Smoothness::weak_first_derivative)
      check_derivative(f.deriv1, f.deriv2, c.kinks, fnv1a(c.name) + 1);
  }
}

TEST(Activations, BoundedDerivatives) {
  auto rng = make_stream(9, 0, "act_bound");
  std::uniform_real_distribution<double> ud(-50.0, 50.0);
  for (const char* name : {"sigmoid", "tanh"}) {
    auto f = registry_get(name);
    for (int i = 0; i < 1000; ++i) {
      double x = ud(rng);
      EXPECT_LE(std::abs(f(x)), 1.0 + 1e-12);
      EXPECT_LE(std::abs(f.deriv1(x)), 1.0);
      EXPECT_LE(std::abs(f.deriv2(x)), 1.0);
    }
  }
}

TEST(Activations, ActivationSetEnds) {
  ActivationSet a = make_activation_set(3, "tanh");
  EXPECT_EQ(a.sigma[0].name, "identity");
  EXPECT_EQ(a.sigma[3].name, "identity");
  EXPECT_EQ(a.sigma[1].name, "tanh");
}
