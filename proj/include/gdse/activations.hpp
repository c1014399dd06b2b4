#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace gdse {

enum class Smoothness {
  C2_or_better,
  weak_second_derivative,
  weak_first_derivative,
};

struct ScalarFunction {
  std::string name;
  std::function<double(double)> value;
  std::function<double(double)> deriv1;
  std::function<double(double)> deriv2;
  Smoothness smoothness = Smoothness::C2_or_better;
  double growth_exponent = 0.0;  // r0 in the (1+|x|)^{r0} envelope

  double operator()(double x) const { return value(x); }
};

inline void warn_weak_second_derivative(const ScalarFunction& f) {
  static std::once_flag flag;
  std::call_once(flag, [&] {
    std::cerr << "warning: second derivative of '" << f.name
              << "' uses the identically-zero convention\n";
  });
}

inline Eigen::MatrixXd apply(const ScalarFunction& f, const Eigen::MatrixXd& M,
                             int order = 0) {
  if (order < 0 || order > 2) throw std::invalid_argument("apply: bad order");
  if (order == 2 && f.smoothness == Smoothness::weak_first_derivative)
    warn_weak_second_derivative(f);
  const auto& g = order == 0 ? f.value : (order == 1 ? f.deriv1 : f.deriv2);
  return M.unaryExpr([&](double x) { return g(x); });
}

// Kink conventions: weak derivatives take the left-limit value at kink
// points (measure-zero set; any convention is statistically irrelevant).
inline ScalarFunction registry_get(const std::string& name) {
  ScalarFunction f;
  f.name = name;
  if (name == "identity") {
    f.value = [](double x) { return x; };
    f.deriv1 = [](double) { return 1.0; };
    f.deriv2 = [](double) { return 0.0; };
    f.growth_exponent = 1.0;
  } else if (name == "sigmoid") {
    f.value = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    f.deriv1 = [](double x) {
      double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 - s);
    };
    f.deriv2 = [](double x) {
      double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 - s) * (1.0 - 2.0 * s);
    };
    f.growth_exponent = 0.0;
  } else if (name == "tanh") {
    f.value = [](double x) { return std::tanh(x); };
    f.deriv1 = [](double x) {
      double t = std::tanh(x);
      return 1.0 - t * t;
    };
    f.deriv2 = [](double x) {
      double t = std::tanh(x);
      return -2.0 * t * (1.0 - t * t);
    };
    f.growth_exponent = 0.0;
  } else if (name == "relu") {
    f.value = [](double x) { return x > 0.0 ? x : 0.0; };
    f.deriv1 = [](double x) { return x > 0.0 ? 1.0 : 0.0; };
    f.deriv2 = [](double) { return 0.0; };  // experimental convention
    f.smoothness = Smoothness::weak_first_derivative;
    f.growth_exponent = 1.0;
  } else if (name == "smoothed_relu") {
    f.value = [](double x) {
      if (x <= 0.0) return 0.0;
      if (x < 1.0) return 0.5 * x * x;
      return x - 0.5;
    };
    f.deriv1 = [](double x) {
      if (x <= 0.0) return 0.0;
      if (x < 1.0) return x;
      return 1.0;
    };
    f.deriv2 = [](double x) { return (x > 0.0 && x <= 1.0) ? 1.0 : 0.0; };
    f.smoothness = Smoothness::weak_second_derivative;
    f.growth_exponent = 1.0;
  } else {
    throw std::out_of_range("registry_get: unknown activation '" + name + "'");
  }
  return f;
}

// sigma_0 .. sigma_L with sigma_0 = sigma_L = identity always.
struct ActivationSet {
  std::vector<ScalarFunction> sigma;  // indexed by layer, size L+1
  int L() const { return static_cast<int>(sigma.size()) - 1; }
};

inline ActivationSet make_activation_set(int L, const std::string& hidden) {
  ActivationSet a;
  a.sigma.resize(L + 1);
  a.sigma[0] = registry_get("identity");
  a.sigma[L] = registry_get("identity");
  for (int alpha = 1; alpha < L; ++alpha) a.sigma[alpha] = registry_get(hidden);
  return a;
}

}  // namespace gdse
