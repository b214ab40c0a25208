#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "momentum/core.hpp"

namespace momentum {

/// Which identification tau_k uses: alpha_k / A_k or alpha_k / A_{k+1}.
/// Each method fixes one; the certifier must use the same.
enum class TauConvention { over_Ak, over_Ak1 };

/// Discrete time sequence A_k (positive, increasing) together with the
/// time-step delta identifying (d/dt) e^{beta_t} ~ (A_{k+1} - A_k) / delta.
struct DiscreteSchedule {
  std::string name;
  std::function<double(int)> A_fn;
  double delta = 1.0;
  TauConvention convention = TauConvention::over_Ak1;

  double A(int k) const { return A_fn(k); }
  double alpha(int k) const {
    double a = A_fn(k + 1) - A_fn(k);
    if (!(a > 0.0))
      throw IncompatibleConfiguration(
          "schedule '" + name + "' stalls at k=" + std::to_string(k) +
          " (alpha_k must be positive)");
    return a;
  }
  double tau(int k) const {
    return convention == TauConvention::over_Ak ? alpha(k) / A_fn(k)
                                                : alpha(k) / A_fn(k + 1);
  }
};

namespace schedules {

/// A_k = A0 + c k (k+1) / 4; with c = eps * sigma this sits exactly on the
/// feasibility boundary for gradient-map methods.
inline DiscreteSchedule quadratic(double eps_sigma, double A0 = 1.0,
                                  double delta = 1.0) {
  return {"quadratic",
          [=](int k) { return A0 + eps_sigma * k * (k + 1.0) / 4.0; }, delta,
          TauConvention::over_Ak1};
}

/// Degree-ptilde polynomial with leading coefficient C^(ptilde-1)/ptilde^ptilde,
/// feasible for the universal higher-order condition with constant C.
inline DiscreteSchedule polynomial(double C, double ptilde, double A0 = 1.0,
                                   double delta = 1.0) {
  double lead = std::pow(C, ptilde - 1.0);
  return {"polynomial",
          [=](int k) { return A0 + lead * std::pow(k / ptilde, ptilde); },
          delta, TauConvention::over_Ak1};
}

/// A_{k+1} = ratio * A_k. Doubling (ratio = 2) is the stress case for the
/// implicit methods.
inline DiscreteSchedule geometric(double ratio, double A0 = 1.0,
                                  double delta = 1.0) {
  return {"geometric", [=](int k) { return A0 * std::pow(ratio, k); }, delta,
          TauConvention::over_Ak};
}

/// Geometric schedule expressed through a constant tau under the given
/// convention (tau = alpha_k / A_k or alpha_k / A_{k+1} for every k).
inline DiscreteSchedule constant_tau(double tau, TauConvention conv,
                                     double A0 = 1.0, double delta = 1.0) {
  if (tau <= 0 || (conv == TauConvention::over_Ak1 && tau >= 1))
    throw IncompatibleConfiguration("constant_tau: invalid tau");
  double ratio =
      conv == TauConvention::over_Ak ? 1.0 + tau : 1.0 / (1.0 - tau);
  DiscreteSchedule s = geometric(ratio, A0, delta);
  s.name = "constant_tau";
  s.convention = conv;
  return s;
}

/// A_k with tau_k = alpha_k / A_k = 2 / (k+2): A_k = A0 (k+2)(k+3)/6.
inline DiscreteSchedule tau_2_over_k2(double A0 = 1.0, double delta = 1.0) {
  return {"tau_2_over_k2",
          [=](int k) { return A0 * (k + 2.0) * (k + 3.0) / 6.0; }, delta,
          TauConvention::over_Ak};
}

/// alpha_k = c / sqrt(k+1); the optimized subgradient-method schedule.
inline DiscreteSchedule sqrt_decay(double c, double A0 = 1.0,
                                   double delta = 1.0) {
  auto cache = std::make_shared<std::vector<double>>(1, A0);
  auto A = [=](int k) {
    auto& v = *cache;
    while (static_cast<int>(v.size()) <= k)
      v.push_back(v.back() + c / std::sqrt(static_cast<double>(v.size())));
    return v[k];
  };
  return {"sqrt_decay", A, delta, TauConvention::over_Ak1};
}

/// A_k = (k+1)(k+2)/2 * A0; tau_k = 2/(k+3) under the over_Ak1 convention.
/// The classic conditional-gradient weighting.
inline DiscreteSchedule fw_classic(double A0 = 1.0, double delta = 1.0) {
  return {"fw_classic",
          [=](int k) { return A0 * (k + 1.0) * (k + 2.0) / 2.0; }, delta,
          TauConvention::over_Ak1};
}

/// tau_k = c / sqrt(k + c^2) under the over_Ak1 convention (slowly decaying
/// conditional-gradient steps).
inline DiscreteSchedule fw_sqrt(double c = 1.0, double A0 = 1.0,
                                double delta = 1.0) {
  auto cache = std::make_shared<std::vector<double>>(1, A0);
  auto A = [=](int k) {
    auto& v = *cache;
    while (static_cast<int>(v.size()) <= k) {
      int i = static_cast<int>(v.size()) - 1;
      double tau = c / std::sqrt(i + c * c + 1.0);
      v.push_back(v.back() / (1.0 - tau));
    }
    return v[k];
  };
  return {"fw_sqrt", A, delta, TauConvention::over_Ak1};
}

/// A_k sampled from a continuous schedule: A_k = e^{beta(t0 + k delta)}.
inline DiscreteSchedule sampled_exponential(std::function<double(double)> beta,
                                            double t0, double delta) {
  return {"sampled_exponential",
          [=](int k) { return std::exp(beta(t0 + k * delta)); }, delta,
          TauConvention::over_Ak1};
}

}  // namespace schedules

/// Continuous damping schedule. Under ideal scaling with equality the
/// whole family is determined by beta alone: e^{alpha_t} = beta_dot(t).
struct ContinuousSchedule {
  std::string name;
  std::function<double(double)> beta;
  std::function<double(double)> beta_dot;
  bool ideal_scaling_equality = true;

  double ebeta(double t) const { return std::exp(beta(t)); }
  double alpha(double t) const { return std::log(beta_dot(t)); }
  /// gamma_t with gamma_dot = e^{alpha_t}; equals beta under equality mode.
  double gamma(double t) const { return beta(t); }

  /// beta_dot <= e^{alpha} must hold; with equality mode it does trivially.
  bool scaling_ok(double t) const {
    return beta_dot(t) <= std::exp(alpha(t)) + 1e-12;
  }

  /// beta_t = p log(t / c); requires t > 0.
  static ContinuousSchedule polynomial(double p, double c = 1.0) {
    return {"poly", [=](double t) { return p * std::log(t / c); },
            [=](double t) { return p / t; }, true};
  }
  /// beta_t = gamma t.
  static ContinuousSchedule linear(double gamma) {
    return {"linear", [=](double t) { return gamma * t; },
            [=](double /*t*/) { return gamma; }, true};
  }
  /// Reparameterized schedule beta(tau(t)).
  static ContinuousSchedule dilated(const ContinuousSchedule& base,
                                    std::function<double(double)> tau,
                                    std::function<double(double)> tau_dot) {
    return {base.name + "-dilated",
            [=, b = base.beta](double t) { return b(tau(t)); },
            [=, bd = base.beta_dot](double t) { return tau_dot(t) * bd(tau(t)); },
            base.ideal_scaling_equality};
  }
};

}  // namespace momentum
