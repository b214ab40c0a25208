#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "momentum/geometry.hpp"

namespace momentum {

/// Smoothness / convexity metadata attached to an objective. All constants
/// are the ones the certifier plugs into error formulas; they are never
/// fitted from data.
struct SmoothnessMeta {
  std::optional<double> lipschitz_grad_L;  // L = 1/eps
  std::optional<double> strong_convexity_mu;
  struct Holder {
    double epsilon = 1.0;  // 1/epsilon is the Holder constant
    double nu = 1.0;       // in (0, 1]
    int order_p = 2;       // p >= 2; p = 3 means Holder Hessians
  };
  std::optional<Holder> holder;
  std::optional<double> subgradient_bound_G;

  void validate() const {
    if (lipschitz_grad_L && *lipschitz_grad_L <= 0)
      throw DomainViolation("meta: L must be positive");
    if (strong_convexity_mu && *strong_convexity_mu <= 0)
      throw DomainViolation("meta: mu must be positive");
    if (lipschitz_grad_L && strong_convexity_mu &&
        *strong_convexity_mu > *lipschitz_grad_L * (1 + 1e-12))
      throw DomainViolation("meta: mu must not exceed L");
    if (holder) {
      if (holder->nu <= 0 || holder->nu > 1)
        throw DomainViolation("meta: holder nu must lie in (0,1]");
      if (holder->epsilon <= 0) throw DomainViolation("meta: holder epsilon > 0");
      if (holder->order_p < 2) throw DomainViolation("meta: holder order p >= 2");
    }
    if (subgradient_bound_G && *subgradient_bound_G <= 0)
      throw DomainViolation("meta: G must be positive");
  }
};

enum class Provenance { closed_form, high_accuracy_solve };

struct ReferenceSolution {
  Vec x_star;
  double f_star = 0.0;
  Provenance provenance = Provenance::closed_form;
  double tolerance = 0.0;  // solve tolerance when provenance is a solve
};

/// Quadratic structure f(x) = 1/2 (x-c)' Q (x-c) + f0 with
/// Q = H diag(eigs) H and H = I - 2 v v' a Householder reflection.
/// Keeping the factored form gives exact matvecs and exact solves of
/// (a I + b Q) u = r, which the implicit steppers use.
struct QuadraticForm {
  Vec eigs;
  Vec house;  // unit vector v of the reflection
  Vec center;
  double f0 = 0.0;

  Vec reflect(const Vec& x) const { return x - 2.0 * house.dot(x) * house; }
  Vec apply(const Vec& u) const {
    Vec t = reflect(u);
    t.array() *= eigs.array();
    return reflect(t);
  }
  /// Solves (a I + b Q) u = r exactly through the eigenstructure.
  Vec solve_shifted(double a, double b, const Vec& r) const {
    Vec t = reflect(r);
    t.array() /= (a + b * eigs.array());
    return reflect(t);
  }
  double quad_value(const Vec& u) const {
    Vec t = reflect(u);
    return 0.5 * (t.array().square() * eigs.array()).sum();
  }
};

/// Oracle bundle for one objective f. For nonsmooth objectives
/// `grad_oracle` is a deterministic subgradient selector and `smooth` is
/// false. `gap_oracle`, when present, evaluates f(x) - f* without the
/// cancellation of subtracting two nearly equal values.
struct Objective {
  std::string id;
  int dim = 0;
  Domain domain;
  bool smooth = true;

  std::function<double(const Vec&)> value_oracle;
  std::function<Vec(const Vec&)> grad_oracle;
  std::function<Vec(const Vec&, const Vec&)> hessian_vec_oracle;  // may be null
  std::function<Mat(const Vec&)> hessian_oracle;                  // may be null
  std::function<double(const Vec&)> gap_oracle;                   // may be null

  SmoothnessMeta meta;
  std::optional<ReferenceSolution> reference;
  std::shared_ptr<const QuadraticForm> quadratic;  // set for quadratic f

  double value(const Vec& x) const { return value_oracle(x); }
  Vec gradient(const Vec& x) const { return grad_oracle(x); }
  bool has_hessian() const { return static_cast<bool>(hessian_oracle); }

  double gap(const Vec& x) const {
    if (gap_oracle) return gap_oracle(x);
    if (!reference) throw MissingTraceField("gap: no reference solution");
    return value(x) - reference->f_star;
  }
};

/// The simple (possibly nonsmooth) part psi of a composite objective.
/// Every kind has a closed-form proximal operator.
struct SimplePart {
  enum class Kind { none, l1, indicator_box, quad, huber_l1 };
  Kind kind = Kind::none;
  double weight = 0.0;
  double lo = 0.0, hi = 0.0;  // indicator_box bounds
  double knee = 0.0;          // huber transition point

  static SimplePart none() { return {}; }
  static SimplePart l1(double w) { return {Kind::l1, w, 0, 0, 0}; }
  static SimplePart indicator_box(double lo, double hi) {
    return {Kind::indicator_box, 0, lo, hi, 0};
  }
  static SimplePart quad(double w) { return {Kind::quad, w, 0, 0, 0}; }
  static SimplePart huber_l1(double w, double knee) {
    return {Kind::huber_l1, w, 0, 0, knee};
  }

  double value(const Vec& x) const {
    switch (kind) {
      case Kind::none:
        return 0.0;
      case Kind::l1:
        return weight * x.lpNorm<1>();
      case Kind::indicator_box: {
        for (int i = 0; i < x.size(); ++i)
          if (x[i] < lo - 1e-12 || x[i] > hi + 1e-12)
            throw DomainViolation("indicator_box: point outside the box");
        return 0.0;
      }
      case Kind::quad:
        return 0.5 * weight * x.squaredNorm();
      case Kind::huber_l1: {
        double s = 0.0;
        for (int i = 0; i < x.size(); ++i) {
          double a = std::abs(x[i]);
          s += a <= knee ? a * a / (2.0 * knee) : a - knee / 2.0;
        }
        return weight * s;
      }
    }
    return 0.0;
  }

  /// Deterministic subgradient selector (sign convention sign(0) = 0).
  Vec subgrad(const Vec& x) const {
    Vec g = Vec::Zero(x.size());
    switch (kind) {
      case Kind::none:
      case Kind::indicator_box:
        return g;
      case Kind::l1:
        for (int i = 0; i < x.size(); ++i)
          g[i] = weight * (x[i] > 0 ? 1.0 : (x[i] < 0 ? -1.0 : 0.0));
        return g;
      case Kind::quad:
        return weight * x;
      case Kind::huber_l1:
        for (int i = 0; i < x.size(); ++i)
          g[i] = weight * std::clamp(x[i] / knee, -1.0, 1.0);
        return g;
    }
    return g;
  }

  bool differentiable() const {
    return kind == Kind::none || kind == Kind::quad || kind == Kind::huber_l1;
  }
};

/// Composite objective f = phi + psi with phi smooth and psi simple.
struct CompositeObjective {
  std::string id;
  Objective smooth_part;
  SimplePart simple_part;
  std::optional<ReferenceSolution> reference;
  std::function<double(const Vec&)> gap_oracle;  // may be null

  int dim() const { return smooth_part.dim; }
  double value(const Vec& x) const {
    return smooth_part.value(x) + simple_part.value(x);
  }
  double gap(const Vec& x) const {
    if (gap_oracle) return gap_oracle(x);
    if (!reference) throw MissingTraceField("gap: no reference solution");
    return value(x) - reference->f_star;
  }
};

/// Exact proximal point of the composite's simple part:
///   argmin_z psi(z) + 1/(2 step) ||z - x||^2.
inline Vec prox(const CompositeObjective& c, const Vec& x, double step) {
  if (step <= 0) throw DomainViolation("prox: step must be positive");
  const SimplePart& s = c.simple_part;
  Vec z = x;
  switch (s.kind) {
    case SimplePart::Kind::none:
      return z;
    case SimplePart::Kind::l1: {
      double t = step * s.weight;
      for (int i = 0; i < z.size(); ++i)
        z[i] = z[i] > t ? z[i] - t : (z[i] < -t ? z[i] + t : 0.0);
      return z;
    }
    case SimplePart::Kind::indicator_box:
      for (int i = 0; i < z.size(); ++i) z[i] = std::clamp(z[i], s.lo, s.hi);
      return z;
    case SimplePart::Kind::quad:
      return z / (1.0 + step * s.weight);
    case SimplePart::Kind::huber_l1: {
      double t = step * s.weight;
      for (int i = 0; i < z.size(); ++i) {
        double a = std::abs(x[i]);
        if (a <= s.knee + t)
          z[i] = x[i] / (1.0 + t / s.knee);
        else
          z[i] = x[i] - t * (x[i] > 0 ? 1.0 : -1.0);
      }
      return z;
    }
  }
  throw UnsupportedSimplePart("prox: unsupported simple part");
}

/// Compact convex feasible set with a closed-form linear minimization
/// oracle. `lmo` always returns an extreme point.
struct FeasibleSet {
  enum class Kind { simplex, l1_ball, l2_ball, box };
  Kind kind = Kind::simplex;
  int dim = 0;
  double radius = 1.0;
  double lo = 0.0, hi = 0.0;

  static FeasibleSet simplex(int dim) { return {Kind::simplex, dim, 1, 0, 0}; }
  static FeasibleSet l1_ball(int dim, double r) {
    return {Kind::l1_ball, dim, r, 0, 0};
  }
  static FeasibleSet l2_ball(int dim, double r) {
    return {Kind::l2_ball, dim, r, 0, 0};
  }
  static FeasibleSet box(int dim, double lo, double hi) {
    return {Kind::box, dim, 0, lo, hi};
  }

  bool contains(const Vec& x, double tol = 1e-9) const {
    if (x.size() != dim) return false;
    switch (kind) {
      case Kind::simplex:
        return x.minCoeff() >= -tol && std::abs(x.sum() - 1.0) <= tol;
      case Kind::l1_ball:
        return x.lpNorm<1>() <= radius + tol;
      case Kind::l2_ball:
        return x.norm() <= radius + tol;
      case Kind::box:
        return x.minCoeff() >= lo - tol && x.maxCoeff() <= hi + tol;
    }
    return false;
  }

  double diameter() const {
    switch (kind) {
      case Kind::simplex:
        return std::sqrt(2.0);
      case Kind::l1_ball:
      case Kind::l2_ball:
        return 2.0 * radius;
      case Kind::box:
        return (hi - lo) * std::sqrt(static_cast<double>(dim));
    }
    return 0.0;
  }
};

/// argmin_{z in set} <direction, z>; ties broken by lowest coordinate index.
inline Vec lmo(const FeasibleSet& set, const Vec& direction) {
  if (direction.size() != set.dim)
    throw DomainViolation("lmo: dimension mismatch");
  if (!finite(direction)) throw DomainViolation("lmo: non-finite direction");
  switch (set.kind) {
    case FeasibleSet::Kind::simplex: {
      int best = 0;
      for (int i = 1; i < set.dim; ++i)
        if (direction[i] < direction[best]) best = i;
      Vec z = Vec::Zero(set.dim);
      z[best] = 1.0;
      return z;
    }
    case FeasibleSet::Kind::l1_ball: {
      int best = 0;
      for (int i = 1; i < set.dim; ++i)
        if (std::abs(direction[i]) > std::abs(direction[best])) best = i;
      Vec z = Vec::Zero(set.dim);
      z[best] = direction[best] > 0 ? -set.radius : set.radius;
      return z;
    }
    case FeasibleSet::Kind::l2_ball: {
      double n = direction.norm();
      if (n == 0.0) {
        Vec z = Vec::Zero(set.dim);
        z[0] = set.radius;
        return z;
      }
      return Vec(-set.radius / n * direction);
    }
    case FeasibleSet::Kind::box: {
      Vec z(set.dim);
      for (int i = 0; i < set.dim; ++i) z[i] = direction[i] < 0 ? set.hi : set.lo;
      return z;
    }
  }
  return Vec::Zero(set.dim);
}

struct FiniteDiffReport {
  double max_rel_deviation = 0.0;
  bool pass = false;
};

/// Central-difference check of the gradient oracle. Only meaningful for
/// smooth objectives; nonsmooth ones are rejected.
inline FiniteDiffReport finite_diff_check(const Objective& f, const Vec& x,
                                          double h_step) {
  if (!f.smooth)
    throw NonsmoothPoint("finite_diff_check: objective is nonsmooth");
  if (h_step < 1e-8 || h_step > 1e-3)
    throw DomainViolation("finite_diff_check: h_step outside [1e-8, 1e-3]");
  Vec g = f.gradient(x);
  double scale = std::max(1.0, g.lpNorm<Eigen::Infinity>());
  double worst = 0.0;
  Vec e = x;
  for (int i = 0; i < x.size(); ++i) {
    double xi = x[i];
    e[i] = xi + h_step;
    double fp = f.value(e);
    e[i] = xi - h_step;
    double fm = f.value(e);
    e[i] = xi;
    double fd = (fp - fm) / (2.0 * h_step);
    worst = std::max(worst, std::abs(fd - g[i]) / scale);
  }
  return {worst, worst <= 1e-6};
}

}  // namespace momentum
