#pragma once

#include <cmath>
#include <limits>

#include "momentum/core.hpp"

namespace momentum {

enum class GeneratorKind { euclidean, p_power, negative_entropy };
enum class DomainKind { full_space, simplex, box };

/// Feasible region the generator lives on. `lo`/`hi` are only meaningful
/// for boxes.
struct Domain {
  DomainKind kind = DomainKind::full_space;
  int dim = 0;
  double lo = 0.0;
  double hi = 0.0;

  static Domain full(int dim) { return {DomainKind::full_space, dim, 0, 0}; }
  static Domain simplex(int dim) { return {DomainKind::simplex, dim, 0, 0}; }
  static Domain box(double lo, double hi, int dim) {
    return {DomainKind::box, dim, lo, hi};
  }

  bool contains(const Vec& x, double tol = 1e-9) const {
    if (x.size() != dim) return false;
    switch (kind) {
      case DomainKind::full_space:
        return true;
      case DomainKind::simplex:
        return x.minCoeff() >= -tol && std::abs(x.sum() - 1.0) <= tol;
      case DomainKind::box:
        return x.minCoeff() >= lo - tol && x.maxCoeff() <= hi + tol;
    }
    return false;
  }
};

/// Element of the dual space, i.e. a value of the mirror map grad_h.
struct DualPoint {
  Vec coords;
};

// Coordinates below this are treated as sitting on the entropy boundary.
inline constexpr double kEntropyFloor = 1e-300;

/// Distance-generating function h together with its uniform-convexity
/// metadata: D_h(y, x) >= (sigma / p) * ||y - x||^p on the domain.
///
/// Three kinds are supported, all with closed-form mirror maps:
///   euclidean          h(x) = 1/2 ||x||^2            (sigma = 1, p = 2)
///   p_power            h(x) = 1/p ||x||^p, p >= 2    (sigma = 2^(2-p))
///   negative_entropy   h(x) = sum x_i log x_i        (sigma = 1, p = 2)
///
/// p_power also has a coordinate-separable variant h(x) = 1/p sum |x_i|^p,
/// selectable via `separable`; the norm form is the default.
struct DistanceGenerator {
  GeneratorKind kind = GeneratorKind::euclidean;
  Domain domain;
  double sigma = 1.0;
  double p = 2.0;
  bool separable = false;

  static DistanceGenerator euclidean(int dim) {
    return {GeneratorKind::euclidean, Domain::full(dim), 1.0, 2.0, false};
  }
  static DistanceGenerator euclidean_on(Domain d) {
    return {GeneratorKind::euclidean, d, 1.0, 2.0, false};
  }
  static DistanceGenerator p_power(int dim, double p, bool separable = false) {
    if (p < 2.0) throw DomainViolation("p_power requires p >= 2");
    return {GeneratorKind::p_power, Domain::full(dim),
            std::pow(2.0, -p + 2.0), p, separable};
  }
  static DistanceGenerator negative_entropy(int dim) {
    return {GeneratorKind::negative_entropy, Domain::simplex(dim), 1.0, 2.0,
            false};
  }

  int dim() const { return domain.dim; }
};

namespace detail {

inline void check_in_domain(const DistanceGenerator& h, const Vec& x,
                            const char* who) {
  if (x.size() != h.dim())
    throw DomainViolation(std::string(who) + ": dimension mismatch");
  if (!h.domain.contains(x))
    throw DomainViolation(std::string(who) + ": point outside domain");
}

inline void check_entropy_interior(const Vec& x, const char* who) {
  for (int i = 0; i < x.size(); ++i)
    if (x[i] <= kEntropyFloor)
      throw SingularPoint(std::string(who) +
                          ": entropy boundary coordinate at index " +
                          std::to_string(i));
}

inline double entropy_value(const Vec& x) {
  double s = 0.0;
  for (int i = 0; i < x.size(); ++i)
    if (x[i] > 0.0) s += x[i] * std::log(x[i]);
  return s;
}

}  // namespace detail

/// h(x); rarely needed directly but handy for oracle checks.
inline double generator_value(const DistanceGenerator& h, const Vec& x) {
  switch (h.kind) {
    case GeneratorKind::euclidean:
      return 0.5 * x.squaredNorm();
    case GeneratorKind::p_power:
      if (h.separable) {
        double s = 0.0;
        for (int i = 0; i < x.size(); ++i) s += std::pow(std::abs(x[i]), h.p);
        return s / h.p;
      }
      return std::pow(x.norm(), h.p) / h.p;
    case GeneratorKind::negative_entropy:
      return detail::entropy_value(x);
  }
  return 0.0;
}

/// Bregman divergence D_h(y, x) = h(y) - h(x) - <grad_h(x), y - x>.
/// Nonnegative for convex h; exactly 1/2 ||y - x||^2 in the Euclidean case.
inline double divergence(const DistanceGenerator& h, const Vec& y,
                         const Vec& x) {
  detail::check_in_domain(h, y, "divergence");
  detail::check_in_domain(h, x, "divergence");
  switch (h.kind) {
    case GeneratorKind::euclidean:
      return 0.5 * (y - x).squaredNorm();
    case GeneratorKind::p_power: {
      if (h.separable) {
        double s = 0.0;
        for (int i = 0; i < x.size(); ++i) {
          double gy = std::pow(std::abs(y[i]), h.p) / h.p;
          double gx = std::pow(std::abs(x[i]), h.p) / h.p;
          double gxp = std::pow(std::abs(x[i]), h.p - 1.0) *
                       (x[i] >= 0.0 ? 1.0 : -1.0);
          s += gy - gx - gxp * (y[i] - x[i]);
        }
        return s;
      }
      double nx = x.norm();
      double hy = std::pow(y.norm(), h.p) / h.p;
      double hx = std::pow(nx, h.p) / h.p;
      double gdot = nx > 0.0 ? std::pow(nx, h.p - 2.0) * x.dot(y - x) : 0.0;
      return hy - hx - gdot;
    }
    case GeneratorKind::negative_entropy: {
      detail::check_entropy_interior(x, "divergence");
      // sum y log(y/x) - y + x; the linear terms cancel on the simplex but
      // keeping them makes the formula exact for any positive vectors.
      double s = 0.0;
      for (int i = 0; i < x.size(); ++i) {
        if (y[i] > 0.0) s += y[i] * std::log(y[i] / x[i]);
        s += x[i] - y[i];
      }
      return s;
    }
  }
  return 0.0;
}

/// Mirror map grad_h(x). Identity for the Euclidean generator.
inline DualPoint grad(const DistanceGenerator& h, const Vec& x) {
  detail::check_in_domain(h, x, "grad");
  switch (h.kind) {
    case GeneratorKind::euclidean:
      return {x};
    case GeneratorKind::p_power: {
      Vec g(x.size());
      if (h.separable) {
        for (int i = 0; i < x.size(); ++i)
          g[i] = std::pow(std::abs(x[i]), h.p - 1.0) * (x[i] >= 0 ? 1. : -1.);
      } else {
        double nx = x.norm();
        g = nx > 0.0 ? Vec(std::pow(nx, h.p - 2.0) * x) : Vec(Vec::Zero(x.size()));
      }
      return {g};
    }
    case GeneratorKind::negative_entropy: {
      detail::check_entropy_interior(x, "grad");
      Vec g(x.size());
      for (int i = 0; i < x.size(); ++i) g[i] = 1.0 + std::log(x[i]);
      return {g};
    }
  }
  return {x};
}

/// Inverse mirror map: the x with grad(h, x) = d. All three kinds admit
/// closed forms (identity, signed root, softmax), accurate to ~1e-12.
inline Vec mirror_inverse(const DistanceGenerator& h, const DualPoint& d) {
  const Vec& v = d.coords;
  if (v.size() != h.dim())
    throw NotInvertible("mirror_inverse: dimension mismatch");
  if (!finite(v)) throw NotInvertible("mirror_inverse: non-finite dual point");
  switch (h.kind) {
    case GeneratorKind::euclidean:
      return v;
    case GeneratorKind::p_power: {
      Vec x(v.size());
      if (h.separable) {
        for (int i = 0; i < v.size(); ++i)
          x[i] = std::pow(std::abs(v[i]), 1.0 / (h.p - 1.0)) *
                 (v[i] >= 0 ? 1. : -1.);
      } else {
        double nv = v.norm();
        if (nv == 0.0) return Vec::Zero(v.size());
        // |d| = |x|^(p-1), so x = d / |d|^((p-2)/(p-1)).
        x = v / std::pow(nv, (h.p - 2.0) / (h.p - 1.0));
      }
      return x;
    }
    case GeneratorKind::negative_entropy: {
      // softmax; shift by the max for overflow safety.
      double m = v.maxCoeff();
      Vec x = (v.array() - m).exp();
      double s = x.sum();
      if (!(s > 0.0) || !std::isfinite(s))
        throw NotInvertible("mirror_inverse: softmax degenerate");
      return x / s;
    }
  }
  return v;
}

struct ConvexityReport {
  double min_ratio = std::numeric_limits<double>::infinity();
  int samples = 0;
  bool pass = false;
};

inline Vec sample_domain_point(const Domain& d, Rng& rng) {
  switch (d.kind) {
    case DomainKind::full_space:
      return gaussian_vector(d.dim, rng);
    case DomainKind::simplex:
      return simplex_vector(d.dim, rng);
    case DomainKind::box:
      return uniform_vector(d.dim, d.lo, d.hi, rng);
  }
  return Vec::Zero(d.dim);
}

/// Samples point pairs and checks the uniform-convexity modulus
/// D_h(x, y) >= (sigma / p) ||x - y||^p. Reports the worst observed ratio.
inline ConvexityReport check_uniform_convexity(const DistanceGenerator& h,
                                               int n_samples, int rng_seed) {
  if (n_samples < 1) throw DomainViolation("check_uniform_convexity: n_samples >= 1");
  Rng rng(static_cast<std::uint64_t>(rng_seed));
  ConvexityReport rep;
  for (int s = 0; s < n_samples; ++s) {
    Vec x = sample_domain_point(h.domain, rng);
    Vec y = sample_domain_point(h.domain, rng);
    double dist = (x - y).norm();
    if (dist < 1e-12) continue;
    double lower = h.sigma / h.p * std::pow(dist, h.p);
    double ratio = divergence(h, x, y) / lower;
    rep.min_ratio = std::min(rep.min_ratio, ratio);
    ++rep.samples;
  }
  rep.pass = rep.samples > 0 && rep.min_ratio >= 1.0 - 1e-9;
  return rep;
}

}  // namespace momentum
