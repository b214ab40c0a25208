#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace momentum {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Base class for all library errors. Subclasses name the failure mode;
/// the message carries the context.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DomainViolation : Error {
  using Error::Error;
};
struct SingularPoint : Error {
  using Error::Error;
};
struct NotInvertible : Error {
  using Error::Error;
};
struct InnerSolverDiverged : Error {
  using Error::Error;
};
struct SubproblemNotSolved : Error {
  using Error::Error;
};
struct IncompatibleConfiguration : Error {
  using Error::Error;
};
struct IncompatibleKind : Error {
  using Error::Error;
};
struct MissingTraceField : Error {
  using Error::Error;
};
struct UnsupportedSimplePart : Error {
  using Error::Error;
};
struct UnknownProblem : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct EmptySeries : Error {
  using Error::Error;
};
struct IntegrationBlowup : Error {
  using Error::Error;
};
struct MirrorInversionFailure : Error {
  using Error::Error;
};
struct NonsmoothPoint : Error {
  using Error::Error;
};

/// Deterministic 64-bit generator; every randomized routine takes one of
/// these (or a seed) explicitly so runs are reproducible.
using Rng = std::mt19937_64;

inline Vec gaussian_vector(int dim, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = n(rng);
  return v;
}

inline Vec uniform_vector(int dim, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = u(rng);
  return v;
}

/// Point sampled uniformly-ish from the interior of the probability simplex
/// (normalized exponentials keep it strictly positive).
inline Vec simplex_vector(int dim, Rng& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = u(rng);
  v /= v.sum();
  return v;
}

/// Shortest decimal representation that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline bool finite(const Vec& v) { return v.allFinite(); }

}  // namespace momentum
