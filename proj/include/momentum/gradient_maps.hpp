#pragma once

#include <cmath>
#include <string>

#include "momentum/problems.hpp"

namespace momentum {

struct ToleranceSpec {
  double tol = 1e-9;
  int max_iters = 200;
};

/// The per-iteration progress subroutine G. `identity` reproduces the plain
/// discretization (quasi-monotone methods); the others buy acceleration.
struct GradientMapSpec {
  enum class Kind {
    identity,
    nesterov,          // x - eps grad f(x)
    tseng_coupled,     // tau z_{k+1} + (1 - tau) y_k
    universal_higher,  // regularized (p-1)-st order Taylor step
    universal_nu       // x - eps_tilde grad f(x), Holder gradients
  };
  Kind kind = Kind::identity;
  double eps = 0.0;     // scaling of the nesterov / universal map
  int p = 2;            // oracle order for universal_higher (2 or 3)
  double nu = 1.0;      // Holder exponent
  double N = 1.2;       // regularization multiplier, > 1
  double eps_tilde = 0.0;
  double delta_tilde = 0.0;
  ToleranceSpec inner;

  double ptilde() const { return p - 1.0 + nu; }

  static GradientMapSpec identity() { return {}; }
  static GradientMapSpec nesterov(double eps) {
    GradientMapSpec g;
    g.kind = Kind::nesterov;
    g.eps = eps;
    return g;
  }
  static GradientMapSpec tseng() {
    GradientMapSpec g;
    g.kind = Kind::tseng_coupled;
    return g;
  }
  static GradientMapSpec universal_higher(double eps, int p, double nu,
                                          double N) {
    if (N <= 1.0)
      throw IncompatibleConfiguration("universal_higher requires N > 1");
    if (p != 2 && p != 3)
      throw IncompatibleConfiguration(
          "universal_higher supports p in {2, 3} (higher-order tensor "
          "oracles are out of scope)");
    GradientMapSpec g;
    g.kind = Kind::universal_higher;
    g.eps = eps;
    g.p = p;
    g.nu = nu;
    g.N = N;
    return g;
  }
  /// Plain step with increased regularization for (eps, nu)-Holder
  /// gradients; eps_tilde is auto-configured from the admissibility bound
  /// 1/eps_tilde >= (1/(2 delta_tilde))^((1-nu)/(1+nu)) (1/eps)^(2/(1+nu)).
  static GradientMapSpec universal_nu(double eps, double nu,
                                      double delta_tilde) {
    GradientMapSpec g;
    g.kind = Kind::universal_nu;
    g.eps = eps;
    g.nu = nu;
    g.delta_tilde = delta_tilde;
    double inv = std::pow(1.0 / (2.0 * delta_tilde), (1.0 - nu) / (1.0 + nu)) *
                 std::pow(1.0 / eps, 2.0 / (1.0 + nu));
    g.eps_tilde = 1.0 / inv;
    return g;
  }

  std::string label() const {
    switch (kind) {
      case Kind::identity:
        return "identity";
      case Kind::nesterov:
        return "nesterov";
      case Kind::tseng_coupled:
        return "tseng";
      case Kind::universal_higher:
        return "universal_higher";
      case Kind::universal_nu:
        return "universal_nu";
    }
    return "?";
  }
};

namespace detail {

/// Solves min_d <g, d> + 1/2 d'Hd + (N / (eps ptilde)) ||d||^ptilde by a
/// 1-D secular search on r = ||d||: d(r) = -(H + lam(r) I)^{-1} g with
/// lam(r) = (N/eps) r^(ptilde-2). H must be positive semidefinite.
inline Vec regularized_taylor_step(const Vec& g, const Mat& H, double eps,
                                   double ptilde, double N,
                                   const ToleranceSpec& tol) {
  const int d = static_cast<int>(g.size());
  if (g.norm() == 0.0) return Vec::Zero(d);
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  Vec lam = es.eigenvalues();
  Vec gh = es.eigenvectors().transpose() * g;
  auto norm_at = [&](double reg) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
      double den = lam[i] + reg;
      s += (gh[i] / den) * (gh[i] / den);
    }
    return std::sqrt(s);
  };
  auto reg_of = [&](double r) { return N / eps * std::pow(r, ptilde - 2.0); };
  // phi(r) = ||d(r)|| - r is decreasing; bracket then bisect.
  double hi = 1.0;
  while (norm_at(reg_of(hi)) > hi) {
    hi *= 2.0;
    if (hi > 1e18) throw SubproblemNotSolved("taylor step: no bracket");
  }
  double lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (norm_at(reg_of(mid)) > mid)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-15 * hi) break;
  }
  double r = 0.5 * (lo + hi);
  double reg = reg_of(r);
  Vec dh = gh;
  for (int i = 0; i < d; ++i) dh[i] = -gh[i] / (lam[i] + reg);
  Vec step = es.eigenvectors() * dh;
  // Stationarity residual of the subproblem at the returned point.
  double rn = step.norm();
  Vec resid = g + H * step + N / eps * std::pow(rn, ptilde - 2.0) * step;
  if (resid.lpNorm<Eigen::Infinity>() >
      tol.tol * (1.0 + g.lpNorm<Eigen::Infinity>()))
    throw SubproblemNotSolved("taylor step: stationarity residual " +
                              format_double(resid.lpNorm<Eigen::Infinity>()));
  return step;
}

}  // namespace detail

/// Applies the gradient map at x. tseng_coupled is realized inside the
/// steppers (it needs z_{k+1}); requesting it here is an error.
inline Vec apply_gradient_map(const GradientMapSpec& gmap, const Objective& f,
                              const Vec& x) {
  switch (gmap.kind) {
    case GradientMapSpec::Kind::identity:
      return x;
    case GradientMapSpec::Kind::nesterov:
      return x - gmap.eps * f.gradient(x);
    case GradientMapSpec::Kind::universal_nu:
      return x - gmap.eps_tilde * f.gradient(x);
    case GradientMapSpec::Kind::universal_higher: {
      Vec g = f.gradient(x);
      double pt = gmap.ptilde();
      if (gmap.p == 2) {
        // Closed form: d = -t g/||g||, (N/eps) t^(ptilde-1) = ||g||.
        double gn = g.norm();
        if (gn == 0.0) return x;
        double t = std::pow(gmap.eps * gn / gmap.N, 1.0 / (pt - 1.0));
        return x - t / gn * g;
      }
      if (!f.has_hessian())
        throw SubproblemNotSolved(
            "universal_higher(p=3) needs a Hessian oracle");
      Mat H = f.hessian_oracle(x);
      return x + detail::regularized_taylor_step(g, H, gmap.eps, pt, gmap.N,
                                                 gmap.inner);
    }
    case GradientMapSpec::Kind::tseng_coupled:
      throw IncompatibleConfiguration(
          "tseng_coupled is applied by the proximal steppers, not standalone");
  }
  return x;
}

}  // namespace momentum
