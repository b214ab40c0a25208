#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "momentum/gradient_maps.hpp"
#include "momentum/problems.hpp"
#include "momentum/schedule.hpp"

namespace momentum {

enum class MethodId {
  implicit,
  agd_I,
  agd_II,
  implicit_strong,
  agd_strong,
  quasi_monotone_strong,
  frank_wolfe,
  fista,
  prox_strong,
  higher_order_descent,
};

inline std::string method_name(MethodId m) {
  switch (m) {
    case MethodId::implicit: return "implicit";
    case MethodId::agd_I: return "agd_I";
    case MethodId::agd_II: return "agd_II";
    case MethodId::implicit_strong: return "implicit_strong";
    case MethodId::agd_strong: return "agd_strong";
    case MethodId::quasi_monotone_strong: return "quasi_monotone_strong";
    case MethodId::frank_wolfe: return "frank_wolfe";
    case MethodId::fista: return "fista";
    case MethodId::prox_strong: return "prox_strong";
    case MethodId::higher_order_descent: return "higher_order_descent";
  }
  return "?";
}

struct NoiseSpec {
  enum class Kind { none, gaussian, bounded };
  Kind kind = Kind::none;
  double scale = 0.0;

  static NoiseSpec none() { return {}; }
  static NoiseSpec gaussian(double s) { return {Kind::gaussian, s}; }
  static NoiseSpec bounded(double s) { return {Kind::bounded, s}; }
  bool active() const { return kind != Kind::none && scale != 0.0; }
};

struct IterateState {
  int k = 0;
  Vec x, y, z;
  DualPoint z_dual;
};

struct NamedVec {
  std::string key;
  Vec value;
};

struct TraceRecord {
  int k = 0;
  double A = 0, alpha = 0, tau = 0;  // schedule values indexed at this k
  Vec x, y, z;
  Vec z_dual;
  double f_x = 0, f_y = 0;
  double gap_x = 0, gap_y = 0;
  std::vector<NamedVec> grads;  // gradients used in the step arriving here
  std::vector<NamedVec> aux;    // vertices, combined gradients, noise draws
  std::optional<double> eps_step;  // stepper-side error value, when computed

  const Vec* find(const std::string& key) const {
    for (const auto& nv : grads)
      if (nv.key == key) return &nv.value;
    for (const auto& nv : aux)
      if (nv.key == key) return &nv.value;
    return nullptr;
  }
  const Vec& require(const std::string& key) const {
    const Vec* v = find(key);
    if (!v) throw MissingTraceField("trace record " + std::to_string(k) +
                                    " lacks field '" + key + "'");
    return *v;
  }
};

/// Constants the certifier needs, frozen at run time from problem,
/// geometry, and schedule metadata.
struct TraceContext {
  MethodId method = MethodId::agd_I;
  std::string method_id;  // method plus gradient-map label
  std::string problem_id;
  GradientMapSpec gmap;
  DistanceGenerator geometry;
  double sigma = 1.0, p_mod = 2.0;  // geometry modulus
  double delta = 1.0;
  TauConvention convention = TauConvention::over_Ak1;
  std::optional<double> eps;  // 1/L of the smooth(est) part
  std::optional<double> mu;
  std::optional<SmoothnessMeta::Holder> holder;
  std::optional<double> G;
  std::optional<double> set_diameter;
  bool composite = false;
  bool stochastic = false;
  NoiseSpec noise;
  double implicit_residual = 0.0;  // worst accepted inner residual
};

struct Trace {
  TraceContext ctx;
  std::uint64_t seed = 0;
  std::vector<TraceRecord> records;

  int iterations() const { return static_cast<int>(records.size()) - 1; }
};

struct StepIO {
  std::vector<NamedVec> grads;
  std::vector<NamedVec> aux;
  std::optional<double> eps_step;
  double residual = 0.0;
};

/// Gradient evaluation hook: applies noise when configured and records
/// what was used under the given tag.
using GradFn = std::function<Vec(const Vec&, const char* tag)>;

namespace detail {

inline bool quad_fast_path(const Objective& f, const DistanceGenerator& h) {
  return f.quadratic && h.kind == GeneratorKind::euclidean &&
         h.domain.kind == DomainKind::full_space;
}

/// Dense Hessian of the distance generator; used by the damped-Newton
/// implicit solvers.
inline Mat hess_h(const DistanceGenerator& h, const Vec& x) {
  int d = static_cast<int>(x.size());
  switch (h.kind) {
    case GeneratorKind::euclidean:
      return Mat::Identity(d, d);
    case GeneratorKind::p_power: {
      if (h.separable) {
        Mat m = Mat::Zero(d, d);
        for (int i = 0; i < d; ++i)
          m(i, i) = (h.p - 1.0) * std::pow(std::abs(x[i]), h.p - 2.0);
        return m;
      }
      double n = x.norm();
      if (n == 0.0) return Mat::Zero(d, d);
      Mat m = std::pow(n, h.p - 2.0) * Mat::Identity(d, d);
      m += (h.p - 2.0) * std::pow(n, h.p - 4.0) * (x * x.transpose());
      return m;
    }
    case GeneratorKind::negative_entropy: {
      Mat m = Mat::Zero(d, d);
      for (int i = 0; i < d; ++i) m(i, i) = 1.0 / x[i];
      return m;
    }
  }
  return Mat::Identity(d, d);
}

/// Jacobian of mirror_inverse at the dual point of z (the inverse Hessian
/// of h restricted to the domain; softmax Jacobian for the entropy case).
inline Mat mirror_inverse_jacobian(const DistanceGenerator& h, const Vec& z) {
  int d = static_cast<int>(z.size());
  switch (h.kind) {
    case GeneratorKind::euclidean:
      return Mat::Identity(d, d);
    case GeneratorKind::p_power: {
      Mat m = hess_h(h, z);
      return m.ldlt().solve(Mat::Identity(d, d));
    }
    case GeneratorKind::negative_entropy:
      return Mat(z.asDiagonal()) - z * z.transpose();
  }
  return Mat::Identity(d, d);
}

/// Mirror step z <- argmin_{z in dom} <coef g, z> + D_h(z, z_prev),
/// updating the (z, dual) pair in place. Closed form per geometry.
inline void mirror_step(const DistanceGenerator& h, double coef, const Vec& g,
                        Vec& z, DualPoint& zd) {
  switch (h.domain.kind) {
    case DomainKind::full_space:
      zd.coords -= coef * g;
      z = mirror_inverse(h, zd);
      return;
    case DomainKind::box:
      if (h.kind != GeneratorKind::euclidean)
        throw IncompatibleConfiguration(
            "mirror steps on a box require the Euclidean generator");
      z = (z - coef * g).cwiseMax(h.domain.lo).cwiseMin(h.domain.hi);
      zd.coords = z;
      return;
    case DomainKind::simplex:
      if (h.kind != GeneratorKind::negative_entropy)
        throw IncompatibleConfiguration(
            "mirror steps on the simplex require the entropy generator");
      zd.coords -= coef * g;
      z = mirror_inverse(h, zd);
      return;
  }
}

/// Component of v orthogonal to the domain's constraint normal (all-ones
/// for the simplex); residuals of dual conditions are measured there.
inline double tangential_inf_norm(const Domain& dom, const Vec& v) {
  if (dom.kind == DomainKind::simplex) {
    Vec w = v.array() - v.mean();
    return w.lpNorm<Eigen::Infinity>();
  }
  return v.lpNorm<Eigen::Infinity>();
}

struct NewtonResult {
  Vec x;
  double residual = 0.0;
};

/// Damped Newton on F(x) = 0 with residual-based backtracking. Iterates
/// toward `target`; a stall is accepted as long as the residual is within
/// `accept` (the contract the caller certifies against).
inline NewtonResult damped_newton(
    const std::function<Vec(const Vec&)>& F,
    const std::function<Mat(const Vec&)>& J, Vec x, double target,
    double accept, int max_iters) {
  Vec r = F(x);
  double rn = r.lpNorm<Eigen::Infinity>();
  for (int it = 0; it < max_iters && rn > target; ++it) {
    Vec step = J(x).partialPivLu().solve(-r);
    double lambda = 1.0;
    bool moved = false;
    for (int bt = 0; bt < 40; ++bt) {
      Vec xn = x + lambda * step;
      Vec rnew = F(xn);
      double rnn = rnew.lpNorm<Eigen::Infinity>();
      if (rnn < rn * (1.0 - 1e-4 * lambda) || rnn <= target) {
        x = xn;
        r = rnew;
        rn = rnn;
        moved = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!moved) break;
  }
  if (rn > accept)
    throw InnerSolverDiverged("damped Newton stalled at residual " +
                              format_double(rn));
  return {x, rn};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Steppers. Each advances one iteration and reports the gradients it used
// (and, where natural, its own per-step error value) through StepIO.
// ---------------------------------------------------------------------------

/// Implicit-implicit Euler step: (x_{k+1}, z_{k+1}) jointly satisfy
///   grad_h(z_{k+1}) - grad_h(z_k) = -alpha_k grad_f(x_{k+1})
///   (1 + tau_k) x_{k+1} = tau_k z_{k+1} + x_k,        tau_k = alpha_k / A_k.
/// Solved exactly for Euclidean quadratics, by damped Newton otherwise.
inline IterateState implicit_step(const Objective& f,
                                  const DistanceGenerator& h,
                                  const DiscreteSchedule& s,
                                  const IterateState& st, StepIO* io) {
  int k = st.k;
  double Ak = s.A(k);
  double a = s.alpha(k);
  double tau = a / Ak;

  IterateState nx = st;
  nx.k = k + 1;
  if (detail::quad_fast_path(f, h)) {
    const QuadraticForm& q = *f.quadratic;
    Vec rhs = tau * (st.z - q.center) + (st.x - q.center);
    Vec u = q.solve_shifted(1.0 + tau, tau * a, rhs);
    nx.x = q.center + u;
    Vec g = q.apply(u);
    nx.z = st.z - a * g;
    nx.z_dual.coords = nx.z;
    if (io) io->grads.push_back({"g_mirror", g});
  } else {
    if (!f.hessian_oracle)
      throw InnerSolverDiverged(
          "implicit_step: generic path needs a Hessian oracle");
    DualPoint zk_dual = st.z_dual;
    auto z_of = [&](const Vec& x) {
      DualPoint d{zk_dual.coords - a * f.gradient(x)};
      return mirror_inverse(h, d);
    };
    auto F = [&](const Vec& x) {
      return Vec((1.0 + tau) * x - tau * z_of(x) - st.x);
    };
    auto J = [&](const Vec& x) {
      Vec z = z_of(x);
      Mat m = (1.0 + tau) * Mat::Identity(x.size(), x.size());
      m += tau * a * detail::mirror_inverse_jacobian(h, z) *
           f.hessian_oracle(x);
      return m;
    };
    double scale = 1.0 + st.x.norm();
    auto res =
        detail::damped_newton(F, J, st.x, 1e-12 * scale, 5e-11 * scale, 200);
    nx.x = res.x;
    Vec g = f.gradient(nx.x);
    nx.z_dual.coords = zk_dual.coords - a * g;
    nx.z = mirror_inverse(h, nx.z_dual);
    if (io) io->grads.push_back({"g_mirror", g});
  }
  nx.y = nx.x;
  if (io) {
    // Both variational conditions, measured where they are meant to hold.
    Vec r2 = (1.0 + tau) * nx.x - tau * nx.z - st.x;
    double res = r2.lpNorm<Eigen::Infinity>() / (1.0 + tau);
    Vec r1 = grad(h, nx.z).coords - st.z_dual.coords +
             a * io->grads.back().value;
    res = std::max(res, detail::tangential_inf_norm(h.domain, r1) /
                            (1.0 + a * io->grads.back().value.norm()));
    io->residual = res;
    if (res > 1e-10 * (1.0 + nx.x.lpNorm<Eigen::Infinity>()))
      throw InnerSolverDiverged("implicit_step residual " +
                                format_double(res));
  }
  return nx;
}

/// Family-I accelerated step (mirror update driven by grad f(x_{k+1})).
inline IterateState agd_family_I_step(const Objective& f,
                                      const DistanceGenerator& h,
                                      const DiscreteSchedule& s,
                                      const IterateState& st,
                                      const GradientMapSpec& gmap,
                                      const GradFn& grad_f, StepIO* io) {
  int k = st.k;
  double a = s.alpha(k);
  double tau = a / s.A(k + 1);

  IterateState nx = st;
  nx.k = k + 1;
  nx.x = tau * st.z + (1.0 - tau) * st.y;
  Vec g = grad_f(nx.x, "g_mirror");
  nx.z = st.z;
  nx.z_dual = st.z_dual;
  detail::mirror_step(h, a, g, nx.z, nx.z_dual);
  switch (gmap.kind) {
    case GradientMapSpec::Kind::identity:
      nx.y = nx.x;
      break;
    case GradientMapSpec::Kind::nesterov:
      nx.y = nx.x - gmap.eps * g;
      break;
    case GradientMapSpec::Kind::universal_nu:
      nx.y = nx.x - gmap.eps_tilde * g;
      break;
    case GradientMapSpec::Kind::tseng_coupled:
      nx.y = tau * nx.z + (1.0 - tau) * st.y;
      break;
    case GradientMapSpec::Kind::universal_higher:
      nx.y = apply_gradient_map(gmap, f, nx.x);
      break;
  }
  (void)io;
  return nx;
}

/// Family-II accelerated step (mirror update driven by grad f(y_{k+1})).
inline IterateState agd_family_II_step(const Objective& f,
                                       const DistanceGenerator& h,
                                       const DiscreteSchedule& s,
                                       const IterateState& st,
                                       const GradientMapSpec& gmap,
                                       const GradFn& grad_f, StepIO* io) {
  int k = st.k;
  double a = s.alpha(k);
  double tau = a / s.A(k + 1);

  IterateState nx = st;
  nx.k = k + 1;
  nx.x = tau * st.z + (1.0 - tau) * st.y;
  switch (gmap.kind) {
    case GradientMapSpec::Kind::identity:
      nx.y = nx.x;
      break;
    case GradientMapSpec::Kind::nesterov:
      nx.y = nx.x - gmap.eps * grad_f(nx.x, "g_map");
      break;
    case GradientMapSpec::Kind::universal_nu:
      nx.y = nx.x - gmap.eps_tilde * grad_f(nx.x, "g_map");
      break;
    default:
      nx.y = apply_gradient_map(gmap, f, nx.x);
      break;
  }
  Vec gy = grad_f(nx.y, "g_mirror");
  nx.z = st.z;
  nx.z_dual = st.z_dual;
  detail::mirror_step(h, a, gy, nx.z, nx.z_dual);
  (void)io;
  return nx;
}

/// Strongly convex accelerated step. The state's x slot holds the coupling
/// point x_k built from the current (z_k, y_k); it is consumed here and the
/// successor's coupling point is stored on the way out.
inline IterateState agd_strong_step(const Objective& f,
                                    const DistanceGenerator& h, double mu,
                                    const DiscreteSchedule& s,
                                    const IterateState& st,
                                    const GradientMapSpec& gmap,
                                    const GradFn& grad_f, StepIO* io) {
  int k = st.k;
  double tau = s.tau(k);  // alpha_k / A_{k+1}

  Vec xk = st.x;  // coupling point of index k
  Vec g = grad_f(xk, "g_mirror");

  IterateState nx = st;
  nx.k = k + 1;
  Vec hx = grad(h, xk).coords;
  nx.z_dual.coords =
      st.z_dual.coords + tau * (hx - st.z_dual.coords - g / mu);
  nx.z = mirror_inverse(h, nx.z_dual);
  switch (gmap.kind) {
    case GradientMapSpec::Kind::identity:
      nx.y = xk;
      break;
    case GradientMapSpec::Kind::nesterov:
      nx.y = xk - gmap.eps * g;
      break;
    case GradientMapSpec::Kind::tseng_coupled:
      nx.y = tau * nx.z + (1.0 - tau) * st.y;
      break;
    default:
      nx.y = apply_gradient_map(gmap, f, xk);
      break;
  }
  double tau_next = s.tau(k + 1);
  nx.x = (tau_next * nx.z + nx.y) / (1.0 + tau_next);
  (void)io;
  return nx;
}

/// Strongly convex quasi-monotone step; the z update is linear in the dual
/// variable and therefore closed-form for every supported geometry.
inline IterateState quasi_monotone_strong_step(
    const Objective& /*f*/, const DistanceGenerator& h, double mu,
    const DiscreteSchedule& s, const IterateState& st, const GradFn& grad_f,
    StepIO* io) {
  int k = st.k;
  double tau = s.alpha(k) / s.A(k);

  IterateState nx = st;
  nx.k = k + 1;
  nx.x = (tau * st.z + st.x) / (1.0 + tau);
  Vec g = grad_f(nx.x, "g_mirror");
  if (h.kind == GeneratorKind::euclidean) {
    Vec z = (st.z + tau * nx.x - (tau / mu) * g) / (1.0 + tau);
    if (h.domain.kind == DomainKind::box)
      z = z.cwiseMax(h.domain.lo).cwiseMin(h.domain.hi);
    nx.z = z;
    nx.z_dual.coords = z;
  } else {
    Vec hx = grad(h, nx.x).coords;
    nx.z_dual.coords =
        (st.z_dual.coords + tau * (hx - g / mu)) / (1.0 + tau);
    nx.z = mirror_inverse(h, nx.z_dual);
  }
  nx.y = nx.x;
  if (io) {
    Vec r = grad(h, nx.z).coords - st.z_dual.coords -
            tau * (grad(h, nx.x).coords - grad(h, nx.z).coords - g / mu);
    io->residual = detail::tangential_inf_norm(h.domain, r);
  }
  return nx;
}

/// Implicit Euler step for the strongly convex dynamics; joint solve of
/// the coupled variational conditions.
inline IterateState implicit_strong_step(const Objective& f,
                                         const DistanceGenerator& h,
                                         double mu, const DiscreteSchedule& s,
                                         const IterateState& st, StepIO* io) {
  int k = st.k;
  double tau = s.alpha(k) / s.A(k);

  IterateState nx = st;
  nx.k = k + 1;
  if (detail::quad_fast_path(f, h)) {
    const QuadraticForm& q = *f.quadratic;
    // Substitute z = ((1+tau) x - x_k)/tau into the dual condition.
    double acoef = (1.0 + 2.0 * tau) / tau;
    Vec rhs0 = st.z + (1.0 + tau) / tau * st.x;
    Vec u = q.solve_shifted(acoef, tau / mu, rhs0 - acoef * q.center);
    nx.x = q.center + u;
    nx.z = ((1.0 + tau) * nx.x - st.x) / tau;
    nx.z_dual.coords = nx.z;
    if (io) io->grads.push_back({"g_mirror", q.apply(u)});
  } else {
    if (!f.hessian_oracle)
      throw InnerSolverDiverged(
          "implicit_strong_step: generic path needs a Hessian oracle");
    // Solve in the dual coordinate w = grad_h(z_{k+1}); both z and the
    // coupled x stay inside the domain at every Newton iterate.
    auto x_of = [&](const Vec& w) {
      Vec z = mirror_inverse(h, {w});
      return Vec((tau * z + st.x) / (1.0 + tau));
    };
    auto F = [&](const Vec& w) {
      Vec x = x_of(w);
      return Vec((1.0 + tau) * w - st.z_dual.coords -
                 tau * grad(h, x).coords + (tau / mu) * f.gradient(x));
    };
    auto J = [&](const Vec& w) {
      Vec z = mirror_inverse(h, {w});
      Vec x = x_of(w);
      Mat dxdw =
          tau / (1.0 + tau) * detail::mirror_inverse_jacobian(h, z);
      Mat m = (1.0 + tau) * Mat::Identity(w.size(), w.size());
      m -= tau * detail::hess_h(h, x) * dxdw;
      m += (tau / mu) * f.hessian_oracle(x) * dxdw;
      return m;
    };
    double scale = 1.0 + st.z_dual.coords.norm();
    auto res = detail::damped_newton(F, J, st.z_dual.coords, 1e-12 * scale,
                                     5e-11 * scale, 200);
    nx.z_dual.coords = res.x;
    nx.z = mirror_inverse(h, nx.z_dual);
    nx.x = x_of(res.x);
    if (io) io->grads.push_back({"g_mirror", f.gradient(nx.x)});
  }
  nx.y = nx.x;
  if (io) {
    const Vec& g = io->grads.back().value;
    Vec r = grad(h, nx.z).coords - st.z_dual.coords -
            tau * (grad(h, nx.x).coords - grad(h, nx.z).coords - g / mu);
    io->residual = detail::tangential_inf_norm(h.domain, r);
    if (io->residual > 1e-10 * (1.0 + nx.z_dual.coords.lpNorm<Eigen::Infinity>()))
      throw InnerSolverDiverged("implicit_strong_step residual " +
                                format_double(io->residual));
  }
  return nx;
}

/// Conditional-gradient step; the iterate stays a convex combination of
/// feasible points.
inline IterateState frank_wolfe_step(const Objective& f,
                                     const FeasibleSet& set,
                                     const DiscreteSchedule& s,
                                     const IterateState& st, StepIO* io) {
  int k = st.k;
  double a = s.alpha(k);
  double tau = a / s.A(k + 1);
  Vec g = f.gradient(st.x);
  Vec v = lmo(set, g);

  IterateState nx = st;
  nx.k = k + 1;
  nx.x = tau * v + (1.0 - tau) * st.x;
  nx.y = nx.x;
  nx.z = nx.x;
  nx.z_dual.coords = nx.x;
  if (io) {
    io->grads.push_back({"g_mirror", g});
    io->aux.push_back({"fw_vertex", v});
    double dn = (v - st.x).norm();
    if (f.meta.lipschitz_grad_L) {
      double eps = 1.0 / *f.meta.lipschitz_grad_L;
      io->eps_step = s.A(k + 1) * tau * tau / (2.0 * eps * s.delta) * dn * dn;
    } else if (f.meta.holder) {
      double nu = f.meta.holder->nu, eps = f.meta.holder->epsilon;
      io->eps_step = s.A(k + 1) * std::pow(tau, 1.0 + nu) /
                     ((1.0 + nu) * eps * s.delta) * std::pow(dn, 1.0 + nu);
    }
  }
  return nx;
}

/// Accelerated proximal step with the coupling map
/// y_{k+1} = tau_k z_{k+1} + (1 - tau_k) y_k.
inline IterateState fista_step(const CompositeObjective& c,
                               const DistanceGenerator& h,
                               const DiscreteSchedule& s,
                               const IterateState& st, StepIO* io) {
  if (h.kind != GeneratorKind::euclidean)
    throw IncompatibleConfiguration(
        "fista_step requires the Euclidean generator (closed-form prox)");
  int k = st.k;
  double a = s.alpha(k);
  double tau = a / s.A(k + 1);

  IterateState nx = st;
  nx.k = k + 1;
  nx.x = tau * st.z + (1.0 - tau) * st.y;
  Vec gphi = c.smooth_part.gradient(nx.x);
  nx.z = prox(c, st.z - a * gphi, a);
  nx.z_dual.coords = nx.z;
  nx.y = tau * nx.z + (1.0 - tau) * st.y;
  if (io) {
    io->grads.push_back({"g_mirror", gphi});
    // Subgradient of psi selected by the prox, from its optimality system.
    Vec gpsi = (st.z - a * gphi - nx.z) / a;
    io->aux.push_back({"subgrad_psi", gpsi});
    double dz = (nx.z - st.z).norm();
    double sig = h.sigma;
    double eps = 1.0 / *c.smooth_part.meta.lipschitz_grad_L;
    io->eps_step =
        (-sig / 2.0 + s.A(k + 1) * tau * tau / (2.0 * eps)) * dz * dz /
        s.delta;
  }
  return nx;
}

/// Strongly convex proximal step (Euclidean setting). As with agd_strong,
/// the state's x slot carries the coupling point.
inline IterateState prox_strong_step(const CompositeObjective& c, double mu,
                                     const DiscreteSchedule& s,
                                     const IterateState& st, StepIO* io) {
  int k = st.k;
  double tau = s.tau(k);  // alpha_k / A_{k+1}

  Vec xk = st.x;
  Vec gphi = c.smooth_part.gradient(xk);

  IterateState nx = st;
  nx.k = k + 1;
  Vec w = (1.0 - tau) * st.z + tau * xk - (tau / mu) * gphi;
  nx.z = prox(c, w, tau / mu);
  nx.z_dual.coords = nx.z;
  nx.y = tau * nx.z + (1.0 - tau) * st.y;
  double tau_next = s.tau(k + 1);
  nx.x = (tau_next * nx.z + nx.y) / (1.0 + tau_next);
  if (io) {
    io->grads.push_back({"g_mirror", gphi});
    Vec gpsi = (w - nx.z) * mu / tau;
    io->aux.push_back({"g_comb", Vec(gphi + gpsi)});
  }
  return nx;
}

/// Plain higher-order descent x_{k+1} = G_{eps,p,nu,N}(x_k).
inline IterateState higher_order_descent_step(const Objective& f,
                                              const GradientMapSpec& gmap,
                                              const IterateState& st,
                                              StepIO* io) {
  IterateState nx = st;
  nx.k = st.k + 1;
  nx.x = apply_gradient_map(gmap, f, st.x);
  nx.y = nx.x;
  nx.z = nx.x;
  nx.z_dual.coords = nx.x;
  if (io) io->grads.push_back({"g_new", f.gradient(nx.x)});
  return nx;
}

// ---------------------------------------------------------------------------
// Run driver
// ---------------------------------------------------------------------------

struct MethodConfig {
  MethodId id = MethodId::agd_I;
  GradientMapSpec gmap;
  NoiseSpec noise;

  std::string label() const {
    std::string n = method_name(id);
    if (id == MethodId::agd_I || id == MethodId::agd_II ||
        id == MethodId::higher_order_descent)
      n += "[" + gmap.label() + "]";
    if (noise.active()) n = "stochastic_" + n;
    return n;
  }
};

/// Problem view handed to run(): exactly one of `objective` / `composite`
/// is the target; `set` only accompanies Frank-Wolfe.
struct RunInput {
  const Objective* objective = nullptr;
  const CompositeObjective* composite = nullptr;
  const FeasibleSet* set = nullptr;
  std::string problem_id;

  const Objective& obj() const {
    if (!objective) throw IncompatibleConfiguration("method needs a plain objective");
    return *objective;
  }
  const CompositeObjective& comp() const {
    if (!composite)
      throw IncompatibleConfiguration("method needs a composite objective");
    return *composite;
  }
};

namespace detail {

inline void gate(bool ok, const std::string& why) {
  if (!ok) throw IncompatibleConfiguration(why);
}

inline double require_mu(const SmoothnessMeta& m, const std::string& who) {
  gate(m.strong_convexity_mu.has_value(),
       who + " requires declared strong convexity (mu)");
  return *m.strong_convexity_mu;
}

}  // namespace detail

/// Executes n_iters steps of the configured method. Deterministic: the
/// trace is a pure function of (config, problem, schedule, x0, seed).
inline Trace run(const MethodConfig& cfg, const RunInput& in,
                 const DistanceGenerator& h, DiscreteSchedule s, int n_iters,
                 std::uint64_t seed, const Vec& x0) {
  using detail::gate;
  Trace tr;
  Rng rng(seed);
  tr.seed = seed;

  const bool is_composite =
      cfg.id == MethodId::fista || cfg.id == MethodId::prox_strong;
  const Objective* f = nullptr;
  const CompositeObjective* comp = nullptr;
  if (is_composite) {
    comp = &in.comp();
    f = &comp->smooth_part;
  } else {
    f = &in.obj();
  }

  // --- compatibility gate -------------------------------------------------
  gate(x0.size() == f->dim, "x0 dimension mismatch");
  gate(h.dim() == f->dim, "geometry dimension mismatch");
  GradientMapSpec gmap = cfg.gmap;
  auto auto_eps = [&]() {
    if (gmap.eps == 0.0) {
      gate(f->meta.lipschitz_grad_L.has_value(),
           "nesterov map requires declared smoothness L");
      gmap.eps = 1.0 / *f->meta.lipschitz_grad_L;
    }
  };
  std::optional<double> mu;
  switch (cfg.id) {
    case MethodId::implicit:
      s.convention = TauConvention::over_Ak;
      break;
    case MethodId::agd_I:
    case MethodId::agd_II:
      s.convention = TauConvention::over_Ak1;
      if (gmap.kind == GradientMapSpec::Kind::nesterov) auto_eps();
      if (gmap.kind == GradientMapSpec::Kind::universal_higher) {
        gate(cfg.id == MethodId::agd_II,
             "universal_higher map runs in family II");
        gate(gmap.p == 2 || f->has_hessian(),
             "universal_higher(p=3) requires a Hessian oracle");
      }
      if (gmap.kind == GradientMapSpec::Kind::tseng_coupled)
        gate(cfg.id == MethodId::agd_I, "tseng map couples through family I");
      break;
    case MethodId::implicit_strong:
      s.convention = TauConvention::over_Ak;
      mu = detail::require_mu(f->meta, "implicit_strong");
      break;
    case MethodId::agd_strong:
      s.convention = TauConvention::over_Ak1;
      mu = detail::require_mu(f->meta, "agd_strong");
      if (gmap.kind == GradientMapSpec::Kind::identity)
        gmap = GradientMapSpec::nesterov(0.0);
      if (gmap.kind == GradientMapSpec::Kind::nesterov) auto_eps();
      // The forward/backward identification only scales sensibly for
      // constant tau; richer schedules are rejected.
      gate(std::abs(s.tau(0) - s.tau(1)) < 1e-9 * s.tau(0) &&
               std::abs(s.tau(0) - s.tau(7)) < 1e-9 * s.tau(0),
           "agd_strong requires a constant-tau (geometric) schedule");
      break;
    case MethodId::quasi_monotone_strong:
      s.convention = TauConvention::over_Ak;
      mu = detail::require_mu(f->meta, "quasi_monotone_strong");
      break;
    case MethodId::frank_wolfe:
      s.convention = TauConvention::over_Ak1;
      gate(in.set != nullptr, "frank_wolfe requires a feasible set");
      gate(in.set->dim == f->dim, "feasible set dimension mismatch");
      gate(in.set->contains(x0), "frank_wolfe: x0 outside the feasible set");
      gate(f->meta.lipschitz_grad_L.has_value() || f->meta.holder.has_value(),
           "frank_wolfe requires smoothness or Holder metadata");
      break;
    case MethodId::fista:
      s.convention = TauConvention::over_Ak1;
      gate(comp->smooth_part.meta.lipschitz_grad_L.has_value(),
           "fista requires smoothness of the smooth part");
      gate(h.kind == GeneratorKind::euclidean,
           "fista requires the Euclidean generator");
      break;
    case MethodId::prox_strong:
      s.convention = TauConvention::over_Ak1;
      mu = detail::require_mu(comp->smooth_part.meta, "prox_strong");
      gate(h.kind == GeneratorKind::euclidean,
           "prox_strong is stated for Euclidean geometry");
      gate(std::abs(s.tau(0) - s.tau(1)) < 1e-9 * s.tau(0),
           "prox_strong requires a constant-tau schedule");
      break;
    case MethodId::higher_order_descent:
      gate(gmap.kind == GradientMapSpec::Kind::universal_higher,
           "higher_order_descent runs the universal_higher map");
      gate(gmap.p == 2 || f->has_hessian(),
           "universal_higher(p=3) requires a Hessian oracle");
      break;
  }
  if (cfg.noise.active())
    gate(cfg.id == MethodId::agd_I || cfg.id == MethodId::agd_strong ||
             cfg.id == MethodId::quasi_monotone_strong,
         "stochastic gradients are supported for the family-I, strongly "
         "convex accelerated, and strong quasi-monotone methods");

  // --- context ------------------------------------------------------------
  tr.ctx.method = cfg.id;
  tr.ctx.gmap = gmap;
  tr.ctx.method_id = MethodConfig{cfg.id, gmap, cfg.noise}.label();
  tr.ctx.problem_id = in.problem_id;
  tr.ctx.geometry = h;
  tr.ctx.sigma = h.sigma;
  tr.ctx.p_mod = h.p;
  tr.ctx.delta = s.delta;
  tr.ctx.convention = s.convention;
  if (f->meta.lipschitz_grad_L) tr.ctx.eps = 1.0 / *f->meta.lipschitz_grad_L;
  tr.ctx.mu = mu;
  tr.ctx.holder = f->meta.holder;
  tr.ctx.G = f->meta.subgradient_bound_G;
  if (in.set) tr.ctx.set_diameter = in.set->diameter();
  tr.ctx.composite = is_composite;
  tr.ctx.stochastic = cfg.noise.active();
  tr.ctx.noise = cfg.noise;

  // --- initial state --------------------------------------------------------
  IterateState st;
  st.k = 0;
  st.x = x0;
  st.y = x0;
  st.z = x0;
  st.z_dual = grad(h, x0);
  if (cfg.id == MethodId::agd_strong || cfg.id == MethodId::prox_strong) {
    double tau0 = s.tau(0);
    st.x = (tau0 * st.z + st.y) / (1.0 + tau0);
  }

  StepIO io;
  auto grad_f = [&](const Vec& x, const char* tag) {
    Vec g = f->smooth ? f->gradient(x) : f->grad_oracle(x);
    if (cfg.noise.active()) {
      Vec draw = cfg.noise.kind == NoiseSpec::Kind::gaussian
                     ? gaussian_vector(static_cast<int>(x.size()), rng)
                     : uniform_vector(static_cast<int>(x.size()), -1.0, 1.0,
                                      rng);
      g += cfg.noise.scale * draw;
      io.aux.push_back({"noise", draw});
    }
    io.grads.push_back({tag, g});
    return g;
  };

  auto value_of = [&](const Vec& x) {
    return is_composite ? comp->value(x) : f->value(x);
  };
  auto gap_of = [&](const Vec& x) -> double {
    if (is_composite) {
      if (!comp->gap_oracle && !comp->reference)
        return std::numeric_limits<double>::quiet_NaN();
      return comp->gap(x);
    }
    if (!f->gap_oracle && !f->reference)
      return std::numeric_limits<double>::quiet_NaN();
    return f->gap(x);
  };

  auto push_record = [&](const IterateState& state, StepIO&& sio) {
    TraceRecord r;
    r.k = state.k;
    r.A = s.A(state.k);
    r.alpha = s.A(state.k + 1) - s.A(state.k);
    r.tau = s.convention == TauConvention::over_Ak
                ? r.alpha / r.A
                : r.alpha / s.A(state.k + 1);
    r.x = state.x;
    r.y = state.y;
    r.z = state.z;
    r.z_dual = state.z_dual.coords;
    r.f_x = value_of(state.x);
    r.f_y = value_of(state.y);
    r.gap_x = gap_of(state.x);
    r.gap_y = gap_of(state.y);
    r.grads = std::move(sio.grads);
    r.aux = std::move(sio.aux);
    r.eps_step = sio.eps_step;
    tr.records.push_back(std::move(r));
    tr.ctx.implicit_residual = std::max(tr.ctx.implicit_residual, sio.residual);
  };

  push_record(st, StepIO{});
  for (int k = 0; k < n_iters; ++k) {
    io = StepIO{};
    IterateState next;
    switch (cfg.id) {
      case MethodId::implicit:
        next = implicit_step(*f, h, s, st, &io);
        break;
      case MethodId::agd_I:
        next = agd_family_I_step(*f, h, s, st, gmap, grad_f, &io);
        break;
      case MethodId::agd_II:
        next = agd_family_II_step(*f, h, s, st, gmap, grad_f, &io);
        break;
      case MethodId::implicit_strong:
        next = implicit_strong_step(*f, h, *mu, s, st, &io);
        break;
      case MethodId::agd_strong:
        next = agd_strong_step(*f, h, *mu, s, st, gmap, grad_f, &io);
        break;
      case MethodId::quasi_monotone_strong:
        next = quasi_monotone_strong_step(*f, h, *mu, s, st, grad_f, &io);
        break;
      case MethodId::frank_wolfe:
        next = frank_wolfe_step(*f, *in.set, s, st, &io);
        break;
      case MethodId::fista:
        next = fista_step(*comp, h, s, st, &io);
        break;
      case MethodId::prox_strong:
        next = prox_strong_step(*comp, *mu, s, st, &io);
        break;
      case MethodId::higher_order_descent:
        next = higher_order_descent_step(*f, gmap, st, &io);
        break;
    }
    st = next;
    push_record(st, std::move(io));
  }
  return tr;
}

/// Convenience wrapper matching the stochastic-variant interface: the base
/// method with the gradient oracle replaced by gradient + noise draw.
inline MethodConfig stochastic_variant(MethodId base, NoiseSpec noise) {
  MethodConfig cfg;
  cfg.id = base;
  cfg.noise = noise;
  if (base == MethodId::agd_I) cfg.gmap = GradientMapSpec::identity();
  return cfg;
}

}  // namespace momentum
