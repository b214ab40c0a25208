#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "momentum/problems.hpp"
#include "momentum/schedule.hpp"

namespace momentum {

struct IntegratorOpts {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double max_norm = 1e8;
  long max_steps = 4000000;
  int samples = 201;  // evenly spaced output times, endpoints included
};

struct ContinuousState {
  double t = 0.0;
  Vec X, Z;
};

struct ContinuousSample {
  ContinuousState state;
  double f_value = 0.0;
  double lyapunov_value = 0.0;
};

enum class ContinuousKind { weak, strong, frank_wolfe };

struct ContinuousTrace {
  std::vector<ContinuousSample> samples;
  struct Stats {
    long steps = 0;
    double max_local_error = 0.0;  // accepted-step error estimate, scaled
  } stats;
  ContinuousSchedule sched;
  ContinuousKind kind = ContinuousKind::weak;
  double mu = 0.0;
  double rel_tol = 1e-8;  // tolerance the integration ran at
};

namespace detail {

/// Dormand-Prince 5(4) pair with PI-free step control; steps are clamped
/// to land exactly on the requested sample times so no interpolation is
/// ever needed.
class Rk45 {
 public:
  using Field = std::function<Vec(double, const Vec&)>;

  Rk45(Field f, IntegratorOpts opts) : f_(std::move(f)), opts_(opts) {}

  /// Integrates from (t0, y0) hitting every time in `out_times` (sorted,
  /// first element equal to t0); calls `emit` at each of them.
  void integrate(double t0, Vec y0, const std::vector<double>& out_times,
                 const std::function<void(double, const Vec&)>& emit,
                 ContinuousTrace::Stats* stats) {
    static constexpr double c2 = 1. / 5, c3 = 3. / 10, c4 = 4. / 5,
                            c5 = 8. / 9;
    static constexpr double a21 = 1. / 5;
    static constexpr double a31 = 3. / 40, a32 = 9. / 40;
    static constexpr double a41 = 44. / 45, a42 = -56. / 15, a43 = 32. / 9;
    static constexpr double a51 = 19372. / 6561, a52 = -25360. / 2187,
                            a53 = 64448. / 6561, a54 = -212. / 729;
    static constexpr double a61 = 9017. / 3168, a62 = -355. / 33,
                            a63 = 46732. / 5247, a64 = 49. / 176,
                            a65 = -5103. / 18656;
    static constexpr double b1 = 35. / 384, b3 = 500. / 1113, b4 = 125. / 192,
                            b5 = -2187. / 6784, b6 = 11. / 84;
    static constexpr double e1 = 35. / 384 - 5179. / 57600,
                            e3 = 500. / 1113 - 7571. / 16695,
                            e4 = 125. / 192 - 393. / 640,
                            e5 = -2187. / 6784 + 92097. / 339200,
                            e6 = 11. / 84 - 187. / 2100, e7 = -1. / 40;

    double t = t0;
    Vec y = std::move(y0);
    std::size_t next = 0;
    if (!out_times.empty() && std::abs(out_times[0] - t0) < 1e-14) {
      emit(t, y);
      ++next;
    }
    if (next >= out_times.size()) return;

    double h = (out_times.back() - t0) / 1000.0;
    Vec k1 = f_(t, y);
    long steps = 0;
    while (next < out_times.size()) {
      if (++steps > opts_.max_steps)
        throw IntegrationBlowup("integrator exceeded max step count");
      bool hits_sample = false;
      if (t + h >= out_times[next] - 1e-14 * std::max(1.0, std::abs(t))) {
        h = out_times[next] - t;
        hits_sample = true;
      }
      Vec k2 = f_(t + c2 * h, y + h * (a21 * k1));
      Vec k3 = f_(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
      Vec k4 = f_(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
      Vec k5 = f_(t + c5 * h,
                  y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      Vec k6 = f_(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 +
                                  a65 * k5));
      Vec ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      Vec k7 = f_(t + h, ynew);
      Vec err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

      double scale = 0.0;
      for (int i = 0; i < y.size(); ++i) {
        double s = opts_.abs_tol +
                   opts_.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
        scale = std::max(scale, std::abs(err[i]) / s);
      }
      if (scale <= 1.0) {
        t += h;
        y = std::move(ynew);
        k1 = std::move(k7);
        if (stats) {
          ++stats->steps;
          stats->max_local_error = std::max(stats->max_local_error, scale);
        }
        if (!finite(y) || y.lpNorm<Eigen::Infinity>() > opts_.max_norm)
          throw IntegrationBlowup("state norm exceeded max_norm at t=" +
                                  format_double(t));
        if (hits_sample) {
          emit(t, y);
          ++next;
        }
      }
      double fac = scale > 0.0 ? 0.9 * std::pow(scale, -0.2) : 5.0;
      h *= std::clamp(fac, 0.2, 5.0);
    }
  }

 private:
  Field f_;
  IntegratorOpts opts_;
};

inline std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  v.back() = b;
  return v;
}

}  // namespace detail

namespace dynamics_detail {

struct FirstOrderSystem {
  // State layout: [X; w] with w = grad_h(Z).
  const DistanceGenerator* h;
  int dim;

  Vec pack(const Vec& X, const Vec& w) const {
    Vec y(2 * dim);
    y.head(dim) = X;
    y.tail(dim) = w;
    return y;
  }
  Vec X_of(const Vec& y) const { return y.head(dim); }
  Vec Z_of(const Vec& y) const {
    try {
      return mirror_inverse(*h, {Vec(y.tail(dim))});
    } catch (const NotInvertible& e) {
      throw MirrorInversionFailure(e.what());
    }
  }
};

}  // namespace dynamics_detail

/// Evaluates the continuous Lyapunov function of the requested kind along
/// a trace; f_value and e^{beta} come from the stored samples/schedule.
inline std::vector<double> continuous_lyapunov_series(
    const ContinuousTrace& tr, ContinuousKind kind,
    const DistanceGenerator& h, const Vec& x_star, double f_star,
    double mu = 0.0) {
  std::vector<double> E;
  E.reserve(tr.samples.size());
  for (const auto& s : tr.samples) {
    double eb = tr.sched.ebeta(s.state.t);
    double gap = s.f_value - f_star;
    double val = 0.0;
    switch (kind) {
      case ContinuousKind::weak:
        val = divergence(h, x_star, s.state.Z) + eb * gap;
        break;
      case ContinuousKind::strong:
        val = eb * (mu * divergence(h, x_star, s.state.Z) + gap);
        break;
      case ContinuousKind::frank_wolfe:
        val = eb * gap;
        break;
    }
    E.push_back(val);
  }
  return E;
}

struct MonotonicityReport {
  std::vector<double> E;
  bool pass = true;
  int first_fail = -1;
  double slack = 0.0;
};

/// Monotonicity verdict with slack 10 x integrator tolerance x max |E|.
inline MonotonicityReport continuous_lyapunov(const ContinuousTrace& tr,
                                              ContinuousKind kind,
                                              const DistanceGenerator& h,
                                              const Vec& x_star, double f_star,
                                              double mu = 0.0) {
  if (tr.samples.empty())
    throw EmptySeries("continuous_lyapunov: empty trace");
  MonotonicityReport rep;
  rep.E = continuous_lyapunov_series(tr, kind, h, x_star, f_star, mu);
  double emax = 0.0;
  for (double e : rep.E) {
    if (!std::isfinite(e))
      throw IntegrationBlowup("non-finite Lyapunov value on trace");
    emax = std::max(emax, std::abs(e));
  }
  rep.slack = 10.0 * tr.rel_tol * emax;
  for (std::size_t i = 0; i + 1 < rep.E.size(); ++i) {
    if (rep.E[i + 1] - rep.E[i] > rep.slack) {
      rep.pass = false;
      rep.first_fail = static_cast<int>(i);
      break;
    }
  }
  return rep;
}

/// Integrates d/dt grad_h(Z) = -beta_dot e^{ beta} grad f(X),
/// Z = X + (1/beta_dot) X_dot, in (X, grad_h(Z)) coordinates.
inline ContinuousTrace simulate_first_el(const Objective& f,
                                         const DistanceGenerator& h,
                                         const ContinuousSchedule& s,
                                         const Vec& x0, const Vec& v0,
                                         double t0, double t1,
                                         const IntegratorOpts& opts = {}) {
  const int d = f.dim;
  dynamics_detail::FirstOrderSystem sys{&h, d};
  Vec Z0 = x0 + v0 / s.beta_dot(t0);
  ContinuousTrace tr;
  tr.sched = s;
  tr.kind = ContinuousKind::weak;
  tr.rel_tol = opts.rel_tol;

  detail::Rk45 rk(
      [&](double t, const Vec& y) {
        Vec X = sys.X_of(y);
        Vec Z = sys.Z_of(y);
        double bd = s.beta_dot(t);
        Vec dX = bd * (Z - X);
        Vec dw = -bd * s.ebeta(t) * f.gradient(X);
        return sys.pack(dX, dw);
      },
      opts);
  rk.integrate(t0, sys.pack(x0, grad(h, Z0).coords),
               detail::linspace(t0, t1, opts.samples),
               [&](double t, const Vec& y) {
                 ContinuousSample smp;
                 smp.state = {t, sys.X_of(y), sys.Z_of(y)};
                 smp.f_value = f.value(smp.state.X);
                 if (f.reference)
                   smp.lyapunov_value =
                       divergence(h, f.reference->x_star, smp.state.Z) +
                       s.ebeta(t) * (smp.f_value - f.reference->f_star);
                 tr.samples.push_back(std::move(smp));
               },
               &tr.stats);
  return tr;
}

/// Second-family dynamics. For Euclidean h with a linear schedule the
/// equivalent second-order form X_dd + 2 gamma X_d + (gamma^2/mu) grad f = 0
/// is integrated directly.
inline ContinuousTrace simulate_second_el(const Objective& f,
                                          const DistanceGenerator& h,
                                          double mu,
                                          const ContinuousSchedule& s,
                                          const Vec& x0, const Vec& v0,
                                          double t0, double t1,
                                          const IntegratorOpts& opts = {}) {
  const int d = f.dim;
  ContinuousTrace tr;
  tr.sched = s;
  tr.kind = ContinuousKind::strong;
  tr.mu = mu;
  tr.rel_tol = opts.rel_tol;

  auto emit = [&](double t, const Vec& X, const Vec& Z) {
    ContinuousSample smp;
    smp.state = {t, X, Z};
    smp.f_value = f.value(X);
    if (f.reference)
      smp.lyapunov_value =
          s.ebeta(t) * (mu * divergence(h, f.reference->x_star, Z) +
                        smp.f_value - f.reference->f_star);
    tr.samples.push_back(std::move(smp));
  };

  if (h.kind == GeneratorKind::euclidean && s.name == "linear") {
    double gamma = s.beta_dot(t0);
    Vec y0(2 * d);
    y0.head(d) = x0;
    y0.tail(d) = v0;
    detail::Rk45 rk(
        [&](double /*t*/, const Vec& y) {
          Vec X = y.head(d), V = y.tail(d);
          Vec out(2 * d);
          out.head(d) = V;
          out.tail(d) = -2.0 * gamma * V - gamma * gamma / mu * f.gradient(X);
          return out;
        },
        opts);
    rk.integrate(t0, y0, detail::linspace(t0, t1, opts.samples),
                 [&](double t, const Vec& y) {
                   Vec X = y.head(d);
                   Vec Z = X + y.tail(d) / gamma;
                   emit(t, X, Z);
                 },
                 &tr.stats);
    return tr;
  }

  dynamics_detail::FirstOrderSystem sys{&h, d};
  Vec Z0 = x0 + v0 / s.beta_dot(t0);
  detail::Rk45 rk(
      [&](double t, const Vec& y) {
        Vec X = sys.X_of(y);
        Vec Z = sys.Z_of(y);
        double bd = s.beta_dot(t);
        Vec dX = bd * (Z - X);
        Vec dw = bd * (grad(h, X).coords - Vec(y.tail(d)) -
                       f.gradient(X) / mu);
        return sys.pack(dX, dw);
      },
      opts);
  rk.integrate(t0, sys.pack(x0, grad(h, Z0).coords),
               detail::linspace(t0, t1, opts.samples),
               [&](double t, const Vec& y) {
                 emit(t, sys.X_of(y), sys.Z_of(y));
               },
               &tr.stats);
  return tr;
}

/// Proximal variant of the first dynamics:
/// d/dt grad_h(Z) = -beta_dot e^{beta} (grad phi(X) + grad psi(Z)).
inline ContinuousTrace simulate_prox_first(const CompositeObjective& c,
                                           const DistanceGenerator& h,
                                           const ContinuousSchedule& s,
                                           const Vec& x0, const Vec& v0,
                                           double t0, double t1,
                                           const IntegratorOpts& opts = {}) {
  const int d = c.dim();
  if (c.simple_part.kind == SimplePart::Kind::indicator_box)
    throw UnsupportedSimplePart(
        "prox dynamics need a (sub)differentiable simple part");
  dynamics_detail::FirstOrderSystem sys{&h, d};
  Vec Z0 = x0 + v0 / s.beta_dot(t0);
  ContinuousTrace tr;
  tr.sched = s;
  tr.kind = ContinuousKind::weak;
  tr.rel_tol = opts.rel_tol;
  detail::Rk45 rk(
      [&](double t, const Vec& y) {
        Vec X = sys.X_of(y);
        Vec Z = sys.Z_of(y);
        double bd = s.beta_dot(t);
        Vec dX = bd * (Z - X);
        Vec dw = -bd * s.ebeta(t) *
                 (c.smooth_part.gradient(X) + c.simple_part.subgrad(Z));
        return sys.pack(dX, dw);
      },
      opts);
  rk.integrate(t0, sys.pack(x0, grad(h, Z0).coords),
               detail::linspace(t0, t1, opts.samples),
               [&](double t, const Vec& y) {
                 ContinuousSample smp;
                 smp.state = {t, sys.X_of(y), sys.Z_of(y)};
                 smp.f_value = c.value(smp.state.X);
                 if (c.reference)
                   smp.lyapunov_value =
                       divergence(h, c.reference->x_star, smp.state.Z) +
                       s.ebeta(t) * (smp.f_value - c.reference->f_star);
                 tr.samples.push_back(std::move(smp));
               },
               &tr.stats);
  return tr;
}

/// Proximal variant of the strongly convex dynamics.
inline ContinuousTrace simulate_prox_second(const CompositeObjective& c,
                                            const DistanceGenerator& h,
                                            double mu,
                                            const ContinuousSchedule& s,
                                            const Vec& x0, const Vec& v0,
                                            double t0, double t1,
                                            const IntegratorOpts& opts = {}) {
  const int d = c.dim();
  if (c.simple_part.kind == SimplePart::Kind::indicator_box)
    throw UnsupportedSimplePart(
        "prox dynamics need a (sub)differentiable simple part");
  dynamics_detail::FirstOrderSystem sys{&h, d};
  Vec Z0 = x0 + v0 / s.beta_dot(t0);
  ContinuousTrace tr;
  tr.sched = s;
  tr.kind = ContinuousKind::strong;
  tr.mu = mu;
  tr.rel_tol = opts.rel_tol;
  detail::Rk45 rk(
      [&](double t, const Vec& y) {
        Vec X = sys.X_of(y);
        Vec Z = sys.Z_of(y);
        double bd = s.beta_dot(t);
        Vec dX = bd * (Z - X);
        Vec dw = bd * (grad(h, X).coords - Vec(y.tail(d)) -
                       (c.smooth_part.gradient(X) +
                        c.simple_part.subgrad(Z)) /
                           mu);
        return sys.pack(dX, dw);
      },
      opts);
  rk.integrate(t0, sys.pack(x0, grad(h, Z0).coords),
               detail::linspace(t0, t1, opts.samples),
               [&](double t, const Vec& y) {
                 ContinuousSample smp;
                 smp.state = {t, sys.X_of(y), sys.Z_of(y)};
                 smp.f_value = c.value(smp.state.X);
                 if (c.reference)
                   smp.lyapunov_value =
                       s.ebeta(t) *
                       (mu * divergence(h, c.reference->x_star, smp.state.Z) +
                        smp.f_value - c.reference->f_star);
                 tr.samples.push_back(std::move(smp));
               },
               &tr.stats);
  return tr;
}

struct TimeDilationReport {
  double max_deviation = 0.0;
  double scale = 1.0;
  bool pass = false;
};

/// Integrates the dynamics under beta and under beta(tau(t)) and compares
/// Y_t against X_{tau(t)} at matching samples. The family is closed under
/// time dilation, so the two curves must agree up to integration error.
inline TimeDilationReport time_dilation_check(
    const Objective& f, const DistanceGenerator& h,
    const ContinuousSchedule& s, const std::function<double(double)>& tau,
    const std::function<double(double)>& tau_dot, const Vec& x0,
    const Vec& v0, double t0, double t1, const IntegratorOpts& opts = {}) {
  ContinuousSchedule dil = ContinuousSchedule::dilated(s, tau, tau_dot);
  ContinuousTrace dilated =
      simulate_first_el(f, h, dil, x0, tau_dot(t0) * v0, t0, t1, opts);

  // Base run sampled exactly at tau(t_i).
  std::vector<double> times;
  for (const auto& smp : dilated.samples) times.push_back(tau(smp.state.t));
  dynamics_detail::FirstOrderSystem sys{&h, f.dim};
  Vec Z0 = x0 + v0 / s.beta_dot(tau(t0));
  std::vector<Vec> base_X;
  detail::Rk45 rk(
      [&](double t, const Vec& y) {
        Vec X = sys.X_of(y);
        Vec Z = sys.Z_of(y);
        double bd = s.beta_dot(t);
        return sys.pack(Vec(bd * (Z - X)), Vec(-bd * s.ebeta(t) * f.gradient(X)));
      },
      opts);
  rk.integrate(tau(t0), sys.pack(x0, grad(h, Z0).coords), times,
               [&](double, const Vec& y) { base_X.push_back(sys.X_of(y)); },
               nullptr);

  TimeDilationReport rep;
  for (std::size_t i = 0; i < dilated.samples.size(); ++i) {
    rep.scale = std::max(rep.scale, dilated.samples[i].state.X.norm());
    rep.max_deviation = std::max(
        rep.max_deviation, (dilated.samples[i].state.X - base_X[i]).norm());
  }
  rep.pass = rep.max_deviation <= 10.0 * opts.rel_tol * rep.scale;
  return rep;
}

}  // namespace momentum
