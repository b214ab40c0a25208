#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "momentum/methods.hpp"

namespace momentum {

/// The discrete Lyapunov function evaluated on a trace.
///   weak_x     E_k = D_h(x*, z_k) + A_k (f(x_k) - f*)
///   weak_y     E_k = D_h(x*, z_k) + A_k (f(y_k) - f*)
///   strong_x   E_k = A_k (mu D_h(x*, z_k) + f(x_k) - f*)
///   strong_y   E_k = A_k (mu D_h(x*, z_k) + f(y_k) - f*)
///   value_only E_k = A_k (f(x_k) - f*)
enum class LyapunovKind { weak_x, weak_y, strong_x, strong_y, value_only };

inline std::string kind_name(LyapunovKind k) {
  switch (k) {
    case LyapunovKind::weak_x: return "weak_x";
    case LyapunovKind::weak_y: return "weak_y";
    case LyapunovKind::strong_x: return "strong_x";
    case LyapunovKind::strong_y: return "strong_y";
    case LyapunovKind::value_only: return "value_only";
  }
  return "?";
}

inline LyapunovKind kind_from_name(const std::string& s) {
  if (s == "weak_x") return LyapunovKind::weak_x;
  if (s == "weak_y") return LyapunovKind::weak_y;
  if (s == "strong_x") return LyapunovKind::strong_x;
  if (s == "strong_y") return LyapunovKind::strong_y;
  if (s == "value_only") return LyapunovKind::value_only;
  throw IncompatibleKind("unknown Lyapunov kind '" + s + "'");
}

/// Per-iteration error term, keyed to the proposition/lemma it comes from.
/// All parameters are metadata, never fitted.
struct ErrorFormula {
  enum class Id {
    zero_implicit,     // implicit methods: error identically zero
    general_I,         // family I, arbitrary map
    general_II,        // family II, arbitrary map
    quasi_monotone,    // identity map, sigma-strongly convex h
    nesterov_I,        // gradient map, family I
    nesterov_II,       // gradient map, family II
    universal_II,      // regularized Taylor map, family II
    universal_nu_I,    // over-regularized gradient step, Holder gradients
    strong_agd_eucl,   // strongly convex accelerated, Euclidean
    strong_qm,         // strongly convex quasi-monotone
    fw_smooth,         // conditional gradient, smooth f
    fw_holder,         // conditional gradient, Holder gradients
    fista_tseng,       // accelerated proximal with the coupled map
    prox_strong_eucl,  // strongly convex proximal, Euclidean
    hod_descent,       // plain higher-order descent
  };
  Id id = Id::zero_implicit;
  double sigma = 1.0, p = 2.0;  // geometry modulus (p = ptilde where relevant)
  double delta = 1.0;
  double eps = 0.0;  // smoothness scaling (1/L, or Holder eps)
  double mu = 0.0;
  double nu = 1.0;
  double N = 0.0;
  double eps_tilde = 0.0, delta_tilde = 0.0;
  Vec x_star;  // hod_descent measures distance to the minimizer

  static std::string name(Id id) {
    switch (id) {
      case Id::zero_implicit: return "zero_implicit";
      case Id::general_I: return "general_I";
      case Id::general_II: return "general_II";
      case Id::quasi_monotone: return "quasi_monotone";
      case Id::nesterov_I: return "nesterov_I";
      case Id::nesterov_II: return "nesterov_II";
      case Id::universal_II: return "universal_II";
      case Id::universal_nu_I: return "universal_nu_I";
      case Id::strong_agd_eucl: return "strong_agd_eucl";
      case Id::strong_qm: return "strong_qm";
      case Id::fw_smooth: return "fw_smooth";
      case Id::fw_holder: return "fw_holder";
      case Id::fista_tseng: return "fista_tseng";
      case Id::prox_strong_eucl: return "prox_strong_eucl";
      case Id::hod_descent: return "hod_descent";
    }
    return "?";
  }
  static Id id_from_name(const std::string& s) {
    for (int i = 0; i <= static_cast<int>(Id::hod_descent); ++i)
      if (name(static_cast<Id>(i)) == s) return static_cast<Id>(i);
    throw IncompatibleKind("unknown error formula '" + s + "'");
  }
};

/// Progress constant of the regularized Taylor map:
/// <grad f(y), y - x>  <=  -c(ptilde, N) eps^(1/(ptilde-1)) ||grad f(y)||^q.
inline double universal_progress_constant(double ptilde, double N,
                                          double eps) {
  return std::sqrt(N * N - 1.0) / (2.0 * N) *
         std::pow(eps, 1.0 / (ptilde - 1.0));
}

inline std::vector<double> evaluate_lyapunov(const Trace& tr,
                                             LyapunovKind kind,
                                             const ReferenceSolution& ref) {
  const DistanceGenerator& h = tr.ctx.geometry;
  std::vector<double> E;
  E.reserve(tr.records.size());
  for (const auto& r : tr.records) {
    double gap = (kind == LyapunovKind::weak_y || kind == LyapunovKind::strong_y)
                     ? r.gap_y
                     : r.gap_x;
    if (!std::isfinite(gap))
      throw IncompatibleKind("evaluate_lyapunov: trace lacks finite gaps "
                             "(no reference solution recorded)");
    double val = 0.0;
    switch (kind) {
      case LyapunovKind::weak_x:
      case LyapunovKind::weak_y:
        val = divergence(h, ref.x_star, r.z) + r.A * gap;
        break;
      case LyapunovKind::strong_x:
      case LyapunovKind::strong_y: {
        if (!tr.ctx.mu)
          throw IncompatibleKind("strong Lyapunov kinds need mu metadata");
        val = r.A * (*tr.ctx.mu * divergence(h, ref.x_star, r.z) + gap);
        break;
      }
      case LyapunovKind::value_only:
        val = r.A * gap;
        break;
    }
    if (!std::isfinite(val))
      throw IncompatibleKind("evaluate_lyapunov: non-finite value at k=" +
                             std::to_string(r.k));
    E.push_back(val);
  }
  return E;
}

/// eps_{k+1} for the transition (k -> k+1) described by records (rk, rk1).
inline double error_term(const ErrorFormula& fm, const TraceRecord& rk,
                         const TraceRecord& rk1) {
  const double a = rk.alpha;
  const double A1 = rk1.A;
  const double d = fm.delta;
  auto gnorm = [&](const char* key) { return rk1.require(key).norm(); };
  switch (fm.id) {
    case ErrorFormula::Id::zero_implicit:
      return 0.0;
    case ErrorFormula::Id::general_I: {
      double q = fm.p / (fm.p - 1.0);
      double fen = (fm.p - 1.0) / fm.p *
                   std::pow(fm.sigma, -1.0 / (fm.p - 1.0)) *
                   std::pow(a, q) / d * std::pow(gnorm("g_mirror"), q);
      return fen + A1 / d * (rk1.f_y - rk1.f_x);
    }
    case ErrorFormula::Id::general_II: {
      double q = fm.p / (fm.p - 1.0);
      const Vec& g = rk1.require("g_mirror");
      double fen = (fm.p - 1.0) / fm.p *
                   std::pow(fm.sigma, -1.0 / (fm.p - 1.0)) *
                   std::pow(a, q) / d * std::pow(g.norm(), q);
      return fen + A1 / d * g.dot(rk1.y - rk1.x);
    }
    case ErrorFormula::Id::quasi_monotone: {
      double gn = gnorm("g_mirror");
      return a * a / (2.0 * fm.sigma * d) * gn * gn;
    }
    case ErrorFormula::Id::nesterov_I:
    case ErrorFormula::Id::nesterov_II: {
      double gn = gnorm("g_mirror");
      return (a * a / (2.0 * fm.sigma) - fm.eps * A1 / 2.0) * gn * gn / d;
    }
    case ErrorFormula::Id::universal_II: {
      double pt = fm.p;
      double q = pt / (pt - 1.0);
      double gq = std::pow(gnorm("g_mirror"), q);
      double fen = (pt - 1.0) / pt * std::pow(fm.sigma, -1.0 / (pt - 1.0)) *
                   std::pow(a, q) / d * gq;
      double prog = A1 / d * universal_progress_constant(pt, fm.N, fm.eps) * gq;
      return fen - prog;
    }
    case ErrorFormula::Id::universal_nu_I: {
      double gn = gnorm("g_mirror");
      return (a * a / (2.0 * fm.sigma) - fm.eps_tilde * A1 / 2.0) * gn * gn /
                 d +
             A1 / d * fm.delta_tilde;
    }
    case ErrorFormula::Id::strong_agd_eucl: {
      double tau = rk.tau;
      double gn = gnorm("g_mirror");
      double xy = (rk.x - rk.y).norm();
      return A1 / d *
             ((tau * tau / (2.0 * fm.mu) - fm.eps / 2.0) * gn * gn +
              (tau / (2.0 * fm.eps) - fm.mu / (2.0 * tau)) * xy * xy);
    }
    case ErrorFormula::Id::strong_qm: {
      double tau = rk.tau;
      double gn = gnorm("g_mirror");
      return rk.A * tau * tau / (2.0 * fm.mu * fm.sigma * d) * gn * gn;
    }
    case ErrorFormula::Id::fw_smooth: {
      double tau = rk.tau;
      double dn = (rk1.require("fw_vertex") - rk.x).norm();
      return A1 * tau * tau / (2.0 * fm.eps * d) * dn * dn;
    }
    case ErrorFormula::Id::fw_holder: {
      double tau = rk.tau;
      double dn = (rk1.require("fw_vertex") - rk.x).norm();
      return A1 * std::pow(tau, 1.0 + fm.nu) / ((1.0 + fm.nu) * fm.eps * d) *
             std::pow(dn, 1.0 + fm.nu);
    }
    case ErrorFormula::Id::fista_tseng: {
      double tau = rk.tau;
      double dz = (rk1.z - rk.z).norm();
      return (-fm.sigma / 2.0 + A1 * tau * tau / (2.0 * fm.eps)) * dz * dz / d;
    }
    case ErrorFormula::Id::prox_strong_eucl: {
      double tau = rk.tau;
      double gc = rk1.require("g_comb").norm();
      double xy = (rk.x - rk.y).norm();
      return A1 / d *
             ((tau * tau / (2.0 * fm.eps) - fm.mu / 2.0) / fm.mu * gc * gc +
              (tau / (2.0 * fm.eps) - fm.mu / (2.0 * tau)) * xy * xy);
    }
    case ErrorFormula::Id::hod_descent: {
      double pt = fm.p;
      double q = pt / (pt - 1.0);
      double c = universal_progress_constant(pt, fm.N, fm.eps);
      double dist = (rk1.x - fm.x_star).norm();
      return std::pow(a, pt) * std::pow(rk.A, 1.0 - pt) *
             std::pow(q * c, 1.0 - pt) * std::pow(dist, pt) / (pt * d);
    }
  }
  return 0.0;
}

inline std::vector<double> evaluate_error_terms(const Trace& tr,
                                                const ErrorFormula& fm) {
  std::vector<double> eps;
  for (std::size_t i = 0; i + 1 < tr.records.size(); ++i)
    eps.push_back(error_term(fm, tr.records[i], tr.records[i + 1]));
  return eps;
}

struct RateFit {
  double exponent = 0.0;
  double r2 = 0.0;
  int window_lo = 0, window_hi = 0;
  std::string mode = "power";  // "power": log gap vs log k; "geometric": vs k
};

struct PerIteration {
  int k = 0;
  double E = 0.0, eps = 0.0, lhs = 0.0, rhs = 0.0;
  bool pass = true;
};

struct CertReport {
  std::string method_id, problem_id;
  LyapunovKind kind = LyapunovKind::weak_x;
  ErrorFormula::Id formula = ErrorFormula::Id::zero_implicit;
  std::vector<PerIteration> per_k;
  bool decrease_ok = false;      // every per-iteration inequality holds
  bool eps_nonpositive = false;  // every eps_{k+1} <= slack
  bool overall = false;          // the certificate claim for this method class
  std::optional<bool> strong_contract;  // strong_y traces only
  bool vacuous = false;
  int first_fail_k = -1;
  RateFit rate_fit;
  double slack_used = 0.0;
  bool stochastic = false;
  double E_final = 0.0;  // Lyapunov value at the last record
};

/// Accelerated and implicit methods claim non-positive per-step errors;
/// subgradient-class methods only claim the decrease inequality.
inline bool requires_nonpositive_errors_for(MethodId method,
                                            const GradientMapSpec& gmap) {
  switch (method) {
    case MethodId::implicit:
    case MethodId::implicit_strong:
    case MethodId::agd_strong:
    case MethodId::fista:
    case MethodId::prox_strong:
      return true;
    case MethodId::agd_I:
    case MethodId::agd_II:
      return gmap.kind == GradientMapSpec::Kind::nesterov ||
             gmap.kind == GradientMapSpec::Kind::universal_higher;
    default:
      return false;
  }
}

namespace detail {

inline RateFit fit_rate(const Trace& tr, LyapunovKind kind,
                        const std::string& mode) {
  RateFit fit;
  fit.mode = mode;
  int n = tr.iterations();
  if (n < 4) return fit;
  int lo = std::max(1, n / 2);
  fit.window_lo = lo;
  fit.window_hi = n;
  std::vector<double> xs, ys;
  for (int k = lo; k <= n; ++k) {
    const auto& r = tr.records[k];
    double gap =
        (kind == LyapunovKind::weak_y || kind == LyapunovKind::strong_y)
            ? r.gap_y
            : r.gap_x;
    if (!(gap > 0.0) || !std::isfinite(gap)) continue;
    xs.push_back(mode == "geometric" ? static_cast<double>(k)
                                     : std::log(static_cast<double>(k)));
    ys.push_back(std::log(gap));
  }
  if (xs.size() < 4) return fit;
  double n_ = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
    syy += ys[i] * ys[i];
  }
  double denom = n_ * sxx - sx * sx;
  if (denom == 0.0) return fit;
  fit.exponent = (n_ * sxy - sx * sy) / denom;
  double resid = 0.0, tot = 0.0, mean_y = sy / n_;
  double b0 = mean_y - fit.exponent * sx / n_;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double pred = b0 + fit.exponent * xs[i];
    resid += (ys[i] - pred) * (ys[i] - pred);
    tot += (ys[i] - mean_y) * (ys[i] - mean_y);
  }
  fit.r2 = tot > 0.0 ? 1.0 - resid / tot : 1.0;
  return fit;
}

}  // namespace detail

/// Checks the per-iteration decrease inequality (E_{k+1} - E_k)/delta <=
/// eps_{k+1} (plus slack), evaluates the strong-family contract where it
/// applies, and fits the convergence-rate exponent.
inline CertReport certify(const Trace& tr, LyapunovKind kind,
                          const ErrorFormula& fm_in,
                          const ReferenceSolution& ref) {
  ErrorFormula fm = fm_in;
  // The descent formula measures distance to the minimizer; default it
  // from the reference when the caller left it empty.
  if (fm.id == ErrorFormula::Id::hod_descent && fm.x_star.size() == 0)
    fm.x_star = ref.x_star;
  CertReport rep;
  rep.method_id = tr.ctx.method_id;
  rep.problem_id = tr.ctx.problem_id;
  rep.kind = kind;
  rep.formula = fm.id;
  rep.stochastic = tr.ctx.stochastic;

  std::vector<double> E = evaluate_lyapunov(tr, kind, ref);
  rep.E_final = E.back();
  double d = tr.ctx.delta;
  rep.slack_used = 1e-9 * (1.0 + std::abs(E.front()));
  // Implicit solves leave an inner residual; fold it into the slack.
  if (tr.ctx.implicit_residual > 0.0)
    rep.slack_used += 10.0 * tr.ctx.implicit_residual * (1.0 + std::abs(E.front()));

  if (E.size() < 2) {
    rep.vacuous = true;
    rep.decrease_ok = true;
    rep.overall = true;
    rep.eps_nonpositive = true;
    return rep;
  }

  const bool need_nonpos =
      requires_nonpositive_errors_for(tr.ctx.method, tr.ctx.gmap);
  bool strong_y_family = kind == LyapunovKind::strong_y;
  bool contract_ok = true;
  rep.decrease_ok = true;
  rep.eps_nonpositive = true;
  for (std::size_t k = 0; k + 1 < E.size(); ++k) {
    PerIteration pk;
    pk.k = static_cast<int>(k);
    pk.E = E[k];
    pk.eps = error_term(fm, tr.records[k], tr.records[k + 1]);
    pk.lhs = (E[k + 1] - E[k]) / d;
    pk.rhs = pk.eps;
    pk.pass = pk.lhs <= pk.rhs + rep.slack_used;
    if (need_nonpos) pk.pass = pk.pass && pk.eps <= rep.slack_used;
    if (!pk.pass && rep.first_fail_k < 0) rep.first_fail_k = pk.k;
    rep.decrease_ok = rep.decrease_ok && pk.lhs <= pk.rhs + rep.slack_used;
    rep.eps_nonpositive = rep.eps_nonpositive && pk.eps <= rep.slack_used;
    if (strong_y_family) {
      // E_{k+1} - E_k <= -tau_k E_k + delta eps_{k+1}, stated for the
      // per-A_k normalized function.
      double Et = E[k] / tr.records[k].A;
      double Et1 = E[k + 1] / tr.records[k + 1].A;
      double tau = tr.records[k].tau;
      double slack_t = 1e-9 * (1.0 + std::abs(E.front() / tr.records[0].A));
      if (Et1 - Et > -tau * Et + d * pk.eps / tr.records[k + 1].A + slack_t)
        contract_ok = false;
    }
    rep.per_k.push_back(pk);
  }
  rep.overall = rep.decrease_ok && (!need_nonpos || rep.eps_nonpositive);
  if (strong_y_family) rep.strong_contract = contract_ok;

  std::string mode = (tr.ctx.method == MethodId::agd_strong ||
                      tr.ctx.method == MethodId::prox_strong)
                         ? "geometric"
                         : "power";
  rep.rate_fit = detail::fit_rate(tr, kind, mode);
  return rep;
}

inline bool report_verdict(const Trace& /*tr*/, const CertReport& rep) {
  // Stochastic realizations only certify in expectation; the sweep-level
  // Monte-Carlo bound is the claim, so a single noisy trace never fails.
  if (rep.stochastic) return true;
  return rep.overall;
}

struct CertPlan {
  LyapunovKind kind = LyapunovKind::weak_x;
  ErrorFormula formula;
};

/// Resolves the (kind, formula) pair for a trace from the compatibility
/// table; each method family has exactly one valid pairing.
inline CertPlan auto_plan(const Trace& tr) {
  const TraceContext& c = tr.ctx;
  CertPlan plan;
  ErrorFormula& fm = plan.formula;
  fm.sigma = c.sigma;
  fm.p = c.p_mod;
  fm.delta = c.delta;
  if (c.eps) fm.eps = *c.eps;
  if (c.mu) fm.mu = *c.mu;

  switch (c.method) {
    case MethodId::implicit:
      plan.kind = LyapunovKind::weak_x;
      fm.id = ErrorFormula::Id::zero_implicit;
      break;
    case MethodId::implicit_strong:
      plan.kind = LyapunovKind::strong_x;
      fm.id = ErrorFormula::Id::zero_implicit;
      break;
    case MethodId::agd_I:
    case MethodId::agd_II: {
      bool fam1 = c.method == MethodId::agd_I;
      switch (c.gmap.kind) {
        case GradientMapSpec::Kind::identity:
          plan.kind = LyapunovKind::weak_x;
          fm.id = ErrorFormula::Id::quasi_monotone;
          break;
        case GradientMapSpec::Kind::nesterov:
          plan.kind = LyapunovKind::weak_y;
          fm.id = fam1 ? ErrorFormula::Id::nesterov_I
                       : ErrorFormula::Id::nesterov_II;
          fm.eps = c.gmap.eps;
          break;
        case GradientMapSpec::Kind::universal_nu:
          plan.kind = LyapunovKind::weak_y;
          fm.id = ErrorFormula::Id::universal_nu_I;
          fm.eps_tilde = c.gmap.eps_tilde;
          fm.delta_tilde = c.gmap.delta_tilde;
          break;
        case GradientMapSpec::Kind::universal_higher:
          plan.kind = LyapunovKind::weak_y;
          fm.id = ErrorFormula::Id::universal_II;
          fm.p = c.gmap.ptilde();  // modulus taken w.r.t. the ptilde power
          fm.eps = c.gmap.eps;
          fm.N = c.gmap.N;
          fm.nu = c.gmap.nu;
          break;
        case GradientMapSpec::Kind::tseng_coupled:
          plan.kind = LyapunovKind::weak_y;
          fm.id = fam1 ? ErrorFormula::Id::general_I
                       : ErrorFormula::Id::general_II;
          break;
      }
      break;
    }
    case MethodId::agd_strong:
      plan.kind = LyapunovKind::strong_y;
      fm.id = ErrorFormula::Id::strong_agd_eucl;
      fm.eps = c.gmap.eps;
      break;
    case MethodId::quasi_monotone_strong:
      plan.kind = LyapunovKind::strong_x;
      fm.id = ErrorFormula::Id::strong_qm;
      break;
    case MethodId::frank_wolfe:
      plan.kind = LyapunovKind::value_only;
      if (c.eps) {
        fm.id = ErrorFormula::Id::fw_smooth;
      } else if (c.holder) {
        fm.id = ErrorFormula::Id::fw_holder;
        fm.eps = c.holder->epsilon;
        fm.nu = c.holder->nu;
      } else {
        throw IncompatibleKind("frank_wolfe trace lacks smoothness metadata");
      }
      break;
    case MethodId::fista:
      plan.kind = LyapunovKind::weak_y;
      fm.id = ErrorFormula::Id::fista_tseng;
      break;
    case MethodId::prox_strong:
      plan.kind = LyapunovKind::strong_y;
      fm.id = ErrorFormula::Id::prox_strong_eucl;
      break;
    case MethodId::higher_order_descent:
      plan.kind = LyapunovKind::value_only;
      fm.id = ErrorFormula::Id::hod_descent;
      fm.p = c.gmap.ptilde();
      fm.eps = c.gmap.eps;
      fm.N = c.gmap.N;
      fm.nu = c.gmap.nu;
      break;
  }
  return plan;
}

enum class FeasibilityCondition { eq22, universal, strong };

struct FeasibilityReport {
  bool pass = true;
  int first_fail_k = -1;
  double worst_margin = 0.0;  // max over k of (lhs - bound)
};

/// Scans the schedule against the growth condition its method family
/// needs: eq22 for gradient maps, the C_{eps,sigma,ptilde,N} display for
/// universal maps, tau_k <= sqrt(mu eps) for the strongly convex family.
inline FeasibilityReport schedule_feasibility(const DiscreteSchedule& s,
                                              FeasibilityCondition cond,
                                              int horizon, double eps,
                                              double sigma, double mu = 0.0,
                                              double ptilde = 3.0,
                                              double N = 1.2) {
  if (horizon < 1)
    throw IncompatibleConfiguration("schedule_feasibility: horizon >= 1");
  FeasibilityReport rep;
  double bound = 0.0;
  switch (cond) {
    case FeasibilityCondition::eq22:
      bound = eps * sigma;
      break;
    case FeasibilityCondition::universal:
      bound = std::pow(eps * sigma, 1.0 / (ptilde - 1.0)) * ptilde /
              (ptilde - 1.0) * std::sqrt(N * N - 1.0) / (2.0 * N);
      break;
    case FeasibilityCondition::strong:
      bound = std::sqrt(mu * eps);
      break;
  }
  for (int k = 0; k < horizon; ++k) {
    double a = s.A(k + 1) - s.A(k);
    double lhs = 0.0;
    switch (cond) {
      case FeasibilityCondition::eq22:
        lhs = a * a / s.A(k + 1);
        break;
      case FeasibilityCondition::universal:
        lhs = std::pow(a, ptilde / (ptilde - 1.0)) / s.A(k + 1);
        break;
      case FeasibilityCondition::strong:
        lhs = a / s.A(k + 1);
        break;
    }
    rep.worst_margin = std::max(rep.worst_margin, lhs - bound);
    if (lhs > bound * (1.0 + 1e-12)) {
      rep.pass = false;
      if (rep.first_fail_k < 0) rep.first_fail_k = k;
    }
  }
  return rep;
}

}  // namespace momentum
