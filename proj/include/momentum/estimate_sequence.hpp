#pragma once

#include <functional>
#include <vector>

#include "momentum/certify.hpp"
#include "momentum/dynamics.hpp"

namespace momentum {

/// The phi_k shapes the construction produces: a linear lower bound plus a
/// scaled Bregman term (anchored at x_k or y_k), a quadratic lower bound
/// (strongly convex family), or the bare value (conditional gradient).
enum class PhiForm {
  linear_lb_plus_breg,
  linear_lb_plus_breg_y,
  quadratic_lb,
  value_only
};

/// Estimate sequence (phi_k, A_k) with the error extension eps_tilde_k,
/// reconstructed from a certified trace. phi_k is anchored at the trace
/// iterates, so its minimum value is the recorded function value.
struct EstimateSequence {
  PhiForm form = PhiForm::linear_lb_plus_breg;
  DistanceGenerator h;
  double mu = 0.0;
  std::vector<double> A;
  std::vector<double> eps_tilde;  // cumulative, eps_tilde[0] = 0
  std::vector<double> f_iter;     // f at the anchor iterate (raw value)
  std::vector<double> gap_iter;   // f at the anchor iterate minus f*
  std::vector<Vec> z;

  int horizon() const { return static_cast<int>(A.size()) - 1; }

  double phi(int k, const Vec& x) const {
    switch (form) {
      case PhiForm::linear_lb_plus_breg:
      case PhiForm::linear_lb_plus_breg_y:
        return f_iter[k] + divergence(h, x, z[k]) / A[k];
      case PhiForm::quadratic_lb:
        return f_iter[k] + mu * divergence(h, x, z[k]);
      case PhiForm::value_only:
        return f_iter[k];
    }
    return 0.0;
  }
  /// min_x phi_k(x); attained at z_k for every supported shape.
  double phi_min(int k) const { return f_iter[k]; }
};

/// Builds (phi_k, A_k, eps_tilde_k) from a certified trace; the cumulative
/// error is delta * sum of the positive parts of the certified per-step
/// errors, so the sequence is nonnegative and nondecreasing.
inline EstimateSequence to_estimate_sequence(const Trace& tr,
                                             LyapunovKind kind,
                                             const ReferenceSolution& ref,
                                             const CertReport& rep) {
  (void)ref;
  EstimateSequence es;
  es.h = tr.ctx.geometry;
  bool y_anchor =
      kind == LyapunovKind::weak_y || kind == LyapunovKind::strong_y;
  switch (kind) {
    case LyapunovKind::weak_x:
      es.form = PhiForm::linear_lb_plus_breg;
      break;
    case LyapunovKind::weak_y:
      es.form = PhiForm::linear_lb_plus_breg_y;
      break;
    case LyapunovKind::strong_x:
    case LyapunovKind::strong_y:
      es.form = PhiForm::quadratic_lb;
      if (!tr.ctx.mu)
        throw IncompatibleKind("strong estimate sequence needs mu");
      es.mu = *tr.ctx.mu;
      break;
    case LyapunovKind::value_only:
      es.form = PhiForm::value_only;
      break;
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < tr.records.size(); ++k) {
    const auto& r = tr.records[k];
    es.A.push_back(r.A);
    es.f_iter.push_back(y_anchor ? r.f_y : r.f_x);
    es.gap_iter.push_back(y_anchor ? r.gap_y : r.gap_x);
    es.z.push_back(r.z);
    es.eps_tilde.push_back(acc);
    if (k < rep.per_k.size())
      acc += tr.ctx.delta * std::max(rep.per_k[k].eps, 0.0);
  }
  return es;
}

struct EsVerification {
  bool pass = true;
  double max_violation = 0.0;  // of the defining inequality
  double max_anchor_violation = 0.0;
  bool a_inv_vanishing = true;
};

/// Checks the (error-extended) defining inequality
///   phi_k(x) <= (1 - A_0/A_k) f(x) + (A_0/A_k) phi_0(x) + eps_tilde_k/A_k
/// at every sampled (x, k), plus f(anchor_k) <= min phi_k.
inline EsVerification verify_estimate_sequence(
    const EstimateSequence& es, const std::function<double(const Vec&)>& f,
    const std::vector<Vec>& sample_points, const std::vector<int>& k_list,
    double tol = 1e-9) {
  EsVerification v;
  double A0 = es.A[0];
  for (int k : k_list) {
    if (k < 0 || k > es.horizon())
      throw IncompatibleKind("verify_estimate_sequence: k out of range");
    for (const Vec& x : sample_points) {
      double lhs = es.phi(k, x);
      double rhs = (1.0 - A0 / es.A[k]) * f(x) + A0 / es.A[k] * es.phi(0, x) +
                   es.eps_tilde[k] / es.A[k];
      v.max_violation = std::max(v.max_violation, lhs - rhs);
    }
    v.max_anchor_violation =
        std::max(v.max_anchor_violation, es.f_iter[k] - es.phi_min(k));
  }
  for (std::size_t k = 0; k + 1 < es.A.size(); ++k)
    if (es.A[k + 1] < es.A[k]) v.a_inv_vanishing = false;
  if (es.A.back() <= es.A.front()) v.a_inv_vanishing = false;
  v.pass = v.max_violation <= tol && v.max_anchor_violation <= 1e-12 &&
           v.a_inv_vanishing;
  return v;
}

/// Reconstructs the Lyapunov series from the estimate sequence:
/// E_k = A_k (phi_k(x*) - f*). This is an algebraic identity with
/// evaluate_lyapunov, and the reconstruction reproduces it exactly.
inline std::vector<double> from_estimate_sequence(
    const EstimateSequence& es, const ReferenceSolution& ref) {
  std::vector<double> E;
  for (std::size_t k = 0; k < es.A.size(); ++k) {
    double val = 0.0;
    switch (es.form) {
      case PhiForm::linear_lb_plus_breg:
      case PhiForm::linear_lb_plus_breg_y:
        val = divergence(es.h, ref.x_star, es.z[k]) + es.A[k] * es.gap_iter[k];
        break;
      case PhiForm::quadratic_lb:
        val = es.A[k] * (es.mu * divergence(es.h, ref.x_star, es.z[k]) +
                         es.gap_iter[k]);
        break;
      case PhiForm::value_only:
        val = es.A[k] * es.gap_iter[k];
        break;
    }
    E.push_back(val);
  }
  return E;
}

struct ContinuousEsReport {
  std::vector<double> phi_at_xstar;
  bool pass = true;
  double max_violation = 0.0;
  double slack = 0.0;
};

/// Continuous-time estimate sequence phi_t(x) = f(X_t) + e^{-beta} D_h(x, Z_t)
/// extracted from a weak-family trace; verifies its defining inequality at
/// x* along the trajectory.
inline ContinuousEsReport continuous_estimate_sequence(
    const ContinuousTrace& tr, const DistanceGenerator& h,
    const ReferenceSolution& ref) {
  ContinuousEsReport rep;
  if (tr.samples.empty())
    throw EmptySeries("continuous_estimate_sequence: empty trace");
  double b0 = tr.sched.beta(tr.samples.front().state.t);
  double phi0 = tr.samples.front().f_value +
                std::exp(-b0) * divergence(h, ref.x_star,
                                           tr.samples.front().state.Z);
  double scale = 1.0;
  for (const auto& s : tr.samples) {
    double bt = tr.sched.beta(s.state.t);
    double phi =
        s.f_value + std::exp(-bt) * divergence(h, ref.x_star, s.state.Z);
    rep.phi_at_xstar.push_back(phi);
    scale = std::max(scale, std::abs(phi));
    double shrink = std::exp(b0 - bt);
    double rhs = (1.0 - shrink) * ref.f_star + shrink * phi0;
    rep.max_violation = std::max(rep.max_violation, phi - rhs);
  }
  rep.slack = 10.0 * tr.rel_tol * scale;
  rep.pass = rep.max_violation <= rep.slack;
  return rep;
}

}  // namespace momentum
