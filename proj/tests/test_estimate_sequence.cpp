#include <catch2/catch_amalgamated.hpp>

#include "momentum/corpus.hpp"
#include "momentum/estimate_sequence.hpp"

using namespace momentum;

namespace {

struct Certified {
  Trace trace;
  CertReport report;
  LyapunovKind kind;
  ReferenceSolution ref;
};

Certified certified_run(const MethodConfig& cfg, const ProblemInstance& inst,
                        const DistanceGenerator& h, const DiscreteSchedule& s,
                        int iters) {
  Certified c{run(cfg, inst.input(), h, s, iters, 1, inst.x0), {}, {}, {}};
  auto plan = auto_plan(c.trace);
  c.kind = plan.kind;
  c.ref = inst.objective ? *inst.objective->reference
                         : *inst.composite->reference;
  c.report = certify(c.trace, plan.kind, plan.formula, c.ref);
  return c;
}

std::vector<Vec> samples_around(const Vec& center, double radius, int n,
                                Rng& rng) {
  std::vector<Vec> out;
  for (int i = 0; i < n; ++i)
    out.push_back(center +
                  radius * gaussian_vector(static_cast<int>(center.size()),
                                           rng));
  return out;
}

std::vector<int> all_ks(const Trace& tr) {
  std::vector<int> ks;
  for (int k = 0; k <= tr.iterations(); ++k) ks.push_back(k);
  return ks;
}

}  // namespace

TEST_CASE("weak AGD trace converts to a valid estimate sequence") {
  auto inst = corpus("quadratic_illcond", 10, 3, {{"kappa", 50.0}});
  double eps = 1.0 / *inst.objective->meta.lipschitz_grad_L;
  auto h = DistanceGenerator::euclidean(10);
  auto c = certified_run({MethodId::agd_I, GradientMapSpec::nesterov(0.0), {}},
                         inst, h, schedules::quadratic(eps, 1.0, std::sqrt(eps)),
                         120);
  REQUIRE(c.report.overall);
  auto es = to_estimate_sequence(c.trace, c.kind, c.ref, c.report);
  CHECK(es.form == PhiForm::linear_lb_plus_breg_y);
  // Non-positive certified errors give a zero error sequence.
  for (double e : es.eps_tilde) CHECK(e == 0.0);

  Rng rng(10);
  auto xs = samples_around(c.ref.x_star, 2.0, 50, rng);
  auto v = verify_estimate_sequence(
      es, [&](const Vec& x) { return inst.objective->value(x); }, xs,
      all_ks(c.trace));
  CHECK(v.pass);
  CHECK(v.max_violation <= 1e-9);

  auto E_rec = from_estimate_sequence(es, c.ref);
  auto E = evaluate_lyapunov(c.trace, c.kind, c.ref);
  for (std::size_t k = 0; k < E.size(); ++k)
    CHECK(std::abs(E_rec[k] - E[k]) <= 1e-12 * (1.0 + std::abs(E[k])));
}

TEST_CASE("quasi-monotone trace carries its accumulated error sequence") {
  auto inst = corpus("l1_on_box", 8, 5);
  auto h = DistanceGenerator::euclidean_on(Domain::box(-1, 1, 8));
  auto c = certified_run({MethodId::agd_I, GradientMapSpec::identity(), {}},
                         inst, h, schedules::sqrt_decay(0.25), 300);
  REQUIRE(c.report.decrease_ok);
  auto es = to_estimate_sequence(c.trace, c.kind, c.ref, c.report);
  CHECK(es.form == PhiForm::linear_lb_plus_breg);
  CHECK(es.eps_tilde.back() > 0.0);
  for (std::size_t k = 0; k + 1 < es.eps_tilde.size(); ++k)
    CHECK(es.eps_tilde[k + 1] >= es.eps_tilde[k]);

  // Sample inside the box: the certified decrease holds for every feasible x.
  Rng rng(4);
  std::vector<Vec> xs;
  for (int i = 0; i < 50; ++i) xs.push_back(uniform_vector(8, -1, 1, rng));
  auto v = verify_estimate_sequence(
      es, [&](const Vec& x) { return inst.objective->value(x); }, xs,
      all_ks(c.trace));
  CHECK(v.pass);

  auto E_rec = from_estimate_sequence(es, c.ref);
  auto E = evaluate_lyapunov(c.trace, c.kind, c.ref);
  for (std::size_t k = 0; k < E.size(); ++k)
    CHECK(std::abs(E_rec[k] - E[k]) <= 1e-12 * (1.0 + std::abs(E[k])));
}

TEST_CASE("strong AGD trace yields the quadratic estimate sequence") {
  auto inst = corpus("quadratic_illcond", 12, 9, {{"kappa", 100.0}});
  double L = *inst.objective->meta.lipschitz_grad_L;
  double mu = *inst.objective->meta.strong_convexity_mu;
  double tau = std::sqrt(mu / L);
  auto h = DistanceGenerator::euclidean(12);
  auto c = certified_run(
      {MethodId::agd_strong, GradientMapSpec::nesterov(0.0), {}}, inst, h,
      schedules::constant_tau(tau, TauConvention::over_Ak1, 1.0,
                              std::sqrt(1.0 / L)),
      200);
  REQUIRE(c.report.overall);
  auto es = to_estimate_sequence(c.trace, c.kind, c.ref, c.report);
  CHECK(es.form == PhiForm::quadratic_lb);
  // Errors vanish at tau = 1/sqrt(kappa) up to floating-point noise.
  for (double e : es.eps_tilde) CHECK(e <= 1e-12);

  Rng rng(6);
  auto xs = samples_around(c.ref.x_star, 1.0, 50, rng);
  auto v = verify_estimate_sequence(
      es, [&](const Vec& x) { return inst.objective->value(x); }, xs,
      all_ks(c.trace));
  CHECK(v.pass);

  auto E_rec = from_estimate_sequence(es, c.ref);
  auto E = evaluate_lyapunov(c.trace, c.kind, c.ref);
  for (std::size_t k = 0; k < E.size(); ++k)
    CHECK(std::abs(E_rec[k] - E[k]) <= 1e-12 * (1.0 + std::abs(E[k])));
}

TEST_CASE("frank-wolfe trace yields the value-only estimate sequence") {
  auto pi = corpus("quadratic_illcond", 12, 9, {{"simplex_center", 1.0}});
  auto c = certified_run({MethodId::frank_wolfe, {}, {}}, pi,
                         DistanceGenerator::euclidean(12),
                         schedules::fw_classic(), 250);
  REQUIRE(c.report.decrease_ok);
  auto es = to_estimate_sequence(c.trace, c.kind, c.ref, c.report);
  CHECK(es.form == PhiForm::value_only);
  CHECK(es.eps_tilde.back() > 0.0);

  Rng rng(14);
  std::vector<Vec> xs;
  for (int i = 0; i < 50; ++i) xs.push_back(simplex_vector(12, rng));
  auto v = verify_estimate_sequence(
      es, [&](const Vec& x) { return pi.objective->value(x); }, xs,
      all_ks(c.trace));
  CHECK(v.pass);

  auto E_rec = from_estimate_sequence(es, c.ref);
  auto E = evaluate_lyapunov(c.trace, c.kind, c.ref);
  for (std::size_t k = 0; k < E.size(); ++k)
    CHECK(std::abs(E_rec[k] - E[k]) <= 1e-12 * (1.0 + std::abs(E[k])));
}

TEST_CASE("final-rate bound recovered at x = x*") {
  auto inst = corpus("quadratic_illcond", 8, 3, {{"kappa", 10.0}});
  double eps = 1.0 / *inst.objective->meta.lipschitz_grad_L;
  auto h = DistanceGenerator::euclidean(8);
  auto c = certified_run({MethodId::agd_I, GradientMapSpec::nesterov(0.0), {}},
                         inst, h, schedules::quadratic(eps), 100);
  auto es = to_estimate_sequence(c.trace, c.kind, c.ref, c.report);
  int K = es.horizon();
  // f(y_K) - f* <= (phi_0(x*) - f*) / A_K, the estimate-sequence rate bound.
  double bound = (es.phi(0, c.ref.x_star) - c.ref.f_star) / es.A[K];
  CHECK(es.gap_iter[K] <= bound * (1.0 + 1e-9) + 1e-15);
}

TEST_CASE("negative control: corrupting A_k breaks the estimate sequence") {
  auto inst = corpus("quadratic_illcond", 6, 7, {{"kappa", 10.0}});
  double eps = 1.0 / *inst.objective->meta.lipschitz_grad_L;
  auto h = DistanceGenerator::euclidean(6);
  auto c = certified_run({MethodId::agd_I, GradientMapSpec::nesterov(0.0), {}},
                         inst, h, schedules::quadratic(eps), 60);
  auto es = to_estimate_sequence(c.trace, c.kind, c.ref, c.report);
  es.A[40] *= 16.0;  // corrupted
  Rng rng(2);
  auto xs = samples_around(c.ref.x_star, 1.0, 30, rng);
  auto v = verify_estimate_sequence(
      es, [&](const Vec& x) { return inst.objective->value(x); }, xs,
      all_ks(c.trace));
  CHECK_FALSE(v.pass);
}

TEST_CASE("incompatible estimate-sequence conversions are rejected") {
  auto inst = corpus("logsumexp", 5, 3);
  double eps = 1.0 / *inst.objective->meta.lipschitz_grad_L;
  auto h = DistanceGenerator::euclidean(5);
  auto c = certified_run({MethodId::agd_I, GradientMapSpec::nesterov(0.0), {}},
                         inst, h, schedules::quadratic(eps), 20);
  // No mu on this trace: the strong kinds cannot be converted.
  CHECK_THROWS_AS(
      to_estimate_sequence(c.trace, LyapunovKind::strong_y, c.ref, c.report),
      IncompatibleKind);
}
