#include <catch2/catch_amalgamated.hpp>

#include "momentum/certify.hpp"
#include "momentum/corpus.hpp"

using namespace momentum;

namespace {

Trace run_on(const MethodConfig& cfg, const ProblemInstance& inst,
             const DistanceGenerator& h, const DiscreteSchedule& s, int iters,
             std::uint64_t seed = 1) {
  return run(cfg, inst.input(), h, s, iters, seed, inst.x0);
}

const ReferenceSolution& ref_of(const ProblemInstance& inst) {
  return inst.objective ? *inst.objective->reference
                        : *inst.composite->reference;
}

}  // namespace

TEST_CASE("E_0 arithmetic from the definition") {
  // x0 = z0 = 1 on f = x^2/2, A_0 = 1: E_0 = D(0, 1) + 1 * (f(1) - 0) = 1.
  Trace tr;
  tr.ctx.geometry = DistanceGenerator::euclidean(1);
  TraceRecord r;
  r.k = 0;
  r.A = 1.0;
  r.z = Vec::Ones(1);
  r.x = Vec::Ones(1);
  r.y = Vec::Ones(1);
  r.gap_x = 0.5;
  r.gap_y = 0.5;
  tr.records.push_back(r);
  ReferenceSolution ref{Vec::Zero(1), 0.0, Provenance::closed_form, 0};
  auto E = evaluate_lyapunov(tr, LyapunovKind::weak_x, ref);
  CHECK(E[0] == Catch::Approx(1.0));
}

TEST_CASE("a trace pinned at the optimum has E identically zero") {
  auto inst = corpus("quadratic_illcond", 4, 3);
  ProblemInstance at_opt = inst;
  at_opt.x0 = inst.objective->reference->x_star;
  auto tr = run_on({MethodId::implicit, {}, {}}, at_opt,
                   DistanceGenerator::euclidean(4), schedules::geometric(2.0),
                   10);
  for (double e :
       evaluate_lyapunov(tr, LyapunovKind::weak_x, ref_of(inst)))
    CHECK(std::abs(e) <= 1e-18);
}

TEST_CASE("implicit trace certifies with zero error terms") {
  auto inst = corpus("quadratic_illcond", 10, 3, {{"kappa", 100.0}});
  auto tr = run_on({MethodId::implicit, {}, {}}, inst,
                   DistanceGenerator::euclidean(10),
                   schedules::geometric(2.0), 50);
  auto plan = auto_plan(tr);
  CHECK(plan.kind == LyapunovKind::weak_x);
  auto rep = certify(tr, plan.kind, plan.formula, ref_of(inst));
  CHECK(rep.overall);
  CHECK(rep.eps_nonpositive);
  CHECK(report_verdict(tr, rep));
  for (const auto& pk : rep.per_k) CHECK(pk.rhs == 0.0);
}

TEST_CASE("agd family I certifies on the boundary schedule") {
  auto inst = corpus("quadratic_illcond", 30, 7, {{"kappa", 100.0}});
  double L = *inst.objective->meta.lipschitz_grad_L;
  double eps = 1.0 / L;
  auto s = schedules::quadratic(eps, 1.0, std::sqrt(eps));
  auto tr = run_on({MethodId::agd_I, GradientMapSpec::nesterov(0.0), {}},
                   inst, DistanceGenerator::euclidean(30), s, 300);
  auto plan = auto_plan(tr);
  CHECK(plan.kind == LyapunovKind::weak_y);
  CHECK(plan.formula.id == ErrorFormula::Id::nesterov_I);
  auto rep = certify(tr, plan.kind, plan.formula, ref_of(inst));
  CHECK(rep.overall);
  CHECK(rep.eps_nonpositive);

  // Final guarantee: gap(y_k) <= E_0 / A_k at every k.
  auto E = evaluate_lyapunov(tr, plan.kind, ref_of(inst));
  for (const auto& r : tr.records)
    CHECK(r.gap_y <= E[0] / r.A * (1.0 + 1e-9) + 1e-15);
}

TEST_CASE("negative control: doubling schedule breaks the agd certificate") {
  auto inst = corpus("quadratic_illcond", 10, 7, {{"kappa", 100.0}});
  auto s = schedules::geometric(2.0);
  s.convention = TauConvention::over_Ak1;
  auto tr = run_on({MethodId::agd_I, GradientMapSpec::nesterov(0.0), {}},
                   inst, DistanceGenerator::euclidean(10), s, 14);
  auto plan = auto_plan(tr);
  auto rep = certify(tr, plan.kind, plan.formula, ref_of(inst));
  CHECK_FALSE(rep.eps_nonpositive);
  CHECK_FALSE(report_verdict(tr, rep));
  CHECK_FALSE(rep.overall);
  CHECK(rep.first_fail_k >= 0);
}

TEST_CASE("negative control: corrupted trace fails certification") {
  auto inst = corpus("quadratic_illcond", 8, 5);
  double eps = 1.0 / *inst.objective->meta.lipschitz_grad_L;
  auto tr = run_on({MethodId::agd_I, GradientMapSpec::nesterov(0.0), {}},
                   inst, DistanceGenerator::euclidean(8),
                   schedules::quadratic(eps), 50);
  auto plan = auto_plan(tr);
  auto good = certify(tr, plan.kind, plan.formula, ref_of(inst));
  REQUIRE(good.overall);
  tr.records[20].gap_y += 10.0;  // injected jump
  auto bad = certify(tr, plan.kind, plan.formula, ref_of(inst));
  CHECK_FALSE(bad.overall);
  CHECK(bad.first_fail_k == 19);
}

TEST_CASE("strong quasi-monotone error formula is reproduced exactly") {
  auto inst = corpus("l1_on_box", 6, 3, {{"mu", 4.0}});
  auto h = DistanceGenerator::euclidean_on(Domain::box(-1, 1, 6));
  auto tr = run_on({MethodId::quasi_monotone_strong, {}, {}}, inst, h,
                   schedules::tau_2_over_k2(), 100);
  auto plan = auto_plan(tr);
  REQUIRE(plan.formula.id == ErrorFormula::Id::strong_qm);
  auto eps = evaluate_error_terms(tr, plan.formula);
  double mu = *inst.objective->meta.strong_convexity_mu;
  for (std::size_t k = 0; k + 1 < tr.records.size(); ++k) {
    const auto& rk = tr.records[k];
    const auto& rk1 = tr.records[k + 1];
    double manual = rk.A * rk.tau * rk.tau /
                    (2.0 * mu * 1.0 * 1.0) *
                    rk1.require("g_mirror").squaredNorm();
    CHECK(eps[k] == Catch::Approx(manual).epsilon(1e-12));
  }
  auto rep = certify(tr, plan.kind, plan.formula, ref_of(inst));
  CHECK(rep.overall);
}

TEST_CASE("agd_strong certifies at tau = 1/sqrt(kappa) and fails above") {
  auto inst = corpus("quadratic_illcond", 20, 11, {{"kappa", 100.0}});
  double L = *inst.objective->meta.lipschitz_grad_L;
  double mu = *inst.objective->meta.strong_convexity_mu;
  double eps = 1.0 / L;
  double tau = std::sqrt(mu * eps);
  auto h = DistanceGenerator::euclidean(20);

  auto good_s = schedules::constant_tau(tau, TauConvention::over_Ak1, 1.0,
                                        std::sqrt(eps));
  auto tr = run_on({MethodId::agd_strong, GradientMapSpec::nesterov(0.0), {}},
                   inst, h, good_s, 300);
  auto plan = auto_plan(tr);
  auto rep = certify(tr, plan.kind, plan.formula, ref_of(inst));
  CHECK(rep.overall);
  CHECK(rep.eps_nonpositive);
  REQUIRE(rep.strong_contract.has_value());
  CHECK(*rep.strong_contract);

  // Per-A_k normalized Lyapunov decays geometrically.
  auto E = evaluate_lyapunov(tr, plan.kind, ref_of(inst));
  double Et0 = E[0] / tr.records[0].A;
  for (std::size_t k = 0; k < E.size(); ++k) {
    double Etk = E[k] / tr.records[k].A;
    CHECK(Etk <= std::pow(1.0 - tau, double(k)) * Et0 * (1.0 + 1e-6) + 1e-300);
  }

  auto bad_s = schedules::constant_tau(2.0 * tau, TauConvention::over_Ak1,
                                       1.0, std::sqrt(eps));
  auto tr2 = run_on({MethodId::agd_strong, GradientMapSpec::nesterov(0.0), {}},
                    inst, h, bad_s, 100);
  auto rep2 = certify(tr2, plan.kind, auto_plan(tr2).formula, ref_of(inst));
  CHECK_FALSE(rep2.eps_nonpositive);
  CHECK_FALSE(report_verdict(tr2, rep2));
}

TEST_CASE("frank-wolfe per-step error equals the certifier formula") {
  auto pi = corpus("quadratic_illcond", 20, 9, {{"simplex_center", 1.0}});
  auto tr = run_on({MethodId::frank_wolfe, {}, {}}, pi,
                   DistanceGenerator::euclidean(20), schedules::fw_classic(),
                   400);
  auto plan = auto_plan(tr);
  REQUIRE(plan.formula.id == ErrorFormula::Id::fw_smooth);
  auto eps = evaluate_error_terms(tr, plan.formula);
  for (std::size_t k = 0; k + 1 < tr.records.size(); ++k) {
    REQUIRE(tr.records[k + 1].eps_step.has_value());
    CHECK(eps[k] ==
          Catch::Approx(*tr.records[k + 1].eps_step).epsilon(1e-12));
  }
}

TEST_CASE("frank-wolfe certificate on quadratic and Holder objectives") {
  auto pi = corpus("quadratic_illcond", 10, 9, {{"simplex_center", 1.0}});
  auto tr = run_on({MethodId::frank_wolfe, {}, {}}, pi,
                   DistanceGenerator::euclidean(10), schedules::fw_classic(),
                   300);
  auto plan = auto_plan(tr);
  auto rep = certify(tr, plan.kind, plan.formula, ref_of(pi));
  CHECK(rep.overall);

  // Holder gradients with nu = 1/2.
  Vec c = Vec::Constant(10, 0.1);
  ProblemInstance ph;
  ph.id = "holder_fw";
  ph.objective = make_holder_objective(c, 0.5, 1.0);
  ph.objective->domain = Domain::simplex(10);
  ph.set = FeasibleSet::simplex(10);
  ph.x0 = Vec::Unit(10, 3);
  auto trh = run_on({MethodId::frank_wolfe, {}, {}}, ph,
                    DistanceGenerator::euclidean(10), schedules::fw_classic(),
                    300);
  auto planh = auto_plan(trh);
  REQUIRE(planh.formula.id == ErrorFormula::Id::fw_holder);
  auto reph = certify(trh, planh.kind, planh.formula, *ph.objective->reference);
  CHECK(reph.overall);
}

TEST_CASE("fista on the lasso certifies nonpositive errors") {
  auto inst = corpus("lasso", 30, 3);
  double eps = 1.0 / *inst.composite->smooth_part.meta.lipschitz_grad_L;
  auto s = schedules::quadratic(eps, 1.0, std::sqrt(eps));
  auto tr = run_on({MethodId::fista, {}, {}}, inst,
                   DistanceGenerator::euclidean(30), s, 400);
  auto plan = auto_plan(tr);
  auto rep = certify(tr, plan.kind, plan.formula, ref_of(inst));
  CHECK(rep.overall);
  CHECK(rep.eps_nonpositive);
  CHECK(rep.rate_fit.exponent < -1.5);
}

TEST_CASE("universal family-II certificate on quad_quartic") {
  auto inst = corpus("quad_quartic", 2, 5);
  const Objective& f = *inst.objective;
  double eps = f.meta.holder->epsilon;
  double N = 1.2, pt = 3.0;
  auto gm = GradientMapSpec::universal_higher(eps, 3, 1.0, N);
  double C = std::pow(eps * 0.5, 1.0 / (pt - 1.0)) * pt / (pt - 1.0) *
             std::sqrt(N * N - 1.0) / (2.0 * N);
  auto s = schedules::polynomial(C, pt);
  auto hp = DistanceGenerator::p_power(2, 3.0);
  auto tr = run_on({MethodId::agd_II, gm, {}}, inst, hp, s, 150);
  auto plan = auto_plan(tr);
  REQUIRE(plan.formula.id == ErrorFormula::Id::universal_II);
  auto rep = certify(tr, plan.kind, plan.formula, ref_of(inst));
  CHECK(rep.overall);
  CHECK(rep.eps_nonpositive);
}

TEST_CASE("vacuous certification of an empty-after-init trace") {
  auto inst = corpus("quadratic_illcond", 4, 2);
  auto tr = run_on({MethodId::implicit, {}, {}}, inst,
                   DistanceGenerator::euclidean(4), schedules::geometric(2.0),
                   0);
  auto plan = auto_plan(tr);
  auto rep = certify(tr, plan.kind, plan.formula, ref_of(inst));
  CHECK(rep.vacuous);
  CHECK(rep.overall);
  CHECK(rep.per_k.empty());
}

TEST_CASE("missing trace fields raise MissingTraceField") {
  auto inst = corpus("quadratic_illcond", 4, 2);
  auto tr = run_on({MethodId::implicit, {}, {}}, inst,
                   DistanceGenerator::euclidean(4), schedules::geometric(2.0),
                   3);
  ErrorFormula fm;
  fm.id = ErrorFormula::Id::fw_smooth;
  fm.eps = 1.0;
  CHECK_THROWS_AS(evaluate_error_terms(tr, fm), MissingTraceField);
}

TEST_CASE("stochastic quasi-monotone: mean E_k below the summed bound") {
  auto inst = corpus("l1_on_box", 6, 3);
  auto h = DistanceGenerator::euclidean_on(Domain::box(-1, 1, 6));
  auto s = schedules::sqrt_decay(0.3);
  int n_seeds = 40, iters = 150;
  std::vector<double> meanE(iters + 1, 0.0), mean_bound(iters + 1, 0.0);
  for (int sd = 0; sd < n_seeds; ++sd) {
    auto tr = run_on(stochastic_variant(MethodId::agd_I,
                                        NoiseSpec::bounded(0.4)),
                     inst, h, s, iters, 1000 + sd);
    auto plan = auto_plan(tr);
    auto E = evaluate_lyapunov(tr, plan.kind, ref_of(inst));
    auto eps = evaluate_error_terms(tr, plan.formula);
    double acc = 0.0;
    for (int k = 0; k <= iters; ++k) {
      meanE[k] += E[k] / n_seeds;
      mean_bound[k] += (E[0] + acc) / n_seeds;
      if (k < iters) acc += s.delta * eps[k];
    }
  }
  for (int k = 0; k <= iters; ++k)
    CHECK(meanE[k] <= mean_bound[k] * (1.0 + 1e-9) + 1e-12);
}

TEST_CASE("rate fit recovers a planted power law") {
  Trace tr;
  tr.ctx.geometry = DistanceGenerator::euclidean(1);
  tr.ctx.method = MethodId::frank_wolfe;
  for (int k = 0; k <= 200; ++k) {
    TraceRecord r;
    r.k = k;
    r.A = k + 1.0;
    r.x = r.y = r.z = Vec::Zero(1);
    r.gap_x = r.gap_y = 3.0 * std::pow(k + 1.0, -1.7);
    tr.records.push_back(r);
  }
  auto fit = detail::fit_rate(tr, LyapunovKind::value_only, "power");
  CHECK(fit.exponent == Catch::Approx(-1.7).margin(0.02));
  CHECK(fit.r2 > 0.999);
}
