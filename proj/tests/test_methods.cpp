#include <catch2/catch_amalgamated.hpp>

#include "momentum/certify.hpp"
#include "momentum/corpus.hpp"
#include "momentum/methods.hpp"

using namespace momentum;

namespace {

Trace run_named(const MethodConfig& cfg, const ProblemInstance& inst,
                const DistanceGenerator& h, const DiscreteSchedule& s,
                int iters, std::uint64_t seed = 1) {
  return run(cfg, inst.input(), h, s, iters, seed, inst.x0);
}

}  // namespace

TEST_CASE("implicit method: Lyapunov decreases for doubling A_k") {
  auto inst = corpus("quadratic_illcond", 12, 3, {{"kappa", 100.0}});
  auto h = DistanceGenerator::euclidean(12);
  auto s = schedules::geometric(2.0);
  auto tr = run_named({MethodId::implicit, {}, {}}, inst, h, s, 40);
  auto E = evaluate_lyapunov(tr, LyapunovKind::weak_x,
                             *inst.objective->reference);
  for (std::size_t k = 0; k + 1 < E.size(); ++k)
    CHECK(E[k + 1] <= E[k] + 1e-9 * (1.0 + E[0]));
  CHECK(tr.ctx.implicit_residual <= 1e-9);
}

TEST_CASE("implicit method on entropy geometry keeps residual tiny") {
  // Smooth quadratic restricted to the simplex, optimum interior so the
  // entropy iterates stay away from the boundary.
  Rng crng(4);
  auto q = std::make_shared<QuadraticForm>();
  q->eigs = Vec::LinSpaced(5, 0.5, 4.0);
  Vec v = gaussian_vector(5, crng);
  q->house = v / v.norm();
  q->center = simplex_vector(5, crng);
  Objective f = detail::quadratic_objective(q, "simplex_quad");
  f.domain = Domain::simplex(5);
  f.reference.reset();
  f.gap_oracle = nullptr;
  ProblemInstance pi;
  pi.id = "simplex_quad";
  pi.objective = std::move(f);
  pi.x0 = Vec::Constant(5, 0.2);
  auto h = DistanceGenerator::negative_entropy(5);
  auto s = schedules::geometric(1.5);
  auto tr = run_named({MethodId::implicit, {}, {}}, pi, h, s, 25);
  CHECK(tr.ctx.implicit_residual <= 1e-10 * 2);
  for (const auto& r : tr.records) {
    CHECK(r.z.minCoeff() > 0.0);
    CHECK(r.z.sum() == Catch::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("stationary starts are fixed points") {
  auto inst = corpus("quadratic_illcond", 6, 5);
  const Vec xs = inst.objective->reference->x_star;
  ProblemInstance at_opt = inst;
  at_opt.x0 = xs;
  auto h = DistanceGenerator::euclidean(6);

  auto imp = run_named({MethodId::implicit, {}, {}}, at_opt, h,
                       schedules::geometric(2.0), 5);
  CHECK((imp.records.back().x - xs).norm() <= 1e-12);

  auto agd = run_named(
      {MethodId::agd_I, GradientMapSpec::nesterov(0.0), {}}, at_opt, h,
      schedules::quadratic(1.0 / *inst.objective->meta.lipschitz_grad_L), 5);
  CHECK((agd.records.back().x - xs).norm() <= 1e-12);
  CHECK((agd.records.back().y - xs).norm() <= 1e-12);

  auto str = run_named(
      {MethodId::agd_strong, GradientMapSpec::nesterov(0.0), {}}, at_opt, h,
      schedules::constant_tau(0.05, TauConvention::over_Ak1), 5);
  CHECK((str.records.back().y - xs).norm() <= 1e-12);

  auto qm = run_named({MethodId::quasi_monotone_strong, {}, {}}, at_opt, h,
                      schedules::tau_2_over_k2(), 5);
  CHECK((qm.records.back().x - xs).norm() <= 1e-12);
}

TEST_CASE("zero iterations yields the initial record only") {
  auto inst = corpus("quadratic_illcond", 4, 2);
  auto h = DistanceGenerator::euclidean(4);
  auto tr = run_named({MethodId::agd_I, GradientMapSpec::nesterov(0.0), {}},
                      inst, h, schedules::quadratic(0.01), 0);
  CHECK(tr.records.size() == 1);
  CHECK(tr.records[0].x == inst.x0);
}

TEST_CASE("identical configs produce identical traces") {
  auto inst = corpus("l1_on_box", 8, 4);
  auto h = DistanceGenerator::euclidean_on(Domain::box(-1, 1, 8));
  MethodConfig cfg{MethodId::agd_I, GradientMapSpec::identity(),
                   NoiseSpec::bounded(0.3)};
  auto s = schedules::sqrt_decay(0.5);
  auto t1 = run_named(cfg, inst, h, s, 100, 42);
  auto t2 = run_named(cfg, inst, h, s, 100, 42);
  REQUIRE(t1.records.size() == t2.records.size());
  for (std::size_t i = 0; i < t1.records.size(); ++i) {
    CHECK(t1.records[i].x == t2.records[i].x);
    CHECK(t1.records[i].z == t2.records[i].z);
    CHECK(t1.records[i].f_x == t2.records[i].f_x);
  }
}

TEST_CASE("noise scale zero reduces to the deterministic stepper bitwise") {
  auto inst = corpus("l1_on_box", 6, 9);
  auto h = DistanceGenerator::euclidean_on(Domain::box(-1, 1, 6));
  auto s = schedules::sqrt_decay(0.4);
  auto det = run_named({MethodId::agd_I, GradientMapSpec::identity(), {}},
                       inst, h, s, 60, 7);
  auto sto = run_named(stochastic_variant(MethodId::agd_I,
                                          NoiseSpec::gaussian(0.0)),
                       inst, h, s, 60, 7);
  for (std::size_t i = 0; i < det.records.size(); ++i) {
    CHECK(det.records[i].x == sto.records[i].x);
    CHECK(det.records[i].z == sto.records[i].z);
  }
}

TEST_CASE("frank-wolfe iterates stay feasible and vertices certify") {
  auto inst = corpus("quadratic_illcond", 10, 6, {{"shift", 0.05}});
  // Quadratic over the simplex.
  ProblemInstance pi = inst;
  pi.set = FeasibleSet::simplex(10);
  pi.x0 = Vec::Constant(10, 0.1);
  pi.objective->domain = Domain::simplex(10);
  auto h = DistanceGenerator::euclidean(10);
  auto tr = run_named({MethodId::frank_wolfe, {}, {}}, pi, h,
                      schedules::fw_classic(), 200);
  for (const auto& r : tr.records) {
    CHECK(r.x.minCoeff() >= -1e-12);
    CHECK(r.x.sum() == Catch::Approx(1.0).epsilon(1e-9));
  }
  // LMO certificate: <grad f(x_k), x - z_k> >= 0 at sampled feasible x.
  Rng rng(5);
  for (std::size_t k = 1; k < tr.records.size(); k += 37) {
    const auto& rec = tr.records[k];
    const Vec& v = rec.require("fw_vertex");
    const Vec& g = rec.require("g_mirror");
    for (int i = 0; i < 20; ++i) {
      Vec xs = simplex_vector(10, rng);
      CHECK(g.dot(xs - v) >= -1e-10);
    }
  }
}

TEST_CASE("frank-wolfe fixed point when x_k is the LMO vertex") {
  auto inst = corpus("quadratic_illcond", 3, 8, {{"shift", 2.0}});
  ProblemInstance pi = inst;
  pi.set = FeasibleSet::simplex(3);
  pi.objective->domain = Domain::simplex(3);
  // Start at the vertex minimizing <grad f, .>; with the center far outside
  // the simplex the LMO keeps returning it.
  Vec far = -10.0 * Vec::Ones(3);
  far[0] = 10.0;
  auto q = std::make_shared<QuadraticForm>();
  q->eigs = Vec::Ones(3);
  q->house = Vec::Unit(3, 0);
  q->center = far;
  pi.objective = detail::quadratic_objective(q, "vertex_quad");
  pi.objective->domain = Domain::simplex(3);
  pi.x0 = Vec::Unit(3, 0);
  auto tr = run_named({MethodId::frank_wolfe, {}, {}}, pi,
                      DistanceGenerator::euclidean(3),
                      schedules::fw_classic(), 10);
  CHECK((tr.records.back().x - pi.x0).norm() <= 1e-12);
}

TEST_CASE("fista reduces to agd family I with the tseng map when psi = 0") {
  auto base = corpus("quadratic_illcond", 7, 11, {{"shift", 0.5}});
  CompositeObjective c;
  c.id = "quad_plus_zero";
  c.smooth_part = *base.objective;
  c.simple_part = SimplePart::none();
  c.reference = base.objective->reference;
  c.gap_oracle = base.objective->gap_oracle;
  ProblemInstance pc;
  pc.id = c.id;
  pc.composite = std::move(c);
  pc.x0 = base.x0;

  double eps = 1.0 / *base.objective->meta.lipschitz_grad_L;
  auto h = DistanceGenerator::euclidean(7);
  auto s = schedules::quadratic(eps, 1.0, std::sqrt(eps));
  auto tf = run_named({MethodId::fista, {}, {}}, pc, h, s, 50);
  auto ta = run_named({MethodId::agd_I, GradientMapSpec::tseng(), {}}, base,
                      h, s, 50);
  for (std::size_t i = 0; i < tf.records.size(); ++i) {
    CHECK((tf.records[i].x - ta.records[i].x).lpNorm<Eigen::Infinity>() <=
          1e-12);
    CHECK((tf.records[i].y - ta.records[i].y).lpNorm<Eigen::Infinity>() <=
          1e-12);
    CHECK((tf.records[i].z - ta.records[i].z).lpNorm<Eigen::Infinity>() <=
          1e-12);
  }
}

TEST_CASE("prox_strong reduces to agd_strong with the nesterov map when psi = 0") {
  auto base = corpus("quadratic_illcond", 5, 13, {{"kappa", 25.0}});
  CompositeObjective c;
  c.id = "sq_zero";
  c.smooth_part = *base.objective;
  c.simple_part = SimplePart::none();
  c.reference = base.objective->reference;
  c.gap_oracle = base.objective->gap_oracle;
  ProblemInstance pc;
  pc.id = c.id;
  pc.composite = std::move(c);
  pc.x0 = base.x0;

  double L = *base.objective->meta.lipschitz_grad_L;
  double mu = *base.objective->meta.strong_convexity_mu;
  double tau = std::sqrt(mu / L);
  auto h = DistanceGenerator::euclidean(5);
  auto s = schedules::constant_tau(tau, TauConvention::over_Ak1, 1.0,
                                   std::sqrt(1.0 / L));
  auto tp = run_named({MethodId::prox_strong, {}, {}}, pc, h, s, 60);

  // With psi = 0 the prox point is the plain strongly convex z update, and
  // the retained coupling map makes the whole iterate sequence coincide
  // with agd_strong under the same (Tseng) map.
  auto ta = run_named({MethodId::agd_strong, GradientMapSpec::tseng(), {}},
                      base, h, s, 60);
  for (std::size_t i = 0; i < tp.records.size(); ++i) {
    CHECK((tp.records[i].z - ta.records[i].z).lpNorm<Eigen::Infinity>() <=
          1e-12 * (1.0 + tp.records[i].z.norm()));
    CHECK((tp.records[i].y - ta.records[i].y).lpNorm<Eigen::Infinity>() <=
          1e-12 * (1.0 + tp.records[i].y.norm()));
  }
}

TEST_CASE("incompatible configurations are rejected with explanations") {
  auto inst = corpus("logsumexp", 5, 3);  // not strongly convex
  auto h = DistanceGenerator::euclidean(5);
  auto s = schedules::constant_tau(0.1, TauConvention::over_Ak1);
  CHECK_THROWS_AS(
      run_named({MethodId::agd_strong, GradientMapSpec::nesterov(0.0), {}},
                inst, h, s, 3),
      IncompatibleConfiguration);
  CHECK_THROWS_AS(run_named({MethodId::frank_wolfe, {}, {}}, inst, h,
                            schedules::fw_classic(), 3),
                  IncompatibleConfiguration);
  CHECK_THROWS_AS(run_named({MethodId::fista, {}, {}}, inst, h,
                            schedules::quadratic(0.1), 3),
                  IncompatibleConfiguration);
  // Non-constant tau for agd_strong.
  auto inst2 = corpus("quadratic_illcond", 5, 3);
  CHECK_THROWS_AS(
      run_named({MethodId::agd_strong, GradientMapSpec::nesterov(0.0), {}},
                inst2, h, schedules::quadratic(0.1), 3),
      IncompatibleConfiguration);
}

TEST_CASE("state invariant: mirror_inverse(z_dual) recovers z") {
  auto inst = corpus("quadratic_illcond", 6, 19, {{"shift", 0.2}});
  Objective f = *inst.objective;
  f.domain = Domain::simplex(6);
  f.reference.reset();
  f.gap_oracle = nullptr;
  ProblemInstance pi;
  pi.id = "simplex_quad2";
  pi.objective = std::move(f);
  pi.x0 = Vec::Constant(6, 1.0 / 6.0);
  auto h = DistanceGenerator::negative_entropy(6);
  auto tr = run_named({MethodId::agd_I, GradientMapSpec::identity(), {}}, pi,
                      h, schedules::sqrt_decay(0.2), 50);
  for (const auto& r : tr.records) {
    Vec back = mirror_inverse(h, {r.z_dual});
    CHECK((back - r.z).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("recorded gradients re-evaluate to the stored values") {
  auto inst = corpus("quadratic_illcond", 6, 23);
  auto h = DistanceGenerator::euclidean(6);
  auto tr = run_named({MethodId::agd_II, GradientMapSpec::nesterov(0.0), {}},
                      inst, h,
                      schedules::quadratic(
                          1.0 / *inst.objective->meta.lipschitz_grad_L),
                      40);
  for (std::size_t k = 5; k < tr.records.size(); k += 11) {
    const auto& r = tr.records[k];
    const Vec& gy = r.require("g_mirror");
    CHECK((inst.objective->gradient(r.y) - gy).lpNorm<Eigen::Infinity>() <=
          1e-12);
  }
}

TEST_CASE("higher_order_descent is a descent method") {
  auto inst = corpus("quad_quartic", 2, 5);
  const Objective& f = *inst.objective;
  auto gm = GradientMapSpec::universal_higher(f.meta.holder->epsilon, 3, 1.0,
                                              1.2);
  auto tr = run_named({MethodId::higher_order_descent, gm, {}}, inst,
                      DistanceGenerator::euclidean(2),
                      schedules::polynomial(0.3, 3.0), 40);
  for (std::size_t k = 0; k + 1 < tr.records.size(); ++k)
    CHECK(tr.records[k + 1].f_x <= tr.records[k].f_x + 1e-12);
}

TEST_CASE("universal_nu map certifies on a Holder objective") {
  Rng rng(21);
  Vec c = gaussian_vector(6, rng);
  ProblemInstance pi;
  pi.id = "holder_nu";
  pi.objective = make_holder_objective(c, 0.5, 1.0);
  pi.x0 = c + 2.0 * gaussian_vector(6, rng);
  const auto& hol = *pi.objective->meta.holder;
  auto gm = GradientMapSpec::universal_nu(hol.epsilon, hol.nu, 1e-4);
  auto h = DistanceGenerator::euclidean(6);
  // Schedule satisfying eq22 with the over-regularized eps_tilde.
  auto s = schedules::quadratic(gm.eps_tilde, 1.0, 1.0);
  auto tr = run({MethodId::agd_I, gm, {}}, pi.input(), h, s, 300, 1, pi.x0);
  auto plan = auto_plan(tr);
  REQUIRE(plan.formula.id == ErrorFormula::Id::universal_nu_I);
  auto rep = certify(tr, plan.kind, plan.formula, *pi.objective->reference);
  CHECK(rep.decrease_ok);
  // Converges to within the delta_tilde-controlled neighborhood.
  CHECK(tr.records.back().gap_y <= tr.records.front().gap_y * 0.05);
}

TEST_CASE("implicit_strong on entropy geometry meets its residual") {
  // f mu-uniformly convex w.r.t. entropy: f = h + linear tilt (mu = 1).
  int d = 5;
  Rng rng(8);
  Vec tilt = 0.3 * gaussian_vector(d, rng);
  Objective f;
  f.id = "entropy_tilt";
  f.dim = d;
  f.domain = Domain::simplex(d);
  f.value_oracle = [tilt](const Vec& x) {
    double s = 0.0;
    for (int i = 0; i < x.size(); ++i) s += x[i] * std::log(x[i]);
    return s + tilt.dot(x);
  };
  f.grad_oracle = [tilt](const Vec& x) {
    Vec g(x.size());
    for (int i = 0; i < x.size(); ++i) g[i] = 1.0 + std::log(x[i]) + tilt[i];
    return g;
  };
  f.hessian_oracle = [](const Vec& x) {
    Mat H = Mat::Zero(x.size(), x.size());
    for (int i = 0; i < x.size(); ++i) H(i, i) = 1.0 / x[i];
    return H;
  };
  f.meta.strong_convexity_mu = 1.0;
  // x* on the simplex: softmax(-tilt); f* exact.
  Vec xs = mirror_inverse(DistanceGenerator::negative_entropy(d),
                          {Vec(-tilt)});
  f.reference = ReferenceSolution{xs, f.value_oracle(xs),
                                  Provenance::closed_form, 0};
  ProblemInstance pi;
  pi.id = f.id;
  pi.objective = std::move(f);
  pi.x0 = Vec::Constant(d, 1.0 / d);

  auto h = DistanceGenerator::negative_entropy(d);
  auto tr = run({MethodId::implicit_strong, {}, {}}, pi.input(), h,
                schedules::geometric(1.5), 25, 1, pi.x0);
  CHECK(tr.ctx.implicit_residual <= 1e-10 * 2);
  auto plan = auto_plan(tr);
  auto rep = certify(tr, plan.kind, plan.formula, *pi.objective->reference);
  CHECK(rep.overall);

  // The strongly convex quasi-monotone update is closed-form in the dual
  // and meets the same residual contract.
  auto tq = run({MethodId::quasi_monotone_strong, {}, {}}, pi.input(), h,
                schedules::tau_2_over_k2(), 200, 1, pi.x0);
  CHECK(tq.ctx.implicit_residual <= 1e-10);
  auto planq = auto_plan(tq);
  auto repq = certify(tq, planq.kind, planq.formula, *pi.objective->reference);
  CHECK(repq.overall);
}

TEST_CASE("stochastic agd_strong records its draws and stays mean-bounded") {
  auto inst = corpus("quadratic_illcond", 8, 3, {{"kappa", 25.0}});
  double L = *inst.objective->meta.lipschitz_grad_L;
  double mu = *inst.objective->meta.strong_convexity_mu;
  auto s = schedules::constant_tau(std::sqrt(mu / L),
                                   TauConvention::over_Ak1, 1.0,
                                   std::sqrt(1.0 / L));
  auto cfg = stochastic_variant(MethodId::agd_strong, NoiseSpec::gaussian(0.05));
  cfg.gmap = GradientMapSpec::nesterov(1.0 / L);
  auto tr = run(cfg, inst.input(), DistanceGenerator::euclidean(8), s, 100, 5,
                inst.x0);
  CHECK(tr.ctx.stochastic);
  int draws = 0;
  for (const auto& r : tr.records)
    for (const auto& nv : r.aux) draws += nv.key == "noise";
  CHECK(draws == 100);
  // The realized gap settles near the noise floor instead of diverging.
  CHECK(tr.records.back().gap_y <= tr.records.front().gap_y);
}
