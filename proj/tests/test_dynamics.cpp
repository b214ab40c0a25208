#include <catch2/catch_amalgamated.hpp>

#include "momentum/corpus.hpp"
#include "momentum/dynamics.hpp"
#include "momentum/estimate_sequence.hpp"

using namespace momentum;

namespace {

Objective one_d_quadratic(double curvature) {
  auto q = std::make_shared<QuadraticForm>();
  q->eigs = Vec::Constant(1, curvature);
  q->house = Vec::Ones(1);
  q->center = Vec::Zero(1);
  Objective f = detail::quadratic_objective(q, "1d_quad");
  return f;
}

Objective zero_objective(int dim) {
  Objective f;
  f.id = "zero";
  f.dim = dim;
  f.domain = Domain::full(dim);
  f.value_oracle = [](const Vec&) { return 0.0; };
  f.grad_oracle = [dim](const Vec&) { return Vec(Vec::Zero(dim)); };
  f.reference = ReferenceSolution{Vec::Zero(dim), 0.0, Provenance::closed_form, 0};
  f.gap_oracle = [](const Vec&) { return 0.0; };
  return f;
}

}  // namespace

TEST_CASE("first EL dynamics: O(1/t^2) guarantee on a quadratic") {
  Objective f = one_d_quadratic(1.0);
  auto h = DistanceGenerator::euclidean(1);
  auto s = ContinuousSchedule::polynomial(2.0);
  Vec x0 = Vec::Ones(1), v0 = Vec::Zero(1);
  auto tr = simulate_first_el(f, h, s, x0, v0, 1.0, 100.0);

  double E0 = divergence(h, Vec::Zero(1), x0) + s.ebeta(1.0) * f.value(x0);
  for (const auto& smp : tr.samples) {
    double t = smp.state.t;
    CHECK(smp.f_value <= E0 / (t * t) * (1.0 + 1e-6) + 1e-12);
  }
  auto mono = continuous_lyapunov(tr, ContinuousKind::weak, h, Vec::Zero(1),
                                  0.0);
  CHECK(mono.pass);
}

TEST_CASE("zero gradient: Z constant in dual coordinates") {
  Objective f = zero_objective(3);
  auto h = DistanceGenerator::euclidean(3);
  auto s = ContinuousSchedule::polynomial(2.0);
  Vec x0(3);
  x0 << 1, -2, 0.5;
  Vec v0 = Vec::Zero(3);
  auto tr = simulate_first_el(f, h, s, x0, v0, 1.0, 50.0);
  for (const auto& smp : tr.samples)
    CHECK((smp.state.Z - x0).lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("first EL trajectory matches the closed second-order form") {
  // beta = 2 log(t/2) makes the dynamics X'' + (3/t) X' + grad f(X) = 0.
  auto base = corpus("quadratic_illcond", 3, 21, {{"kappa", 4.0}});
  const Objective& f = *base.objective;
  auto h = DistanceGenerator::euclidean(3);
  auto s = ContinuousSchedule::polynomial(2.0, 2.0);
  Vec x0 = base.x0, v0 = Vec::Zero(3);
  IntegratorOpts opts;
  opts.samples = 101;
  auto tr = simulate_first_el(f, h, s, x0, v0, 2.0, 40.0, opts);

  // Independent dense-output route: integrate the second-order form.
  detail::Rk45 rk(
      [&](double t, const Vec& y) {
        Vec X = y.head(3), V = y.tail(3);
        Vec out(6);
        out.head(3) = V;
        out.tail(3) = -3.0 / t * V - f.gradient(X);
        return out;
      },
      opts);
  Vec y0(6);
  y0 << x0, v0;
  std::vector<Vec> ref;
  rk.integrate(2.0, y0, detail::linspace(2.0, 40.0, opts.samples),
               [&](double, const Vec& y) { ref.push_back(y.head(3)); },
               nullptr);
  REQUIRE(ref.size() == tr.samples.size());
  for (std::size_t i = 0; i < ref.size(); ++i)
    CHECK((tr.samples[i].state.X - ref[i]).norm() <= 1e-5);
}

TEST_CASE("second EL dynamics: exponential Lyapunov decrease") {
  double mu = 0.8;
  Objective f = one_d_quadratic(mu);
  auto h = DistanceGenerator::euclidean(1);
  auto s = ContinuousSchedule::linear(std::sqrt(mu));
  Vec x0 = Vec::Ones(1), v0 = Vec::Zero(1);
  auto tr = simulate_second_el(f, h, mu, s, x0, v0, 0.0, 20.0);

  auto mono = continuous_lyapunov(tr, ContinuousKind::strong, h, Vec::Zero(1),
                                  0.0, mu);
  CHECK(mono.pass);
  // Rate: gap <= C e^{-sqrt(mu) t} with C from the t0 Lyapunov value.
  double C = mono.E.front();
  for (const auto& smp : tr.samples)
    CHECK(smp.f_value <= C * std::exp(-std::sqrt(mu) * smp.state.t) *
                             (1.0 + 1e-6) +
                         1e-12);
}

TEST_CASE("second EL stationary start stays put") {
  double mu = 0.5;
  Objective f = one_d_quadratic(mu);
  auto h = DistanceGenerator::euclidean(1);
  auto s = ContinuousSchedule::linear(std::sqrt(mu));
  Vec x0 = Vec::Zero(1), v0 = Vec::Zero(1);
  auto tr = simulate_second_el(f, h, mu, s, x0, v0, 0.0, 10.0);
  for (const auto& smp : tr.samples)
    CHECK(smp.state.X.lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("prox dynamics reduce to plain dynamics when psi = 0") {
  auto base = corpus("quadratic_illcond", 3, 8, {{"kappa", 5.0}});
  CompositeObjective c;
  c.smooth_part = *base.objective;
  c.simple_part = SimplePart::none();
  c.reference = base.objective->reference;
  auto h = DistanceGenerator::euclidean(3);
  auto s = ContinuousSchedule::polynomial(2.0);
  Vec v0 = Vec::Zero(3);
  auto t1 = simulate_prox_first(c, h, s, base.x0, v0, 1.0, 30.0);
  auto t2 = simulate_first_el(*base.objective, h, s, base.x0, v0, 1.0, 30.0);
  REQUIRE(t1.samples.size() == t2.samples.size());
  for (std::size_t i = 0; i < t1.samples.size(); ++i)
    CHECK((t1.samples[i].state.X - t2.samples[i].state.X)
              .lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("prox dynamics with smooth quadratic psi differ but both certify") {
  auto base = corpus("quadratic_illcond", 3, 8, {{"kappa", 5.0}, {"shift", 1.0}});
  CompositeObjective c;
  c.smooth_part = *base.objective;
  c.simple_part = SimplePart::quad(0.7);
  // f = phi + psi is a shifted quadratic; reference via its gradient:
  // grad f(x) = Q(x - c0) + 0.7 x = 0.
  Mat Q = base.objective->hessian_oracle(Vec::Zero(3));
  Vec c0 = base.objective->reference->x_star;
  Vec xstar = (Q + 0.7 * Mat::Identity(3, 3)).ldlt().solve(Q * c0);
  double fstar = base.objective->value(xstar) + 0.35 * xstar.squaredNorm();
  c.reference = ReferenceSolution{xstar, fstar, Provenance::closed_form, 0};

  auto h = DistanceGenerator::euclidean(3);
  auto s = ContinuousSchedule::polynomial(2.0);
  Vec v0 = Vec::Zero(3);
  auto tp = simulate_prox_first(c, h, s, base.x0, v0, 1.0, 40.0);

  // Plain dynamics on f = phi + psi as a single smooth objective.
  Objective sum;
  sum.id = "sum";
  sum.dim = 3;
  sum.domain = Domain::full(3);
  sum.value_oracle = [&c](const Vec& x) { return c.value(x); };
  sum.grad_oracle = [&c](const Vec& x) {
    return Vec(c.smooth_part.gradient(x) + c.simple_part.subgrad(x));
  };
  sum.reference = c.reference;
  auto ts = simulate_first_el(sum, h, s, base.x0, v0, 1.0, 40.0);

  // Trajectories differ (the psi gradient rides on Z, not X)...
  double dev = 0.0;
  for (std::size_t i = 0; i < tp.samples.size(); ++i)
    dev = std::max(dev, (tp.samples[i].state.X - ts.samples[i].state.X).norm());
  CHECK(dev > 1e-4);
  // ...but both Lyapunov monitors are monotone.
  CHECK(continuous_lyapunov(tp, ContinuousKind::weak, h, xstar, fstar).pass);
  CHECK(continuous_lyapunov(ts, ContinuousKind::weak, h, xstar, fstar).pass);
}

TEST_CASE("prox first on a lasso-like composite fits O(1/t^2)") {
  auto inst = corpus("lasso", 10, 5);
  CompositeObjective c = *inst.composite;
  // Huberize the l1 part so the field is smooth along the path.
  c.simple_part = SimplePart::huber_l1(c.simple_part.weight, 1e-3);
  // Reference for the huberized composite: a long accelerated proximal run
  // (independent of the continuous dynamics being tested here).
  {
    ProblemInstance ph;
    ph.id = "huber_lasso";
    ph.composite = c;
    ph.x0 = Vec::Zero(10);
    double eps = 1.0 / *c.smooth_part.meta.lipschitz_grad_L;
    auto tr = run({MethodId::fista, {}, {}}, ph.input(),
                  DistanceGenerator::euclidean(10),
                  schedules::quadratic(eps, 1.0, std::sqrt(eps)), 20000, 1,
                  ph.x0);
    const Vec& xs = tr.records.back().y;
    c.reference = ReferenceSolution{xs, c.value(xs),
                                    Provenance::high_accuracy_solve, 1e-9};
  }

  auto h = DistanceGenerator::euclidean(10);
  auto s = ContinuousSchedule::polynomial(2.0);
  IntegratorOpts opts;
  opts.samples = 400;
  auto tr = simulate_prox_first(c, h, s, Vec::Zero(10), Vec::Zero(10), 1.0,
                                200.0, opts);
  // Log-log slope of the gap over the tail of the time range.
  std::vector<double> lx, ly;
  for (const auto& smp : tr.samples) {
    double gap = smp.f_value - c.reference->f_star;
    if (smp.state.t >= 20.0 && gap > 1e-13) {
      lx.push_back(std::log(smp.state.t));
      ly.push_back(std::log(gap));
    }
  }
  REQUIRE(lx.size() > 10);
  double n = lx.size(), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope <= -1.6);
}

TEST_CASE("prox second reduces to second EL and certifies") {
  auto base = corpus("quadratic_illcond", 3, 12, {{"kappa", 9.0}});
  double mu = *base.objective->meta.strong_convexity_mu;
  CompositeObjective c;
  c.smooth_part = *base.objective;
  c.simple_part = SimplePart::none();
  c.reference = base.objective->reference;
  auto h = DistanceGenerator::euclidean(3);
  auto s = ContinuousSchedule::linear(std::sqrt(mu));
  Vec v0 = Vec::Zero(3);
  auto tp = simulate_prox_second(c, h, mu, s, base.x0, v0, 0.0, 15.0);
  CHECK(continuous_lyapunov(tp, ContinuousKind::strong, h,
                            c.reference->x_star, c.reference->f_star, mu)
            .pass);
  // Stationary start at x*.
  auto ts = simulate_prox_second(c, h, mu, s, c.reference->x_star, v0, 0.0,
                                 5.0);
  for (const auto& smp : ts.samples)
    CHECK((smp.state.X - c.reference->x_star).norm() <= 1e-10);
}

TEST_CASE("corrupted trace fails the monotonicity verdict") {
  Objective f = one_d_quadratic(1.0);
  auto h = DistanceGenerator::euclidean(1);
  auto s = ContinuousSchedule::polynomial(2.0);
  auto tr = simulate_first_el(f, h, s, Vec::Ones(1), Vec::Zero(1), 1.0, 20.0);
  tr.samples[100].f_value += 1.0;  // injected jump
  auto mono =
      continuous_lyapunov(tr, ContinuousKind::weak, h, Vec::Zero(1), 0.0);
  CHECK_FALSE(mono.pass);
  CHECK(mono.first_fail == 99);
}

TEST_CASE("verdicts are robust to halving the tolerance") {
  auto base = corpus("quadratic_illcond", 2, 31, {{"kappa", 20.0}});
  auto h = DistanceGenerator::euclidean(2);
  auto s = ContinuousSchedule::polynomial(2.0);
  for (double tol : {1e-8, 5e-9}) {
    IntegratorOpts opts;
    opts.rel_tol = tol;
    opts.abs_tol = tol * 1e-2;
    auto tr = simulate_first_el(*base.objective, h, s, base.x0, Vec::Zero(2),
                                1.0, 60.0, opts);
    auto mono = continuous_lyapunov(tr, ContinuousKind::weak, h,
                                    base.objective->reference->x_star,
                                    base.objective->reference->f_star);
    CHECK(mono.pass);
  }
}

TEST_CASE("time dilation: identity map gives zero deviation") {
  auto base = corpus("quadratic_illcond", 2, 3, {{"kappa", 3.0}});
  auto h = DistanceGenerator::euclidean(2);
  auto s = ContinuousSchedule::polynomial(2.0);
  auto rep = time_dilation_check(
      *base.objective, h, s, [](double t) { return t; },
      [](double) { return 1.0; }, base.x0, Vec::Zero(2), 1.0, 20.0);
  CHECK(rep.pass);
  CHECK(rep.max_deviation <= 1e-9 * rep.scale);
}

TEST_CASE("time dilation: beta = 2 log t under tau(t) = t^2") {
  auto base = corpus("quadratic_illcond", 2, 3, {{"kappa", 3.0}});
  auto h = DistanceGenerator::euclidean(2);
  auto s = ContinuousSchedule::polynomial(2.0);
  auto rep = time_dilation_check(
      *base.objective, h, s, [](double t) { return t * t; },
      [](double t) { return 2.0 * t; }, base.x0, Vec::Zero(2), 1.0, 7.0);
  CHECK(rep.pass);
}

TEST_CASE("time dilation: linear schedule under tau(t) = 2t") {
  double mu = 1.0;
  Objective f = one_d_quadratic(mu);
  auto h = DistanceGenerator::euclidean(1);
  // Weak-family dynamics with a linear beta; dilation doubles the clock.
  auto s = ContinuousSchedule::linear(0.5);
  auto rep = time_dilation_check(
      f, h, s, [](double t) { return 2.0 * t; }, [](double) { return 2.0; },
      Vec::Ones(1), Vec::Zero(1), 0.5, 6.0);
  CHECK(rep.pass);
}

TEST_CASE("integration blowup raises") {
  Objective f;
  f.id = "concave";
  f.dim = 1;
  f.domain = Domain::full(1);
  f.value_oracle = [](const Vec& x) { return -0.5 * x.squaredNorm(); };
  f.grad_oracle = [](const Vec& x) { return Vec(-x); };
  auto h = DistanceGenerator::euclidean(1);
  auto s = ContinuousSchedule::polynomial(4.0);
  IntegratorOpts opts;
  opts.max_norm = 1e4;
  CHECK_THROWS_AS(simulate_first_el(f, h, s, Vec::Ones(1), Vec::Zero(1), 1.0,
                                    2000.0, opts),
                  IntegrationBlowup);
}

TEST_CASE("continuous estimate sequence holds along quadratic trajectories") {
  auto base = corpus("quadratic_illcond", 2, 17, {{"kappa", 8.0}});
  auto h = DistanceGenerator::euclidean(2);
  auto s = ContinuousSchedule::polynomial(2.0);
  auto tr = simulate_first_el(*base.objective, h, s, base.x0, Vec::Zero(2),
                              1.0, 50.0);
  auto rep =
      continuous_estimate_sequence(tr, h, *base.objective->reference);
  CHECK(rep.pass);

  // Stationary trace at x*: phi_t constant = f*.
  auto st = simulate_first_el(*base.objective, h, s,
                              base.objective->reference->x_star, Vec::Zero(2),
                              1.0, 10.0);
  auto rep2 = continuous_estimate_sequence(st, h, *base.objective->reference);
  for (double phi : rep2.phi_at_xstar)
    CHECK(phi == Catch::Approx(base.objective->reference->f_star)
                     .margin(1e-10));
}
