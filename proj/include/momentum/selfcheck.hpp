#pragma once

#include <ostream>

#include "momentum/certify.hpp"
#include "momentum/corpus.hpp"

namespace momentum {

/// Invariant suites behind the `selfcheck` subcommand: geometry identities,
/// oracle checks over the corpus, reduction identities, and negative
/// controls. Returns the number of failing suites.
inline int run_selfcheck(int samples, int seed, std::ostream& out) {
  int failures = 0;
  auto suite = [&](const std::string& name, bool ok) {
    out << (ok ? "pass" : "FAIL") << "  " << name << "\n";
    if (!ok) ++failures;
  };

  // Geometry invariants.
  {
    Rng rng(static_cast<std::uint64_t>(seed));
    for (int kindcase = 0; kindcase < 3; ++kindcase) {
      DistanceGenerator h = kindcase == 0 ? DistanceGenerator::euclidean(6)
                            : kindcase == 1
                                ? DistanceGenerator::p_power(6, 3.0)
                                : DistanceGenerator::negative_entropy(6);
      bool round = true, three = true, nonneg = true;
      for (int i = 0; i < samples; ++i) {
        Vec x = sample_domain_point(h.domain, rng);
        Vec y = sample_domain_point(h.domain, rng);
        Vec z = sample_domain_point(h.domain, rng);
        round = round && (mirror_inverse(h, grad(h, x)) - x).norm() <=
                             1e-10 * (1.0 + x.norm());
        double lhs = (grad(h, z).coords - grad(h, x).coords).dot(y - z) +
                     divergence(h, y, z);
        double rhs = divergence(h, y, x) - divergence(h, z, x);
        three = three && std::abs(lhs - rhs) <= 1e-10;
        nonneg = nonneg && divergence(h, y, x) >= -1e-12;
      }
      suite("geometry round trip / three-point / nonnegativity (" +
                std::to_string(kindcase) + ")",
            round && three && nonneg);
    }
    suite("uniform convexity modulus euclidean",
          check_uniform_convexity(DistanceGenerator::euclidean(5), samples,
                                  seed)
              .pass);
    suite("uniform convexity modulus p_power(4)",
          check_uniform_convexity(DistanceGenerator::p_power(5, 4.0), samples,
                                  seed + 1)
              .pass);
    suite("uniform convexity modulus entropy",
          check_uniform_convexity(DistanceGenerator::negative_entropy(5),
                                  samples, seed + 2)
              .pass);
  }

  // Problem oracles.
  {
    Rng rng(static_cast<std::uint64_t>(seed + 3));
    for (const char* name :
         {"quadratic_illcond", "logsumexp", "logistic", "quad_quartic"}) {
      auto inst = corpus(name, 6, seed);
      bool fd = true;
      for (int i = 0; i < 20; ++i) {
        Vec x = inst.x0 + 0.3 * gaussian_vector(6, rng);
        fd = fd && finite_diff_check(*inst.objective, x, 1e-6).pass;
      }
      suite(std::string("finite differences: ") + name, fd);
      if (inst.objective->reference)
        suite(std::string("reference optimality: ") + name,
              inst.objective->gradient(inst.objective->reference->x_star)
                      .lpNorm<Eigen::Infinity>() <= 1e-8);
    }
    auto lasso = corpus("lasso", 20, seed);
    const auto& c = *lasso.composite;
    double t = 1.0 / *c.smooth_part.meta.lipschitz_grad_L;
    Vec xs = c.reference->x_star;
    Vec pr = prox(c, xs - t * c.smooth_part.gradient(xs), t);
    suite("reference optimality: lasso",
          (pr - xs).lpNorm<Eigen::Infinity>() <= 1e-8);

    bool lmo_ok = true;
    auto set = FeasibleSet::simplex(6);
    for (int i = 0; i < samples; ++i) {
      Vec d = gaussian_vector(6, rng);
      Vec v = lmo(set, d);
      lmo_ok = lmo_ok && v.maxCoeff() == 1.0 && v.lpNorm<1>() == 1.0;
    }
    suite("lmo returns extreme points", lmo_ok);

    auto quad = corpus("quadratic_illcond", 6, seed, {{"kappa", 64.0}});
    bool bracket = true;
    double L = *quad.objective->meta.lipschitz_grad_L;
    double mu = *quad.objective->meta.strong_convexity_mu;
    for (int i = 0; i < samples; ++i) {
      Vec x = gaussian_vector(6, rng), y = gaussian_vector(6, rng);
      double curv = (quad.objective->gradient(x) - quad.objective->gradient(y))
                        .dot(x - y);
      double nn = (x - y).squaredNorm();
      bracket = bracket && curv >= mu * nn * (1 - 1e-9) - 1e-12 &&
                curv <= L * nn * (1 + 1e-9) + 1e-12;
    }
    suite("mu/L bracket sampled curvature", bracket);
  }

  // Reduction identities and negative controls.
  {
    auto inst = corpus("l1_on_box", 6, seed);
    auto h = DistanceGenerator::euclidean_on(Domain::box(-1, 1, 6));
    auto s = schedules::sqrt_decay(0.4);
    auto det = run({MethodId::agd_I, GradientMapSpec::identity(), {}},
                   inst.input(), h, s, 50, 7, inst.x0);
    auto sto = run(stochastic_variant(MethodId::agd_I, NoiseSpec::gaussian(0.0)),
                   inst.input(), h, s, 50, 7, inst.x0);
    bool same = true;
    for (std::size_t i = 0; i < det.records.size(); ++i)
      same = same && det.records[i].x == sto.records[i].x;
    suite("noise scale 0 reduces to deterministic", same);

    // psi = 0 composite runs coincide with their smooth counterparts.
    auto base = corpus("quadratic_illcond", 6, seed, {{"kappa", 16.0}});
    CompositeObjective comp;
    comp.id = "reduction";
    comp.smooth_part = *base.objective;
    comp.simple_part = SimplePart::none();
    comp.reference = base.objective->reference;
    comp.gap_oracle = base.objective->gap_oracle;
    ProblemInstance pc;
    pc.id = comp.id;
    pc.composite = std::move(comp);
    pc.x0 = base.x0;
    double eps = 1.0 / *base.objective->meta.lipschitz_grad_L;
    auto he = DistanceGenerator::euclidean(6);
    auto sq = schedules::quadratic(eps, 1.0, std::sqrt(eps));
    auto tf = run({MethodId::fista, {}, {}}, pc.input(), he, sq, 60, 1, pc.x0);
    auto ta = run({MethodId::agd_I, GradientMapSpec::tseng(), {}},
                  base.input(), he, sq, 60, 1, base.x0);
    bool reduce = true;
    for (std::size_t i = 0; i < tf.records.size(); ++i)
      reduce = reduce && (tf.records[i].y - ta.records[i].y)
                                 .lpNorm<Eigen::Infinity>() <= 1e-12;
    suite("psi = 0 proximal run coincides with the smooth method", reduce);

    auto tr = run({MethodId::agd_I, GradientMapSpec::nesterov(0.0), {}},
                  base.input(), DistanceGenerator::euclidean(6),
                  schedules::quadratic(eps), 60, 1, base.x0);
    auto plan = auto_plan(tr);
    auto good = certify(tr, plan.kind, plan.formula, *base.objective->reference);
    tr.records[30].gap_y += 1.0;
    auto bad = certify(tr, plan.kind, plan.formula, *base.objective->reference);
    suite("negative control: corrupted trace fails",
          good.overall && !bad.overall);

    auto infeasible = schedule_feasibility(schedules::geometric(2.0),
                                           FeasibilityCondition::eq22, 40, eps,
                                           1.0);
    suite("negative control: infeasible schedule detected", !infeasible.pass);
  }

  out << (failures == 0 ? "selfcheck: all suites passed\n"
                        : "selfcheck: FAILURES\n");
  return failures;
}

}  // namespace momentum
