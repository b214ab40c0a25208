#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <string>

#include "momentum/methods.hpp"

namespace momentum {

/// One named problem plus everything a run needs: the objective (plain or
/// composite), an optional feasible set, and a deterministic start point.
struct ProblemInstance {
  std::string id;
  std::optional<Objective> objective;
  std::optional<CompositeObjective> composite;
  std::optional<FeasibleSet> set;
  Vec x0;

  RunInput input() const {
    RunInput in;
    in.problem_id = id;
    if (objective) in.objective = &*objective;
    if (composite) in.composite = &*composite;
    if (set) in.set = &*set;
    return in;
  }
};

using Params = std::map<std::string, double>;

namespace detail {

inline double param(const Params& p, const std::string& key, double dflt) {
  auto it = p.find(key);
  return it == p.end() ? dflt : it->second;
}

/// Reference solver: the implicit-implicit Euler method with a doubling
/// schedule does the global work (its certificate is unconditional), and a
/// Newton polish on grad f = 0 supplies the last digits once the inner
/// solves would start conditioning poorly at extreme alpha_k.
inline ReferenceSolution implicit_reference(const Objective& f, Vec x0,
                                            double tol, int max_outer = 60) {
  DistanceGenerator h = DistanceGenerator::euclidean(f.dim);
  DiscreteSchedule s = schedules::geometric(2.0, 1.0, 1.0);
  IterateState st;
  st.k = 0;
  st.x = x0;
  st.y = x0;
  st.z = x0;
  st.z_dual = grad(h, x0);
  for (int k = 0; k < max_outer; ++k) {
    st = implicit_step(f, h, s, st, nullptr);
    if (s.A(st.k) > 1e6 ||
        f.gradient(st.x).lpNorm<Eigen::Infinity>() <= 1e-6)
      break;
  }
  auto res = detail::damped_newton(
      [&](const Vec& x) { return f.gradient(x); },
      [&](const Vec& x) { return f.hessian_oracle(x); }, st.x, tol, 1e-9,
      100);
  double final_res = f.gradient(res.x).lpNorm<Eigen::Infinity>();
  if (final_res > 1e-8)
    throw InnerSolverDiverged("reference solve stalled at residual " +
                              format_double(final_res));
  return {res.x, f.value(res.x), Provenance::high_accuracy_solve, tol};
}

/// Coordinate descent for the (optionally ridge-regularized) lasso;
/// independent of every momentum method in the library. Runs until the
/// KKT residual is below tol.
inline ReferenceSolution lasso_reference(const Mat& A, const Vec& b,
                                         double lambda, double ridge,
                                         double tol) {
  int d = static_cast<int>(A.cols());
  Vec x = Vec::Zero(d);
  Vec r = b;  // residual b - A x
  Vec col_sq(d);
  for (int j = 0; j < d; ++j) col_sq[j] = A.col(j).squaredNorm() + ridge;
  for (int sweep = 0; sweep < 200000; ++sweep) {
    for (int j = 0; j < d; ++j) {
      double rho = A.col(j).dot(r) + (col_sq[j] - ridge) * x[j];
      double xn = 0.0;
      if (rho > lambda)
        xn = (rho - lambda) / col_sq[j];
      else if (rho < -lambda)
        xn = (rho + lambda) / col_sq[j];
      if (xn != x[j]) {
        r -= (xn - x[j]) * A.col(j);
        x[j] = xn;
      }
    }
    // KKT: |grad_j phi| <= lambda off the support, with sign equality on it.
    Vec g = -A.transpose() * r + ridge * x;
    double viol = 0.0;
    for (int j = 0; j < d; ++j) {
      if (x[j] != 0.0)
        viol = std::max(viol, std::abs(g[j] + lambda * (x[j] > 0 ? 1. : -1.)));
      else
        viol = std::max(viol, std::max(0.0, std::abs(g[j]) - lambda));
    }
    if (viol <= tol) break;
  }
  double fstar =
      0.5 * r.squaredNorm() + 0.5 * ridge * x.squaredNorm() + lambda * x.lpNorm<1>();
  return {x, fstar, Provenance::high_accuracy_solve, tol};
}

inline std::shared_ptr<QuadraticForm> make_quadratic(int dim, double mu,
                                                     double L, Rng& rng,
                                                     Vec center) {
  auto q = std::make_shared<QuadraticForm>();
  q->eigs.resize(dim);
  for (int i = 0; i < dim; ++i) {
    double t = dim == 1 ? 0.0 : static_cast<double>(i) / (dim - 1);
    q->eigs[i] = mu * std::pow(L / mu, t);
  }
  q->eigs[0] = mu;
  q->eigs[dim - 1] = L;
  Vec v = gaussian_vector(dim, rng);
  q->house = v / v.norm();
  q->center = std::move(center);
  return q;
}

inline Objective quadratic_objective(std::shared_ptr<QuadraticForm> q,
                                     const std::string& id) {
  Objective f;
  f.id = id;
  f.dim = static_cast<int>(q->eigs.size());
  f.domain = Domain::full(f.dim);
  f.value_oracle = [q](const Vec& x) {
    return q->quad_value(x - q->center) + q->f0;
  };
  f.grad_oracle = [q](const Vec& x) { return q->apply(x - q->center); };
  f.hessian_vec_oracle = [q](const Vec&, const Vec& v) { return q->apply(v); };
  f.hessian_oracle = [q](const Vec&) {
    int d = static_cast<int>(q->eigs.size());
    Mat H(d, d);
    for (int j = 0; j < d; ++j) {
      Vec e = Vec::Zero(d);
      e[j] = 1.0;
      H.col(j) = q->apply(e);
    }
    return H;
  };
  f.gap_oracle = [q](const Vec& x) { return q->quad_value(x - q->center); };
  f.meta.lipschitz_grad_L = q->eigs.maxCoeff();
  f.meta.strong_convexity_mu = q->eigs.minCoeff();
  f.reference = ReferenceSolution{q->center, q->f0, Provenance::closed_form, 0};
  f.quadratic = q;
  return f;
}

}  // namespace detail

/// f(x) = 1/2 x' Q x with eigenvalues log-spaced on [L/kappa, L]; x* = 0.
/// Parameters: kappa (default 1e3), L (default 1), shift (moves x* off the
/// origin), simplex_center (puts x* strictly inside the probability
/// simplex, for the conditional-gradient runs).
inline ProblemInstance corpus_quadratic_illcond(int dim, int seed,
                                                const Params& p) {
  double kappa = detail::param(p, "kappa", 1e3);
  double L = detail::param(p, "L", 1.0);
  double shift = detail::param(p, "shift", 0.0);
  bool on_simplex = detail::param(p, "simplex_center", 0.0) != 0.0;
  Rng rng(static_cast<std::uint64_t>(seed) * 2654435761u + 1);
  Vec center = Vec::Zero(dim);
  if (shift != 0.0) center = shift * gaussian_vector(dim, rng);
  if (on_simplex) center = simplex_vector(dim, rng);
  auto q = detail::make_quadratic(dim, L / kappa, L, rng, center);
  ProblemInstance inst;
  inst.id = "quadratic_illcond";
  inst.objective = detail::quadratic_objective(q, inst.id);
  inst.x0 = center + gaussian_vector(dim, rng);
  if (on_simplex) {
    inst.objective->domain = Domain::simplex(dim);
    inst.set = FeasibleSet::simplex(dim);
    inst.x0 = Vec::Constant(dim, 1.0 / dim);
  }
  return inst;
}

/// f(x) = log sum_i exp(a_i'x + b_i); smooth, not strongly convex. The
/// rows come in +/- pairs so the hull of the a_i contains the origin and a
/// minimizer exists.
inline ProblemInstance corpus_logsumexp(int dim, int seed, const Params& p) {
  int half = std::max(dim, static_cast<int>(detail::param(p, "terms", 2.0 * dim)) / 2);
  int m = 2 * half;
  Rng rng(static_cast<std::uint64_t>(seed) * 0x9e3779b9u + 7);
  Mat A(m, dim);
  for (int i = 0; i < half; ++i) {
    A.row(i) = gaussian_vector(dim, rng).transpose() / std::sqrt(double(dim));
    A.row(half + i) = -A.row(i);
  }
  Vec b = gaussian_vector(m, rng);
  auto softmax_w = [A, b](const Vec& x) {
    Vec u = A * x + b;
    double mx = u.maxCoeff();
    Vec w = (u.array() - mx).exp();
    w /= w.sum();
    return w;
  };
  Objective f;
  f.id = "logsumexp";
  f.dim = dim;
  f.domain = Domain::full(dim);
  f.value_oracle = [A, b](const Vec& x) {
    Vec u = A * x + b;
    double mx = u.maxCoeff();
    return mx + std::log((u.array() - mx).exp().sum());
  };
  f.grad_oracle = [A, softmax_w](const Vec& x) {
    return Vec(A.transpose() * softmax_w(x));
  };
  f.hessian_oracle = [A, softmax_w](const Vec& x) {
    Vec w = softmax_w(x);
    Mat AW = A.transpose() * w.asDiagonal() * A;
    Vec Aw = A.transpose() * w;
    return Mat(AW - Aw * Aw.transpose());
  };
  f.hessian_vec_oracle = [A, softmax_w](const Vec& x, const Vec& v) {
    Vec w = softmax_w(x);
    Vec Av = A * v;
    return Vec(A.transpose() * (w.array() * Av.array()).matrix() -
               (A.transpose() * w) * w.dot(Av));
  };
  // Largest eigenvalue of the Hessian is at most that of A'A.
  Eigen::SelfAdjointEigenSolver<Mat> es(A.transpose() * A);
  f.meta.lipschitz_grad_L = es.eigenvalues().maxCoeff();

  ProblemInstance inst;
  inst.id = "logsumexp";
  inst.x0 = gaussian_vector(dim, rng);
  f.reference = detail::implicit_reference(f, Vec::Zero(dim), 1e-12);
  inst.objective = std::move(f);
  return inst;
}

/// Lasso: phi = 1/2 ||Ax - b||^2, psi = lambda ||x||_1, with a spread
/// singular spectrum so the sublinear phase dominates the horizon.
inline ProblemInstance corpus_lasso(int dim, int seed, const Params& p) {
  int m = static_cast<int>(detail::param(p, "rows", double(dim)));
  double cond = detail::param(p, "cond", 1e3);  // singular-value spread of A
  Rng rng(static_cast<std::uint64_t>(seed) * 0x85ebca6bu + 3);
  Mat G(m, dim);
  for (int i = 0; i < m; ++i)
    G.row(i) = gaussian_vector(dim, rng).transpose();
  Eigen::JacobiSVD<Mat> svd(G, Eigen::ComputeThinU | Eigen::ComputeThinV);
  int r = static_cast<int>(svd.singularValues().size());
  Vec svals(r);
  for (int i = 0; i < r; ++i) {
    double t = r == 1 ? 0.0 : static_cast<double>(i) / (r - 1);
    svals[i] = std::pow(cond, -t);  // 1 down to 1/cond
  }
  Mat A = svd.matrixU() * svals.asDiagonal() * svd.matrixV().transpose();
  Vec xsharp = Vec::Zero(dim);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < dim; ++i)
    if (u(rng) < 0.1) xsharp[i] = u(rng) < 0.5 ? 1.0 : -1.0;
  Vec b = A * xsharp + 0.1 * gaussian_vector(m, rng);
  double lambda =
      detail::param(p, "lambda_rel", 0.05) *
      (A.transpose() * b).lpNorm<Eigen::Infinity>();
  double ridge = detail::param(p, "ridge", 0.0);

  Objective phi;
  phi.id = "lasso_smooth";
  phi.dim = dim;
  phi.domain = Domain::full(dim);
  phi.value_oracle = [A, b, ridge](const Vec& x) {
    return 0.5 * (A * x - b).squaredNorm() + 0.5 * ridge * x.squaredNorm();
  };
  phi.grad_oracle = [A, b, ridge](const Vec& x) {
    return Vec(A.transpose() * (A * x - b) + ridge * x);
  };
  phi.hessian_oracle = [A, ridge, dim](const Vec&) {
    return Mat(A.transpose() * A + ridge * Mat::Identity(dim, dim));
  };
  phi.meta.lipschitz_grad_L = svals.maxCoeff() * svals.maxCoeff() + ridge;
  if (ridge > 0) phi.meta.strong_convexity_mu = ridge;

  CompositeObjective c;
  c.id = ridge > 0 ? "lasso[ridge]" : "lasso";
  c.smooth_part = std::move(phi);
  c.simple_part = SimplePart::l1(lambda);
  c.reference = detail::lasso_reference(A, b, lambda, ridge, 1e-12);

  ProblemInstance inst;
  inst.id = "lasso";
  inst.composite = std::move(c);
  inst.x0 = Vec::Zero(dim);
  return inst;
}

/// ||x||_1 over the box [-1, 1]^dim (G = sqrt(dim)); with mu > 0 a
/// mu-strongly convex term (mu/2)||x - s||^2 is added (and the reference
/// stays closed-form).
inline ProblemInstance corpus_l1_on_box(int dim, int seed, const Params& p) {
  double mu = detail::param(p, "mu", 0.0);
  Rng rng(static_cast<std::uint64_t>(seed) * 0xc2b2ae35u + 11);
  Vec s = Vec::Zero(dim);
  if (mu > 0.0) {
    std::uniform_real_distribution<double> u(0.3, 0.8);
    for (int i = 0; i < dim; ++i) s[i] = (i % 2 == 0 ? 1.0 : -1.0) * u(rng);
  }
  Objective f;
  f.id = mu > 0 ? "l1_on_box[strong]" : "l1_on_box";
  f.dim = dim;
  f.domain = Domain::box(-1.0, 1.0, dim);
  f.smooth = false;
  f.value_oracle = [mu, s](const Vec& x) {
    double v = x.lpNorm<1>();
    if (mu > 0) v += 0.5 * mu * (x - s).squaredNorm();
    return v;
  };
  f.grad_oracle = [mu, s](const Vec& x) {
    Vec g(x.size());
    for (int i = 0; i < x.size(); ++i)
      g[i] = x[i] > 0 ? 1.0 : (x[i] < 0 ? -1.0 : 0.0);
    if (mu > 0) g += mu * (x - s);
    return g;
  };
  // ||sign||_2 plus the strongly convex part on the box.
  f.meta.subgradient_bound_G =
      std::sqrt(static_cast<double>(dim)) * (1.0 + 2.0 * mu);
  if (mu > 0) f.meta.strong_convexity_mu = mu;

  Vec xstar = Vec::Zero(dim);
  if (mu > 0)
    for (int i = 0; i < dim; ++i) {
      double v = s[i];
      xstar[i] = v > 1.0 / mu ? v - 1.0 / mu : (v < -1.0 / mu ? v + 1.0 / mu : 0.0);
      xstar[i] = std::clamp(xstar[i], -1.0, 1.0);
    }
  f.reference =
      ReferenceSolution{xstar, f.value_oracle(xstar), Provenance::closed_form, 0};

  ProblemInstance inst;
  inst.id = f.id;
  inst.objective = std::move(f);
  inst.x0 = Vec::Ones(dim);
  inst.set = FeasibleSet::box(dim, -1.0, 1.0);
  return inst;
}

/// Ridge-regularized logistic regression on a deterministic synthetic
/// sample; smooth and strongly convex.
inline ProblemInstance corpus_logistic(int dim, int seed, const Params& p) {
  int n = static_cast<int>(detail::param(p, "samples", 3.0 * dim));
  double lambda = detail::param(p, "ridge", 0.05);
  Rng rng(static_cast<std::uint64_t>(seed) * 0x27d4eb2fu + 19);
  Mat A(n, dim);
  Vec ylab(n);
  Vec truth = gaussian_vector(dim, rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    A.row(i) = gaussian_vector(dim, rng).transpose() / std::sqrt(double(dim));
    double z = A.row(i).dot(truth);
    ylab[i] = u(rng) < 1.0 / (1.0 + std::exp(-z)) ? 1.0 : -1.0;
  }
  Objective f;
  f.id = "logistic";
  f.dim = dim;
  f.domain = Domain::full(dim);
  f.value_oracle = [A, ylab, lambda, n](const Vec& x) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      double m = -ylab[i] * A.row(i).dot(x);
      s += m > 30 ? m : std::log1p(std::exp(m));
    }
    return s / n + 0.5 * lambda * x.squaredNorm();
  };
  f.grad_oracle = [A, ylab, lambda, n](const Vec& x) {
    Vec g = lambda * x;
    for (int i = 0; i < n; ++i) {
      double m = -ylab[i] * A.row(i).dot(x);
      double sig = 1.0 / (1.0 + std::exp(-m));
      g -= ylab[i] * sig / n * A.row(i).transpose();
    }
    return g;
  };
  f.hessian_oracle = [A, ylab, lambda, n](const Vec& x) {
    int d = static_cast<int>(x.size());
    Mat H = lambda * Mat::Identity(d, d);
    for (int i = 0; i < n; ++i) {
      double m = -ylab[i] * A.row(i).dot(x);
      double sig = 1.0 / (1.0 + std::exp(-m));
      H += sig * (1.0 - sig) / n * (A.row(i).transpose() * A.row(i));
    }
    return H;
  };
  Eigen::SelfAdjointEigenSolver<Mat> es(Mat(A.transpose() * A));
  f.meta.lipschitz_grad_L = es.eigenvalues().maxCoeff() / (4.0 * n) + lambda;
  f.meta.strong_convexity_mu = lambda;

  ProblemInstance inst;
  inst.id = "logistic";
  inst.x0 = Vec::Zero(dim);
  f.reference = detail::implicit_reference(f, inst.x0, 1e-12);
  inst.objective = std::move(f);
  return inst;
}

/// 2-D-default quadratic plus quartic: f = 1/2 x'Qx + (c4/4) ||x||^4.
/// The Hessian is Lipschitz on the initial sublevel set; the recorded
/// Holder constant uses the sublevel radius bound.
inline ProblemInstance corpus_quad_quartic(int dim, int seed,
                                           const Params& p) {
  double c4 = detail::param(p, "c4", 0.25);
  double qs = detail::param(p, "quad_scale", 1.0);
  Rng rng(static_cast<std::uint64_t>(seed) * 0x165667b1u + 5);
  auto q = detail::make_quadratic(dim, 0.5 * qs, 2.0 * qs, rng,
                                  Vec::Zero(dim));
  Objective f;
  f.id = "quad_quartic";
  f.dim = dim;
  f.domain = Domain::full(dim);
  f.value_oracle = [q, c4](const Vec& x) {
    return q->quad_value(x) + 0.25 * c4 * std::pow(x.squaredNorm(), 2);
  };
  f.grad_oracle = [q, c4](const Vec& x) {
    return Vec(q->apply(x) + c4 * x.squaredNorm() * x);
  };
  f.hessian_oracle = [q, c4, dim](const Vec& x) {
    Mat H(dim, dim);
    for (int j = 0; j < dim; ++j) {
      Vec e = Vec::Zero(dim);
      e[j] = 1.0;
      H.col(j) = q->apply(e);
    }
    H += c4 * x.squaredNorm() * Mat::Identity(dim, dim);
    H += 2.0 * c4 * x * x.transpose();
    return H;
  };
  f.gap_oracle = [f0 = f.value_oracle](const Vec& x) { return f0(x); };

  ProblemInstance inst;
  inst.id = "quad_quartic";
  inst.x0 = 2.0 * Vec::Ones(dim) + 0.25 * gaussian_vector(dim, rng);
  // x* = 0 exactly: grad f(0) = 0 and f is convex.
  f.reference = ReferenceSolution{Vec::Zero(dim), 0.0, Provenance::closed_form, 0};
  // ||hess(x) - hess(y)|| <= 6 c4 R ||x - y|| on ||x|| <= R; bound R by the
  // x0 sublevel set through the quadratic lower bound.
  double R =
      std::sqrt(2.0 * f.value_oracle(inst.x0) / q->eigs.minCoeff());
  f.meta.holder = SmoothnessMeta::Holder{1.0 / (6.0 * c4 * R), 1.0, 3};
  inst.objective = std::move(f);
  return inst;
}

/// f(x) = (s/(1+nu)) ||x - c||^(1+nu): Holder-continuous gradients with
/// constant s 2^(1-nu); minimized at c.
inline Objective make_holder_objective(const Vec& c, double nu, double s) {
  Objective f;
  f.id = "holder_norm";
  f.dim = static_cast<int>(c.size());
  f.domain = Domain::full(f.dim);
  f.value_oracle = [c, nu, s](const Vec& x) {
    return s / (1.0 + nu) * std::pow((x - c).norm(), 1.0 + nu);
  };
  f.grad_oracle = [c, nu, s](const Vec& x) {
    Vec d = x - c;
    double n = d.norm();
    if (n < 1e-300) return Vec(Vec::Zero(d.size()));
    return Vec(s * std::pow(n, nu - 1.0) * d);
  };
  f.meta.holder =
      SmoothnessMeta::Holder{1.0 / (s * std::pow(2.0, 1.0 - nu)), nu, 2};
  f.reference = ReferenceSolution{c, 0.0, Provenance::closed_form, 0};
  f.gap_oracle = [v = f.value_oracle](const Vec& x) { return v(x); };
  return f;
}

/// Name-addressable registry used by the CLI and the config loader.
inline ProblemInstance corpus(const std::string& name, int dim, int seed,
                              const Params& params = {}) {
  if (name == "quadratic_illcond") return corpus_quadratic_illcond(dim, seed, params);
  if (name == "logsumexp") return corpus_logsumexp(dim, seed, params);
  if (name == "lasso") return corpus_lasso(dim, seed, params);
  if (name == "l1_on_box") return corpus_l1_on_box(dim, seed, params);
  if (name == "logistic") return corpus_logistic(dim, seed, params);
  if (name == "quad_quartic") return corpus_quad_quartic(dim, seed, params);
  throw UnknownProblem("unknown problem '" + name + "'");
}

inline std::vector<std::string> corpus_names() {
  return {"quadratic_illcond", "logsumexp", "lasso",
          "l1_on_box",         "logistic",  "quad_quartic"};
}

}  // namespace momentum
