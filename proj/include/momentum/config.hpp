#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "momentum/corpus.hpp"

namespace momentum {

/// Flat, sectioned key-value configuration. Grammar:
///
///   [section]
///   key = value        # trailing comments with '#'
///
/// Keys are addressed as "section.key". Problem parameters use the
/// "param." prefix inside [problem]. Unknown keys are rejected.
struct ExperimentConfig {
  std::map<std::string, std::string> kv;

  static ExperimentConfig from_string(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t\r");
        auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError("line " + std::to_string(lineno) +
                            ": malformed section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      auto eq = line.find('=');
      if (eq == std::string::npos || section.empty())
        throw ConfigError("line " + std::to_string(lineno) +
                          ": expected 'key = value' inside a section");
      std::string key = trim(line.substr(0, eq));
      std::string val = trim(line.substr(eq + 1));
      if (key.empty() || val.empty())
        throw ConfigError("line " + std::to_string(lineno) +
                          ": empty key or value");
      cfg.kv[section + "." + key] = val;
    }
    return cfg;
  }

  static ExperimentConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
  }

  bool has(const std::string& key) const { return kv.count(key) > 0; }
  std::string str(const std::string& key, const std::string& dflt = "") const {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : it->second;
  }
  double num(const std::string& key, double dflt) const {
    auto it = kv.find(key);
    if (it == kv.end()) return dflt;
    try {
      std::size_t pos = 0;
      double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "': '" + it->second +
                        "' is not a number");
    }
  }
  long integer(const std::string& key, long dflt) const {
    double v = num(key, static_cast<double>(dflt));
    return static_cast<long>(v);
  }
  void set(const std::string& key, const std::string& value) {
    kv[key] = value;
  }

  /// Rejects typos: every key must be known (problem params are free-form
  /// under the param. prefix).
  void validate() const {
    static const std::set<std::string> known = {
        "problem.name", "problem.dim", "problem.seed",
        "geometry.kind", "geometry.p", "geometry.separable",
        "method.id", "method.gmap", "method.eps", "method.p", "method.nu",
        "method.N", "method.delta_tilde", "method.noise",
        "method.noise_scale",
        "schedule.name", "schedule.c", "schedule.A0", "schedule.delta",
        "run.iterations", "run.seed",
        "certify.kind", "certify.formula",
        "outputs.csv", "outputs.json", "outputs.svg",
        "sweep.axis", "sweep.values", "sweep.seeds", "sweep.jobs",
        "dynamics.family", "dynamics.beta", "dynamics.beta_p",
        "dynamics.beta_scale", "dynamics.gamma", "dynamics.t0",
        "dynamics.t1", "dynamics.samples", "dynamics.rel_tol",
        "dynamics.mu",
    };
    for (const auto& [key, value] : kv) {
      (void)value;
      if (key.rfind("problem.param.", 0) == 0) continue;
      if (!known.count(key))
        throw ConfigError("unknown config key '" + key + "'");
    }
  }
};

/// Everything run_experiment needs, resolved from a config: problem,
/// geometry, method, schedule, horizon.
struct BuiltExperiment {
  ProblemInstance problem;
  DistanceGenerator geometry;
  MethodConfig method;
  DiscreteSchedule schedule;
  int iterations = 0;
  std::uint64_t seed = 0;
};

namespace detail {

inline MethodId method_id_from(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(MethodId::higher_order_descent); ++i)
    if (method_name(static_cast<MethodId>(i)) == s)
      return static_cast<MethodId>(i);
  throw ConfigError("unknown method id '" + s + "'");
}

}  // namespace detail

inline BuiltExperiment build_experiment(const ExperimentConfig& cfg,
                                        std::uint64_t env_seed_fallback = 0) {
  cfg.validate();
  BuiltExperiment b;

  // problem
  std::string pname = cfg.str("problem.name");
  if (pname.empty()) throw ConfigError("problem.name is required");
  int dim = static_cast<int>(cfg.integer("problem.dim", 10));
  int pseed = static_cast<int>(cfg.integer("problem.seed", 1));
  Params params;
  for (const auto& [key, value] : cfg.kv)
    if (key.rfind("problem.param.", 0) == 0)
      params[key.substr(std::string("problem.param.").size())] =
          std::stod(value);
  b.problem = corpus(pname, dim, pseed, params);
  const Objective& fmeta = b.problem.objective
                               ? *b.problem.objective
                               : b.problem.composite->smooth_part;

  // geometry
  std::string gkind = cfg.str("geometry.kind", "auto");
  Domain dom = fmeta.domain;
  if (b.problem.objective) dom = b.problem.objective->domain;
  if (gkind == "auto") {
    if (dom.kind == DomainKind::simplex)
      b.geometry = DistanceGenerator::negative_entropy(dim);
    else
      b.geometry = DistanceGenerator::euclidean_on(dom);
  } else if (gkind == "euclidean") {
    b.geometry = DistanceGenerator::euclidean_on(dom);
  } else if (gkind == "p_power") {
    b.geometry = DistanceGenerator::p_power(dim, cfg.num("geometry.p", 3.0),
                                            cfg.str("geometry.separable",
                                                    "false") == "true");
  } else if (gkind == "negative_entropy") {
    b.geometry = DistanceGenerator::negative_entropy(dim);
  } else {
    throw ConfigError("unknown geometry kind '" + gkind + "'");
  }

  // method
  b.method.id = detail::method_id_from(cfg.str("method.id", "agd_I"));
  std::string gm = cfg.str("method.gmap", "identity");
  double meps = cfg.num("method.eps", 0.0);
  if (gm == "identity") {
    b.method.gmap = GradientMapSpec::identity();
  } else if (gm == "nesterov") {
    b.method.gmap = GradientMapSpec::nesterov(meps);
  } else if (gm == "tseng") {
    b.method.gmap = GradientMapSpec::tseng();
  } else if (gm == "universal_higher") {
    double eps = meps;
    if (eps == 0.0 && fmeta.meta.holder) eps = fmeta.meta.holder->epsilon;
    b.method.gmap = GradientMapSpec::universal_higher(
        eps, static_cast<int>(cfg.integer("method.p", 3)),
        cfg.num("method.nu", 1.0), cfg.num("method.N", 1.2));
  } else if (gm == "universal_nu") {
    double eps = meps;
    double nu = cfg.num("method.nu", 0.0);
    if (fmeta.meta.holder) {
      if (eps == 0.0) eps = fmeta.meta.holder->epsilon;
      if (nu == 0.0) nu = fmeta.meta.holder->nu;
    }
    b.method.gmap = GradientMapSpec::universal_nu(
        eps, nu, cfg.num("method.delta_tilde", 1e-3));
  } else {
    throw ConfigError("unknown gradient map '" + gm + "'");
  }
  std::string nz = cfg.str("method.noise", "none");
  double nscale = cfg.num("method.noise_scale", 0.0);
  if (nz == "none")
    b.method.noise = NoiseSpec::none();
  else if (nz == "gaussian")
    b.method.noise = NoiseSpec::gaussian(nscale);
  else if (nz == "bounded")
    b.method.noise = NoiseSpec::bounded(nscale);
  else
    throw ConfigError("unknown noise kind '" + nz + "'");

  // schedule: the generic scalar 'c' means eps*sigma / C / ratio / tau /
  // alpha-coefficient depending on the family; 0 resolves it from metadata.
  double eps_smooth = fmeta.meta.lipschitz_grad_L
                          ? 1.0 / *fmeta.meta.lipschitz_grad_L
                          : 0.0;
  if (b.method.gmap.kind == GradientMapSpec::Kind::nesterov &&
      b.method.gmap.eps > 0)
    eps_smooth = b.method.gmap.eps;
  double delta = cfg.num("schedule.delta", 0.0);
  if (delta == 0.0) {
    bool smooth_accel = b.method.id == MethodId::agd_strong ||
                        b.method.id == MethodId::prox_strong ||
                        b.method.id == MethodId::fista ||
                        ((b.method.id == MethodId::agd_I ||
                          b.method.id == MethodId::agd_II) &&
                         b.method.gmap.kind == GradientMapSpec::Kind::nesterov);
    delta = smooth_accel && eps_smooth > 0 ? std::sqrt(eps_smooth) : 1.0;
  }
  double A0 = cfg.num("schedule.A0", 1.0);
  double cpar = cfg.num("schedule.c", 0.0);
  std::string sname = cfg.str("schedule.name", "quadratic");
  if (sname == "quadratic") {
    double c = cpar != 0.0 ? cpar : eps_smooth * b.geometry.sigma;
    if (c <= 0) throw ConfigError("quadratic schedule needs eps*sigma");
    b.schedule = schedules::quadratic(c, A0, delta);
  } else if (sname == "polynomial") {
    double pt = b.method.gmap.ptilde();
    double c = cpar;
    if (c == 0.0) {
      double eps = b.method.gmap.eps;
      double N = b.method.gmap.N;
      c = std::pow(eps * b.geometry.sigma, 1.0 / (pt - 1.0)) * pt /
          (pt - 1.0) * std::sqrt(N * N - 1.0) / (2.0 * N);
    }
    b.schedule = schedules::polynomial(c, pt, A0, delta);
  } else if (sname == "geometric") {
    b.schedule = schedules::geometric(cpar != 0.0 ? cpar : 2.0, A0, delta);
  } else if (sname == "constant_tau") {
    double tau = cpar;
    if (tau == 0.0) {
      const auto& m = b.method.id == MethodId::fista ||
                              b.method.id == MethodId::prox_strong
                          ? b.problem.composite->smooth_part.meta
                          : fmeta.meta;
      if (!m.strong_convexity_mu || eps_smooth <= 0)
        throw ConfigError("constant_tau needs mu and L to resolve tau");
      tau = std::sqrt(*m.strong_convexity_mu * eps_smooth);
    }
    b.schedule = schedules::constant_tau(
        tau,
        b.method.id == MethodId::quasi_monotone_strong ||
                b.method.id == MethodId::implicit_strong ||
                b.method.id == MethodId::implicit
            ? TauConvention::over_Ak
            : TauConvention::over_Ak1,
        A0, delta);
  } else if (sname == "tau_2_over_k2") {
    b.schedule = schedules::tau_2_over_k2(A0, delta);
  } else if (sname == "sqrt_decay") {
    b.schedule = schedules::sqrt_decay(cpar != 0.0 ? cpar : 0.3, A0, delta);
  } else if (sname == "fw_classic") {
    b.schedule = schedules::fw_classic(A0, delta);
  } else {
    throw ConfigError("unknown schedule '" + sname + "'");
  }

  b.iterations = static_cast<int>(cfg.integer("run.iterations", 100));
  if (b.iterations < 0) throw ConfigError("run.iterations must be >= 0");
  b.seed = cfg.has("run.seed")
               ? static_cast<std::uint64_t>(cfg.integer("run.seed", 1))
               : env_seed_fallback;
  return b;
}

inline std::vector<std::string> method_names() {
  std::vector<std::string> v;
  for (int i = 0; i <= static_cast<int>(MethodId::higher_order_descent); ++i)
    v.push_back(method_name(static_cast<MethodId>(i)));
  return v;
}

inline std::vector<std::string> schedule_names() {
  return {"quadratic",     "polynomial", "geometric", "constant_tau",
          "tau_2_over_k2", "sqrt_decay", "fw_classic"};
}

}  // namespace momentum
