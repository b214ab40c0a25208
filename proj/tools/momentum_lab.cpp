// momentum_lab: batch front end over the momentum-methods library.
// Exit codes: 0 = all requested certificates pass, 1 = certificate failure,
// 2 = usage/config error.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "momentum/harness.hpp"
#include "momentum/selfcheck.hpp"

namespace mom = momentum;

namespace {

std::uint64_t env_seed() {
  const char* s = std::getenv("MOMENTUM_LAB_SEED");
  if (!s) return 1;
  try {
    return static_cast<std::uint64_t>(std::stoull(s));
  } catch (...) {
    return 1;
  }
}

void apply_sets(mom::ExperimentConfig& cfg,
                const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw mom::ConfigError("--set expects section.key=value, got '" + s +
                             "'");
    cfg.set(s.substr(0, eq), s.substr(eq + 1));
  }
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            const std::vector<std::string>& sets, long iterations, long seed,
            const std::string& csv, const std::string& json,
            const std::string& svg) {
  mom::ExperimentConfig cfg = mom::ExperimentConfig::from_file(config_path);
  apply_sets(cfg, sets);
  if (iterations >= 0) cfg.set("run.iterations", std::to_string(iterations));
  if (seed >= 0) cfg.set("run.seed", std::to_string(seed));
  if (!csv.empty()) cfg.set("outputs.csv", csv);
  if (!json.empty()) cfg.set("outputs.json", json);
  if (!svg.empty()) cfg.set("outputs.svg", svg);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    auto redirect = [&](const char* key, const char* dflt) {
      std::string v = cfg.str(key, dflt);
      if (v.empty() || v == "-") return;
      if (v.find('/') == std::string::npos) cfg.set(key, out_dir + "/" + v);
    };
    redirect("outputs.csv", "trace.csv");
    redirect("outputs.json", "cert.json");
    redirect("outputs.svg", "");
  }
  mom::RunArtifacts art = mom::run_experiment(cfg, env_seed());
  if (cfg.str("outputs.json") == "-") std::cout << art.json_text;
  if (art.status != "ok") {
    std::cerr << "run failed: " << art.status << "\n";
    return 1;
  }
  std::cerr << "method=" << art.report.method_id
            << " problem=" << art.report.problem_id
            << " verdict=" << (art.verdict ? "pass" : "FAIL")
            << " final_gap=" << mom::format_double(art.final_gap)
            << " exponent=" << mom::format_double(art.report.rate_fit.exponent)
            << "\n";
  return art.verdict ? 0 : 1;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              const std::vector<std::string>& sets, int jobs,
              const std::string& axis, const std::string& values,
              long seeds) {
  mom::ExperimentConfig cfg = mom::ExperimentConfig::from_file(config_path);
  apply_sets(cfg, sets);
  if (!axis.empty()) cfg.set("sweep.axis", axis);
  if (!values.empty()) cfg.set("sweep.values", values);
  if (seeds > 0) cfg.set("sweep.seeds", std::to_string(seeds));
  mom::SweepResult res = mom::sweep(cfg, out_dir, jobs, env_seed());
  for (const auto& cell : res.cells)
    std::cerr << cell.label << ": "
              << (cell.artifacts.verdict ? "pass" : "FAIL")
              << " gap=" << mom::format_double(cell.artifacts.final_gap)
              << " exp="
              << mom::format_double(cell.artifacts.report.rate_fit.exponent)
              << (cell.artifacts.status == "ok" ? ""
                                                : " [" + cell.artifacts.status +
                                                      "]")
              << "\n";
  if (res.monte_carlo_checked)
    std::cerr << "monte-carlo mean bound: "
              << (res.monte_carlo_pass ? "pass" : "FAIL") << "\n";
  std::cerr << "aggregate: " << res.aggregate_csv << "\n";
  return res.all_pass ? 0 : 1;
}

int cmd_certify(const std::string& csv_path, const std::string& kind,
                const std::string& formula, const std::string& json_out) {
  mom::TraceCsv csv = mom::read_trace_csv(csv_path);
  if (!kind.empty()) csv.meta["kind"] = kind;
  if (!formula.empty()) csv.meta["formula"] = formula;
  mom::CertReport rep = mom::certify_csv(csv);
  bool verdict = rep.stochastic || rep.overall;
  nlohmann::json j = mom::report_to_json(
      rep, verdict, csv.rows() ? csv.gap_y.back() : 0.0, "ok");
  std::string text = j.dump(2) + "\n";
  if (json_out == "-")
    std::cout << text;
  else if (!json_out.empty())
    mom::write_file(json_out, text);
  std::cerr << "re-certified " << csv_path << ": "
            << (verdict ? "pass" : "FAIL") << "\n";
  return verdict ? 0 : 1;
}

int cmd_dynamics(const std::string& config_path, const std::string& out_dir,
                 const std::vector<std::string>& sets) {
  mom::ExperimentConfig cfg = mom::ExperimentConfig::from_file(config_path);
  apply_sets(cfg, sets);
  cfg.validate();
  std::string pname = cfg.str("problem.name");
  if (pname.empty()) throw mom::ConfigError("problem.name is required");
  int dim = static_cast<int>(cfg.integer("problem.dim", 4));
  mom::Params params;
  for (const auto& [key, value] : cfg.kv)
    if (key.rfind("problem.param.", 0) == 0)
      params[key.substr(14)] = std::stod(value);
  auto inst = mom::corpus(pname, dim,
                          static_cast<int>(cfg.integer("problem.seed", 1)),
                          params);
  if (!inst.objective)
    throw mom::ConfigError("dynamics runs need a plain objective");
  const mom::Objective& f = *inst.objective;

  mom::DistanceGenerator h = mom::DistanceGenerator::euclidean_on(f.domain);
  if (f.domain.kind == mom::DomainKind::simplex)
    h = mom::DistanceGenerator::negative_entropy(dim);

  std::string family = cfg.str("dynamics.family", "first");
  std::string beta = cfg.str("dynamics.beta", "poly");
  mom::ContinuousSchedule sched =
      beta == "linear"
          ? mom::ContinuousSchedule::linear(cfg.num("dynamics.gamma", 1.0))
          : mom::ContinuousSchedule::polynomial(
                cfg.num("dynamics.beta_p", 2.0),
                cfg.num("dynamics.beta_scale", 1.0));
  double t0 = cfg.num("dynamics.t0", beta == "linear" ? 0.0 : 1.0);
  double t1 = cfg.num("dynamics.t1", t0 + 50.0);
  mom::IntegratorOpts opts;
  opts.samples = static_cast<int>(cfg.integer("dynamics.samples", 401));
  opts.rel_tol = cfg.num("dynamics.rel_tol", 1e-8);
  opts.abs_tol = opts.rel_tol * 1e-2;
  mom::Vec v0 = mom::Vec::Zero(dim);

  mom::ContinuousTrace tr;
  mom::ContinuousKind kind = mom::ContinuousKind::weak;
  if (family == "first") {
    tr = mom::simulate_first_el(f, h, sched, inst.x0, v0, t0, t1, opts);
  } else if (family == "second") {
    double mu = cfg.num("dynamics.mu",
                        f.meta.strong_convexity_mu.value_or(0.0));
    if (mu <= 0)
      throw mom::ConfigError("dynamics.family=second needs mu metadata");
    tr = mom::simulate_second_el(f, h, mu, sched, inst.x0, v0, t0, t1, opts);
    kind = mom::ContinuousKind::strong;
  } else {
    throw mom::ConfigError("dynamics.family must be first or second (the "
                           "proximal variants are exposed in-process)");
  }
  auto mono = mom::continuous_lyapunov(tr, kind, h, f.reference->x_star,
                                       f.reference->f_star, tr.mu);

  std::string dir = out_dir.empty() ? "." : out_dir;
  std::filesystem::create_directories(dir);
  std::string csv_path = dir + "/dynamics.csv";
  mom::write_file(csv_path, mom::continuous_csv_text(tr));
  nlohmann::json j;
  j["family"] = family;
  j["problem_id"] = inst.id;
  j["monotone"] = mono.pass;
  j["first_fail"] = mono.first_fail;
  j["slack"] = mono.slack;
  j["samples"] = tr.samples.size();
  j["steps"] = tr.stats.steps;
  mom::write_file(dir + "/dynamics.json", j.dump(2) + "\n");
  std::cerr << "dynamics " << family << " on " << inst.id << ": "
            << (mono.pass ? "monotone" : "NOT monotone") << ", trace at "
            << csv_path << "\n";
  return mono.pass ? 0 : 1;
}

int cmd_list(const std::string& what) {
  auto print = [](const std::string& head,
                  const std::vector<std::string>& items) {
    std::cout << head << ":\n";
    for (const auto& s : items) std::cout << "  " << s << "\n";
  };
  if (what.empty() || what == "methods")
    print("methods", mom::method_names());
  if (what.empty() || what == "problems")
    print("problems", mom::corpus_names());
  if (what.empty() || what == "schedules")
    print("schedules", mom::schedule_names());
  if (what.empty() || what == "formulas") {
    std::vector<std::string> fs;
    for (int i = 0;
         i <= static_cast<int>(mom::ErrorFormula::Id::hod_descent); ++i)
      fs.push_back(
          mom::ErrorFormula::name(static_cast<mom::ErrorFormula::Id>(i)));
    print("formulas", fs);
  }
  return 0;
}

int cmd_selfcheck(int samples, int seed) {
  int failures = mom::run_selfcheck(samples, seed, std::cerr);
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Momentum-method runs with machine-checked Lyapunov "
               "certificates"};
  app.require_subcommand(1);

  std::string config_path, out_dir, csv, json, svg, kind, formula, axis,
      values, what;
  std::vector<std::string> sets;
  long iterations = -1, seed = -1, seeds = 0;
  int jobs = 0, samples = 1000, sc_seed = 1;

  auto* c_run = app.add_subcommand("run", "execute one certified run");
  c_run->add_option("--config", config_path, "experiment config file")
      ->required();
  c_run->add_option("--out-dir", out_dir, "directory for default outputs");
  c_run->add_option("--set", sets, "override section.key=value");
  c_run->add_option("--iterations", iterations, "override run.iterations");
  c_run->add_option("--seed", seed, "override run.seed");
  c_run->add_option("--csv", csv, "trace csv path");
  c_run->add_option("--json", json, "certificate json path ('-' = stdout)");
  c_run->add_option("--svg", svg, "plot svg path");

  auto* c_sweep = app.add_subcommand("sweep", "grid or seed sweep");
  c_sweep->add_option("--config", config_path, "experiment config file")
      ->required();
  c_sweep->add_option("--out-dir", out_dir, "sweep output directory")
      ->required();
  c_sweep->add_option("--set", sets, "override section.key=value");
  c_sweep->add_option("--jobs", jobs, "parallel cells (default: cores)");
  c_sweep->add_option("--axis", axis, "config key to sweep");
  c_sweep->add_option("--values", values, "comma-separated axis values");
  c_sweep->add_option("--seeds", seeds, "number of seeds (stochastic sweep)");

  auto* c_cert = app.add_subcommand("certify", "re-certify a persisted trace");
  c_cert->add_option("--csv", csv, "trace csv produced by run")->required();
  c_cert->add_option("--kind", kind, "override Lyapunov kind");
  c_cert->add_option("--formula", formula, "override error formula");
  c_cert->add_option("--json", json, "report path ('-' = stdout)");

  auto* c_dyn = app.add_subcommand("dynamics", "continuous-time simulation");
  c_dyn->add_option("--config", config_path, "config with a [dynamics] section")
      ->required();
  c_dyn->add_option("--out-dir", out_dir, "output directory");
  c_dyn->add_option("--set", sets, "override section.key=value");

  auto* c_list = app.add_subcommand("list", "list registries");
  c_list->add_option("what", what, "methods|problems|schedules|formulas");

  auto* c_self = app.add_subcommand("selfcheck", "run the invariant suites");
  c_self->add_option("--samples", samples, "samples per suite");
  c_self->add_option("--seed", sc_seed, "rng seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (c_run->parsed())
      return cmd_run(config_path, out_dir, sets, iterations, seed, csv, json,
                     svg);
    if (c_sweep->parsed())
      return cmd_sweep(config_path, out_dir, sets, jobs, axis, values, seeds);
    if (c_cert->parsed()) return cmd_certify(csv, kind, formula, json);
    if (c_dyn->parsed()) return cmd_dynamics(config_path, out_dir, sets);
    if (c_list->parsed()) return cmd_list(what);
    if (c_self->parsed()) return cmd_selfcheck(samples, sc_seed);
  } catch (const mom::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const mom::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
