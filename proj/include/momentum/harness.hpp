#pragma once

#include <atomic>
#include <filesystem>
#include <thread>

#include <json.hpp>

#include "momentum/config.hpp"
#include "momentum/csv.hpp"
#include "momentum/estimate_sequence.hpp"
#include "momentum/svg.hpp"

namespace momentum {

struct RunArtifacts {
  std::string trace_csv;  // paths; empty when not requested
  std::string cert_json;
  std::string plot_svg;
  CertReport report;
  bool verdict = false;
  double final_gap = 0.0;
  std::string status = "ok";
  std::string json_text;  // serialized report (always produced)
};

inline nlohmann::json report_to_json(const CertReport& rep, bool verdict,
                                     double final_gap,
                                     const std::string& status) {
  nlohmann::json j;
  j["method_id"] = rep.method_id;
  j["problem_id"] = rep.problem_id;
  j["kind"] = kind_name(rep.kind);
  j["formula"] = ErrorFormula::name(rep.formula);
  j["overall"] = rep.overall;
  j["decrease_ok"] = rep.decrease_ok;
  j["eps_nonpositive"] = rep.eps_nonpositive;
  if (rep.strong_contract) j["strong_contract"] = *rep.strong_contract;
  j["vacuous"] = rep.vacuous;
  j["first_fail_k"] = rep.first_fail_k;
  j["slack_used"] = rep.slack_used;
  j["stochastic"] = rep.stochastic;
  j["rate_fit"] = {{"exponent", rep.rate_fit.exponent},
                   {"r2", rep.rate_fit.r2},
                   {"window_lo", rep.rate_fit.window_lo},
                   {"window_hi", rep.rate_fit.window_hi},
                   {"mode", rep.rate_fit.mode}};
  j["verdict"] = verdict;
  j["final_gap"] = final_gap;
  j["status"] = status;
  nlohmann::json per = nlohmann::json::array();
  for (const auto& pk : rep.per_k)
    per.push_back({{"k", pk.k},
                   {"E", pk.E},
                   {"eps", pk.eps},
                   {"lhs", pk.lhs},
                   {"rhs", pk.rhs},
                   {"pass", pk.pass}});
  j["per_k"] = std::move(per);
  return j;
}

namespace detail {

inline void check_writable(const std::string& path) {
  if (path.empty()) return;
  std::ofstream probe(path, std::ios::app);
  if (!probe) throw ConfigError("output path '" + path + "' is not writable");
}

}  // namespace detail

/// Executes run -> certify -> persist for one configuration. Failures in
/// the method or certifier are recorded in the JSON with a failed status;
/// configuration problems throw before any compute.
inline RunArtifacts run_experiment(const ExperimentConfig& cfg,
                                   std::uint64_t env_seed = 0) {
  BuiltExperiment b = build_experiment(cfg, env_seed);
  RunArtifacts art;
  art.trace_csv = cfg.str("outputs.csv");
  art.cert_json = cfg.str("outputs.json");
  art.plot_svg = cfg.str("outputs.svg");
  detail::check_writable(art.trace_csv);
  if (art.cert_json != "-") detail::check_writable(art.cert_json);
  detail::check_writable(art.plot_svg);

  try {
    Trace tr = run(b.method, b.problem.input(), b.geometry, b.schedule,
                   b.iterations, b.seed, b.problem.x0);
    CertPlan plan = auto_plan(tr);
    if (cfg.str("certify.kind", "auto") != "auto")
      plan.kind = kind_from_name(cfg.str("certify.kind"));
    if (cfg.str("certify.formula", "auto") != "auto")
      plan.formula.id = ErrorFormula::id_from_name(cfg.str("certify.formula"));
    const ReferenceSolution& ref = b.problem.objective
                                       ? *b.problem.objective->reference
                                       : *b.problem.composite->reference;
    art.report = certify(tr, plan.kind, plan.formula, ref);
    art.verdict = report_verdict(tr, art.report);
    art.final_gap = plan.kind == LyapunovKind::weak_y ||
                            plan.kind == LyapunovKind::strong_y
                        ? tr.records.back().gap_y
                        : tr.records.back().gap_x;
    if (!art.trace_csv.empty())
      write_file(art.trace_csv, trace_csv_text(tr, art.report));
    if (!art.plot_svg.empty()) {
      PlotSeries gap{"f-gap", {}, {}};
      PlotSeries lyap{"E_k", {}, {}};
      for (std::size_t i = 0; i < tr.records.size(); ++i) {
        gap.x.push_back(static_cast<double>(i));
        gap.y.push_back(plan.kind == LyapunovKind::weak_y ||
                                plan.kind == LyapunovKind::strong_y
                            ? tr.records[i].gap_y
                            : tr.records[i].gap_x);
        lyap.x.push_back(static_cast<double>(i));
        lyap.y.push_back(i < art.report.per_k.size()
                             ? art.report.per_k[i].E
                             : art.report.E_final);
      }
      PlotStyle style;
      style.log_x = true;
      style.log_y = true;
      style.title = tr.ctx.method_id + " on " + tr.ctx.problem_id;
      write_file(art.plot_svg, emit_plot({gap, lyap}, style));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    art.status = e.what();
    art.verdict = false;
  }
  nlohmann::json j =
      report_to_json(art.report, art.verdict, art.final_gap, art.status);
  art.json_text = j.dump(2) + "\n";
  if (!art.cert_json.empty() && art.cert_json != "-")
    write_file(art.cert_json, art.json_text);
  return art;
}

struct SweepCell {
  std::string label;
  RunArtifacts artifacts;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  bool all_pass = true;
  std::string aggregate_csv;  // path of the summary table
  // Stochastic (seed) sweeps: Monte-Carlo mean-level certificate.
  bool monte_carlo_checked = false;
  bool monte_carlo_pass = false;
  double worst_margin = 0.0;
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    auto b = tok.find_first_not_of(" \t");
    auto e = tok.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(tok.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace detail

/// Grid sweep over one config key (sweep.axis/sweep.values) or over seeds
/// (sweep.seeds = N). Cells run in parallel under the jobs bound; failures
/// are recorded per cell rather than aborting the sweep.
inline SweepResult sweep(const ExperimentConfig& base,
                         const std::string& out_dir, int jobs = 0,
                         std::uint64_t env_seed = 0) {
  base.validate();
  std::string axis = base.str("sweep.axis");
  std::vector<std::pair<std::string, ExperimentConfig>> cells;
  bool seed_sweep = base.has("sweep.seeds");
  if (!axis.empty()) {
    auto values = detail::split_list(base.str("sweep.values"));
    if (values.empty()) throw ConfigError("sweep.values is empty");
    for (const auto& v : values) {
      ExperimentConfig c = base;
      c.set(axis, v);
      cells.emplace_back(axis + "=" + v, std::move(c));
    }
  } else if (seed_sweep) {
    long n = base.integer("sweep.seeds", 0);
    if (n < 1) throw ConfigError("sweep.seeds must be >= 1");
    std::uint64_t base_seed =
        static_cast<std::uint64_t>(base.integer("run.seed", 1));
    for (long i = 0; i < n; ++i) {
      ExperimentConfig c = base;
      c.set("run.seed", std::to_string(base_seed + i));
      cells.emplace_back("seed=" + std::to_string(base_seed + i),
                         std::move(c));
    }
  } else {
    throw ConfigError("sweep needs sweep.axis or sweep.seeds");
  }

  std::filesystem::create_directories(out_dir);
  SweepResult result;
  result.cells.resize(cells.size());
  if (jobs <= 0) jobs = static_cast<int>(base.integer("sweep.jobs", 0));
  if (jobs <= 0)
    jobs = std::max(1u, std::thread::hardware_concurrency());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      ExperimentConfig c = cells[i].second;
      std::string stem = out_dir + "/cell_" + std::to_string(i);
      c.set("outputs.csv", stem + "_trace.csv");
      c.set("outputs.json", stem + "_cert.json");
      c.kv.erase("outputs.svg");
      SweepCell cell;
      cell.label = cells[i].first;
      try {
        cell.artifacts = run_experiment(c, env_seed);
      } catch (const Error& e) {
        cell.artifacts.status = e.what();
        cell.artifacts.verdict = false;
      }
      result.cells[i] = std::move(cell);
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  for (const auto& cell : result.cells)
    result.all_pass = result.all_pass && cell.artifacts.verdict;

  // Aggregate table.
  std::ostringstream agg;
  agg << "cell,final_gap,exponent,r2,verdict,status\n";
  for (const auto& cell : result.cells)
    agg << cell.label << ',' << format_double(cell.artifacts.final_gap) << ','
        << format_double(cell.artifacts.report.rate_fit.exponent) << ','
        << format_double(cell.artifacts.report.rate_fit.r2) << ','
        << (cell.artifacts.verdict ? 1 : 0) << ',' << cell.artifacts.status
        << "\n";
  result.aggregate_csv = out_dir + "/sweep.csv";
  write_file(result.aggregate_csv, agg.str());

  // Seed sweeps of stochastic methods: check the mean-level bound
  // mean E_k <= E_0 + sum delta * mean eps_i at 95% confidence, and emit
  // the mean trajectory with its confidence band.
  if (seed_sweep && !result.cells.empty() &&
      result.cells[0].artifacts.status == "ok" &&
      result.cells[0].artifacts.report.stochastic) {
    std::size_t n_rec = result.cells[0].artifacts.report.per_k.size();
    std::size_t n_seeds = result.cells.size();
    bool ok = n_rec > 0;
    for (const auto& cell : result.cells)
      ok = ok && cell.artifacts.report.per_k.size() == n_rec;
    if (ok) {
      double delta = 1.0;
      if (result.cells[0].artifacts.trace_csv.size()) {
        auto csv = read_trace_csv(result.cells[0].artifacts.trace_csv);
        delta = std::stod(csv.meta.at("delta"));
      }
      result.monte_carlo_checked = true;
      result.monte_carlo_pass = true;
      std::ostringstream mc;
      mc << "k,mean_E,bound,ci95\n";
      double E0 = result.cells[0].artifacts.report.per_k[0].E;
      std::vector<double> acc(n_seeds, 0.0);
      for (std::size_t k = 0; k < n_rec; ++k) {
        double meanE = 0.0, mean_eps = 0.0;
        std::vector<double> D(n_seeds);
        for (std::size_t s = 0; s < n_seeds; ++s) {
          const auto& pk = result.cells[s].artifacts.report.per_k[k];
          meanE += pk.E;
          mean_eps += pk.eps;
          D[s] = pk.E - acc[s];
          acc[s] += delta * pk.eps;
        }
        meanE /= n_seeds;
        mean_eps /= n_seeds;
        double meanD = 0.0;
        for (double d : D) meanD += d;
        meanD /= n_seeds;
        double var = 0.0;
        for (double d : D) var += (d - meanD) * (d - meanD);
        var /= std::max<std::size_t>(1, n_seeds - 1);
        double se = std::sqrt(var / n_seeds);
        double bound = E0 + 1.645 * se;
        result.worst_margin = std::max(result.worst_margin, meanD - bound);
        if (meanD > bound) result.monte_carlo_pass = false;
        mc << k << ',' << format_double(meanE) << ','
           << format_double(bound + (meanE - meanD)) << ','
           << format_double(1.645 * se) << "\n";
      }
      write_file(out_dir + "/sweep_mc.csv", mc.str());
      result.all_pass = result.all_pass && result.monte_carlo_pass;
    }
  }
  return result;
}

}  // namespace momentum
