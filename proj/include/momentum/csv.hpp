#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "momentum/certify.hpp"
#include "momentum/dynamics.hpp"

namespace momentum {

/// Persisted view of one certified run. Every numeric uses the shortest
/// decimal that round-trips, so re-certification from the file reproduces
/// the in-memory verdict exactly.
struct TraceCsv {
  // header metadata
  std::map<std::string, std::string> meta;
  // columns
  std::vector<double> k, A, alpha, tau, f_x, f_y, grad_norm, E, eps, pass,
      gap_x, gap_y;

  int rows() const { return static_cast<int>(k.size()); }
};

inline std::string trace_csv_text(const Trace& tr, const CertReport& rep) {
  std::ostringstream out;
  out << "# momentum-lab-trace v=1 type=discrete"
      << " method=" << tr.ctx.method_id << " problem=" << tr.ctx.problem_id
      << " delta=" << format_double(tr.ctx.delta)
      << " kind=" << kind_name(rep.kind)
      << " formula=" << ErrorFormula::name(rep.formula)
      << " sigma=" << format_double(tr.ctx.sigma)
      << " p=" << format_double(tr.ctx.p_mod)
      << " mu=" << (tr.ctx.mu ? format_double(*tr.ctx.mu) : "-")
      << " eps=" << (tr.ctx.eps ? format_double(*tr.ctx.eps) : "-")
      << " slack=" << format_double(rep.slack_used)
      << " nonpos=" << (requires_nonpositive_errors_for(tr.ctx.method,
                                                        tr.ctx.gmap)
                            ? 1
                            : 0)
      << " stochastic=" << (tr.ctx.stochastic ? 1 : 0)
      << " seed=" << tr.seed << "\n";
  out << "k,A_k,alpha_k,tau_k,f_x,f_y,grad_norm,E_k,eps_k,pass,gap_x,gap_y\n";
  for (std::size_t i = 0; i < tr.records.size(); ++i) {
    const auto& r = tr.records[i];
    double gn = 0.0;
    if (const Vec* g = r.find("g_mirror"))
      gn = g->norm();
    else if (const Vec* g2 = r.find("g_new"))
      gn = g2->norm();
    bool have_pair = i < rep.per_k.size();
    double E = have_pair ? rep.per_k[i].E : rep.E_final;
    double epsv = have_pair ? rep.per_k[i].eps : 0.0;
    double passv = have_pair ? (rep.per_k[i].pass ? 1.0 : 0.0) : 1.0;
    out << r.k << ',' << format_double(r.A) << ',' << format_double(r.alpha)
        << ',' << format_double(r.tau) << ',' << format_double(r.f_x) << ','
        << format_double(r.f_y) << ',' << format_double(gn) << ','
        << format_double(E) << ',' << format_double(epsv) << ','
        << format_double(passv) << ',' << format_double(r.gap_x) << ','
        << format_double(r.gap_y) << "\n";
  }
  return out.str();
}

inline std::string continuous_csv_text(const ContinuousTrace& tr) {
  std::ostringstream out;
  out << "# momentum-lab-trace v=1 type=continuous"
      << " sched=" << tr.sched.name
      << " rel_tol=" << format_double(tr.rel_tol)
      << " steps=" << tr.stats.steps << "\n";
  out << "t,f,E_t,step_size\n";
  for (std::size_t i = 0; i < tr.samples.size(); ++i) {
    double step = i == 0 ? 0.0
                         : tr.samples[i].state.t - tr.samples[i - 1].state.t;
    out << format_double(tr.samples[i].state.t) << ','
        << format_double(tr.samples[i].f_value) << ','
        << format_double(tr.samples[i].lyapunov_value) << ','
        << format_double(step) << "\n";
  }
  return out.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

inline TraceCsv read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace csv '" + path + "'");
  TraceCsv csv;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# momentum-lab-trace", 0) != 0)
    throw ConfigError("'" + path + "' is not a momentum-lab trace");
  {
    std::istringstream hs(line.substr(2));
    std::string tok;
    while (hs >> tok) {
      auto eq = tok.find('=');
      if (eq != std::string::npos)
        csv.meta[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
  }
  if (!std::getline(in, line))
    throw ConfigError("trace csv missing column header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != 12)
      throw ConfigError("trace csv row with " + std::to_string(row.size()) +
                        " columns");
    csv.k.push_back(row[0]);
    csv.A.push_back(row[1]);
    csv.alpha.push_back(row[2]);
    csv.tau.push_back(row[3]);
    csv.f_x.push_back(row[4]);
    csv.f_y.push_back(row[5]);
    csv.grad_norm.push_back(row[6]);
    csv.E.push_back(row[7]);
    csv.eps.push_back(row[8]);
    csv.pass.push_back(row[9]);
    csv.gap_x.push_back(row[10]);
    csv.gap_y.push_back(row[11]);
  }
  return csv;
}

/// Re-certifies a persisted trace from its scalar columns alone; with the
/// recorded slack and delta this reproduces the original verdict exactly.
inline CertReport certify_csv(const TraceCsv& csv) {
  CertReport rep;
  rep.method_id = csv.meta.count("method") ? csv.meta.at("method") : "?";
  rep.problem_id = csv.meta.count("problem") ? csv.meta.at("problem") : "?";
  rep.kind = kind_from_name(csv.meta.at("kind"));
  rep.formula = ErrorFormula::id_from_name(csv.meta.at("formula"));
  rep.stochastic =
      csv.meta.count("stochastic") && csv.meta.at("stochastic") == "1";
  double delta = std::stod(csv.meta.at("delta"));
  rep.slack_used = std::stod(csv.meta.at("slack"));
  bool nonpos = csv.meta.count("nonpos") && csv.meta.at("nonpos") == "1";

  int n = csv.rows();
  if (n <= 1) {
    rep.vacuous = true;
    rep.decrease_ok = rep.eps_nonpositive = rep.overall = true;
    return rep;
  }
  rep.decrease_ok = true;
  rep.eps_nonpositive = true;
  for (int i = 0; i + 1 < n; ++i) {
    PerIteration pk;
    pk.k = static_cast<int>(csv.k[i]);
    pk.E = csv.E[i];
    pk.eps = csv.eps[i];
    pk.lhs = (csv.E[i + 1] - csv.E[i]) / delta;
    pk.rhs = pk.eps;
    pk.pass = pk.lhs <= pk.rhs + rep.slack_used;
    if (nonpos) pk.pass = pk.pass && pk.eps <= rep.slack_used;
    if (!pk.pass && rep.first_fail_k < 0) rep.first_fail_k = pk.k;
    rep.decrease_ok =
        rep.decrease_ok && pk.lhs <= pk.rhs + rep.slack_used;
    rep.eps_nonpositive =
        rep.eps_nonpositive && pk.eps <= rep.slack_used;
    rep.per_k.push_back(pk);
  }
  rep.overall = rep.decrease_ok && (!nonpos || rep.eps_nonpositive);

  // Rate fit from the persisted gap columns, matching certify()'s fit.
  bool y_kind = rep.kind == LyapunovKind::weak_y ||
                rep.kind == LyapunovKind::strong_y;
  bool geometric = rep.method_id.rfind("agd_strong", 0) == 0 ||
                   rep.method_id.rfind("prox_strong", 0) == 0;
  rep.rate_fit.mode = geometric ? "geometric" : "power";
  int lo = std::max(1, (n - 1) / 2);
  rep.rate_fit.window_lo = lo;
  rep.rate_fit.window_hi = n - 1;
  std::vector<double> xs, ys;
  for (int k = lo; k <= n - 1; ++k) {
    double gap = y_kind ? csv.gap_y[k] : csv.gap_x[k];
    if (!(gap > 0.0) || !std::isfinite(gap)) continue;
    xs.push_back(geometric ? double(k) : std::log(double(k)));
    ys.push_back(std::log(gap));
  }
  if (xs.size() >= 4) {
    double n_ = double(xs.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sx += xs[i];
      sy += ys[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
    }
    double den = n_ * sxx - sx * sx;
    if (den != 0.0) {
      rep.rate_fit.exponent = (n_ * sxy - sx * sy) / den;
      double b0 = (sy - rep.rate_fit.exponent * sx) / n_;
      double resid = 0, tot = 0, my = sy / n_;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        double pred = b0 + rep.rate_fit.exponent * xs[i];
        resid += (ys[i] - pred) * (ys[i] - pred);
        tot += (ys[i] - my) * (ys[i] - my);
      }
      rep.rate_fit.r2 = tot > 0 ? 1.0 - resid / tot : 1.0;
    }
  }
  return rep;
}

}  // namespace momentum
