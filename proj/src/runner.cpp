#include "ufgkit/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ufgkit/rates.hpp"
#include "ufgkit/sde.hpp"
#include "ufgkit/ufgcheck.hpp"

namespace ufg {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr long kOptimizerBudget = 2000;
constexpr int kSolveTrigDegree = 2;

std::string digits(const MultiIndex& a) {
  std::string s;
  for (int e : a.entries()) s += std::to_string(e);
  return s;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ordered_json json_or_null(const std::optional<double>& v) {
  if (v) return *v;
  return nullptr;
}

// Shared state across the stages of one command.
struct Pipeline {
  ModelFile mf;
  VarSpace space;
  std::vector<VectorField> fields;
  std::vector<double> params;

  BracketHierarchy h;
  UfgCertificate cert;
  bool cert_ok = false;
  std::string cert_status;       // verified | solved | no_solution | invalid
  double cert_residual = 0.0;
  std::string cert_detail;
  DilationCertificate dil;
  V0Decomposition v0;
  bool ufg_built = false;

  std::optional<RateReport> engine;
  std::optional<OptimizeResult> opt;
  std::optional<double> certified_lambda;
  bool rate_built = false;

  std::optional<SdeModel> sim;
  ScalarFunc f;
  std::vector<double> grid;
};

ModelFile apply_overrides(const ModelFile& in, const RunOverrides& ov) {
  ModelFile m = in;
  if (ov.m) m.run.m = *ov.m;
  if (ov.paths) m.run.paths = *ov.paths;
  if (ov.dt) m.run.dt = *ov.dt;
  if (ov.seed) m.run.seed = *ov.seed;
  if (ov.t_start) m.run.t_start = *ov.t_start;
  if (ov.t_end) m.run.t_end = *ov.t_end;
  if (ov.t_step) m.run.t_step = *ov.t_step;
  if (ov.tol) m.run.tol = *ov.tol;
  return m;
}

void build_ufg(Pipeline& p) {
  if (p.ufg_built) return;
  p.h = build_hierarchy(p.space, p.fields, p.mf.run.m);
  if (!p.mf.certificate.empty()) {
    p.cert.m = p.mf.run.m;
    for (const auto& [key, rows] : p.mf.certificate) {
      std::vector<Expr> parsed;
      if (rows.size() != p.h.basis.size())
        throw Error(Errc::dimension_mismatch,
                    "certificate row " + key + " needs one expression per basis element (" +
                        std::to_string(p.h.basis.size()) + ")");
      for (const std::string& r : rows) parsed.push_back(parse_expr(r, p.space));
      p.cert.rows[MultiIndex::parse(key)] = std::move(parsed);
    }
    const VerifyReport rep = verify_certificate(p.h, p.cert, p.params);
    p.cert_ok = rep.verified;
    p.cert_status = rep.verified ? "verified" : "invalid";
    if (!rep.issues.empty()) p.cert_detail = rep.issues.front().alpha.str();
  } else {
    const SolveOutcome out = solve_certificate(p.h, p.mf.run.m, Ansatz{kSolveTrigDegree}, p.params);
    p.cert_ok = out.found;
    p.cert_status = out.found ? "solved" : "no_solution";
    p.cert_residual = out.residual;
    if (!out.found) p.cert_detail = out.failed_alpha.str();
    if (out.found) p.cert = out.cert;
  }
  p.dil = check_dilation(p.h, p.params);
  p.v0 = check_v0_condition(p.h, p.params);
  p.ufg_built = true;
}

void build_rate(Pipeline& p) {
  if (p.rate_built) return;
  build_ufg(p);
  if (p.cert_ok && p.dil.status == DilationStatus::ok) {
    const SupConstants s = compute_sup_constants(p.h, p.cert, p.params);
    const GammaCoefficients a = choose_gamma_coefficients(s, p.mf.run.m);
    p.engine = certify_rate(p.dil, a, s);
    if (p.mf.run.m <= 2)
      p.opt = optimize_small_system(p.h, p.cert, p.dil, p.params, kOptimizerBudget);
    double best = 0.0;
    bool any = false;
    if (p.engine->lambda && *p.engine->lambda > 0.0) {
      best = std::max(best, *p.engine->lambda);
      any = true;
    }
    if (p.opt && p.opt->report.lambda && *p.opt->report.lambda > 0.0) {
      best = std::max(best, *p.opt->report.lambda);
      any = true;
    }
    if (any) p.certified_lambda = best;
  }
  p.rate_built = true;
}

void build_sim(Pipeline& p) {
  if (p.sim) return;
  p.sim = make_sde_model(p.space, p.fields, p.params);
  p.f = model_function(p.mf);
  p.grid = model_time_grid(p.mf);
}

ordered_json model_echo(const Pipeline& p) {
  ordered_json j;
  j["name"] = p.mf.name;
  j["dim"] = p.mf.dim;
  j["noise"] = p.mf.d;
  ordered_json params = ordered_json::object();
  for (const auto& [key, value] : p.mf.params) params[key] = value;
  j["params"] = params;
  j["m"] = p.mf.run.m;
  j["x0"] = p.mf.run.x0;
  j["t_grid"] = {p.mf.run.t_start, p.mf.run.t_end, p.mf.run.t_step};
  j["paths"] = p.mf.run.paths;
  j["dt"] = p.mf.run.dt;
  j["seed"] = p.mf.run.seed;
  j["h"] = p.mf.run.h;
  j["tol"] = p.mf.run.tol;
  if (!p.mf.f_text.empty()) j["f"] = p.mf.f_text;
  return j;
}

ordered_json ufg_json(Pipeline& p, bool& pass) {
  build_ufg(p);
  ordered_json j;
  ordered_json basis = ordered_json::array();
  for (const MultiIndex& b : p.h.basis) basis.push_back(b.str());
  j["basis"] = basis;

  ordered_json table = ordered_json::array();
  for (const MultiIndex& idx : p.h.indices) {
    if (idx.order() > p.mf.run.m || idx.size() < 2) continue;
    const auto it = p.h.expand.find(idx);
    ordered_json row;
    row["index"] = idx.str();
    if (it == p.h.expand.end() || it->second.basis < 0) {
      row["expansion"] = "zero";
    } else {
      row["expansion"] =
          (it->second.sign < 0 ? "-" : "") + p.h.basis[static_cast<size_t>(it->second.basis)].str();
    }
    table.push_back(row);
  }
  j["bracket_table"] = table;

  ordered_json cert;
  cert["status"] = p.cert_status;
  if (p.cert_status == "no_solution") {
    cert["residual"] = p.cert_residual;
    cert["failed_index"] = p.cert_detail;
  } else if (p.cert_status == "invalid" && !p.cert_detail.empty()) {
    cert["failed_index"] = p.cert_detail;
  }
  if (p.cert_ok) {
    ordered_json rows = ordered_json::object();
    for (const auto& [alpha, row] : p.cert.rows) {
      ordered_json r = ordered_json::array();
      for (const Expr& e : row) r.push_back(e.to_string(p.space));
      rows[alpha.str()] = r;
    }
    cert["rows"] = rows;
  }
  j["certificate"] = cert;

  ordered_json dil;
  dil["status"] = p.dil.status == DilationStatus::ok            ? "ok"
                  : p.dil.status == DilationStatus::not_proportional ? "NotProportional"
                                                                     : "NonNegativeFactor";
  if (p.dil.status == DilationStatus::ok) {
    dil["lambda0"] = p.dil.lambda0;
    ordered_json factors = ordered_json::object();
    for (size_t b = 0; b < p.h.basis.size(); ++b)
      factors[p.h.basis[b].str()] = p.dil.factors[b].to_string(p.space);
    dil["factors"] = factors;
  } else {
    dil["failed_index"] = p.dil.failed.str();
  }
  j["dilation"] = dil;

  ordered_json v0;
  v0["status"] = p.v0.ok ? "ok" : "failed";
  if (p.v0.ok) {
    ordered_json coeff = ordered_json::array();
    for (const Expr& e : p.v0.coeff) coeff.push_back(e.to_string(p.space));
    v0["coefficients"] = coeff;
  }
  j["v0_condition"] = v0;

  pass = p.cert_ok;
  j["verified"] = p.cert_ok;
  return j;
}

ordered_json rate_json(Pipeline& p, bool& pass) {
  build_rate(p);
  ordered_json j;
  j["dilation_ok"] = p.dil.status == DilationStatus::ok;
  if (p.engine) {
    ordered_json e;
    e["gamma"] = p.engine->gamma;
    e["lambda0_required"] = p.engine->lambda0_required;
    e["lambda0_available"] = p.engine->lambda0_available;
    e["mu"] = p.engine->mu;
    e["lambda"] = json_or_null(p.engine->lambda);
    e["c"] = p.engine->c;
    e["l"] = p.engine->l;
    j["engine"] = e;
  } else {
    j["engine"] = nullptr;
  }
  if (p.opt) {
    ordered_json o;
    o["lambda"] = json_or_null(p.opt->report.lambda);
    o["mu"] = p.opt->report.mu;
    o["gamma"] = p.opt->report.gamma;
    o["a"] = p.opt->a;
    o["evaluations"] = p.opt->evaluations;
    j["optimizer"] = o;
  } else {
    j["optimizer"] = nullptr;
  }
  j["certified_lambda"] = json_or_null(p.certified_lambda);
  pass = p.certified_lambda.has_value();
  return j;
}

std::string series_csv(const std::vector<double>& t, const std::vector<double>& v,
                       const std::vector<double>& se) {
  std::string out = "t,value,stderr\n";
  for (size_t i = 0; i < t.size(); ++i)
    out += fmt(t[i]) + "," + fmt(v[i]) + "," + fmt(se[i]) + "\n";
  return out;
}

ordered_json decay_json(Pipeline& p, bool& pass, std::vector<std::pair<std::string, std::string>>& artifacts) {
  build_rate(p);
  build_sim(p);
  ordered_json j;
  j["certified_lambda"] = json_or_null(p.certified_lambda);
  const double tol = p.mf.run.tol;
  j["tolerance"] = tol;
  j["t_grid"] = p.grid;

  bool all_pass = p.certified_lambda.has_value();
  ordered_json series = ordered_json::array();
  for (size_t b = 0; b < p.h.basis.size(); ++b) {
    VectorField w = p.h.basis_fields[b];
    for (Expr& c : w.comp) c = c.bind_params(p.space.dim, p.params);
    const std::vector<McEstimate> est = directional_derivative_series(
        *p.sim, p.f, p.mf.run.x0, p.grid, w, p.mf.run.h, p.mf.run.paths, p.mf.run.dt,
        p.mf.run.seed);
    std::vector<double> values, stderrs;
    long discarded = 0;
    for (const McEstimate& e : est) {
      values.push_back(e.mean * e.mean);
      stderrs.push_back(2.0 * std::fabs(e.mean) * e.stderr_);
      discarded = std::max(discarded, e.discarded);
    }
    ordered_json s;
    s["direction"] = p.h.basis[b].str();
    const std::string file = "decay_" + digits(p.h.basis[b]) + ".csv";
    s["file"] = file;
    s["times"] = p.grid;
    s["values"] = values;
    s["stderrs"] = stderrs;
    s["discarded_paths"] = discarded;
    artifacts.emplace_back(file, series_csv(p.grid, values, stderrs));
    try {
      const DecayEstimate fit = fit_decay(p.grid, values, stderrs);
      s["exponent"] = fit.fitted_exponent;
      s["ci"] = {fit.ci_low, fit.ci_high};
      s["r_squared"] = fit.r_squared;
      const bool ok =
          p.certified_lambda && fit.fitted_exponent >= *p.certified_lambda - tol;
      s["pass"] = ok;
      if (!ok) all_pass = false;
    } catch (const Error&) {
      s["exponent"] = nullptr;
      s["pass"] = nullptr;  // no measurable signal in this direction
    }
    series.push_back(s);
  }
  j["series"] = series;
  j["verdict"] = all_pass ? "PASS" : "FAIL";
  pass = all_pass;
  return j;
}

ordered_json reach_json(Pipeline& p, bool& pass, std::vector<std::pair<std::string, std::string>>& artifacts) {
  build_rate(p);
  build_sim(p);
  if (p.mf.chain.empty())
    throw Error(Errc::invalid_argument, "model declares no [chain] for the reach command");

  std::vector<std::pair<VectorField, double>> chain;
  for (const auto& [idx, duration] : p.mf.chain) {
    VectorField w = p.fields[static_cast<size_t>(idx)];
    for (Expr& c : w.comp) c = c.bind_params(p.space.dim, p.params);
    chain.emplace_back(std::move(w), duration);
  }
  const DecayEstimate de = check_reachability_contraction(
      *p.sim, p.f, p.mf.run.x0, chain, p.grid, p.mf.run.paths, p.mf.run.dt, p.mf.run.seed);

  ordered_json j;
  ordered_json ch = ordered_json::array();
  for (const auto& [idx, duration] : p.mf.chain) ch.push_back({{"field", "V" + std::to_string(idx)}, {"duration", duration}});
  j["chain"] = ch;
  j["times"] = de.times;
  j["values"] = de.values;
  j["stderrs"] = de.stderrs;
  j["exponent"] = de.fitted_exponent;
  j["ci"] = {de.ci_low, de.ci_high};
  j["r_squared"] = de.r_squared;
  artifacts.emplace_back("reach.csv", series_csv(de.times, de.values, de.stderrs));

  // The paired difference is bounded by a line integral of the first
  // derivatives, so it contracts at half the squared-gradient rate.
  const double tol = p.mf.run.tol;
  j["certified_lambda"] = json_or_null(p.certified_lambda);
  bool ok = p.certified_lambda.has_value();
  if (ok) {
    const double threshold = *p.certified_lambda / 2.0 - tol;
    j["threshold"] = threshold;
    ok = de.n_used >= 4 && de.fitted_exponent >= threshold;
  }
  j["verdict"] = ok ? "PASS" : "FAIL";
  pass = ok;
  return j;
}

}  // namespace

const char* toolkit_version() { return "0.1.0"; }

RunResult run_command(const std::string& command, const ModelFile& model,
                      const RunOverrides& overrides) {
  const bool want_ufg = command == "check-ufg" || command == "all";
  const bool want_rate = command == "rate" || command == "all";
  const bool want_decay = command == "decay" || command == "all";
  const bool want_reach = command == "reach" || (command == "all" && !model.chain.empty());
  if (!want_ufg && !want_rate && !want_decay && !want_reach)
    throw Error(Errc::invalid_argument, "unknown command '" + command + "'");

  Pipeline p;
  p.mf = apply_overrides(model, overrides);
  p.space = model_space(p.mf);
  p.fields = model_fields(p.mf);
  p.params = model_param_values(p.mf);

  RunResult result;
  ordered_json report;
  report["tool"] = "ufgkit";
  report["version"] = toolkit_version();
  report["command"] = command;
  report["model"] = model_echo(p);

  bool all_pass = true;
  if (want_ufg) {
    bool pass = false;
    report["ufg"] = ufg_json(p, pass);
    all_pass = all_pass && pass;
  }
  if (want_rate) {
    bool pass = false;
    report["rate"] = rate_json(p, pass);
    all_pass = all_pass && pass;
  }
  if (want_decay) {
    bool pass = false;
    report["decay"] = decay_json(p, pass, result.artifacts);
    all_pass = all_pass && pass;
  }
  if (want_reach) {
    bool pass = false;
    report["reach"] = reach_json(p, pass, result.artifacts);
    all_pass = all_pass && pass;
  }

  result.verdict = all_pass ? "PASS" : "FAIL";
  result.exit_code = all_pass ? 0 : 2;
  report["verdict"] = result.verdict;
  report["exit_code"] = result.exit_code;
  result.report_json = report.dump(2) + "\n";

  if (!overrides.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(overrides.out_dir);
    {
      std::ofstream out(fs::path(overrides.out_dir) / "report.json", std::ios::binary);
      if (!out) throw Error(Errc::io_error, "cannot write report.json");
      out << result.report_json;
    }
    for (const auto& [name, contents] : result.artifacts) {
      std::ofstream out(fs::path(overrides.out_dir) / name, std::ios::binary);
      if (!out) throw Error(Errc::io_error, "cannot write " + name);
      out << contents;
    }
  }
  return result;
}

}  // namespace ufg
