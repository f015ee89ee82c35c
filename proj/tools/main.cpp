// Command-line front end. Talks to the toolkit exclusively through the C
// interface in ufgkit/ufgkit.h.
#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>

#include "ufgkit/ufgkit.h"

namespace {

bool parse_t_grid(const std::string& text, ufg_run_options& opts) {
  double a = 0, b = 0, s = 0;
  if (std::sscanf(text.c_str(), "%lf , %lf , %lf", &a, &b, &s) != 3) return false;
  opts.has_t_grid = 1;
  opts.t_start = a;
  opts.t_end = b;
  opts.t_step = s;
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "ufgkit: bracket analysis, gradient-decay certificates, and Monte Carlo "
      "verification for degenerate diffusions"};

  std::string command, model_path, t_grid, out_dir;
  int m = 0;
  long paths = 0;
  double dt = 0.0, tol = -1.0;
  unsigned long long seed = 0;

  app.add_option("command", command, "check-ufg | rate | decay | reach | all")->required();
  app.add_option("--model", model_path, "model file path")->required();
  app.add_option("--m", m, "bracket-length cutoff override");
  app.add_option("--paths", paths, "Monte Carlo path count override");
  app.add_option("--dt", dt, "integrator step override");
  CLI::Option* seed_opt = app.add_option("--seed", seed, "noise seed override");
  app.add_option("--t-grid", t_grid, "time grid override: start,end,step");
  app.add_option("--out", out_dir, "directory for report.json and CSV series");
  app.add_option("--tol", tol, "verdict tolerance on fitted exponents");
  CLI11_PARSE(app, argc, argv);

  ufg_run_options opts;
  ufg_run_options_init(&opts);
  opts.m = m;
  opts.paths = paths;
  opts.dt = dt;
  opts.tol = tol;
  if (seed_opt->count() > 0) {
    opts.has_seed = 1;
    opts.seed = seed;
  }
  if (!t_grid.empty() && !parse_t_grid(t_grid, opts)) {
    std::fprintf(stderr, "error: --t-grid expects start,end,step\n");
    return 1;
  }
  if (!out_dir.empty()) opts.out_dir = out_dir.c_str();

  ufg_model* model = nullptr;
  if (ufg_model_parse_file(model_path.c_str(), &model) != UFG_OK) {
    std::fprintf(stderr, "error: %s\n", ufg_last_error());
    return 1;
  }

  ufg_result* result = nullptr;
  const ufg_status st = ufg_run(model, command.c_str(), &opts, &result);
  if (st != UFG_OK) {
    std::fprintf(stderr, "error: %s\n", ufg_last_error());
    ufg_model_free(model);
    return 1;
  }

  std::fputs(ufg_result_report_json(result), stdout);
  const int exit_code = ufg_result_exit_code(result);
  ufg_result_free(result);
  ufg_model_free(model);
  return exit_code;
}
