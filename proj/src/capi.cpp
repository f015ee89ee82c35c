#include "ufgkit/ufgkit.h"

#include <string>

#include "ufgkit/model.hpp"
#include "ufgkit/runner.hpp"

struct ufg_model {
  ufg::ModelFile mf;
};

struct ufg_result {
  ufg::RunResult r;
};

namespace {

thread_local std::string g_last_error;

ufg_status status_of(const ufg::Error& e) {
  switch (e.code()) {
    case ufg::Errc::ok:
      return UFG_OK;
    case ufg::Errc::invalid_argument:
      return UFG_ERR_INVALID;
    case ufg::Errc::parse_error:
      return UFG_ERR_PARSE;
    case ufg::Errc::dimension_mismatch:
      return UFG_ERR_DIMENSION;
    case ufg::Errc::unknown_symbol:
      return UFG_ERR_UNKNOWN_SYMBOL;
    case ufg::Errc::unsupported:
      return UFG_ERR_UNSUPPORTED;
    case ufg::Errc::io_error:
      return UFG_ERR_IO;
    case ufg::Errc::numeric:
      return UFG_ERR_NUMERIC;
    case ufg::Errc::internal:
      return UFG_ERR_INTERNAL;
  }
  return UFG_ERR_INTERNAL;
}

template <typename Fn>
ufg_status guarded(Fn&& fn) {
  try {
    fn();
    return UFG_OK;
  } catch (const ufg::Error& e) {
    g_last_error = e.what();
    return status_of(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return UFG_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return UFG_ERR_INTERNAL;
  }
}

}  // namespace

extern "C" {

const char* ufg_version(void) { return ufg::toolkit_version(); }

void ufg_run_options_init(ufg_run_options* opts) {
  if (!opts) return;
  opts->m = 0;
  opts->paths = 0;
  opts->dt = 0.0;
  opts->has_seed = 0;
  opts->seed = 0;
  opts->has_t_grid = 0;
  opts->t_start = 0.0;
  opts->t_end = 0.0;
  opts->t_step = 0.0;
  opts->tol = -1.0;
  opts->out_dir = nullptr;
}

ufg_status ufg_model_parse_text(const char* text, ufg_model** out) {
  if (!text || !out) {
    g_last_error = "null argument";
    return UFG_ERR_INVALID;
  }
  *out = nullptr;
  return guarded([&]() { *out = new ufg_model{ufg::parse_model(text)}; });
}

ufg_status ufg_model_parse_file(const char* path, ufg_model** out) {
  if (!path || !out) {
    g_last_error = "null argument";
    return UFG_ERR_INVALID;
  }
  *out = nullptr;
  return guarded([&]() { *out = new ufg_model{ufg::load_model_file(path)}; });
}

void ufg_model_free(ufg_model* model) { delete model; }

const char* ufg_last_error(void) { return g_last_error.c_str(); }

ufg_status ufg_run(const ufg_model* model, const char* command, const ufg_run_options* opts,
                   ufg_result** out) {
  if (!model || !command || !out) {
    g_last_error = "null argument";
    return UFG_ERR_INVALID;
  }
  *out = nullptr;
  return guarded([&]() {
    ufg::RunOverrides ov;
    if (opts) {
      if (opts->m > 0) ov.m = opts->m;
      if (opts->paths > 0) ov.paths = opts->paths;
      if (opts->dt > 0.0) ov.dt = opts->dt;
      if (opts->has_seed) ov.seed = static_cast<std::uint64_t>(opts->seed);
      if (opts->has_t_grid) {
        ov.t_start = opts->t_start;
        ov.t_end = opts->t_end;
        ov.t_step = opts->t_step;
      }
      if (opts->tol >= 0.0) ov.tol = opts->tol;
      if (opts->out_dir) ov.out_dir = opts->out_dir;
    }
    *out = new ufg_result{ufg::run_command(command, model->mf, ov)};
  });
}

int ufg_result_exit_code(const ufg_result* result) { return result ? result->r.exit_code : 1; }

const char* ufg_result_verdict(const ufg_result* result) {
  return result ? result->r.verdict.c_str() : "";
}

const char* ufg_result_report_json(const ufg_result* result) {
  return result ? result->r.report_json.c_str() : "";
}

size_t ufg_result_artifact_count(const ufg_result* result) {
  return result ? result->r.artifacts.size() : 0;
}

const char* ufg_result_artifact_name(const ufg_result* result, size_t index) {
  if (!result || index >= result->r.artifacts.size()) return "";
  return result->r.artifacts[index].first.c_str();
}

const char* ufg_result_artifact_data(const ufg_result* result, size_t index) {
  if (!result || index >= result->r.artifacts.size()) return "";
  return result->r.artifacts[index].second.c_str();
}

void ufg_result_free(ufg_result* result) { delete result; }

}  // extern "C"
