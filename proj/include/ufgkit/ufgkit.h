/* C interface to the toolkit: opaque handles, integer status codes, and
 * JSON/CSV string accessors. All pointers returned by accessors stay
 * owned by the handle they came from. */
#ifndef UFGKIT_H
#define UFGKIT_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ufg_status {
  UFG_OK = 0,
  UFG_ERR_INVALID = 1,
  UFG_ERR_PARSE = 2,
  UFG_ERR_DIMENSION = 3,
  UFG_ERR_UNKNOWN_SYMBOL = 4,
  UFG_ERR_UNSUPPORTED = 5,
  UFG_ERR_IO = 6,
  UFG_ERR_NUMERIC = 7,
  UFG_ERR_INTERNAL = 8
} ufg_status;

typedef struct ufg_model ufg_model;
typedef struct ufg_result ufg_result;

/* Optional overrides over the model's [run] section. Initialize with
 * ufg_run_options_init; sentinel values mean "use the model's value". */
typedef struct ufg_run_options {
  int m;                  /* <= 0: model value */
  long paths;             /* <= 0: model value */
  double dt;              /* <= 0: model value */
  int has_seed;
  unsigned long long seed;
  int has_t_grid;
  double t_start;
  double t_end;
  double t_step;
  double tol;             /* < 0: model value */
  const char* out_dir;    /* NULL: keep artifacts in memory only */
} ufg_run_options;

const char* ufg_version(void);
void ufg_run_options_init(ufg_run_options* opts);

ufg_status ufg_model_parse_text(const char* text, ufg_model** out);
ufg_status ufg_model_parse_file(const char* path, ufg_model** out);
void ufg_model_free(ufg_model* model);

/* Message for the most recent failing call on this thread. */
const char* ufg_last_error(void);

/* command: "check-ufg" | "rate" | "decay" | "reach" | "all". On UFG_OK
 * the result's exit code is 0 (pass) or 2 (verification failure). */
ufg_status ufg_run(const ufg_model* model, const char* command,
                   const ufg_run_options* opts, ufg_result** out);

int ufg_result_exit_code(const ufg_result* result);
const char* ufg_result_verdict(const ufg_result* result);
const char* ufg_result_report_json(const ufg_result* result);
size_t ufg_result_artifact_count(const ufg_result* result);
const char* ufg_result_artifact_name(const ufg_result* result, size_t index);
const char* ufg_result_artifact_data(const ufg_result* result, size_t index);
void ufg_result_free(ufg_result* result);

#ifdef __cplusplus
}
#endif

#endif
