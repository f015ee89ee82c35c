#ifndef UFGKIT_RUNNER_HPP
#define UFGKIT_RUNNER_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ufgkit/model.hpp"

namespace ufg {

/// Command-line overrides layered over a model's [run] section.
struct RunOverrides {
  std::optional<int> m;
  std::optional<long> paths;
  std::optional<double> dt;
  std::optional<std::uint64_t> seed;
  std::optional<double> t_start;  // the three grid values travel together
  std::optional<double> t_end;
  std::optional<double> t_step;
  std::optional<double> tol;
  std::string out_dir;  // empty = keep artifacts in memory only
};

struct RunResult {
  int exit_code = 0;  // 0 pass, 2 verification failure
  std::string verdict;
  std::string report_json;
  std::vector<std::pair<std::string, std::string>> artifacts;  // (filename, contents)
};

/// Dispatches one toolkit command: check-ufg | rate | decay | reach | all.
/// Reports are deterministic given (model, seed); artifacts are also
/// written under out_dir when set. Errors throw; verification failures
/// return exit_code 2.
RunResult run_command(const std::string& command, const ModelFile& model,
                      const RunOverrides& overrides);

const char* toolkit_version();

}  // namespace ufg

#endif
