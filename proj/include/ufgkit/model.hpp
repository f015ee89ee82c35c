#ifndef UFGKIT_MODEL_HPP
#define UFGKIT_MODEL_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ufgkit/liealg.hpp"
#include "ufgkit/parse.hpp"

namespace ufg {

/// Numerical settings of a model file's [run] section, with defaults
/// filled in at parse time so equality and serialization are total.
struct RunSettings {
  int m = 1;                  // bracket-length cutoff
  std::vector<double> x0;     // base point (defaults to the origin)
  double t_start = 1.0;
  double t_end = 3.0;
  double t_step = 0.5;
  long paths = 100000;
  double dt = 1e-3;
  std::uint64_t seed = 42;
  double h = 1e-2;            // finite-difference step along flows
  double tol = 0.5;           // verdict tolerance on fitted exponents

  bool operator==(const RunSettings&) const = default;
};

/// Declarative model: everything needed to drive the symbolic checks and
/// the Monte Carlo runs. Expressions are kept as the (trimmed) source
/// strings; parse_model validates that they all parse.
struct ModelFile {
  std::string name;
  int dim = 0;
  int d = 0;  // number of noise fields
  std::vector<std::pair<std::string, double>> params;
  std::vector<std::vector<std::string>> field_text;  // V_0..V_d, dim entries each
  std::string f_text;                                // optional test function
  std::vector<std::pair<std::string, std::vector<std::string>>> certificate;
  std::vector<std::pair<int, double>> chain;         // (field index, flow duration)
  RunSettings run;

  bool operator==(const ModelFile&) const = default;
};

/// Parses and fully validates the structured-text model format. Errors
/// carry the offending line number.
ModelFile parse_model(const std::string& text);

/// Canonical text form; parse_model(serialize_model(m)) == m.
std::string serialize_model(const ModelFile& m);

ModelFile load_model_file(const std::string& path);

VarSpace model_space(const ModelFile& m);
std::vector<VectorField> model_fields(const ModelFile& m);
std::vector<double> model_param_values(const ModelFile& m);
/// The test function; falls back to "sin(x1 + ... )"-free default
/// tanh(first coordinate) when the model declares none.
ScalarFunc model_function(const ModelFile& m);
std::vector<double> model_time_grid(const ModelFile& m);

}  // namespace ufg

#endif
