#ifndef UFGKIT_SDE_HPP
#define UFGKIT_SDE_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ufgkit/liealg.hpp"
#include "ufgkit/parse.hpp"

namespace ufg {

/// Flat term-list form of an Expr for the integrator's inner loop:
/// no allocation, no virtual dispatch, trig evaluated only when present.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  /// The expression must be parameter-free (bind first).
  CompiledExpr(const Expr& e, int dim);

  double eval(const double* x) const;
  bool empty() const { return terms_.empty(); }

 private:
  struct CFactor {
    int var;
    int pow;
    int sin_pow;
    int cos_pow;
  };
  struct CTerm {
    double coeff;
    std::uint32_t begin;
    std::uint32_t end;
  };
  std::vector<CTerm> terms_;
  std::vector<CFactor> factors_;
};

/// Diffusion dX = V_0 dt + sqrt(2) * sum_i V_i o dW_i, parameters already
/// substituted. The generator is V_0 + sum_i V_i^2.
struct SdeModel {
  VarSpace space;               // coordinates + parameters
  int dim = 0;
  int d = 0;                    // noise dimension
  std::vector<double> param_values;       // bound values, for f evaluation
  std::vector<VectorField> fields;        // V_0..V_d, parameter-free
  std::vector<std::vector<CompiledExpr>> compiled;  // [field][component]
};

/// Builds a simulation-ready model; binds param_values into every field.
SdeModel make_sde_model(const VarSpace& space, const std::vector<VectorField>& fields,
                        std::span<const double> param_values);

struct PathEnd {
  std::vector<double> x;
  bool blown_up = false;  // some coordinate left [-1e12, 1e12]
};

/// One trajectory of the Heun predictor-corrector scheme with noise
/// derived from (seed, path_index); the final substep shrinks to land on
/// T exactly.
PathEnd integrate_path(const SdeModel& model, std::span<const double> x0, double T, double dt,
                       std::uint64_t seed, std::uint64_t path_index);

struct McEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  long n_paths = 0;
  std::uint64_t seed = 0;
  long discarded = 0;  // blown-up paths excluded from the statistics
};

/// Monte Carlo E[f(X_t) | X_0 = x]. Per-path noise is counter-derived, so
/// the estimate is bit-identical for any worker count.
McEstimate estimate_semigroup(const SdeModel& model, const ScalarFunc& f,
                              std::span<const double> x, double t, long n_paths, double dt,
                              std::uint64_t seed);

/// Integral curve of V through x, advanced by (signed) h with classical
/// fourth-order substeps of size <= max_substep. Requires |h| <= 10 and a
/// parameter-free field; max_substep in (0, 1] exists for convergence
/// diagnostics and defaults to the production step.
std::vector<double> flow(const VectorField& V, std::span<const double> x, double h,
                         double max_substep = 1e-2);

/// Central difference of P_t f along the flow of W: paths started at
/// flow(W, x, +h) and flow(W, x, -h) share one noise stream per path
/// (common random numbers), and the statistics are over the paired
/// differences.
McEstimate directional_derivative(const SdeModel& model, const ScalarFunc& f,
                                  std::span<const double> x, double t, const VectorField& W,
                                  double h, long n_paths, double dt, std::uint64_t seed);

/// Same estimator evaluated at every time of an increasing grid using a
/// single trajectory pair per path, so all grid points share paths.
std::vector<McEstimate> directional_derivative_series(const SdeModel& model, const ScalarFunc& f,
                                                      std::span<const double> x,
                                                      std::span<const double> t_grid,
                                                      const VectorField& W, double h, long n_paths,
                                                      double dt, std::uint64_t seed);

struct GammaValue {
  double value = 0.0;
  double stderr_ = 0.0;  // first-order propagation through the squares
};

/// Quadratic form sum_b a_b * (V_b P_t f)(x)^2 with every direction
/// estimated from the same seed.
GammaValue evaluate_gamma(const SdeModel& model, std::span<const double> a,
                          const std::vector<VectorField>& basis_fields, const ScalarFunc& f,
                          std::span<const double> x, double t, double h, long n_paths, double dt,
                          std::uint64_t seed);

struct DecayEstimate {
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> stderrs;
  double fitted_exponent = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double r_squared = 0.0;
  int n_used = 0;  // strictly positive values entering the fit
};

/// Least squares on (t, log value) over the strictly positive values;
/// exponent = -slope with a 95% confidence interval. Throws
/// Error(invalid_argument, "InsufficientPositiveValues...") when fewer
/// than 4 values are positive.
DecayEstimate fit_decay(std::span<const double> times, std::span<const double> values,
                        std::span<const double> stderrs = {});

/// Contraction along a reachability chain: y is x pushed through the
/// listed flows, the series is |P_t f(x) - P_t f(y)| from paired
/// common-random-number runs. When fewer than 4 series values are
/// positive (e.g. an empty chain gives exact zeros) the fit fields stay
/// zero instead of throwing.
DecayEstimate check_reachability_contraction(const SdeModel& model, const ScalarFunc& f,
                                             std::span<const double> x,
                                             const std::vector<std::pair<VectorField, double>>& chain,
                                             std::span<const double> t_grid, long n_paths,
                                             double dt, std::uint64_t seed);

/// Worker count used for path parallelism: min(hardware, UFGKIT_THREADS).
int worker_count();

}  // namespace ufg

#endif
