#ifndef UFGKIT_EXPR_HPP
#define UFGKIT_EXPR_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ufg {

/// Error codes shared between the C++ core and the C API.
enum class Errc {
  ok = 0,
  invalid_argument,
  parse_error,
  dimension_mismatch,
  unknown_symbol,
  unsupported,
  io_error,
  numeric,
  internal
};

/// Exception type thrown by the core for malformed inputs.
class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  Errc code() const { return code_; }

private:
  Errc code_;
};

/// Variable layout: coordinates get ids 0..dim-1, symbolic parameters
/// (positive-valued constants such as k) follow at ids dim, dim+1, ...
/// Parameters are excluded from differentiation and from boundedness
/// analysis; evaluation needs values for both blocks.
struct VarSpace {
  int dim = 0;
  std::vector<std::string> params;

  int var_count() const { return dim + static_cast<int>(params.size()); }
  bool is_param(int v) const { return v >= dim && v < var_count(); }
  std::string var_name(int v) const;
  /// Resolves a coordinate alias (x,y,z for dim<=3, always x1..xN) or a
  /// parameter name; returns -1 if unknown.
  int find(const std::string& name) const;
};

/// One multiplicative atom x_v^pow * sin(x_v)^sin_pow * cos(x_v)^cos_pow.
struct Factor {
  int var = 0;
  int pow = 0;
  int sin_pow = 0;
  int cos_pow = 0;

  bool operator==(const Factor&) const = default;
};

/// Product term: coeff times factors sorted by variable id (unique ids).
struct Term {
  double coeff = 0.0;
  std::vector<Factor> factors;
};

/// Sparse canonical sum of terms over polynomial and trigonometric atoms.
///
/// Canonical form: terms sorted by factor key, equal keys merged, merged
/// coefficients with |c| <= 1e-12 dropped. sin/cos atoms take a single
/// variable; general functions are out of scope (the model layer keeps
/// tanh as an evaluation-only construct).
class Expr {
public:
  Expr() = default;

  static Expr constant(double c);
  static Expr variable(int v);
  static Expr sin_of(int v);
  static Expr cos_of(int v);
  static Expr from_terms(std::vector<Term> terms);

  const std::vector<Term>& terms() const { return terms_; }
  bool structurally_zero() const { return terms_.empty(); }
  /// Largest variable id occurring in the expression, -1 if constant.
  int max_var() const;

  Expr operator-() const;
  Expr operator+(const Expr& o) const;
  Expr operator-(const Expr& o) const;
  Expr operator*(const Expr& o) const;
  Expr operator*(double s) const;
  Expr& operator+=(const Expr& o);
  Expr& operator-=(const Expr& o);
  Expr& operator*=(const Expr& o);
  Expr pow_int(int e) const;

  bool operator==(const Expr& o) const;
  /// Structural comparison with a per-coefficient absolute tolerance.
  bool approx_equal(const Expr& o, double tol) const;

  /// Formal partial derivative with respect to variable id v.
  Expr derivative(int v) const;

  /// Evaluates with values for every referenced variable id.
  double evaluate(std::span<const double> point) const;

  /// Substitutes numeric values for parameter ids (>= dim); the result
  /// only references coordinates.
  Expr bind_params(int dim, std::span<const double> values) const;

  /// Rewrites cos^2(x) -> 1 - sin^2(x) to a fixed point, so cos-powers
  /// are at most 1; reduced monomials are linearly independent, making
  /// the canonical rewritten form a sound zero test.
  Expr rewritten() const;

  std::string to_string(const VarSpace& space) const;

private:
  std::vector<Term> terms_;

  void canonicalize();
};

inline Expr operator*(double s, const Expr& e) { return e * s; }

/// Zero test result. `suspicious` is set when the structural verdict says
/// nonzero but every random sample vanished below 1e-12 (possible missed
/// identity; surfaced as an open-question flag, never silently trusted).
struct ZeroCheck {
  bool zero = false;
  bool suspicious = false;
};

/// Structural zero test on the rewritten canonical form, cross-checked by
/// evaluation at >= 32 deterministic pseudo-random points.
ZeroCheck is_zero_checked(const Expr& e, const VarSpace& space);

/// Sup-norm bound over all of R^dim (parameters must be bound first).
/// `exact` holds for constants and for +inf caused by an unbounded
/// polynomial factor; trig sums report a coefficient-sum upper bound.
struct SupNorm {
  double value = 0.0;
  bool exact = false;
};

SupNorm sup_norm(const Expr& e, int dim);

/// Sup-norm estimate over an axis-aligned box by grid sampling with the
/// given per-axis resolution, inflated by 10%; never exact.
SupNorm sup_norm_box(const Expr& e, std::span<const std::pair<double, double>> box,
                     int resolution);

/// Upper bound for sup e (signed, not |e|): constant part plus the
/// coefficient-sum of bounded terms; +inf as soon as a coordinate
/// polynomial factor appears (conservative).
double signed_sup_bound(const Expr& e, int dim);

/// True iff no coordinate variable occurs with a positive polynomial
/// power (trig factors and parameter powers are bounded).
bool is_bounded(const Expr& e, int dim);

/// Checked partial derivative: v must name a coordinate of the space.
Expr differentiate(const VarSpace& space, const Expr& e, int v);

}  // namespace ufg

#endif
