#ifndef UFGKIT_LIEALG_HPP
#define UFGKIT_LIEALG_HPP

#include <map>
#include <vector>

#include "ufgkit/expr.hpp"

namespace ufg {

/// Word over {0..d} indexing iterated brackets. Nonempty; the singleton
/// (0) is excluded. The length weights zeros twice:
/// ||alpha|| = entry count + number of zero entries.
class MultiIndex {
public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> entries);
  static MultiIndex single(int i) { return MultiIndex(std::vector<int>{i}); }

  const std::vector<int>& entries() const { return entries_; }
  int order() const;
  MultiIndex concat(const MultiIndex& o) const;
  MultiIndex append(int i) const;
  int back() const { return entries_.back(); }
  size_t size() const { return entries_.size(); }

  auto operator<=>(const MultiIndex& o) const = default;
  std::string str() const;
  /// Inverse of str(): "(1,2,0)" (parentheses optional).
  static MultiIndex parse(const std::string& text);

private:
  std::vector<int> entries_;
};

/// All of A_m for entries over {0..d}: lengths ascending, lexicographic
/// within each length.
std::vector<MultiIndex> enumerate_multiindices(int d, int m);

/// First-order differential operator sum_j comp[j] d_j.
struct VectorField {
  std::vector<Expr> comp;

  int dim() const { return static_cast<int>(comp.size()); }
  bool is_zero() const;
  static VectorField zero(int dim);
  /// Vf = sum_j comp[j] * d_j f.
  Expr apply(const Expr& f) const;

  bool operator==(const VectorField&) const = default;
};

VectorField operator+(const VectorField& a, const VectorField& b);
VectorField operator-(const VectorField& a, const VectorField& b);
VectorField operator*(const Expr& s, const VectorField& v);
VectorField operator*(double s, const VectorField& v);

/// [V,W]^i = sum_j (V^j d_j W^i - W^j d_j V^i).
VectorField bracket(const VectorField& v, const VectorField& w);

/// Iterated-bracket table over A_{m+2} with a deduplicated basis drawn
/// from A_m. Entries beyond order m exist so overflow brackets alpha*i
/// and alpha*j*j stay computable without re-deriving fields.
struct BracketHierarchy {
  VarSpace space;
  int d = 0;
  int m = 0;
  std::vector<VectorField> base;  // V_0 .. V_d

  std::vector<MultiIndex> indices;  // enumeration of A_{m+2}
  std::map<MultiIndex, VectorField> entries;

  /// Expansion of an in-range bracket over the basis: zero fields get
  /// basis = -1, everything else is +-1 times one basis field.
  struct Expansion {
    int basis = -1;
    double sign = 0.0;
  };
  std::map<MultiIndex, Expansion> expand;  // keys: A_m

  std::vector<MultiIndex> basis;             // representative per basis field
  std::vector<VectorField> basis_fields;     // sign-normalized

  const VectorField& field(const MultiIndex& a) const;
  bool in_range(const MultiIndex& a) const { return a.order() <= m; }
  int order_of_basis(int b) const { return basis[static_cast<size_t>(b)].order(); }
};

/// Builds brackets over A_{m+2} from V_0..V_d (fields[0] is V_0) and the
/// deduplicated nonzero basis over A_m (sign-normalized, first-seen
/// representative; V_{(2,1)} = -V_{(1,2)} collapses).
BracketHierarchy build_hierarchy(const VarSpace& space, const std::vector<VectorField>& fields,
                                 int m);

/// Formal combination sum_b coeff[b] * basis_field[b] (sparse over basis
/// indices).
struct LinComb {
  std::map<int, Expr> coeff;

  bool empty_or_zero() const;
};

struct UfgCertificate;

/// Lambda_j alpha: V_{alpha*j} expressed over the basis. In-range results
/// come from the expansion map, overflow results from the certificate row
/// (bilinearity handles sign-duplicate or zero prefixes). Throws
/// Error(invalid_argument) when a needed certificate row is missing.
LinComb apply_lambda_j(const BracketHierarchy& h, const UfgCertificate& cert, int j,
                       const MultiIndex& alpha);

}  // namespace ufg

#endif
