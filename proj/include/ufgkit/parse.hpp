#ifndef UFGKIT_PARSE_HPP
#define UFGKIT_PARSE_HPP

#include <memory>
#include <optional>
#include <span>
#include <string>

#include "ufgkit/expr.hpp"

namespace ufg {

/// Parsed scalar function. Supports + - * ^int, sin/cos/tanh/abs and keeps
/// an evaluation tree, so tanh and abs (which have no Expr form) stay
/// usable as test functions. lower() succeeds when the tree is free of
/// evaluation-only atoms.
class ScalarFunc {
public:
  struct Node;

  ScalarFunc() = default;

  double evaluate(std::span<const double> point) const;
  std::optional<Expr> lower() const;
  const std::string& text() const { return text_; }
  bool uses_tanh() const;
  /// True when the tree provably stays bounded over all coordinate values
  /// (parameters count as constants). Conservative.
  bool structurally_bounded(const VarSpace& space) const;

private:
  friend ScalarFunc parse_scalar(const std::string&, const VarSpace&);
  std::shared_ptr<const Node> root_;
  std::string text_;
};

/// Parses an expression over the space's coordinates and parameters into
/// canonical Expr form. Grammar: numbers, names, + - * / ^int, unary
/// minus, parentheses, sin(<coordinate>), cos(<coordinate>). Division is
/// restricted to constant divisors. Throws Error(parse_error /
/// unknown_symbol / unsupported).
Expr parse_expr(const std::string& text, const VarSpace& space);

/// Same grammar plus tanh(...)/abs(...) with arbitrary inner expressions.
ScalarFunc parse_scalar(const std::string& text, const VarSpace& space);

}  // namespace ufg

#endif
