#include "ufgkit/parse.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <vector>

namespace ufg {

struct ScalarFunc::Node {
  enum Kind { num, var, add, sub, mul, divide, pow, neg, fsin, fcos, ftanh, fabs_ } kind;
  double value = 0.0;
  int var_id = -1;
  int exponent = 0;
  std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const ScalarFunc::Node>;
using Node = ScalarFunc::Node;

NodePtr make(Node n) { return std::make_shared<const Node>(std::move(n)); }

struct Lexer {
  const std::string& s;
  size_t pos = 0;

  void skip() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  bool eof() {
    skip();
    return pos >= s.size();
  }
  char peek() {
    skip();
    return pos < s.size() ? s[pos] : '\0';
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(Errc::parse_error, msg + " at position " + std::to_string(pos) + " in '" + s + "'");
  }
};

struct Parser {
  Lexer lex;
  const VarSpace& space;

  NodePtr parse_sum() {
    NodePtr left = parse_product();
    while (true) {
      const char c = lex.peek();
      if (c == '+' || c == '-') {
        ++lex.pos;
        NodePtr right = parse_product();
        left = make({c == '+' ? Node::add : Node::sub, 0, -1, 0, left, right});
      } else {
        return left;
      }
    }
  }

  NodePtr parse_product() {
    NodePtr left = parse_unary();
    while (true) {
      const char c = lex.peek();
      if (c == '*' || c == '/') {
        ++lex.pos;
        NodePtr right = parse_unary();
        left = make({c == '*' ? Node::mul : Node::divide, 0, -1, 0, left, right});
      } else {
        return left;
      }
    }
  }

  NodePtr parse_unary() {
    if (lex.peek() == '-') {
      ++lex.pos;
      return make({Node::neg, 0, -1, 0, parse_unary(), nullptr});
    }
    if (lex.peek() == '+') {
      ++lex.pos;
      return parse_unary();
    }
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_atom();
    if (lex.peek() == '^') {
      ++lex.pos;
      lex.skip();
      bool negexp = false;
      if (lex.peek() == '-') {
        negexp = true;
        ++lex.pos;
      }
      size_t start = lex.pos;
      while (lex.pos < lex.s.size() && std::isdigit(static_cast<unsigned char>(lex.s[lex.pos])))
        ++lex.pos;
      if (lex.pos == start) lex.fail("expected integer exponent");
      int e = std::atoi(lex.s.substr(start, lex.pos - start).c_str());
      if (negexp) lex.fail("negative exponents are not supported");
      return make({Node::pow, 0, -1, e, base, nullptr});
    }
    return base;
  }

  NodePtr parse_atom() {
    lex.skip();
    if (lex.eof()) lex.fail("unexpected end of expression");
    const char c = lex.s[lex.pos];
    if (c == '(') {
      ++lex.pos;
      NodePtr inner = parse_sum();
      if (lex.peek() != ')') lex.fail("expected ')'");
      ++lex.pos;
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      char* end = nullptr;
      const double v = std::strtod(lex.s.c_str() + lex.pos, &end);
      if (end == lex.s.c_str() + lex.pos) lex.fail("bad number");
      lex.pos = static_cast<size_t>(end - lex.s.c_str());
      return make({Node::num, v, -1, 0, nullptr, nullptr});
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = lex.pos;
      while (lex.pos < lex.s.size() &&
             (std::isalnum(static_cast<unsigned char>(lex.s[lex.pos])) || lex.s[lex.pos] == '_'))
        ++lex.pos;
      const std::string name = lex.s.substr(start, lex.pos - start);
      if (name == "sin" || name == "cos" || name == "tanh" || name == "abs") {
        if (lex.peek() != '(') lex.fail("expected '(' after " + name);
        ++lex.pos;
        NodePtr inner = parse_sum();
        if (lex.peek() != ')') lex.fail("expected ')'");
        ++lex.pos;
        const Node::Kind k = name == "sin"   ? Node::fsin
                             : name == "cos" ? Node::fcos
                             : name == "abs" ? Node::fabs_
                                             : Node::ftanh;
        return make({k, 0, -1, 0, inner, nullptr});
      }
      const int id = space.find(name);
      if (id < 0) throw Error(Errc::unknown_symbol, "unknown symbol '" + name + "'");
      return make({Node::var, 0, id, 0, nullptr, nullptr});
    }
    lex.fail(std::string("unexpected character '") + c + "'");
  }
};

double eval_node(const Node& n, std::span<const double> point) {
  switch (n.kind) {
    case Node::num:
      return n.value;
    case Node::var:
      if (n.var_id >= static_cast<int>(point.size()))
        throw Error(Errc::dimension_mismatch, "evaluation point too short");
      return point[static_cast<size_t>(n.var_id)];
    case Node::add:
      return eval_node(*n.a, point) + eval_node(*n.b, point);
    case Node::sub:
      return eval_node(*n.a, point) - eval_node(*n.b, point);
    case Node::mul:
      return eval_node(*n.a, point) * eval_node(*n.b, point);
    case Node::divide:
      return eval_node(*n.a, point) / eval_node(*n.b, point);
    case Node::pow: {
      const double b = eval_node(*n.a, point);
      double r = 1.0;
      for (int i = 0; i < n.exponent; ++i) r *= b;
      return r;
    }
    case Node::neg:
      return -eval_node(*n.a, point);
    case Node::fsin:
      return std::sin(eval_node(*n.a, point));
    case Node::fcos:
      return std::cos(eval_node(*n.a, point));
    case Node::ftanh:
      return std::tanh(eval_node(*n.a, point));
    case Node::fabs_:
      return std::fabs(eval_node(*n.a, point));
  }
  throw Error(Errc::internal, "bad node");
}

bool node_uses_tanh(const Node& n) {
  if (n.kind == Node::ftanh) return true;
  if (n.a && node_uses_tanh(*n.a)) return true;
  if (n.b && node_uses_tanh(*n.b)) return true;
  return false;
}

std::optional<Expr> lower_node(const Node& n) {
  switch (n.kind) {
    case Node::num:
      return Expr::constant(n.value);
    case Node::var:
      return Expr::variable(n.var_id);
    case Node::add: {
      auto a = lower_node(*n.a), b = lower_node(*n.b);
      if (!a || !b) return std::nullopt;
      return *a + *b;
    }
    case Node::sub: {
      auto a = lower_node(*n.a), b = lower_node(*n.b);
      if (!a || !b) return std::nullopt;
      return *a - *b;
    }
    case Node::mul: {
      auto a = lower_node(*n.a), b = lower_node(*n.b);
      if (!a || !b) return std::nullopt;
      return *a * *b;
    }
    case Node::divide: {
      auto a = lower_node(*n.a), b = lower_node(*n.b);
      if (!a || !b) return std::nullopt;
      if (b->terms().size() != 1 || !b->terms()[0].factors.empty())
        throw Error(Errc::unsupported, "division is restricted to constant divisors");
      const double d = b->terms()[0].coeff;
      if (d == 0.0) throw Error(Errc::invalid_argument, "division by zero");
      return *a * (1.0 / d);
    }
    case Node::pow: {
      auto a = lower_node(*n.a);
      if (!a) return std::nullopt;
      return a->pow_int(n.exponent);
    }
    case Node::neg: {
      auto a = lower_node(*n.a);
      if (!a) return std::nullopt;
      return -*a;
    }
    case Node::fsin:
    case Node::fcos: {
      if (n.a->kind != Node::var)
        throw Error(Errc::unsupported, "sin/cos take a single variable");
      return n.kind == Node::fsin ? Expr::sin_of(n.a->var_id) : Expr::cos_of(n.a->var_id);
    }
    case Node::ftanh:
    case Node::fabs_:
      return std::nullopt;
  }
  return std::nullopt;
}

// Sound under-approximation of boundedness over R^N: parameters count as
// constants (they are bound before evaluation), coordinates do not.
bool node_bounded(const Node& n, const VarSpace& space) {
  switch (n.kind) {
    case Node::num:
      return true;
    case Node::var:
      return space.is_param(n.var_id);
    case Node::add:
    case Node::sub:
    case Node::mul:
    case Node::divide:
      return node_bounded(*n.a, space) && node_bounded(*n.b, space);
    case Node::pow:
    case Node::neg:
    case Node::fabs_:
      return node_bounded(*n.a, space);
    case Node::fsin:
    case Node::fcos:
    case Node::ftanh:
      return true;
  }
  return false;
}

}  // namespace

double ScalarFunc::evaluate(std::span<const double> point) const {
  if (!root_) throw Error(Errc::invalid_argument, "empty scalar function");
  return eval_node(*root_, point);
}

std::optional<Expr> ScalarFunc::lower() const {
  if (!root_) return std::nullopt;
  return lower_node(*root_);
}

bool ScalarFunc::uses_tanh() const { return root_ && node_uses_tanh(*root_); }

bool ScalarFunc::structurally_bounded(const VarSpace& space) const {
  return root_ && node_bounded(*root_, space);
}

ScalarFunc parse_scalar(const std::string& text, const VarSpace& space) {
  Parser p{Lexer{text}, space};
  ScalarFunc f;
  f.root_ = p.parse_sum();
  if (!p.lex.eof()) p.lex.fail("trailing input");
  f.text_ = text;
  return f;
}

Expr parse_expr(const std::string& text, const VarSpace& space) {
  ScalarFunc f = parse_scalar(text, space);
  auto e = f.lower();
  if (!e) throw Error(Errc::unsupported, "tanh/abs are evaluation-only and not allowed here");
  // sin/cos of parameters would defeat boundedness analysis.
  for (const auto& t : e->terms())
    for (const auto& fac : t.factors)
      if (space.is_param(fac.var) && (fac.sin_pow > 0 || fac.cos_pow > 0))
        throw Error(Errc::unsupported, "trig of a parameter is not supported");
  return *e;
}

}  // namespace ufg
