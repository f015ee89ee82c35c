// Tests for the symbolic-expression core: differentiation, evaluation,
// canonical-form equality, the zero test, sup-norm bounds, and boundedness
// classification.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ufgkit/expr.hpp"
#include "ufgkit/parse.hpp"

using namespace ufg;

namespace {

// Deterministic generator for the property-style cases (splitmix64).
struct Rng {
  std::uint64_t s;
  explicit Rng(std::uint64_t seed) : s(seed) {}
  std::uint64_t next() {
    s += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform(double a, double b) {
    return a + (b - a) * static_cast<double>(next() >> 11) * 0x1.0p-53;
  }
  int irange(int a, int b) {  // inclusive
    return a + static_cast<int>(next() % static_cast<std::uint64_t>(b - a + 1));
  }
};

// Random sum of 1..4 terms: integer-ish coefficients, monomial powers up to
// `deg`, optional sin/cos atoms.
Expr random_expr(Rng& r, int nvars, int deg, bool with_trig) {
  Expr e;
  const int nterms = r.irange(1, 4);
  for (int t = 0; t < nterms; ++t) {
    Expr term = Expr::constant(r.irange(-3, 3) + 0.5 * r.irange(0, 1));
    for (int v = 0; v < nvars; ++v) {
      const int p = r.irange(0, deg);
      for (int i = 0; i < p; ++i) term *= Expr::variable(v);
      if (with_trig && r.irange(0, 3) == 0) term *= Expr::sin_of(v);
      if (with_trig && r.irange(0, 3) == 0) term *= Expr::cos_of(v);
    }
    e += term;
  }
  return e;
}

const VarSpace kXY{2, {}};
const VarSpace kXYZ{3, {}};

Expr E(const std::string& text, const VarSpace& space = kXY) { return parse_expr(text, space); }

}  // namespace

TEST_CASE("partial derivatives of polynomial and trig atoms") {
  CHECK(E("x^2").derivative(0) == E("2*x"));
  CHECK(E("sin(x)").derivative(0) == E("cos(x)"));
  CHECK(E("x*y + y^2").derivative(1) == E("x + 2*y"));
  CHECK(E("cos(x)").derivative(0) == E("-sin(x)"));
  // Product rule across atom kinds.
  CHECK(E("x^2*sin(x)").derivative(0) == E("2*x*sin(x) + x^2*cos(x)"));
  CHECK(E("sin(x)*cos(y)").derivative(1) == E("-sin(x)*sin(y)"));
  // Absent variable differentiates to zero.
  CHECK(E("x^2 + sin(x)").derivative(1).structurally_zero());
}

TEST_CASE("checked differentiation rejects non-coordinate indices") {
  const VarSpace sp{2, {"k"}};
  const Expr e = parse_expr("k*x", sp);
  CHECK(differentiate(sp, e, 0) == parse_expr("k", sp));
  CHECK_THROWS_AS(differentiate(sp, e, 2), Error);   // parameter id
  CHECK_THROWS_AS(differentiate(sp, e, -1), Error);
  CHECK_THROWS_AS(differentiate(sp, e, 99), Error);
  // The unchecked member form treats parameters as constants.
  CHECK(e.derivative(2) == parse_expr("x", sp));
}

TEST_CASE("evaluation") {
  const double p21[] = {2.0, 1.0};
  CHECK(E("x^2 + y").evaluate(p21) == doctest::Approx(5.0).epsilon(1e-15));
  const double p0[] = {0.0, 0.0};
  CHECK(E("sin(x)").evaluate(p0) == 0.0);
  CHECK(Expr().evaluate(p0) == 0.0);
  // Parameters are evaluated from the extended point.
  const VarSpace sp{1, {"k"}};
  const double pk[] = {3.0, 2.0};
  CHECK(parse_expr("k*x^2", sp).evaluate(pk) == doctest::Approx(18.0).epsilon(1e-15));
  const double trig_pt[] = {0.7, -1.3};
  CHECK(E("2*sin(x)*cos(y) - y").evaluate(trig_pt) ==
        doctest::Approx(2.0 * std::sin(0.7) * std::cos(-1.3) + 1.3).epsilon(1e-14));
}

TEST_CASE("zero test: structural decision with sampling cross-check") {
  CHECK(is_zero_checked(E("x - x"), kXY).zero);
  CHECK(is_zero_checked(E("x*y - y*x"), kXY).zero);
  CHECK_FALSE(is_zero_checked(E("sin(x)"), kXY).zero);
  CHECK_FALSE(is_zero_checked(E("sin(x)"), kXY).suspicious);

  // The Pythagorean identity is closed by the targeted cos^2 rewrite: the
  // raw canonical form is nonzero, the rewritten form is structurally zero.
  const Expr pyth = E("sin(x)^2 + cos(x)^2 - 1");
  CHECK_FALSE(pyth.structurally_zero());
  CHECK(pyth.rewritten().structurally_zero());
  CHECK(is_zero_checked(pyth, kXY).zero);

  // Higher powers reduce to the same fixed point.
  const Expr quartic = E("cos(x)^4 - (1 - sin(x)^2)^2");
  CHECK(is_zero_checked(quartic, kXY).zero);
  const Expr mixed = E("sin(y)*cos(x)^2 + sin(y)*sin(x)^2 - sin(y)");
  CHECK(is_zero_checked(mixed, kXY).zero);

  // Plain nonzero expressions never trip the suspicion flag.
  Rng r(7);
  for (int i = 0; i < 20; ++i) {
    Expr e = random_expr(r, 2, 2, true) + Expr::constant(4.0);
    const ZeroCheck z = is_zero_checked(e, kXY);
    CHECK_FALSE(z.suspicious);
  }
}

TEST_CASE("sup-norm over all of R^n") {
  const SupNorm c = sup_norm(E("3"), 2);
  CHECK(c.value == 3.0);
  CHECK(c.exact);

  const SupNorm s = sup_norm(E("sin(x)"), 2);
  CHECK(s.value == 1.0);
  CHECK_FALSE(s.exact);  // coefficient-sum upper bound

  const SupNorm u = sup_norm(E("x"), 2);
  CHECK(std::isinf(u.value));
  CHECK(u.exact);

  CHECK(sup_norm(E("2*sin(x) - 3*cos(y)"), 2).value == 5.0);
  CHECK(sup_norm(Expr(), 2).value == 0.0);

  // Parameters must be bound before taking sups.
  const VarSpace sp{1, {"k"}};
  const Expr ke = parse_expr("k*sin(x)", sp);
  CHECK_THROWS_AS(sup_norm(ke, 1), Error);
  const double kv[] = {2.0};
  CHECK(sup_norm(ke.bind_params(1, kv), 1).value == 2.0);
}

TEST_CASE("sup-norm upper-bound property at random points") {
  Rng r(11);
  for (int i = 0; i < 20; ++i) {
    // Trig-only terms so the sup is finite.
    Expr e;
    const int nterms = r.irange(1, 4);
    for (int t = 0; t < nterms; ++t) {
      Expr term = Expr::constant(r.uniform(-3.0, 3.0));
      if (r.irange(0, 1)) term *= Expr::sin_of(r.irange(0, 1));
      if (r.irange(0, 1)) term *= Expr::cos_of(r.irange(0, 1));
      e += term;
    }
    const SupNorm sn = sup_norm(e, 2);
    for (int p = 0; p < 100; ++p) {
      const double pt[] = {r.uniform(-10.0, 10.0), r.uniform(-10.0, 10.0)};
      CHECK(std::fabs(e.evaluate(pt)) <= sn.value + 1e-12);
    }
  }
}

TEST_CASE("sup-norm on a box") {
  const std::pair<double, double> box[] = {{-2.0, 3.0}, {-1.0, 1.0}};
  const SupNorm sn = sup_norm_box(E("x"), box, 11);
  CHECK(sn.value == doctest::Approx(3.3).epsilon(1e-12));  // grid max 3, +10%
  CHECK_FALSE(sn.exact);
  CHECK_THROWS_AS(sup_norm_box(E("x"), box, 1), Error);

  Rng r(13);
  for (int i = 0; i < 10; ++i) {
    const Expr e = random_expr(r, 2, 2, true);
    const SupNorm b = sup_norm_box(e, box, 21);
    for (int p = 0; p < 100; ++p) {
      const double pt[] = {r.uniform(-2.0, 3.0), r.uniform(-1.0, 1.0)};
      // 10% inflation over a 21-point grid covers the off-grid maxima of
      // these low-degree expressions.
      CHECK(std::fabs(e.evaluate(pt)) <= b.value + 1e-9);
    }
  }
}

TEST_CASE("signed sup bound") {
  CHECK(signed_sup_bound(E("-2"), 2) == -2.0);
  CHECK(signed_sup_bound(E("-2 + sin(x)"), 2) == -1.0);
  CHECK(signed_sup_bound(E("2 - sin(x)"), 2) == 3.0);
  CHECK(signed_sup_bound(E("-cos(x)"), 2) == 1.0);
  CHECK(std::isinf(signed_sup_bound(E("-5 + x"), 2)));
  // Always an upper bound for the (signed) function value.
  Rng r(17);
  for (int i = 0; i < 20; ++i) {
    Expr e;
    for (int t = 0; t < 3; ++t) {
      Expr term = Expr::constant(r.uniform(-2.0, 2.0));
      if (r.irange(0, 1)) term *= Expr::sin_of(0);
      e += term;
    }
    const double bound = signed_sup_bound(e, 1);
    for (int p = 0; p < 50; ++p) {
      const double pt[] = {r.uniform(-8.0, 8.0)};
      CHECK(e.evaluate(pt) <= bound + 1e-12);
    }
  }
}

TEST_CASE("boundedness classification") {
  CHECK(is_bounded(E("cos(x)*sin(y)"), 2));
  CHECK_FALSE(is_bounded(E("x*sin(y)"), 2));
  CHECK(is_bounded(E("7"), 2));
  CHECK(is_bounded(Expr(), 2));
  CHECK_FALSE(is_bounded(E("x^2 + sin(y)"), 2));
  // Parameter powers do not count as unbounded coordinates.
  const VarSpace sp{1, {"k"}};
  CHECK(is_bounded(parse_expr("-k", sp), 1));
  CHECK(is_bounded(parse_expr("k^2*sin(x)", sp), 1));
  CHECK_FALSE(is_bounded(parse_expr("k*x", sp), 1));
  // Boundedness is decided on the rewritten form.
  CHECK(is_bounded(E("x*(sin(y)^2 + cos(y)^2) - x"), 2));
}

TEST_CASE("derivative matches central finite differences") {
  Rng r(23);
  const double h = 1e-5;
  for (int i = 0; i < 100; ++i) {
    const Expr e = random_expr(r, 3, 3, true);
    const int v = r.irange(0, 2);
    const Expr de = e.derivative(v);
    double pt[3], pp[3], pm[3];
    for (int j = 0; j < 3; ++j) pt[j] = r.uniform(-1.0, 1.0);
    for (int j = 0; j < 3; ++j) pp[j] = pm[j] = pt[j];
    pp[v] += h;
    pm[v] -= h;
    const double sym = de.evaluate(std::span<const double>(pt, 3));
    const double fd = (e.evaluate(std::span<const double>(pp, 3)) -
                       e.evaluate(std::span<const double>(pm, 3))) /
                      (2.0 * h);
    CHECK(std::fabs(sym - fd) <= 1e-5 + 1e-6 * std::fabs(sym));
  }
}

TEST_CASE("linearity and product rule hold symbolically") {
  Rng r(29);
  for (int i = 0; i < 50; ++i) {
    const Expr a = random_expr(r, 2, 2, true);
    const Expr b = random_expr(r, 2, 2, true);
    const int v = r.irange(0, 1);
    CHECK((a + b).derivative(v) == a.derivative(v) + b.derivative(v));
    CHECK((a * b).derivative(v) == a.derivative(v) * b + a * b.derivative(v));
    CHECK((a * 3.5).derivative(v) == a.derivative(v) * 3.5);
  }
}

TEST_CASE("canonical form: rearrangements compare equal, rewrite is idempotent") {
  CHECK(E("(x+y)^2") == E("x^2 + 2*x*y + y^2"));
  CHECK(E("x + y") == E("y + x"));
  CHECK(E("2*x - x") == E("x"));
  CHECK(E("x - x").structurally_zero());
  Rng r(31);
  for (int i = 0; i < 50; ++i) {
    const Expr a = random_expr(r, 2, 2, true);
    const Expr b = random_expr(r, 2, 2, true);
    const Expr c = random_expr(r, 2, 1, false);
    CHECK(a + b == b + a);
    CHECK((a * b) * c == a * (b * c));
    CHECK(a - a == Expr());
    const Expr rw = a.rewritten();
    CHECK(rw.rewritten() == rw);
  }
}

TEST_CASE("rewritten form eliminates cos powers above one") {
  Rng r(37);
  for (int i = 0; i < 30; ++i) {
    const Expr e = random_expr(r, 2, 2, true) * random_expr(r, 2, 1, true);
    const Expr rw = e.rewritten();
    for (const auto& t : rw.terms())
      for (const auto& f : t.factors) CHECK(f.cos_pow <= 1);
    // The rewrite preserves values.
    for (int p = 0; p < 5; ++p) {
      const double pt[] = {r.uniform(-2.0, 2.0), r.uniform(-2.0, 2.0)};
      CHECK(rw.evaluate(pt) == doctest::Approx(e.evaluate(pt)).epsilon(1e-10));
    }
  }
}

TEST_CASE("parameter binding substitutes values") {
  const VarSpace sp{1, {"k", "a"}};
  const Expr e = parse_expr("k*x + a", sp);
  const double vals[] = {2.0, 0.5};
  const Expr bound = e.bind_params(1, vals);
  CHECK(bound == parse_expr("2*x + 0.5", VarSpace{1, {}}));
  CHECK(bound.max_var() == 0);
}

TEST_CASE("approximate structural comparison") {
  CHECK(E("x").approx_equal(E("1.0001*x"), 1e-3));
  CHECK_FALSE(E("x").approx_equal(E("1.0001*x"), 1e-5));
  CHECK(E("x + 1e-9").approx_equal(E("x"), 1e-8));
}

TEST_CASE("printing round-trips through the parser") {
  Rng r(41);
  for (int i = 0; i < 50; ++i) {
    const Expr e = random_expr(r, 3, 3, true);
    const std::string text = e.to_string(kXYZ);
    CHECK(parse_expr(text, kXYZ).approx_equal(e, 1e-12));
  }
  CHECK(Expr().to_string(kXY) == "0");
}

TEST_CASE("parser rejections") {
  CHECK_THROWS_AS(E("sin(w)"), Error);
  CHECK_THROWS_AS(E("tanh(x)"), Error);  // evaluation-only atom
  CHECK_THROWS_AS(E("sin(x + y)"), Error);
  CHECK_THROWS_AS(E("x / y"), Error);  // division needs a constant divisor
  CHECK_THROWS_AS(E("x^(-1)"), Error);
  CHECK(E("x / 2") == E("0.5*x"));
  try {
    E("sin(w)");
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.code() == Errc::unknown_symbol);
  }
}

TEST_CASE("scalar functions: evaluation-only atoms and boundedness analysis") {
  const VarSpace sp{2, {"k"}};
  const ScalarFunc f = parse_scalar("tanh(y) + 0.5*abs(sin(x))", sp);
  const double pt[] = {0.3, -0.7, 2.0};
  CHECK(f.evaluate(pt) ==
        doctest::Approx(std::tanh(-0.7) + 0.5 * std::fabs(std::sin(0.3))).epsilon(1e-14));
  CHECK(f.uses_tanh());
  CHECK_FALSE(f.lower().has_value());
  CHECK(f.structurally_bounded(sp));

  const ScalarFunc g = parse_scalar("x^2 + 1", sp);
  CHECK(g.lower().has_value());
  CHECK_FALSE(g.structurally_bounded(sp));
  CHECK(parse_scalar("k*cos(x)", sp).structurally_bounded(sp));   // parameters are constants
  CHECK_FALSE(parse_scalar("x*cos(x)", sp).structurally_bounded(sp));
  CHECK(parse_scalar("tanh(x^3)", sp).structurally_bounded(sp));  // tanh caps anything
}
