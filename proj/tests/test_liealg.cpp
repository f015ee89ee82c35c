// Tests for multi-index algebra, Lie brackets, the bracket hierarchy with
// its deduplicated basis, and the Lambda maps.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "ufgkit/liealg.hpp"
#include "ufgkit/parse.hpp"
#include "ufgkit/ufgcheck.hpp"

using namespace ufg;

namespace {

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
  int irange(int a, int b) {
    return a + static_cast<int>(next() % static_cast<std::uint64_t>(b - a + 1));
  }
};

// Random polynomial expression of total degree <= deg over nvars variables.
Expr random_poly(Rng& r, int nvars, int deg) {
  Expr e;
  const int nterms = r.irange(1, 3);
  for (int t = 0; t < nterms; ++t) {
    Expr term = Expr::constant(r.irange(-2, 2));
    int budget = deg;
    for (int v = 0; v < nvars && budget > 0; ++v) {
      const int p = r.irange(0, budget);
      for (int i = 0; i < p; ++i) term *= Expr::variable(v);
      budget -= p;
    }
    e += term;
  }
  return e;
}

VectorField random_field(Rng& r, int dim, int deg) {
  VectorField v;
  for (int i = 0; i < dim; ++i) v.comp.push_back(random_poly(r, dim, deg));
  return v;
}

MultiIndex MI(std::vector<int> e) { return MultiIndex(std::move(e)); }

// Heisenberg-type fields: V0 = -k(x dx + y dy + 2z dz), V1 = -y dz,
// V2 = dy + x dz.
struct Heis {
  VarSpace space{3, {"k"}};
  std::vector<VectorField> fields;
  Heis() {
    auto F = [&](const char* a, const char* b, const char* c) {
      return VectorField{{parse_expr(a, space), parse_expr(b, space), parse_expr(c, space)}};
    };
    fields = {F("-k*x", "-k*y", "-2*k*z"), F("0", "0", "-y"), F("0", "1", "x")};
  }
};

// Grusin-type fields: V0 = k x dx, V1 = x dy.
struct Grusin {
  VarSpace space{2, {"k"}};
  std::vector<VectorField> fields;
  Grusin() {
    auto F = [&](const char* a, const char* b) {
      return VectorField{{parse_expr(a, space), parse_expr(b, space)}};
    };
    fields = {F("k*x", "0"), F("0", "x")};
  }
};

}  // namespace

TEST_CASE("multi-index lengths weight the drift index twice") {
  CHECK(MI({1}).order() == 1);
  CHECK(MI({1, 2}).order() == 2);
  CHECK(MI({0, 1}).order() == 3);
  CHECK(MI({1, 0}).order() == 3);
  CHECK(MI({0, 0, 1}).order() == 5);
  CHECK(MI({1, 2, 1}).order() == 3);
}

TEST_CASE("multi-index validity") {
  CHECK_THROWS_AS(MI({}), Error);
  CHECK_THROWS_AS(MI({0}), Error);  // the singleton drift word is excluded
  CHECK_THROWS_AS(MI({-1}), Error);
  CHECK_NOTHROW(MI({0, 0}));
  CHECK(MI({1}).single(2) == MI({2}));
}

TEST_CASE("concatenation is additive in length and non-commutative") {
  CHECK(MI({1}).concat(MI({2})) == MI({1, 2}));
  CHECK(MI({1, 2}).concat(MI({0, 0})) == MI({1, 2, 0, 0}));
  const MultiIndex a = MI({1, 2}).concat(MI({0, 0}));
  CHECK(a.order() == 6);
  CHECK(MI({2}).concat(MI({1})) != MI({1}).concat(MI({2})));
  CHECK(MI({1}).append(0) == MI({1, 0}));

  // Exhaustive additivity over all pairs up to length 4 with d = 3.
  const std::vector<MultiIndex> all = enumerate_multiindices(3, 4);
  for (const auto& x : all)
    for (const auto& y : all) CHECK(x.concat(y).order() == x.order() + y.order());
}

TEST_CASE("multi-index text form round-trips") {
  CHECK(MI({1, 2, 0}).str() == "(1,2,0)");
  CHECK(MultiIndex::parse("(1,2,0)") == MI({1, 2, 0}));
  CHECK(MultiIndex::parse("1, 2, 0") == MI({1, 2, 0}));
  CHECK_THROWS_AS(MultiIndex::parse("()"), Error);
  CHECK_THROWS_AS(MultiIndex::parse("(1,x)"), Error);
  for (const auto& a : enumerate_multiindices(2, 4)) CHECK(MultiIndex::parse(a.str()) == a);
}

TEST_CASE("enumeration is complete, ordered by length then lexicographic") {
  const std::vector<MultiIndex> a2 = enumerate_multiindices(2, 2);
  const std::vector<MultiIndex> expect = {MI({1}),    MI({2}),    MI({1, 1}),
                                          MI({1, 2}), MI({2, 1}), MI({2, 2})};
  CHECK(a2 == expect);

  const std::vector<MultiIndex> b = enumerate_multiindices(1, 3);
  const std::vector<MultiIndex> bexpect = {MI({1}), MI({1, 1}), MI({0, 1}), MI({1, 0}),
                                           MI({1, 1, 1})};
  CHECK(b == bexpect);

  // No duplicates, all lengths within range, singleton (0) absent.
  const std::vector<MultiIndex> big = enumerate_multiindices(3, 5);
  std::set<MultiIndex> seen(big.begin(), big.end());
  CHECK(seen.size() == big.size());
  for (const auto& m : big) CHECK(m.order() <= 5);
}

TEST_CASE("bracket golden identities") {
  Heis h;
  const VectorField& V0 = h.fields[0];
  const VectorField& V1 = h.fields[1];
  const VectorField& V2 = h.fields[2];
  const Expr k = parse_expr("k", h.space);
  const Expr one = Expr::constant(1.0);

  const VectorField V12 = bracket(V1, V2);
  CHECK(V12 == VectorField{{Expr(), Expr(), one}});        // d/dz
  CHECK(bracket(V1, V0) == Expr::constant(-1.0) * k * V1);  // -k V1
  CHECK(bracket(V2, V0) == Expr::constant(-1.0) * k * V2);  // -k V2
  CHECK(bracket(V12, V0) == Expr::constant(-2.0) * k * V12);
  CHECK(bracket(V12, V1).is_zero());
  CHECK(bracket(V12, V2).is_zero());
  CHECK(bracket(V1, V1).is_zero());

  Grusin g;
  const Expr gk = parse_expr("k", g.space);
  CHECK(bracket(g.fields[1], g.fields[0]) == Expr::constant(-1.0) * gk * g.fields[1]);

  // Sine fields: V0 = sin(x) dx, V1 = sin(x) dy have [V1,V0] = -cos(x) V1.
  const VarSpace sp2{2, {}};
  const VectorField S0{{parse_expr("sin(x)", sp2), Expr()}};
  const VectorField S1{{Expr(), parse_expr("sin(x)", sp2)}};
  CHECK(bracket(S1, S0) == Expr::constant(-1.0) * Expr::cos_of(0) * S1);

  CHECK_THROWS_AS(bracket(V1, S0), Error);  // dimension mismatch
}

TEST_CASE("bracket antisymmetry and Jacobi on random polynomial fields") {
  Rng r(101);
  for (int i = 0; i < 200; ++i) {
    const int dim = r.irange(2, 4);
    const VectorField u = random_field(r, dim, 3);
    const VectorField v = random_field(r, dim, 3);
    CHECK((bracket(u, v) + bracket(v, u)).is_zero());
    CHECK(bracket(u, u).is_zero());
  }
  for (int i = 0; i < 200; ++i) {
    const int dim = r.irange(2, 3);
    const VectorField u = random_field(r, dim, 2);
    const VectorField v = random_field(r, dim, 2);
    const VectorField w = random_field(r, dim, 2);
    const VectorField jac =
        bracket(u, bracket(v, w)) + bracket(v, bracket(w, u)) + bracket(w, bracket(u, v));
    CHECK(jac.is_zero());
  }
}

TEST_CASE("bracket agrees with the operator commutator") {
  Rng r(103);
  for (int i = 0; i < 50; ++i) {
    const int dim = r.irange(2, 3);
    const VectorField v = random_field(r, dim, 2);
    const VectorField w = random_field(r, dim, 2);
    const Expr f = random_poly(r, dim, 3);
    const Expr commutator = v.apply(w.apply(f)) - w.apply(v.apply(f));
    CHECK(commutator == bracket(v, w).apply(f));
  }
}

TEST_CASE("Leibniz identity for operator products") {
  // [X, YZ] = [X,Y]Z + Y[X,Z] as operators (YZ means compose Y after Z).
  Rng r(107);
  for (int i = 0; i < 50; ++i) {
    const int dim = 2;
    const VectorField x = random_field(r, dim, 2);
    const VectorField y = random_field(r, dim, 2);
    const VectorField z = random_field(r, dim, 2);
    const Expr f = random_poly(r, dim, 2);
    const Expr lhs = x.apply(y.apply(z.apply(f))) - y.apply(z.apply(x.apply(f)));
    const Expr rhs = bracket(x, y).apply(z.apply(f)) + y.apply(bracket(x, z).apply(f));
    CHECK(lhs == rhs);
  }
}

TEST_CASE("hierarchy: basis deduplication and entry table") {
  Heis heis;
  const BracketHierarchy h = build_hierarchy(heis.space, heis.fields, 2);
  CHECK(h.d == 2);
  CHECK(h.m == 2);

  // Basis representatives: (1), (2), (1,2); the reversed word and the
  // squares collapse or vanish.
  REQUIRE(h.basis.size() == 3);
  CHECK(h.basis[0] == MI({1}));
  CHECK(h.basis[1] == MI({2}));
  CHECK(h.basis[2] == MI({1, 2}));

  // (2,1) expands to minus the (1,2) representative.
  const auto& e21 = h.expand.at(MI({2, 1}));
  CHECK(e21.basis == 2);
  CHECK(e21.sign == -1.0);
  CHECK(h.expand.at(MI({1, 1})).basis == -1);  // zero bracket
  CHECK(h.expand.at(MI({2, 2})).basis == -1);

  // Entry table holds the raw iterated brackets, extended past order m.
  const Expr k = parse_expr("k", heis.space);
  CHECK(h.field(MI({1, 0})) == Expr::constant(-1.0) * k * heis.fields[1]);
  CHECK(h.field(MI({2, 0})) == Expr::constant(-1.0) * k * heis.fields[2]);
  CHECK(h.field(MI({1, 2, 0})) == Expr::constant(-2.0) * k * bracket(heis.fields[1], heis.fields[2]));
  CHECK(h.field(MI({1, 2, 1})).is_zero());
  CHECK(h.in_range(MI({1, 2})));
  CHECK_FALSE(h.in_range(MI({1, 0})));
  CHECK(h.order_of_basis(2) == 2);
  CHECK_THROWS_AS(h.field(MI({1, 1, 1, 1, 1})), Error);  // beyond m+2

  // Sign-normalized representatives have a positive leading coefficient.
  for (const auto& bf : h.basis_fields) {
    double lead = 0.0;
    for (const auto& c : bf.comp) {
      if (c.structurally_zero()) continue;
      lead = c.terms()[0].coeff;
      break;
    }
    CHECK(lead > 0.0);
  }
}

TEST_CASE("hierarchy: single-field system") {
  const VarSpace sp{1, {}};
  const VectorField v0 = VectorField::zero(1);
  const VectorField v1{{Expr::constant(1.0)}};
  const BracketHierarchy h = build_hierarchy(sp, {v0, v1}, 1);
  REQUIRE(h.basis.size() == 1);
  CHECK(h.basis[0] == MI({1}));
  CHECK(h.basis_fields[0] == v1);
}

TEST_CASE("hierarchy validates input") {
  Heis heis;
  CHECK_THROWS_AS(build_hierarchy(heis.space, heis.fields, 0), Error);
  CHECK_THROWS_AS(build_hierarchy(heis.space, {heis.fields[0]}, 1), Error);
  const VarSpace sp2{2, {}};
  CHECK_THROWS_AS(build_hierarchy(sp2, heis.fields, 1), Error);  // space mismatch
}

TEST_CASE("Lambda maps: in-range via the expansion, overflow via the certificate") {
  Heis heis;
  const BracketHierarchy h = build_hierarchy(heis.space, heis.fields, 2);
  const double kval[] = {1.0};
  const SolveOutcome solved = solve_certificate(h, 2, Ansatz{0}, kval);
  REQUIRE(solved.found);

  // First noise direction applied to each basis element: (0, -V12, 0).
  const LinComb l1 = apply_lambda_j(h, solved.cert, 1, MI({1}));
  CHECK(l1.empty_or_zero());  // [V1,V1] = 0
  const LinComb l2 = apply_lambda_j(h, solved.cert, 1, MI({2}));
  REQUIRE(l2.coeff.count(2) == 1);
  CHECK(l2.coeff.at(2) == Expr::constant(-1.0));  // V_(2,1) = -V12
  const LinComb l3 = apply_lambda_j(h, solved.cert, 1, MI({1, 2}));
  CHECK(l3.empty_or_zero());  // overflow row of a vanishing bracket

  // Drift direction on the top bracket: -2k times itself.
  const LinComb l0 = apply_lambda_j(h, solved.cert, 0, MI({1, 2}));
  REQUIRE(l0.coeff.count(2) == 1);
  const double pt[] = {0.0, 0.0, 0.0, 1.0};  // x, y, z, k
  CHECK(l0.coeff.at(2).evaluate(pt) == doctest::Approx(-2.0).epsilon(1e-12));

  // Zero prefix gives a zero combination.
  const LinComb lz = apply_lambda_j(h, solved.cert, 0, MI({1, 1}));
  CHECK(lz.empty_or_zero());

  CHECK_THROWS_AS(apply_lambda_j(h, solved.cert, 5, MI({1})), Error);
  CHECK_THROWS_AS(apply_lambda_j(h, solved.cert, 0, MI({1, 2, 1})), Error);  // outside A_m
}
