// Tests for the sup-constant extraction, the coefficient policy, the
// quadratic-form budgets (gamma and the admissibility threshold), rate
// certification, and the small-system optimizer.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <vector>

#include "ufgkit/parse.hpp"
#include "ufgkit/rates.hpp"

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
  double uniform(double a, double b) {
    return a + (b - a) * (static_cast<double>(next() >> 11) * 0x1.0p-53);
  }
  int irange(int a, int b) {
    return a + static_cast<int>(next() % static_cast<std::uint64_t>(b - a + 1));
  }
};

MultiIndex MI(std::vector<int> e) { return MultiIndex(std::move(e)); }

// A sup-constant table with every interaction switched off.
SupConstants quiet_table(std::vector<int> orders, int m, int d) {
  SupConstants s;
  s.d = d;
  s.m = m;
  s.dim = 1;
  s.order = std::move(orders);
  s.sq_ext.assign(s.order.size(), false);
  s.J.assign(s.order.size(), 0.0);
  s.H.assign(s.order.size(), 0.0);
  s.I.assign(s.order.size(), 0.0);
  s.diag_c.resize(s.order.size());
  s.diag_l.resize(s.order.size());
  return s;
}

DilationCertificate dilation_with(double lambda0) {
  DilationCertificate d;
  d.status = DilationStatus::ok;
  d.lambda0 = lambda0;
  return d;
}

struct Pipeline {
  VarSpace space;
  BracketHierarchy h;
  UfgCertificate cert;
  DilationCertificate dil;
  SupConstants s;
};

Pipeline grusin_pipeline(double k) {
  Pipeline p;
  p.space = VarSpace{2, {"k"}};
  const VectorField v0{{parse_expr("k*x", p.space), Expr()}};
  const VectorField v1{{Expr(), parse_expr("x", p.space)}};
  p.h = build_hierarchy(p.space, {v0, v1}, 1);
  const double kv[] = {k};
  const SolveOutcome out = solve_certificate(p.h, 1, Ansatz{0}, kv);
  REQUIRE(out.found);
  p.cert = out.cert;
  p.dil = check_dilation(p.h, kv);
  p.s = compute_sup_constants(p.h, p.cert, kv);
  return p;
}

Pipeline heisenberg_pipeline(double k) {
  Pipeline p;
  p.space = VarSpace{3, {"k"}};
  auto F = [&](const char* a, const char* b, const char* c) {
    return VectorField{{parse_expr(a, p.space), parse_expr(b, p.space), parse_expr(c, p.space)}};
  };
  p.h = build_hierarchy(
      p.space, {F("-k*x", "-k*y", "-2*k*z"), F("0", "0", "-y"), F("0", "1", "x")}, 2);
  const double kv[] = {k};
  const SolveOutcome out = solve_certificate(p.h, 2, Ansatz{0}, kv);
  REQUIRE(out.found);
  p.cert = out.cert;
  p.dil = check_dilation(p.h, kv);
  p.s = compute_sup_constants(p.h, p.cert, kv);
  return p;
}

}  // namespace

TEST_CASE("coefficient policy and recursion strictness") {
  SupConstants s = quiet_table({1, 2, 3, 4}, 4, 1);
  s.aggregate_J = 0;
  const GammaCoefficients a = choose_gamma_coefficients(s, 4);
  CHECK(a.by_order == std::vector<double>{1.0, 2.0, 5.0, 26.0});
  CHECK(a.a(1) == 1.0);
  CHECK(a.a(4) == 26.0);

  SupConstants s3 = quiet_table({1, 2}, 2, 1);
  s3.aggregate_J = 3;
  CHECK(choose_gamma_coefficients(s3, 2).by_order == std::vector<double>{4.0, 20.0});
  CHECK(choose_gamma_coefficients(s3, 1).by_order == std::vector<double>{4.0});

  CHECK_THROWS_AS((void)choose_gamma_coefficients(s, 0), Error);

  // Strictness holds by construction for any aggregate count.
  Rng r(7);
  for (int trial = 0; trial < 100; ++trial) {
    SupConstants q = quiet_table({1}, r.irange(1, 5), 1);
    q.aggregate_J = r.irange(0, 5);
    const GammaCoefficients g = choose_gamma_coefficients(q, q.m);
    const double J = static_cast<double>(q.aggregate_J);
    REQUIRE(static_cast<int>(g.by_order.size()) == q.m);
    CHECK(g.a(1) > std::max(0.0, J));
    for (int k = 2; k <= q.m; ++k) CHECK(g.a(k) > J + g.a(k - 1) * g.a(k - 1));
  }
}

TEST_CASE("budget formulas reject invalid coefficient tables") {
  SupConstants s = quiet_table({1, 2}, 2, 1);

  GammaCoefficients bad_size;
  bad_size.by_order = {1.0};
  CHECK_THROWS_AS((void)compute_gamma(bad_size, s), Error);

  GammaCoefficients nonpos;
  nonpos.by_order = {1.0, -2.0};
  CHECK_THROWS_AS((void)compute_gamma(nonpos, s), Error);

  GammaCoefficients slack;  // a_2 <= J + a_1^2 breaks the recursion
  slack.by_order = {1.0, 1.0};
  CHECK_THROWS_AS((void)compute_gamma(slack, s), Error);
  CHECK_THROWS_AS((void)compute_lambda0_threshold(slack, s), Error);

  SupConstants sj = s;
  sj.aggregate_J = 2;
  GammaCoefficients low;  // a_1 <= max(0, J)
  low.by_order = {2.0, 6.0};
  CHECK_THROWS_AS((void)compute_gamma(low, sj), Error);
}

TEST_CASE("budgets of an interaction-free system") {
  const SupConstants s = quiet_table({1, 2}, 2, 1);
  GammaCoefficients a;
  a.by_order = {1.0, 3.0};

  const GammaBreakdown g = compute_gamma(a, s);
  CHECK(g.c == std::vector<double>{2.0, 0.0});
  CHECK(g.gamma == doctest::Approx(2.0).epsilon(1e-14));

  const ThresholdBreakdown t = compute_lambda0_threshold(a, s);
  CHECK(t.l == std::vector<double>{1.0, 0.0});
  CHECK(t.threshold == doctest::Approx(1.0).epsilon(1e-14));

  // Raising a_1 shrinks both budgets proportionally.
  GammaCoefficients a2;
  a2.by_order = {4.0, 17.5};
  CHECK(compute_gamma(a2, s).gamma == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(compute_lambda0_threshold(a2, s).threshold == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("repeated-extension basis elements pay the lower-length square") {
  SupConstants s = quiet_table({1, 2, 3}, 3, 1);
  s.sq_ext[2] = true;  // top element of the shape beta*j*j
  const GammaCoefficients a = choose_gamma_coefficients(s, 3);  // (1, 2, 5)
  REQUIRE(a.by_order == std::vector<double>{1.0, 2.0, 5.0});

  const ThresholdBreakdown t = compute_lambda0_threshold(a, s);
  CHECK(t.l[0] == doctest::Approx(1.0));        // plain first-order cost d
  CHECK(t.l[1] == doctest::Approx(0.0));        // quiet mid layer
  CHECK(t.l[2] == doctest::Approx(1.0));        // a_{m-2}^2 = a_1^2
  CHECK(t.threshold == doctest::Approx(1.0));   // max(1/1, 0, 1/5)

  const GammaBreakdown g = compute_gamma(a, s);
  CHECK(g.c == std::vector<double>{2.0, 2.0, 0.0});
  CHECK(g.gamma == doctest::Approx(2.0));
}

TEST_CASE("single-bracket pipeline certifies twice the spectral floor") {
  for (double k : {1.0, 2.5}) {
    const Pipeline p = grusin_pipeline(k);
    REQUIRE(p.dil.status == DilationStatus::ok);
    CHECK(p.dil.lambda0 == doctest::Approx(k).epsilon(1e-12));

    REQUIRE(p.s.size() == 1);
    CHECK(p.s.order == std::vector<int>{1});
    CHECK(p.s.J == std::vector<double>{0.0});
    CHECK(p.s.H == std::vector<double>{0.0});
    CHECK(p.s.I == std::vector<double>{0.0});
    CHECK(p.s.aggregate_J == 0);

    const GammaCoefficients a = choose_gamma_coefficients(p.s, p.s.m);
    CHECK(a.by_order == std::vector<double>{1.0});
    const RateReport r = certify_rate(p.dil, a, p.s);
    CHECK(r.gamma == 0.0);
    CHECK(r.lambda0_required == 0.0);
    CHECK(r.lambda0_available == doctest::Approx(k).epsilon(1e-12));
    CHECK(r.mu == doctest::Approx(2.0 * k).epsilon(1e-12));
    REQUIRE(r.lambda.has_value());
    CHECK(*r.lambda == doctest::Approx(2.0 * k).epsilon(1e-12));
  }
}

TEST_CASE("three-bracket pipeline: budgets too coarse for a generic rate") {
  const Pipeline p = heisenberg_pipeline(1.0);
  REQUIRE(p.dil.status == DilationStatus::ok);
  CHECK(p.dil.lambda0 == doctest::Approx(1.0));

  REQUIRE(p.s.size() == 3);
  CHECK(p.s.order == std::vector<int>{1, 1, 2});
  CHECK(p.s.J == std::vector<double>{1.0, 1.0, 0.0});
  CHECK(p.s.H == std::vector<double>{0.0, 0.0, 0.0});
  CHECK(p.s.I == std::vector<double>{0.0, 0.0, 0.0});
  CHECK(p.s.aggregate_J == 0);  // only length-2 elements count, theirs is 0
  CHECK(p.s.sq_ext == std::vector<bool>{false, false, false});
  for (const Expr& e : p.s.diag_c) CHECK(e.structurally_zero());
  for (const Expr& e : p.s.diag_l) CHECK(e.structurally_zero());

  const GammaCoefficients a = choose_gamma_coefficients(p.s, p.s.m);
  CHECK(a.by_order == std::vector<double>{1.0, 2.0});
  const RateReport r = certify_rate(p.dil, a, p.s);
  CHECK(r.c == std::vector<double>{4.0, 4.0, 0.0});
  CHECK(r.l == std::vector<double>{2.0, 2.0, 0.0});
  CHECK(r.gamma == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(r.lambda0_required == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(r.mu == doctest::Approx(0.0));
  CHECK_FALSE(r.lambda.has_value());

  // A strong enough contraction clears both budgets: the certified rate
  // then moves one-for-two with the spectral floor.
  const Pipeline fast = heisenberg_pipeline(100.0);
  CHECK(fast.dil.lambda0 == doctest::Approx(100.0));
  const RateReport rf = certify_rate(fast.dil, choose_gamma_coefficients(fast.s, fast.s.m), fast.s);
  CHECK(rf.gamma == doctest::Approx(4.0));
  CHECK(rf.mu == doctest::Approx(198.0));
  REQUIRE(rf.lambda.has_value());
  CHECK(*rf.lambda == doctest::Approx(194.0).epsilon(1e-12));
}

TEST_CASE("certified rate is monotone in the spectral floor") {
  Rng r(11);
  for (int trial = 0; trial < 50; ++trial) {
    SupConstants s = quiet_table({1, 2}, 2, r.irange(1, 3));
    s.J = {r.uniform(0.0, 2.0), r.uniform(0.0, 2.0)};
    s.H = {r.uniform(0.0, 1.0), r.uniform(0.0, 1.0)};
    s.I = {r.uniform(0.0, 1.0), r.uniform(0.0, 1.0)};
    s.aggregate_J = (s.J[1] != 0.0) ? 1 : 0;
    const GammaCoefficients a = choose_gamma_coefficients(s, 2);

    const double lo = r.uniform(0.1, 3.0);
    const double hi = lo + r.uniform(0.1, 2.0);
    const RateReport r1 = certify_rate(dilation_with(lo), a, s);
    const RateReport r2 = certify_rate(dilation_with(hi), a, s);
    CHECK(r1.gamma == r2.gamma);
    CHECK(r1.lambda0_required == r2.lambda0_required);
    CHECK(r2.mu > r1.mu);
    CHECK(r2.mu - r1.mu == doctest::Approx(2.0 * (hi - lo)).epsilon(1e-12));
    if (r1.lambda.has_value()) {
      REQUIRE(r2.lambda.has_value());
      CHECK(*r2.lambda - *r1.lambda == doctest::Approx(2.0 * (hi - lo)).epsilon(1e-12));
    }
    if (r1.lambda.has_value()) CHECK(*r1.lambda == doctest::Approx(r1.mu - r1.gamma));
    CHECK(r1.lambda.has_value() == (r1.mu > r1.gamma));
  }

  DilationCertificate bad;
  bad.status = DilationStatus::non_negative_factor;
  const SupConstants s = quiet_table({1}, 1, 1);
  CHECK_THROWS_AS((void)certify_rate(bad, choose_gamma_coefficients(s, 1), s), Error);
}

TEST_CASE("unbounded coefficients cannot reach the budgets") {
  // V1 = d/dx, V2 = x^2 d/dx: [V1,V2] = 2x V1 with zero residual, so a
  // hand table can smuggle in an unbounded coefficient; the sup pass
  // must reject it.
  const VarSpace space{1, {}};
  const VectorField v0 = VectorField::zero(1);
  const VectorField v1{{Expr::constant(1.0)}};
  const VectorField v2{{parse_expr("x*x", space)}};
  const BracketHierarchy h = build_hierarchy(space, {v0, v1, v2}, 1);

  UfgCertificate cert;
  cert.m = 1;
  cert.rows[MI({1, 2})] = {parse_expr("2*x", space), Expr()};
  cert.rows[MI({2, 1})] = {parse_expr("-2*x", space), Expr()};
  const VerifyReport rep = verify_certificate(h, cert, {});
  CHECK_FALSE(rep.verified);  // flagged as unbounded, residuals all zero
  for (const auto& issue : rep.issues) CHECK(issue.kind == CertIssue::unbounded_phi);

  CHECK_THROWS_AS((void)compute_sup_constants(h, cert, {}), Error);
}

TEST_CASE("optimizer: single bracket reaches the exact rate") {
  for (double k : {1.0, 2.5}) {
    const Pipeline p = grusin_pipeline(k);
    const double kv[] = {k};
    const OptimizeResult o = optimize_small_system(p.h, p.cert, p.dil, kv, 2000);
    REQUIRE(o.report.lambda.has_value());
    CHECK(*o.report.lambda == doctest::Approx(2.0 * k).epsilon(1e-12));
    CHECK(o.report.mu == doctest::Approx(2.0 * k).epsilon(1e-12));
    CHECK(o.report.gamma == doctest::Approx(0.0));
    REQUIRE(o.a.size() == 1);
    CHECK(o.a[0] == doctest::Approx(2.0 / k).epsilon(1e-12));  // stays at the floor
    CHECK(o.evaluations >= 1);
  }

  // Contracting drift with every interaction zero: rate 2c exactly.
  const VarSpace sp{1, {"c"}};
  const BracketHierarchy h = build_hierarchy(
      sp, {VectorField{{parse_expr("-c*x", sp)}}, VectorField{{Expr::constant(1.0)}}}, 1);
  const double cv[] = {0.7};
  const SolveOutcome sc = solve_certificate(h, 1, Ansatz{0}, cv);
  REQUIRE(sc.found);
  const DilationCertificate dil = check_dilation(h, cv);
  REQUIRE(dil.status == DilationStatus::ok);
  CHECK(dil.lambda0 == doctest::Approx(0.7).epsilon(1e-12));
  const OptimizeResult o = optimize_small_system(h, sc.cert, dil, cv, 500);
  REQUIRE(o.report.lambda.has_value());
  CHECK(*o.report.lambda == doctest::Approx(1.4).epsilon(1e-9));
}

TEST_CASE("optimizer: per-term bookkeeping beats the generic budgets") {
  const Pipeline p = heisenberg_pipeline(1.0);
  const double kv[] = {1.0};
  const OptimizeResult o = optimize_small_system(p.h, p.cert, p.dil, kv, 5000);

  REQUIRE(o.report.lambda.has_value());
  CHECK(*o.report.lambda >= 0.99);
  CHECK(*o.report.lambda <= 2.0 + 1e-9);  // cannot beat the spectral gap
  CHECK(o.report.mu == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(*o.report.lambda == doctest::Approx(o.report.mu - o.report.gamma).epsilon(1e-12));

  // Returned weights witness the hand-proof constraints.
  REQUIRE(o.a.size() == 3);
  CHECK(o.a[0] >= 2.0 - 1e-12);  // 2 / mu_alpha with mu_alpha = 1
  CHECK(o.a[1] >= 2.0 - 1e-12);
  CHECK(o.a[2] > o.a[0] * o.a[0]);
  CHECK(o.a[2] > o.a[1] * o.a[1]);
  CHECK(o.evaluations <= 5000);

  // Deterministic: a rerun reproduces the result bit for bit.
  const OptimizeResult o2 = optimize_small_system(p.h, p.cert, p.dil, kv, 5000);
  CHECK(o2.report.lambda == o.report.lambda);
  CHECK(o2.a == o.a);
  CHECK(o2.evaluations == o.evaluations);
}

TEST_CASE("optimizer rejects deep hierarchies and broken dilations") {
  VarSpace space{3, {"k"}};
  auto F = [&](const char* a, const char* b, const char* c) {
    return VectorField{{parse_expr(a, space), parse_expr(b, space), parse_expr(c, space)}};
  };
  const BracketHierarchy h3 = build_hierarchy(
      space, {F("-k*x", "-k*y", "-2*k*z"), F("0", "0", "-y"), F("0", "1", "x")}, 3);
  const double kv[] = {1.0};
  UfgCertificate dummy;
  dummy.m = 3;
  try {
    (void)optimize_small_system(h3, dummy, dilation_with(1.0), kv, 10);
    FAIL("expected an error for m > 2");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unsupported);
    CHECK(std::string(e.what()).find("NotSmallSystem") != std::string::npos);
  }

  const Pipeline p = grusin_pipeline(1.0);
  DilationCertificate bad;
  bad.status = DilationStatus::not_proportional;
  CHECK_THROWS_AS((void)optimize_small_system(p.h, p.cert, bad, kv, 10), Error);
}
