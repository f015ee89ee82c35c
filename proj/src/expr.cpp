#include "ufgkit/expr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace ufg {

namespace {

constexpr double kMergeTol = 1e-12;

int cmp_factors(const std::vector<Factor>& a, const std::vector<Factor>& b) {
  const size_t n = std::min(a.size(), b.size());
  for (size_t i = 0; i < n; ++i) {
    if (a[i].var != b[i].var) return a[i].var < b[i].var ? -1 : 1;
    if (a[i].pow != b[i].pow) return a[i].pow < b[i].pow ? -1 : 1;
    if (a[i].sin_pow != b[i].sin_pow) return a[i].sin_pow < b[i].sin_pow ? -1 : 1;
    if (a[i].cos_pow != b[i].cos_pow) return a[i].cos_pow < b[i].cos_pow ? -1 : 1;
  }
  if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
  return 0;
}

double ipow(double x, int n) {
  double r = 1.0;
  while (n > 0) {
    if (n & 1) r *= x;
    x *= x;
    n >>= 1;
  }
  return r;
}

// Multiplies two factor lists (sorted by var) into one.
std::vector<Factor> merge_factors(const std::vector<Factor>& a, const std::vector<Factor>& b) {
  std::vector<Factor> out;
  out.reserve(a.size() + b.size());
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].var < b[j].var) {
      out.push_back(a[i++]);
    } else if (a[i].var > b[j].var) {
      out.push_back(b[j++]);
    } else {
      Factor f = a[i];
      f.pow += b[j].pow;
      f.sin_pow += b[j].sin_pow;
      f.cos_pow += b[j].cos_pow;
      out.push_back(f);
      ++i;
      ++j;
    }
  }
  for (; i < a.size(); ++i) out.push_back(a[i]);
  for (; j < b.size(); ++j) out.push_back(b[j]);
  return out;
}

void drop_trivial(std::vector<Factor>& fs) {
  std::erase_if(fs, [](const Factor& f) { return f.pow == 0 && f.sin_pow == 0 && f.cos_pow == 0; });
}

std::string format_coeff(double c) {
  double r = std::rint(c);
  if (c == r && std::fabs(c) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0f", c);
    return buf;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", c);
  return buf;
}

}  // namespace

std::string VarSpace::var_name(int v) const {
  if (v < 0 || v >= var_count()) throw Error(Errc::invalid_argument, "variable id out of range");
  if (v >= dim) return params[static_cast<size_t>(v - dim)];
  if (dim <= 3) {
    static const char* xyz[3] = {"x", "y", "z"};
    return xyz[v];
  }
  return "x" + std::to_string(v + 1);
}

int VarSpace::find(const std::string& name) const {
  if (dim <= 3) {
    static const char* xyz[3] = {"x", "y", "z"};
    for (int i = 0; i < dim; ++i)
      if (name == xyz[i]) return i;
  }
  if (name.size() >= 2 && name[0] == 'x') {
    bool digits = true;
    for (size_t i = 1; i < name.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(name[i]))) digits = false;
    if (digits) {
      int idx = std::atoi(name.c_str() + 1);
      if (idx >= 1 && idx <= dim) return idx - 1;
    }
  }
  for (size_t i = 0; i < params.size(); ++i)
    if (params[i] == name) return dim + static_cast<int>(i);
  return -1;
}

Expr Expr::constant(double c) {
  Expr e;
  if (std::fabs(c) > kMergeTol) e.terms_.push_back({c, {}});
  return e;
}

Expr Expr::variable(int v) {
  if (v < 0) throw Error(Errc::invalid_argument, "negative variable id");
  Expr e;
  e.terms_.push_back({1.0, {Factor{v, 1, 0, 0}}});
  return e;
}

Expr Expr::sin_of(int v) {
  if (v < 0) throw Error(Errc::invalid_argument, "negative variable id");
  Expr e;
  e.terms_.push_back({1.0, {Factor{v, 0, 1, 0}}});
  return e;
}

Expr Expr::cos_of(int v) {
  if (v < 0) throw Error(Errc::invalid_argument, "negative variable id");
  Expr e;
  e.terms_.push_back({1.0, {Factor{v, 0, 0, 1}}});
  return e;
}

Expr Expr::from_terms(std::vector<Term> terms) {
  Expr e;
  for (auto& t : terms) {
    drop_trivial(t.factors);
    std::sort(t.factors.begin(), t.factors.end(),
              [](const Factor& a, const Factor& b) { return a.var < b.var; });
  }
  e.terms_ = std::move(terms);
  e.canonicalize();
  return e;
}

void Expr::canonicalize() {
  std::sort(terms_.begin(), terms_.end(),
            [](const Term& a, const Term& b) { return cmp_factors(a.factors, b.factors) < 0; });
  std::vector<Term> out;
  out.reserve(terms_.size());
  for (auto& t : terms_) {
    if (!out.empty() && cmp_factors(out.back().factors, t.factors) == 0) {
      out.back().coeff += t.coeff;
    } else {
      out.push_back(std::move(t));
    }
  }
  std::erase_if(out, [](const Term& t) { return std::fabs(t.coeff) <= kMergeTol; });
  terms_ = std::move(out);
}

int Expr::max_var() const {
  int m = -1;
  for (const auto& t : terms_)
    for (const auto& f : t.factors) m = std::max(m, f.var);
  return m;
}

Expr Expr::operator-() const { return *this * -1.0; }

Expr Expr::operator+(const Expr& o) const {
  Expr r = *this;
  r += o;
  return r;
}

Expr Expr::operator-(const Expr& o) const {
  Expr r = *this;
  r -= o;
  return r;
}

Expr& Expr::operator+=(const Expr& o) {
  terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
  canonicalize();
  return *this;
}

Expr& Expr::operator-=(const Expr& o) {
  terms_.reserve(terms_.size() + o.terms_.size());
  for (const auto& t : o.terms_) terms_.push_back({-t.coeff, t.factors});
  canonicalize();
  return *this;
}

Expr Expr::operator*(const Expr& o) const {
  Expr r;
  r.terms_.reserve(terms_.size() * o.terms_.size());
  for (const auto& a : terms_)
    for (const auto& b : o.terms_)
      r.terms_.push_back({a.coeff * b.coeff, merge_factors(a.factors, b.factors)});
  r.canonicalize();
  return r;
}

Expr Expr::operator*(double s) const {
  Expr r;
  r.terms_.reserve(terms_.size());
  for (const auto& t : terms_) r.terms_.push_back({t.coeff * s, t.factors});
  r.canonicalize();
  return r;
}

Expr& Expr::operator*=(const Expr& o) {
  *this = *this * o;
  return *this;
}

Expr Expr::pow_int(int e) const {
  if (e < 0) throw Error(Errc::unsupported, "negative exponent");
  if (e > 32) throw Error(Errc::unsupported, "exponent too large");
  Expr r = Expr::constant(1.0);
  for (int i = 0; i < e; ++i) r *= *this;
  return r;
}

bool Expr::operator==(const Expr& o) const {
  if (terms_.size() != o.terms_.size()) return false;
  for (size_t i = 0; i < terms_.size(); ++i) {
    if (terms_[i].coeff != o.terms_[i].coeff) return false;
    if (!(terms_[i].factors == o.terms_[i].factors)) return false;
  }
  return true;
}

bool Expr::approx_equal(const Expr& o, double tol) const {
  Expr d = *this - o;
  for (const auto& t : d.terms_)
    if (std::fabs(t.coeff) > tol) return false;
  return true;
}

Expr Expr::derivative(int v) const {
  std::vector<Term> out;
  for (const auto& t : terms_) {
    for (size_t i = 0; i < t.factors.size(); ++i) {
      const Factor& f = t.factors[i];
      if (f.var != v) continue;
      if (f.pow > 0) {
        Term nt = t;
        nt.coeff *= f.pow;
        nt.factors[i].pow -= 1;
        out.push_back(std::move(nt));
      }
      if (f.sin_pow > 0) {
        Term nt = t;
        nt.coeff *= f.sin_pow;
        nt.factors[i].sin_pow -= 1;
        nt.factors[i].cos_pow += 1;
        out.push_back(std::move(nt));
      }
      if (f.cos_pow > 0) {
        Term nt = t;
        nt.coeff *= -f.cos_pow;
        nt.factors[i].cos_pow -= 1;
        nt.factors[i].sin_pow += 1;
        out.push_back(std::move(nt));
      }
    }
  }
  return Expr::from_terms(std::move(out));
}

double Expr::evaluate(std::span<const double> point) const {
  double sum = 0.0;
  for (const auto& t : terms_) {
    double v = t.coeff;
    for (const auto& f : t.factors) {
      if (f.var >= static_cast<int>(point.size()))
        throw Error(Errc::dimension_mismatch, "evaluation point too short");
      const double x = point[static_cast<size_t>(f.var)];
      if (f.pow > 0) v *= ipow(x, f.pow);
      if (f.sin_pow > 0) v *= ipow(std::sin(x), f.sin_pow);
      if (f.cos_pow > 0) v *= ipow(std::cos(x), f.cos_pow);
    }
    sum += v;
  }
  return sum;
}

Expr Expr::bind_params(int dim, std::span<const double> values) const {
  std::vector<Term> out;
  out.reserve(terms_.size());
  for (const auto& t : terms_) {
    Term nt;
    nt.coeff = t.coeff;
    for (const auto& f : t.factors) {
      if (f.var >= dim) {
        const size_t pi = static_cast<size_t>(f.var - dim);
        if (pi >= values.size())
          throw Error(Errc::dimension_mismatch, "missing parameter value");
        if (f.sin_pow > 0 || f.cos_pow > 0)
          throw Error(Errc::unsupported, "trig factor on a parameter");
        nt.coeff *= ipow(values[pi], f.pow);
      } else {
        nt.factors.push_back(f);
      }
    }
    out.push_back(std::move(nt));
  }
  return Expr::from_terms(std::move(out));
}

Expr Expr::rewritten() const {
  // cos^2 -> 1 - sin^2 until every cos-power is 0 or 1.
  std::vector<Term> work(terms_.begin(), terms_.end());
  std::vector<Term> done;
  while (!work.empty()) {
    Term t = std::move(work.back());
    work.pop_back();
    bool reduced = false;
    for (size_t i = 0; i < t.factors.size(); ++i) {
      if (t.factors[i].cos_pow >= 2) {
        Term a = t;
        a.factors[i].cos_pow -= 2;
        Term b = a;
        b.coeff = -b.coeff;
        b.factors[i].sin_pow += 2;
        work.push_back(std::move(a));
        work.push_back(std::move(b));
        reduced = true;
        break;
      }
    }
    if (!reduced) done.push_back(std::move(t));
  }
  return Expr::from_terms(std::move(done));
}

std::string Expr::to_string(const VarSpace& space) const {
  if (terms_.empty()) return "0";
  std::string out;
  bool first = true;
  for (const auto& t : terms_) {
    const double c = t.coeff;
    if (first) {
      if (c < 0) out += "-";
    } else {
      out += c < 0 ? " - " : " + ";
    }
    first = false;
    const double ac = std::fabs(c);
    std::string atoms;
    for (const auto& f : t.factors) {
      const std::string n = space.var_name(f.var);
      auto piece = [&](const std::string& base, int p) {
        if (p == 0) return;
        if (!atoms.empty()) atoms += "*";
        atoms += base;
        if (p > 1) atoms += "^" + std::to_string(p);
      };
      piece(n, f.pow);
      piece("sin(" + n + ")", f.sin_pow);
      piece("cos(" + n + ")", f.cos_pow);
    }
    if (atoms.empty()) {
      out += format_coeff(ac);
    } else if (ac == 1.0) {
      out += atoms;
    } else {
      out += format_coeff(ac) + "*" + atoms;
    }
  }
  return out;
}

ZeroCheck is_zero_checked(const Expr& e, const VarSpace& space) {
  ZeroCheck res;
  res.zero = e.rewritten().structurally_zero();
  if (res.zero) return res;
  // Deterministic sample cross-check (splitmix64-seeded LCG).
  uint64_t s = 0x9e3779b97f4a7c15ull;
  auto next = [&s]() {
    s += 0x9e3779b97f4a7c15ull;
    uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  const int nv = std::max(e.max_var() + 1, space.var_count());
  std::vector<double> pt(static_cast<size_t>(nv), 0.0);
  bool all_small = true;
  for (int it = 0; it < 32 && all_small; ++it) {
    for (int v = 0; v < nv; ++v) {
      const double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
      pt[static_cast<size_t>(v)] =
          (v >= space.dim && v < space.var_count()) ? 0.25 + 1.75 * u : -3.0 + 6.0 * u;
    }
    if (std::fabs(e.evaluate(pt)) >= 1e-12) all_small = false;
  }
  if (all_small) res.suspicious = true;
  return res;
}

SupNorm sup_norm(const Expr& e, int dim) {
  const Expr r = e.rewritten();
  if (r.structurally_zero()) return {0.0, true};
  double sum = 0.0;
  bool constant_only = true;
  for (const auto& t : r.terms()) {
    for (const auto& f : t.factors) {
      if (f.var >= dim) throw Error(Errc::invalid_argument, "sup_norm needs parameters bound");
      if (f.pow > 0) return {std::numeric_limits<double>::infinity(), true};
    }
    if (!t.factors.empty()) constant_only = false;
    sum += std::fabs(t.coeff);
  }
  return {sum, constant_only};
}

SupNorm sup_norm_box(const Expr& e, std::span<const std::pair<double, double>> box,
                     int resolution) {
  if (resolution < 2) throw Error(Errc::invalid_argument, "resolution must be >= 2");
  const int nv = static_cast<int>(box.size());
  if (e.max_var() >= nv) throw Error(Errc::dimension_mismatch, "box dimension too small");
  std::vector<double> pt(box.size(), 0.0);
  double best = 0.0;
  std::vector<int> idx(box.size(), 0);
  while (true) {
    for (size_t v = 0; v < box.size(); ++v) {
      const auto [lo, hi] = box[v];
      pt[v] = lo + (hi - lo) * idx[v] / (resolution - 1);
    }
    best = std::max(best, std::fabs(e.evaluate(pt)));
    size_t carry = 0;
    while (carry < idx.size() && ++idx[carry] == resolution) idx[carry++] = 0;
    if (carry == idx.size()) break;
  }
  return {best * 1.1, false};
}

double signed_sup_bound(const Expr& e, int dim) {
  const Expr r = e.rewritten();
  double bound = 0.0;
  for (const auto& t : r.terms()) {
    bool has_poly = false;
    for (const auto& f : t.factors) {
      if (f.var >= dim) throw Error(Errc::invalid_argument, "signed_sup_bound needs parameters bound");
      if (f.pow > 0) has_poly = true;
    }
    if (has_poly) return std::numeric_limits<double>::infinity();
    bound += t.factors.empty() ? t.coeff : std::fabs(t.coeff);
  }
  return bound;
}

bool is_bounded(const Expr& e, int dim) {
  const Expr r = e.rewritten();
  for (const auto& t : r.terms())
    for (const auto& f : t.factors)
      if (f.var < dim && f.pow > 0) return false;
  return true;
}

Expr differentiate(const VarSpace& space, const Expr& e, int v) {
  if (v < 0 || v >= space.dim)
    throw Error(Errc::invalid_argument, "differentiation variable is not a coordinate");
  return e.derivative(v);
}

}  // namespace ufg
