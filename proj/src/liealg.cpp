#include "ufgkit/liealg.hpp"

#include <algorithm>

#include "ufgkit/ufgcheck.hpp"

namespace ufg {

MultiIndex::MultiIndex(std::vector<int> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw Error(Errc::invalid_argument, "empty multi-index");
  for (int e : entries_)
    if (e < 0) throw Error(Errc::invalid_argument, "negative multi-index entry");
  if (entries_.size() == 1 && entries_[0] == 0)
    throw Error(Errc::invalid_argument, "the singleton (0) is not a valid multi-index");
}

int MultiIndex::order() const {
  int zeros = 0;
  for (int e : entries_) zeros += (e == 0);
  return static_cast<int>(entries_.size()) + zeros;
}

MultiIndex MultiIndex::concat(const MultiIndex& o) const {
  std::vector<int> e = entries_;
  e.insert(e.end(), o.entries_.begin(), o.entries_.end());
  return MultiIndex(std::move(e));
}

MultiIndex MultiIndex::append(int i) const {
  std::vector<int> e = entries_;
  e.push_back(i);
  return MultiIndex(std::move(e));
}

std::string MultiIndex::str() const {
  std::string s = "(";
  for (size_t i = 0; i < entries_.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(entries_[i]);
  }
  return s + ")";
}

MultiIndex MultiIndex::parse(const std::string& text) {
  std::string body = text;
  if (!body.empty() && body.front() == '(' && body.back() == ')')
    body = body.substr(1, body.size() - 2);
  std::vector<int> entries;
  std::string cur;
  auto flush = [&]() {
    if (cur.empty()) throw Error(Errc::parse_error, "bad multi-index '" + text + "'");
    entries.push_back(std::atoi(cur.c_str()));
    cur.clear();
  };
  for (char c : body) {
    if (c == ',') {
      flush();
    } else if (c >= '0' && c <= '9') {
      cur += c;
    } else if (c != ' ') {
      throw Error(Errc::parse_error, "bad multi-index '" + text + "'");
    }
  }
  flush();
  return MultiIndex(std::move(entries));
}

namespace {

void extend(std::vector<int>& prefix, int weight, int d, int target,
            std::vector<MultiIndex>& out) {
  if (weight == target) {
    if (!(prefix.size() == 1 && prefix[0] == 0)) out.push_back(MultiIndex(prefix));
    return;
  }
  for (int c = 0; c <= d; ++c) {
    const int w = weight + (c == 0 ? 2 : 1);
    if (w > target) continue;
    prefix.push_back(c);
    extend(prefix, w, d, target, out);
    prefix.pop_back();
  }
}

}  // namespace

std::vector<MultiIndex> enumerate_multiindices(int d, int m) {
  if (d < 1 || m < 1) throw Error(Errc::invalid_argument, "need d >= 1 and m >= 1");
  std::vector<MultiIndex> out;
  std::vector<int> prefix;
  for (int len = 1; len <= m; ++len) extend(prefix, 0, d, len, out);
  return out;
}

bool VectorField::is_zero() const {
  for (const auto& c : comp)
    if (!c.structurally_zero()) return false;
  return true;
}

VectorField VectorField::zero(int dim) {
  VectorField v;
  v.comp.assign(static_cast<size_t>(dim), Expr());
  return v;
}

Expr VectorField::apply(const Expr& f) const {
  Expr out;
  for (int j = 0; j < dim(); ++j) out += comp[static_cast<size_t>(j)] * f.derivative(j);
  return out;
}

VectorField operator+(const VectorField& a, const VectorField& b) {
  if (a.dim() != b.dim()) throw Error(Errc::dimension_mismatch, "field dimension mismatch");
  VectorField r = a;
  for (int i = 0; i < r.dim(); ++i) r.comp[static_cast<size_t>(i)] += b.comp[static_cast<size_t>(i)];
  return r;
}

VectorField operator-(const VectorField& a, const VectorField& b) {
  if (a.dim() != b.dim()) throw Error(Errc::dimension_mismatch, "field dimension mismatch");
  VectorField r = a;
  for (int i = 0; i < r.dim(); ++i) r.comp[static_cast<size_t>(i)] -= b.comp[static_cast<size_t>(i)];
  return r;
}

VectorField operator*(const Expr& s, const VectorField& v) {
  VectorField r = v;
  for (auto& c : r.comp) c = s * c;
  return r;
}

VectorField operator*(double s, const VectorField& v) {
  VectorField r = v;
  for (auto& c : r.comp) c = c * s;
  return r;
}

VectorField bracket(const VectorField& v, const VectorField& w) {
  if (v.dim() != w.dim()) throw Error(Errc::dimension_mismatch, "bracket dimension mismatch");
  const int n = v.dim();
  VectorField r = VectorField::zero(n);
  for (int i = 0; i < n; ++i) {
    Expr acc;
    for (int j = 0; j < n; ++j) {
      acc += v.comp[static_cast<size_t>(j)] * w.comp[static_cast<size_t>(i)].derivative(j);
      acc -= w.comp[static_cast<size_t>(j)] * v.comp[static_cast<size_t>(i)].derivative(j);
    }
    r.comp[static_cast<size_t>(i)] = acc;
  }
  return r;
}

const VectorField& BracketHierarchy::field(const MultiIndex& a) const {
  auto it = entries.find(a);
  if (it == entries.end())
    throw Error(Errc::invalid_argument, "multi-index " + a.str() + " not materialized");
  return it->second;
}

namespace {

// Sign normalization key: first nonzero coefficient (component-major,
// canonical term order) made positive.
std::pair<double, VectorField> normalize_sign(const VectorField& v) {
  for (const auto& c : v.comp) {
    if (c.structurally_zero()) continue;
    if (c.terms()[0].coeff < 0) return {-1.0, -1.0 * v};
    return {1.0, v};
  }
  return {1.0, v};
}

}  // namespace

BracketHierarchy build_hierarchy(const VarSpace& space, const std::vector<VectorField>& fields,
                                 int m) {
  if (m < 1) throw Error(Errc::invalid_argument, "order m must be >= 1");
  if (fields.size() < 2) throw Error(Errc::invalid_argument, "need V_0 and at least one V_i");
  const int dim = fields[0].dim();
  for (const auto& f : fields)
    if (f.dim() != dim) throw Error(Errc::dimension_mismatch, "field dimension mismatch");
  if (dim != space.dim) throw Error(Errc::dimension_mismatch, "field/space dimension mismatch");

  BracketHierarchy h;
  h.space = space;
  h.d = static_cast<int>(fields.size()) - 1;
  h.m = m;
  h.base = fields;
  h.indices = enumerate_multiindices(h.d, m + 2);

  for (const auto& a : h.indices) {
    if (a.size() == 1) {
      h.entries.emplace(a, fields[static_cast<size_t>(a.entries()[0])]);
    } else {
      // Prefix (0) alone is not a valid multi-index, but as a parent it
      // simply denotes the drift field.
      const std::vector<int> p(a.entries().begin(), a.entries().end() - 1);
      const VectorField& parent =
          p.size() == 1 ? fields[static_cast<size_t>(p[0])] : h.entries.at(MultiIndex(p));
      h.entries.emplace(a, bracket(parent, fields[static_cast<size_t>(a.back())]));
    }
  }

  // Canonical rewrite before dedup so trig identities collapse.
  std::vector<std::pair<MultiIndex, VectorField>> canon;
  for (const auto& a : h.indices) {
    if (a.order() > m) continue;
    VectorField f = h.entries.at(a);
    for (auto& c : f.comp) c = c.rewritten();
    canon.emplace_back(a, std::move(f));
  }
  for (const auto& [a, f] : canon) {
    if (f.is_zero()) {
      h.expand[a] = {-1, 0.0};
      continue;
    }
    auto [sign, norm] = normalize_sign(f);
    int found = -1;
    for (size_t b = 0; b < h.basis_fields.size(); ++b) {
      if (h.basis_fields[b] == norm) {
        found = static_cast<int>(b);
        break;
      }
    }
    if (found < 0) {
      found = static_cast<int>(h.basis_fields.size());
      h.basis_fields.push_back(norm);
      h.basis.push_back(a);
    }
    h.expand[a] = {found, sign};
  }
  return h;
}

bool LinComb::empty_or_zero() const {
  for (const auto& [b, e] : coeff)
    if (!e.structurally_zero()) return false;
  return true;
}

LinComb apply_lambda_j(const BracketHierarchy& h, const UfgCertificate& cert, int j,
                       const MultiIndex& alpha) {
  if (j < 0 || j > h.d) throw Error(Errc::invalid_argument, "field index out of range");
  if (alpha.order() > h.m) throw Error(Errc::invalid_argument, "alpha outside A_m");
  const MultiIndex aj = alpha.append(j);
  if (aj.order() <= h.m) {
    const auto& ex = h.expand.at(aj);
    LinComb out;
    if (ex.basis >= 0) out.coeff[ex.basis] = Expr::constant(ex.sign);
    return out;
  }
  // Overflow: route through the representative's certificate row.
  const auto& ex = h.expand.at(alpha);
  LinComb out;
  if (ex.basis < 0) return out;
  const MultiIndex rep = h.basis[static_cast<size_t>(ex.basis)];
  const auto row = cert.rows.find(rep.append(j));
  if (row == cert.rows.end())
    throw Error(Errc::invalid_argument,
                "certificate row for " + rep.append(j).str() + " is missing");
  for (size_t b = 0; b < row->second.size(); ++b) {
    if (row->second[b].structurally_zero()) continue;
    out.coeff[static_cast<int>(b)] = row->second[b] * ex.sign;
  }
  return out;
}

}  // namespace ufg
