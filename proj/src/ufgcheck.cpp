#include "ufgkit/ufgcheck.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace ufg {

namespace {

// Term key inside the coefficient-matching linear system.
struct RowKey {
  int component;
  std::vector<Factor> factors;

  bool operator<(const RowKey& o) const {
    if (component != o.component) return component < o.component;
    const size_t n = std::min(factors.size(), o.factors.size());
    for (size_t i = 0; i < n; ++i) {
      const Factor &a = factors[i], &b = o.factors[i];
      if (a.var != b.var) return a.var < b.var;
      if (a.pow != b.pow) return a.pow < b.pow;
      if (a.sin_pow != b.sin_pow) return a.sin_pow < b.sin_pow;
      if (a.cos_pow != b.cos_pow) return a.cos_pow < b.cos_pow;
    }
    return factors.size() < o.factors.size();
  }
};

// Parameter monomial as exponent vector over the parameter block.
using ParamMono = std::vector<int>;

ParamMono param_part(const Term& t, int dim, int nparams) {
  ParamMono q(static_cast<size_t>(nparams), 0);
  for (const auto& f : t.factors)
    if (f.var >= dim) q[static_cast<size_t>(f.var - dim)] = f.pow;
  return q;
}

Expr param_mono_expr(const ParamMono& q, int dim) {
  std::vector<Factor> fs;
  for (size_t i = 0; i < q.size(); ++i)
    if (q[i] > 0) fs.push_back(Factor{dim + static_cast<int>(i), q[i], 0, 0});
  return Expr::from_terms({Term{1.0, std::move(fs)}});
}

// Trig monomials over the coordinates with total degree <= deg and
// cos-power <= 1 per variable (the rewritten normal form).
void gen_trig(int var, int dim, int remaining, std::vector<Factor>& cur,
              std::vector<Expr>& out) {
  if (var == dim) {
    out.push_back(Expr::from_terms({Term{1.0, cur}}));
    return;
  }
  for (int s = 0; s <= remaining; ++s) {
    for (int c = 0; c <= 1 && s + c <= remaining; ++c) {
      if (s == 0 && c == 0) {
        gen_trig(var + 1, dim, remaining, cur, out);
      } else {
        cur.push_back(Factor{var, 0, s, c});
        gen_trig(var + 1, dim, remaining - s - c, cur, out);
        cur.pop_back();
      }
    }
  }
}

std::vector<Expr> trig_monomials(int dim, int deg) {
  std::vector<Expr> out;
  std::vector<Factor> cur;
  gen_trig(0, dim, deg, cur, out);
  return out;
}

double snap_rational(double u) {
  for (int q = 1; q <= 8; ++q) {
    const double p = std::rint(u * q);
    if (std::fabs(u - p / q) <= 1e-9) return p / q;
  }
  return u;
}

// Solves the (small, dense) normal equations with partial pivoting;
// pivots below tol relative to the largest diagonal are treated as rank
// deficiencies and their unknowns set to zero.
std::vector<double> solve_normal_equations(std::vector<std::vector<double>> n,
                                           std::vector<double> rhs) {
  const size_t c = rhs.size();
  double scale = 0.0;
  for (size_t i = 0; i < c; ++i) scale = std::max(scale, std::fabs(n[i][i]));
  const double tol = 1e-10 * std::max(scale, 1.0);
  std::vector<size_t> perm(c);
  for (size_t i = 0; i < c; ++i) perm[i] = i;
  std::vector<bool> free_var(c, false);
  for (size_t col = 0; col < c; ++col) {
    size_t piv = col;
    for (size_t r = col + 1; r < c; ++r)
      if (std::fabs(n[r][col]) > std::fabs(n[piv][col])) piv = r;
    if (std::fabs(n[piv][col]) < tol) {
      free_var[col] = true;
      continue;
    }
    std::swap(n[piv], n[col]);
    std::swap(rhs[piv], rhs[col]);
    for (size_t r = col + 1; r < c; ++r) {
      const double f = n[r][col] / n[col][col];
      if (f == 0.0) continue;
      for (size_t k = col; k < c; ++k) n[r][k] -= f * n[col][k];
      rhs[r] -= f * rhs[col];
    }
  }
  std::vector<double> u(c, 0.0);
  for (size_t col = c; col-- > 0;) {
    if (free_var[col]) continue;
    double s = rhs[col];
    for (size_t k = col + 1; k < c; ++k) s -= n[col][k] * u[k];
    u[col] = s / n[col][col];
  }
  return u;
}

}  // namespace

std::optional<std::vector<Expr>> expand_in_basis(const std::vector<VectorField>& fields,
                                                 const VectorField& target,
                                                 const VarSpace& space, int trig_degree,
                                                 double* residual) {
  if (fields.empty()) throw Error(Errc::invalid_argument, "empty basis");
  const int dim = target.dim();
  const int np = static_cast<int>(space.params.size());

  VectorField tgt = target;
  for (auto& c : tgt.comp) c = c.rewritten();

  // Candidate parameter monomials: exponent-wise quotients of target and
  // basis terms, plus the constant.
  std::set<ParamMono> qset;
  qset.insert(ParamMono(static_cast<size_t>(np), 0));
  for (const auto& tc : tgt.comp)
    for (const auto& tt : tc.terms()) {
      const ParamMono qt = param_part(tt, dim, np);
      for (const auto& f : fields)
        for (const auto& fc : f.comp)
          for (const auto& ft : fc.terms()) {
            const ParamMono qf = param_part(ft, dim, np);
            ParamMono q(static_cast<size_t>(np));
            bool ok = true;
            for (int i = 0; i < np; ++i) {
              q[static_cast<size_t>(i)] = qt[static_cast<size_t>(i)] - qf[static_cast<size_t>(i)];
              if (q[static_cast<size_t>(i)] < 0) ok = false;
            }
            if (ok) qset.insert(std::move(q));
          }
    }

  const std::vector<Expr> trig = trig_monomials(dim, trig_degree);

  // Unknowns: (basis index, param monomial, trig monomial).
  struct Col {
    size_t field;
    Expr gen;                    // param * trig generator
    std::vector<Expr> comp;      // gen * field, rewritten
  };
  std::vector<Col> cols;
  for (size_t b = 0; b < fields.size(); ++b)
    for (const auto& q : qset)
      for (const auto& g : trig) {
        Col col;
        col.field = b;
        col.gen = param_mono_expr(q, dim) * g;
        col.comp.reserve(static_cast<size_t>(dim));
        bool all_zero = true;
        for (int i = 0; i < dim; ++i) {
          Expr e = (col.gen * fields[b].comp[static_cast<size_t>(i)]).rewritten();
          if (!e.structurally_zero()) all_zero = false;
          col.comp.push_back(std::move(e));
        }
        if (!all_zero) cols.push_back(std::move(col));
      }

  std::map<RowKey, size_t> row_of;
  auto intern = [&row_of](int comp, const Term& t) {
    RowKey k{comp, t.factors};
    auto [it, inserted] = row_of.emplace(std::move(k), row_of.size());
    (void)inserted;
    return it->second;
  };
  for (int i = 0; i < dim; ++i)
    for (const auto& t : tgt.comp[static_cast<size_t>(i)].terms()) intern(i, t);
  for (const auto& col : cols)
    for (int i = 0; i < dim; ++i)
      for (const auto& t : col.comp[static_cast<size_t>(i)].terms()) intern(i, t);

  const size_t nrows = row_of.size(), ncols = cols.size();
  std::vector<std::vector<double>> a(nrows, std::vector<double>(ncols, 0.0));
  std::vector<double> b(nrows, 0.0);
  std::vector<int> row_component(nrows, 0);
  for (const auto& [key, r] : row_of) row_component[r] = key.component;
  for (int i = 0; i < dim; ++i)
    for (const auto& t : tgt.comp[static_cast<size_t>(i)].terms()) b[intern(i, t)] = t.coeff;
  for (size_t c = 0; c < ncols; ++c)
    for (int i = 0; i < dim; ++i)
      for (const auto& t : cols[c].comp[static_cast<size_t>(i)].terms())
        a[intern(i, t)][c] = t.coeff;

  std::vector<double> u;
  if (ncols > 0) {
    std::vector<std::vector<double>> nmat(ncols, std::vector<double>(ncols, 0.0));
    std::vector<double> rhs(ncols, 0.0);
    for (size_t r = 0; r < nrows; ++r) {
      for (size_t c1 = 0; c1 < ncols; ++c1) {
        if (a[r][c1] == 0.0) continue;
        rhs[c1] += a[r][c1] * b[r];
        for (size_t c2 = c1; c2 < ncols; ++c2) nmat[c1][c2] += a[r][c1] * a[r][c2];
      }
    }
    for (size_t c1 = 0; c1 < ncols; ++c1)
      for (size_t c2 = 0; c2 < c1; ++c2) nmat[c1][c2] = nmat[c2][c1];
    u = solve_normal_equations(std::move(nmat), std::move(rhs));
  }

  double res2 = 0.0;
  double bnorm2 = 0.0;
  for (size_t r = 0; r < nrows; ++r) {
    double s = -b[r];
    bnorm2 += b[r] * b[r];
    for (size_t c = 0; c < ncols; ++c) s += a[r][c] * u[c];
    res2 += s * s;
  }
  const double res = std::sqrt(res2);
  if (residual) *residual = res;

  auto assemble = [&](bool snapped) {
    std::vector<Expr> coeff(fields.size());
    for (size_t c = 0; c < ncols; ++c) {
      const double v = snapped ? snap_rational(u[c]) : u[c];
      if (v == 0.0) continue;
      coeff[cols[c].field] += cols[c].gen * v;
    }
    return coeff;
  };
  auto verifies = [&](const std::vector<Expr>& coeff) {
    for (int i = 0; i < dim; ++i) {
      Expr r = tgt.comp[static_cast<size_t>(i)];
      for (size_t f = 0; f < fields.size(); ++f)
        r -= coeff[f] * fields[f].comp[static_cast<size_t>(i)];
      if (!r.rewritten().structurally_zero()) return false;
    }
    return true;
  };

  if (res <= 1e-9 * std::max(1.0, std::sqrt(bnorm2))) {
    std::vector<Expr> snapped = assemble(true);
    if (verifies(snapped)) return snapped;
    std::vector<Expr> raw = assemble(false);
    if (verifies(raw)) return raw;
  }
  return std::nullopt;
}

std::vector<Expr> phi_row_for(const BracketHierarchy& h, const UfgCertificate& cert,
                              const MultiIndex& rep, int i) {
  const MultiIndex a = rep.append(i);
  if (a.order() <= h.m) {
    const auto& ex = h.expand.at(a);
    std::vector<Expr> row(h.basis_fields.size());
    if (ex.basis >= 0) row[static_cast<size_t>(ex.basis)] = Expr::constant(ex.sign);
    return row;
  }
  auto it = cert.rows.find(a);
  if (it == cert.rows.end())
    throw Error(Errc::invalid_argument, "certificate row for " + a.str() + " is missing");
  std::vector<Expr> row = it->second;
  row.resize(h.basis_fields.size());
  return row;
}

std::vector<Expr> phi_row_second(const BracketHierarchy& h, const UfgCertificate& cert,
                                 const MultiIndex& rep, int j) {
  // V_{rep*j*j} = [V_{rep*j}, V_j] with V_{rep*j} = sum_b psi_b V_b:
  // phi_c = sum_b psi_b * (row of rep_b*j)_c - V_j psi_c.
  const std::vector<Expr> psi = phi_row_for(h, cert, rep, j);
  std::vector<Expr> out(h.basis_fields.size());
  for (size_t b = 0; b < psi.size(); ++b) {
    if (!psi[b].structurally_zero()) {
      const std::vector<Expr> inner = phi_row_for(h, cert, h.basis[b], j);
      for (size_t c = 0; c < out.size(); ++c)
        if (!inner[c].structurally_zero()) out[c] += psi[b] * inner[c];
    }
    Expr dpsi = h.base[static_cast<size_t>(j)].apply(psi[b]);
    if (!dpsi.structurally_zero()) out[b] -= dpsi;
  }
  return out;
}

VerifyReport verify_certificate(const BracketHierarchy& h, UfgCertificate& cert,
                                std::span<const double> param_values) {
  VerifyReport report;
  cert.boundedness.clear();
  if (cert.m != h.m)
    throw Error(Errc::invalid_argument, "certificate order does not match hierarchy order");

  for (const auto& rep : h.basis) {
    for (int i = 0; i <= h.d; ++i) {
      const MultiIndex a = rep.append(i);
      if (a.order() <= h.m) continue;
      const VectorField& va = h.field(a);
      auto it = cert.rows.find(a);
      if (it == cert.rows.end()) {
        bool zero = true;
        for (const auto& c : va.comp)
          if (!c.rewritten().structurally_zero()) zero = false;
        if (zero) {
          // Vanishing overflow bracket: implicit all-zero row.
          it = cert.rows.emplace(a, std::vector<Expr>(h.basis_fields.size())).first;
        } else {
          report.issues.push_back({CertIssue::missing_row, a, -1});
          continue;
        }
      }
      it->second.resize(h.basis_fields.size());
      const std::vector<Expr>& phi = it->second;

      VectorField residual = va;
      for (size_t b = 0; b < phi.size(); ++b) {
        if (phi[b].structurally_zero()) continue;
        residual = residual - phi[b] * h.basis_fields[b];
      }
      for (int c = 0; c < residual.dim(); ++c) {
        const ZeroCheck z = is_zero_checked(residual.comp[static_cast<size_t>(c)], h.space);
        if (z.suspicious) report.zero_check_suspicious = true;
        if (!z.zero) report.issues.push_back({CertIssue::residual_nonzero, a, c});
      }

      for (size_t b = 0; b < phi.size(); ++b) {
        if (phi[b].structurally_zero()) continue;
        UfgCertificate::PhiBound pb;
        pb.row = a;
        pb.basis = static_cast<int>(b);
        pb.bounded = is_bounded(phi[b], h.space.dim);
        pb.deriv_bounded = true;
        for (int j = 1; j <= h.d; ++j) {
          const Expr dphi = h.base[static_cast<size_t>(j)].apply(phi[b]);
          if (!is_bounded(dphi, h.space.dim)) pb.deriv_bounded = false;
        }
        if (pb.bounded) {
          const SupNorm s = sup_norm(phi[b].bind_params(h.space.dim, param_values), h.space.dim);
          pb.sup = s.value;
        }
        if (!pb.bounded || !pb.deriv_bounded)
          report.issues.push_back({CertIssue::unbounded_phi, a, static_cast<int>(b)});
        cert.boundedness.push_back(std::move(pb));
      }
    }
  }
  report.verified = report.issues.empty();
  cert.verified = report.verified;
  return report;
}

SolveOutcome solve_certificate(const BracketHierarchy& h, int m, const Ansatz& ansatz,
                               std::span<const double> param_values) {
  if (m != h.m)
    throw Error(Errc::invalid_argument, "solve order does not match hierarchy order");
  SolveOutcome out;
  out.cert.m = m;
  for (const auto& rep : h.basis) {
    for (int i = 0; i <= h.d; ++i) {
      const MultiIndex a = rep.append(i);
      if (a.order() <= h.m) continue;
      double res = 0.0;
      auto coeff =
          expand_in_basis(h.basis_fields, h.field(a), h.space, ansatz.trig_degree, &res);
      if (!coeff) {
        out.found = false;
        out.residual = res;
        out.failed_alpha = a;
        return out;
      }
      out.cert.rows.emplace(a, std::move(*coeff));
    }
  }
  out.found = true;
  const VerifyReport report = verify_certificate(h, out.cert, param_values);
  if (!report.verified)
    throw Error(Errc::internal, "solved certificate failed round-trip verification");
  return out;
}

DilationCertificate check_dilation(const BracketHierarchy& h,
                                   std::span<const double> param_values) {
  DilationCertificate out;
  out.factors.resize(h.basis_fields.size());
  out.sup_factors.assign(h.basis_fields.size(), 0.0);
  double lambda0 = std::numeric_limits<double>::infinity();
  for (size_t b = 0; b < h.basis_fields.size(); ++b) {
    const VectorField w = bracket(h.basis_fields[b], h.base[0]);
    std::optional<std::vector<Expr>> coeff;
    for (int deg = 0; deg <= 2 && !coeff; ++deg)
      coeff = expand_in_basis({h.basis_fields[b]}, w, h.space, deg, nullptr);
    if (!coeff) {
      out.status = DilationStatus::not_proportional;
      out.failed = h.basis[b];
      return out;
    }
    out.factors[b] = (*coeff)[0];
    const double sup =
        signed_sup_bound(out.factors[b].bind_params(h.space.dim, param_values), h.space.dim);
    out.sup_factors[b] = sup;
    if (!(sup < 0.0)) {
      out.status = DilationStatus::non_negative_factor;
      out.failed = h.basis[b];
      return out;
    }
    lambda0 = std::min(lambda0, -sup);
  }
  out.lambda0 = lambda0;
  return out;
}

V0Decomposition check_v0_condition(const BracketHierarchy& h,
                                   std::span<const double> param_values) {
  (void)param_values;
  // Basis of A_2 (the hierarchy extends to m+2 >= 3, so entries exist).
  std::vector<VectorField> fields;
  for (const auto& a : enumerate_multiindices(h.d, 2)) {
    VectorField f = h.field(a);
    for (auto& c : f.comp) c = c.rewritten();
    if (f.is_zero()) continue;
    for (const auto& c : f.comp) {
      if (c.structurally_zero()) continue;
      if (c.terms()[0].coeff < 0) f = -1.0 * f;
      break;
    }
    bool dup = false;
    for (const auto& g : fields)
      if (g == f) dup = true;
    if (!dup) fields.push_back(std::move(f));
  }
  V0Decomposition out;
  if (fields.empty()) {
    out.ok = h.base[0].is_zero();
    if (!out.ok) {
      for (int i = 0; i < h.space.dim; ++i)
        if (!h.base[0].comp[static_cast<size_t>(i)].structurally_zero())
          out.residual_components.push_back(i);
    }
    return out;
  }
  double res = 0.0;
  std::optional<std::vector<Expr>> coeff;
  for (int deg = 0; deg <= 2 && !coeff; ++deg)
    coeff = expand_in_basis(fields, h.base[0], h.space, deg, &res);
  if (coeff) {
    bool all_bounded = true;
    for (const auto& e : *coeff)
      if (!is_bounded(e, h.space.dim)) all_bounded = false;
    if (all_bounded) {
      out.ok = true;
      out.coeff = std::move(*coeff);
      return out;
    }
  }
  out.ok = false;
  out.residual = res;
  // Identify the unrepresentable directions: components of V_0 carrying
  // terms no basis column can reach.
  for (int i = 0; i < h.space.dim; ++i) {
    const Expr& v0c = h.base[0].comp[static_cast<size_t>(i)];
    if (v0c.structurally_zero()) continue;
    bool reachable = false;
    for (const auto& f : fields)
      if (!f.comp[static_cast<size_t>(i)].structurally_zero()) reachable = true;
    if (!reachable) out.residual_components.push_back(i);
  }
  if (out.residual_components.empty() && !out.ok) {
    for (int i = 0; i < h.space.dim; ++i)
      if (!h.base[0].comp[static_cast<size_t>(i)].structurally_zero())
        out.residual_components.push_back(i);
  }
  return out;
}

}  // namespace ufg
