#include "ufgkit/rates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ufg {

namespace {

bool is_square_extension(const MultiIndex& a) {
  const auto& e = a.entries();
  if (e.size() < 3) return false;
  const int j = e[e.size() - 1];
  if (j < 1 || e[e.size() - 2] != j) return false;
  // The prefix must itself be a valid multi-index.
  if (e.size() == 3 && e[0] == 0) return false;
  return true;
}

double sup_or_throw(const Expr& bound_phi, int dim) {
  const SupNorm s = sup_norm(bound_phi, dim);
  if (std::isinf(s.value))
    throw Error(Errc::invalid_argument, "unbounded phi reached the rate engine");
  return s.value;
}

double signed_sup(const Expr& bound_expr, int dim) {
  return bound_expr.structurally_zero() ? 0.0 : signed_sup_bound(bound_expr, dim);
}

void check_cc1(const GammaCoefficients& a, const SupConstants& s) {
  const int m = s.m;
  if (static_cast<int>(a.by_order.size()) != m)
    throw Error(Errc::invalid_argument, "coefficient table does not cover lengths 1..m");
  const double J = static_cast<double>(s.aggregate_J);
  for (double v : a.by_order)
    if (!(v > 0.0)) throw Error(Errc::invalid_argument, "coefficients must be positive");
  if (!(a.a(1) > std::max(0.0, J)))
    throw Error(Errc::invalid_argument, "coefficients violate recursion: a_1 <= max(0, J)");
  for (int k = 2; k <= m; ++k)
    if (!(a.a(k) > J + a.a(k - 1) * a.a(k - 1)))
      throw Error(Errc::invalid_argument, "coefficients violate recursion: a_k <= J + a_{k-1}^2");
}

}  // namespace

SupConstants compute_sup_constants(const BracketHierarchy& h, const UfgCertificate& cert,
                                   std::span<const double> param_values) {
  SupConstants s;
  s.d = h.d;
  s.m = h.m;
  s.dim = h.space.dim;
  const size_t nb = h.basis.size();
  s.order.resize(nb);
  s.sq_ext.resize(nb);
  s.J.assign(nb, 0.0);
  s.H.assign(nb, 0.0);
  s.I.assign(nb, 0.0);
  s.diag_c.resize(nb);
  s.diag_l.resize(nb);

  const int dim = h.space.dim;
  for (size_t bi = 0; bi < nb; ++bi) {
    const MultiIndex& rep = h.basis[bi];
    s.order[bi] = rep.order();
    s.sq_ext[bi] = is_square_extension(rep);
    Expr diag_c_sum, diag_l_sum;
    for (int j = 1; j <= h.d; ++j) {
      const std::vector<Expr> row = phi_row_for(h, cert, rep, j);
      for (size_t b = 0; b < row.size(); ++b) {
        if (row[b].structurally_zero()) continue;
        s.J[bi] = std::max(s.J[bi], sup_or_throw(row[b].bind_params(dim, param_values), dim));
        if (b != bi) {
          const Expr dphi = h.base[static_cast<size_t>(j)].apply(row[b]);
          if (!dphi.structurally_zero())
            s.H[bi] = std::max(s.H[bi], sup_or_throw(dphi.bind_params(dim, param_values), dim));
        }
      }
      diag_c_sum += h.base[static_cast<size_t>(j)].apply(row[bi]);

      const std::vector<Expr> row2 = phi_row_second(h, cert, rep, j);
      for (size_t b = 0; b < row2.size(); ++b) {
        if (b == bi || row2[b].structurally_zero()) continue;
        s.I[bi] = std::max(s.I[bi], sup_or_throw(row2[b].bind_params(dim, param_values), dim));
      }
      diag_l_sum += row2[bi];
    }
    s.diag_c[bi] = diag_c_sum.bind_params(dim, param_values);
    s.diag_l[bi] = diag_l_sum.bind_params(dim, param_values);
  }
  for (size_t bi = 0; bi < nb; ++bi)
    if (s.order[bi] == s.m && s.J[bi] != 0.0) ++s.aggregate_J;
  return s;
}

GammaCoefficients choose_gamma_coefficients(const SupConstants& s, int m) {
  if (m < 1) throw Error(Errc::invalid_argument, "order must be >= 1");
  const double J = static_cast<double>(s.aggregate_J);
  GammaCoefficients g;
  g.by_order.resize(static_cast<size_t>(m));
  g.by_order[0] = std::max(1.0, J + 1.0);
  for (int k = 2; k <= m; ++k) {
    const double prev = g.by_order[static_cast<size_t>(k - 2)];
    g.by_order[static_cast<size_t>(k - 1)] = J + prev * prev + 1.0;
  }
  return g;
}

GammaBreakdown compute_gamma(const GammaCoefficients& a, const SupConstants& s) {
  check_cc1(a, s);
  const double d = static_cast<double>(s.d);
  const double nb = static_cast<double>(s.size());
  int cnt_h = 0;
  for (size_t b = 0; b < s.size(); ++b)
    if (s.order[b] == s.m && s.H[b] != 0.0) ++cnt_h;

  GammaBreakdown out;
  out.c.resize(s.size());
  double gmax = 0.0;
  const double am = a.a(s.m);
  for (size_t b = 0; b < s.size(); ++b) {
    double c;
    if (s.order[b] == s.m) {
      const int others_h = cnt_h - (s.H[b] != 0.0 ? 1 : 0);
      c = 2.0 * am * am * s.J[b] * s.J[b] * d * nb;
      c += 4.0 * am * signed_sup(s.diag_c[b], s.dim);
      c += 2.0 * d * static_cast<double>(others_h);
      c += 2.0 * d * am * am * s.H[b] * s.H[b] * (nb - 1.0);
    } else {
      c = 2.0 * d + 2.0 * d * static_cast<double>(cnt_h);
    }
    out.c[b] = c;
    gmax = std::max(gmax, c / a.a(s.order[b]));
  }
  out.gamma = std::max(0.0, gmax);
  return out;
}

ThresholdBreakdown compute_lambda0_threshold(const GammaCoefficients& a, const SupConstants& s) {
  check_cc1(a, s);
  const double d = static_cast<double>(s.d);
  const double nb = static_cast<double>(s.size());
  int nm = 0, cnt_i_m = 0, cnt_i_m1 = 0;
  for (size_t b = 0; b < s.size(); ++b) {
    if (s.order[b] == s.m) {
      ++nm;
      if (s.I[b] != 0.0) ++cnt_i_m;
    }
    if (s.order[b] == s.m - 1 && s.I[b] != 0.0) ++cnt_i_m1;
  }

  ThresholdBreakdown out;
  out.l.resize(s.size());
  double tmax = 0.0;
  for (size_t b = 0; b < s.size(); ++b) {
    const int k = s.order[b];
    const double ak = a.a(k);
    double l;
    if (k == s.m) {
      l = d * ak * ak * s.I[b] * s.I[b] * (nb - 1.0);
      l += d * static_cast<double>(nm - 1) * (s.I[b] != 0.0 ? 1.0 : 0.0);
      l += 2.0 * ak * signed_sup(s.diag_l[b], s.dim);
      l += d * static_cast<double>(cnt_i_m1);
      if (s.sq_ext[b] && s.m - 2 >= 1) l += a.a(s.m - 2) * a.a(s.m - 2);
    } else if (k == s.m - 1 && s.m >= 3) {
      l = 2.0 * ak * signed_sup(s.diag_l[b], s.dim);
      l += d * ak * ak * s.I[b] * s.I[b] * (nb - 1.0);
      if (s.sq_ext[b] && s.m - 3 >= 1) l += a.a(s.m - 3) * a.a(s.m - 3);
      l += d * static_cast<double>(cnt_i_m);
      l += d * static_cast<double>(cnt_i_m1);
    } else {
      l = d;
      if (s.sq_ext[b] && k - 2 >= 1) l += a.a(k - 2) * a.a(k - 2);
      l += d * static_cast<double>(cnt_i_m);
      l += d * static_cast<double>(cnt_i_m1);
    }
    out.l[b] = l;
    tmax = std::max(tmax, l / ak);
  }
  out.threshold = std::max(0.0, tmax);
  return out;
}

RateReport certify_rate(const DilationCertificate& dil, const GammaCoefficients& a,
                        const SupConstants& s) {
  if (dil.status != DilationStatus::ok)
    throw Error(Errc::invalid_argument, "certify_rate needs a dilation certificate");
  const GammaBreakdown g = compute_gamma(a, s);
  const ThresholdBreakdown t = compute_lambda0_threshold(a, s);
  RateReport r;
  r.gamma = g.gamma;
  r.lambda0_required = t.threshold;
  r.lambda0_available = dil.lambda0;
  r.mu = 2.0 * dil.lambda0 - t.threshold;
  r.c = g.c;
  r.l = t.l;
  if (r.mu > r.gamma) r.lambda = r.mu - r.gamma;
  return r;
}

namespace {

/// Exact bookkeeping state for the small-system optimizer.
struct Bookkeeping {
  int nb = 0;
  int d = 0;
  std::vector<int> order;
  std::vector<double> mu;                          // per basis, -sup c_alpha > 0
  std::vector<double> diag_rate;                    // 4*d_c + 2*d_l per basis
  std::vector<std::vector<std::vector<double>>> ws;  // [alpha][j-1][b] second-order weights
  std::vector<std::vector<double>> w1;              // [alpha][b] first-order S weights
  std::vector<std::vector<double>> w2;              // [alpha][b] first-order F weights

  double rate(const std::vector<double>& a) const {
    // Second-order absorbers: for (j,b), capacity 2 a_b is allocated
    // proportionally to a_alpha * w, giving each incoming term the
    // penalty 2 a_alpha w S / a_b with S = sum a w.
    double lam = std::numeric_limits<double>::infinity();
    std::vector<double> loss(static_cast<size_t>(nb), 0.0);
    for (int j = 0; j < d; ++j) {
      for (int b = 0; b < nb; ++b) {
        double sum = 0.0;
        for (int al = 0; al < nb; ++al)
          sum += a[static_cast<size_t>(al)] * ws[static_cast<size_t>(al)][static_cast<size_t>(j)]
                                                [static_cast<size_t>(b)];
        if (sum == 0.0) continue;
        for (int al = 0; al < nb; ++al) {
          const double w = ws[static_cast<size_t>(al)][static_cast<size_t>(j)][static_cast<size_t>(b)];
          if (w == 0.0) continue;
          loss[static_cast<size_t>(al)] += 2.0 * w * sum / a[static_cast<size_t>(b)];
        }
      }
    }
    for (int al = 0; al < nb; ++al) {
      for (int b = 0; b < nb; ++b) {
        if (b == al) continue;
        const double ratio = std::sqrt(a[static_cast<size_t>(al)] / a[static_cast<size_t>(b)]);
        const double f1 = w1[static_cast<size_t>(al)][static_cast<size_t>(b)];
        const double f2 = w2[static_cast<size_t>(al)][static_cast<size_t>(b)];
        if (f1 != 0.0) {
          loss[static_cast<size_t>(al)] += 2.0 * f1 * ratio;
          loss[static_cast<size_t>(b)] += 2.0 * f1 * ratio;
        }
        if (f2 != 0.0) {
          loss[static_cast<size_t>(al)] += f2 * ratio;
          loss[static_cast<size_t>(b)] += f2 * ratio;
        }
      }
    }
    for (int al = 0; al < nb; ++al) {
      const double r = 2.0 * mu[static_cast<size_t>(al)] - diag_rate[static_cast<size_t>(al)] -
                       loss[static_cast<size_t>(al)];
      lam = std::min(lam, r);
    }
    return lam;
  }
};

}  // namespace

OptimizeResult optimize_small_system(const BracketHierarchy& h, const UfgCertificate& cert,
                                     const DilationCertificate& dil,
                                     std::span<const double> param_values, long budget) {
  if (h.m > 2) throw Error(Errc::unsupported, "NotSmallSystem: optimizer requires m <= 2");
  if (dil.status != DilationStatus::ok)
    throw Error(Errc::invalid_argument, "optimizer needs a dilation certificate");
  if (budget < 1) budget = 1;

  const int nb = static_cast<int>(h.basis.size());
  const int dim = h.space.dim;
  Bookkeeping bk;
  bk.nb = nb;
  bk.d = h.d;
  bk.order.resize(static_cast<size_t>(nb));
  bk.mu.resize(static_cast<size_t>(nb));
  bk.diag_rate.assign(static_cast<size_t>(nb), 0.0);
  bk.ws.assign(static_cast<size_t>(nb),
               std::vector<std::vector<double>>(static_cast<size_t>(h.d),
                                                std::vector<double>(static_cast<size_t>(nb), 0.0)));
  bk.w1.assign(static_cast<size_t>(nb), std::vector<double>(static_cast<size_t>(nb), 0.0));
  bk.w2.assign(static_cast<size_t>(nb), std::vector<double>(static_cast<size_t>(nb), 0.0));

  for (int al = 0; al < nb; ++al) {
    const MultiIndex& rep = h.basis[static_cast<size_t>(al)];
    bk.order[static_cast<size_t>(al)] = rep.order();
    bk.mu[static_cast<size_t>(al)] = -dil.sup_factors[static_cast<size_t>(al)];
    Expr diag_c, diag_l;
    for (int j = 1; j <= h.d; ++j) {
      const std::vector<Expr> psi = phi_row_for(h, cert, rep, j);
      const std::vector<Expr> chi = phi_row_second(h, cert, rep, j);
      for (int b = 0; b < nb; ++b) {
        const Expr& p = psi[static_cast<size_t>(b)];
        if (!p.structurally_zero())
          bk.ws[static_cast<size_t>(al)][static_cast<size_t>(j - 1)][static_cast<size_t>(b)] =
              sup_or_throw(p.bind_params(dim, param_values), dim);
        if (b != al) {
          const Expr dp = h.base[static_cast<size_t>(j)].apply(p);
          if (!dp.structurally_zero())
            bk.w1[static_cast<size_t>(al)][static_cast<size_t>(b)] +=
                sup_or_throw(dp.bind_params(dim, param_values), dim);
          const Expr& c = chi[static_cast<size_t>(b)];
          if (!c.structurally_zero())
            bk.w2[static_cast<size_t>(al)][static_cast<size_t>(b)] +=
                sup_or_throw(c.bind_params(dim, param_values), dim);
        }
      }
      diag_c += h.base[static_cast<size_t>(j)].apply(psi[static_cast<size_t>(al)]);
      diag_l += chi[static_cast<size_t>(al)];
    }
    bk.diag_rate[static_cast<size_t>(al)] =
        4.0 * signed_sup(diag_c.bind_params(dim, param_values), dim) +
        2.0 * signed_sup(diag_l.bind_params(dim, param_values), dim);
  }

  // Search region: first-length weights start at the hand-proof floor
  // 2/mu; higher weights stay above max(1, (max shorter a)^2) * 1.05.
  std::vector<double> a(static_cast<size_t>(nb), 1.0);
  std::vector<double> t2(static_cast<size_t>(nb), 1.05);
  auto materialize = [&]() {
    double max1 = 0.0;
    for (int b = 0; b < nb; ++b)
      if (bk.order[static_cast<size_t>(b)] == 1) max1 = std::max(max1, a[static_cast<size_t>(b)]);
    for (int b = 0; b < nb; ++b)
      if (bk.order[static_cast<size_t>(b)] == 2)
        a[static_cast<size_t>(b)] = std::max(1.0, max1 * max1) * t2[static_cast<size_t>(b)];
  };
  std::vector<double> floor1(static_cast<size_t>(nb), 0.0);
  for (int b = 0; b < nb; ++b)
    if (bk.order[static_cast<size_t>(b)] == 1) {
      floor1[static_cast<size_t>(b)] = 2.0 / bk.mu[static_cast<size_t>(b)];
      a[static_cast<size_t>(b)] = floor1[static_cast<size_t>(b)];
    }
  materialize();

  OptimizeResult out;
  double best = bk.rate(a);
  ++out.evaluations;
  static const double kSteps[] = {4.0, 2.0, 1.3, 1.0 / 1.3, 0.5, 0.25};
  bool improved = true;
  while (improved && out.evaluations < budget) {
    improved = false;
    for (int b = 0; b < nb && out.evaluations < budget; ++b) {
      const bool len1 = bk.order[static_cast<size_t>(b)] == 1;
      double& v = len1 ? a[static_cast<size_t>(b)] : t2[static_cast<size_t>(b)];
      const double saved = v;
      double best_v = saved;
      for (double step : kSteps) {
        if (out.evaluations >= budget) break;
        double cand = saved * step;
        if (len1 && cand < floor1[static_cast<size_t>(b)]) cand = floor1[static_cast<size_t>(b)];
        if (!len1 && cand < 1.05) cand = 1.05;
        if (cand == saved) continue;
        v = cand;
        materialize();
        const double r = bk.rate(a);
        ++out.evaluations;
        if (r > best + 1e-12) {
          best = r;
          best_v = cand;
          improved = true;
        }
      }
      v = best_v;
      materialize();
    }
  }

  // Certificate re-verification with the returned parameters.
  best = bk.rate(a);
  out.a = a;
  double mu_min = std::numeric_limits<double>::infinity();
  for (int b = 0; b < nb; ++b) mu_min = std::min(mu_min, 2.0 * bk.mu[static_cast<size_t>(b)]);
  out.report.mu = mu_min;
  out.report.gamma = mu_min - best;
  out.report.lambda0_available = dil.lambda0;
  out.report.lambda0_required = std::max(0.0, out.report.gamma / 2.0);
  out.report.c.assign(static_cast<size_t>(nb), 0.0);
  out.report.l.assign(static_cast<size_t>(nb), 0.0);
  if (best > 0.0) out.report.lambda = best;
  return out;
}

}  // namespace ufg
