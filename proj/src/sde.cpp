#include "ufgkit/sde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>

#include "ufgkit/rng.hpp"

namespace ufg {

namespace {

constexpr double kBlowUp = 1e12;
constexpr double kSqrt2 = 1.4142135623730950488016887242097;

double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

double kahan_sum(std::span<const double> v) {
  double s = 0.0, c = 0.0;
  for (double x : v) {
    const double y = x - c;
    const double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s;
}

struct Moments {
  double mean = 0.0;
  double stderr_ = 0.0;
  long n = 0;
};

// Mean and standard error with order-independent compensated sums over
// the kept entries (keep[i] != 0).
Moments moments(std::span<const double> v, std::span<const char> keep) {
  Moments m;
  double s = 0.0, c = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    if (!keep[i]) continue;
    const double y = v[i] - c;
    const double t = s + y;
    c = (t - s) - y;
    s = t;
    ++m.n;
  }
  if (m.n == 0) return m;
  m.mean = s / static_cast<double>(m.n);
  double ss = 0.0;
  c = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    if (!keep[i]) continue;
    const double dv = (v[i] - m.mean) * (v[i] - m.mean);
    const double y = dv - c;
    const double t = ss + y;
    c = (t - ss) - y;
    ss = t;
  }
  if (m.n >= 2)
    m.stderr_ = std::sqrt(ss / (static_cast<double>(m.n) * static_cast<double>(m.n - 1)));
  return m;
}

// Striped path-parallel driver: path i runs on worker i mod W, with all
// output written to per-path slots, so results cannot depend on W.
void parallel_paths(long n, const std::function<void(long)>& body);

}  // namespace

int worker_count() {
  // UFGKIT_THREADS overrides the hardware count so reproducibility across
  // worker counts stays testable on any machine.
  if (const char* env = std::getenv("UFGKIT_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1 && n <= 256) return static_cast<int>(n);
  }
  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  return hw < 1 ? 1 : hw;
}

namespace {

void parallel_paths(long n, const std::function<void(long)>& body) {
  const long capped = std::min<long>(worker_count(), n);
  const int w = capped < 1 ? 1 : static_cast<int>(capped);
  if (w <= 1) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<size_t>(w));
  pool.reserve(static_cast<size_t>(w));
  for (int t = 0; t < w; ++t) {
    pool.emplace_back([&, t]() {
      try {
        for (long i = t; i < n; i += w) body(i);
      } catch (...) {
        errors[static_cast<size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

CompiledExpr::CompiledExpr(const Expr& e, int dim) {
  for (const Term& t : e.terms()) {
    CTerm ct;
    ct.coeff = t.coeff;
    ct.begin = static_cast<std::uint32_t>(factors_.size());
    for (const Factor& f : t.factors) {
      if (f.var >= dim)
        throw Error(Errc::invalid_argument, "expression has unbound parameters");
      factors_.push_back({f.var, f.pow, f.sin_pow, f.cos_pow});
    }
    ct.end = static_cast<std::uint32_t>(factors_.size());
    terms_.push_back(ct);
  }
}

double CompiledExpr::eval(const double* x) const {
  double acc = 0.0;
  for (const CTerm& t : terms_) {
    double v = t.coeff;
    for (std::uint32_t k = t.begin; k < t.end; ++k) {
      const CFactor& f = factors_[k];
      const double xv = x[f.var];
      if (f.pow == 1)
        v *= xv;
      else if (f.pow)
        v *= ipow(xv, f.pow);
      if (f.sin_pow) {
        const double s = std::sin(xv);
        v *= f.sin_pow == 1 ? s : ipow(s, f.sin_pow);
      }
      if (f.cos_pow) {
        const double cv = std::cos(xv);
        v *= f.cos_pow == 1 ? cv : ipow(cv, f.cos_pow);
      }
    }
    acc += v;
  }
  return acc;
}

SdeModel make_sde_model(const VarSpace& space, const std::vector<VectorField>& fields,
                        std::span<const double> param_values) {
  if (fields.empty()) throw Error(Errc::invalid_argument, "need at least the drift field");
  if (param_values.size() != space.params.size())
    throw Error(Errc::dimension_mismatch, "parameter value count mismatch");
  SdeModel m;
  m.space = space;
  m.dim = space.dim;
  m.d = static_cast<int>(fields.size()) - 1;
  m.param_values.assign(param_values.begin(), param_values.end());
  for (const VectorField& f : fields) {
    if (f.dim() != space.dim)
      throw Error(Errc::dimension_mismatch, "field dimension mismatch");
    VectorField bound = f;
    for (Expr& c : bound.comp) c = c.bind_params(space.dim, param_values);
    std::vector<CompiledExpr> comp;
    comp.reserve(static_cast<size_t>(space.dim));
    for (const Expr& c : bound.comp) comp.emplace_back(c, space.dim);
    m.fields.push_back(std::move(bound));
    m.compiled.push_back(std::move(comp));
  }
  return m;
}

namespace {

// Scratch buffers for one worker's trajectory.
struct Workspace {
  std::vector<double> x, xt, a, b, dw;
  explicit Workspace(const SdeModel& m)
      : x(static_cast<size_t>(m.dim)),
        xt(static_cast<size_t>(m.dim)),
        a(static_cast<size_t>((m.d + 1) * m.dim)),
        b(static_cast<size_t>((m.d + 1) * m.dim)),
        dw(static_cast<size_t>(std::max(m.d, 1))) {}
};

// One Heun predictor-corrector step of size h > 0; the same Brownian
// increments drive the predictor and the corrector. Returns false on
// blow-up.
bool heun_step(const SdeModel& m, Workspace& ws, double h, NoiseStream& ns) {
  const int n = m.dim, d = m.d;
  const double sh = std::sqrt(h);
  for (int i = 0; i < d; ++i) ws.dw[static_cast<size_t>(i)] = sh * ns.next_normal();

  double* x = ws.x.data();
  double* xt = ws.xt.data();
  double* a = ws.a.data();
  double* b = ws.b.data();
  for (int f = 0; f <= d; ++f) {
    const auto& comp = m.compiled[static_cast<size_t>(f)];
    for (int c = 0; c < n; ++c) a[f * n + c] = comp[static_cast<size_t>(c)].eval(x);
  }
  for (int c = 0; c < n; ++c) {
    double acc = x[c] + h * a[c];
    for (int i = 1; i <= d; ++i) acc += kSqrt2 * ws.dw[static_cast<size_t>(i - 1)] * a[i * n + c];
    xt[c] = acc;
  }
  for (int f = 0; f <= d; ++f) {
    const auto& comp = m.compiled[static_cast<size_t>(f)];
    for (int c = 0; c < n; ++c) b[f * n + c] = comp[static_cast<size_t>(c)].eval(xt);
  }
  for (int c = 0; c < n; ++c) {
    double acc = x[c] + 0.5 * h * (a[c] + b[c]);
    for (int i = 1; i <= d; ++i)
      acc += 0.5 * kSqrt2 * ws.dw[static_cast<size_t>(i - 1)] * (a[i * n + c] + b[i * n + c]);
    x[c] = acc;
  }
  for (int c = 0; c < n; ++c)
    if (!(std::fabs(x[c]) <= kBlowUp)) return false;
  return true;
}

// Advances ws.x through every grid time (ascending, >= 0), invoking
// record(grid_index) after landing on each one. Returns false on
// blow-up.
bool run_grid(const SdeModel& m, Workspace& ws, std::span<const double> grid, double dt,
              NoiseStream& ns, const std::function<void(size_t)>& record) {
  double t = 0.0;
  for (size_t g = 0; g < grid.size(); ++g) {
    const double tg = grid[g];
    while (tg - t > 1e-12) {
      const double h = std::min(dt, tg - t);
      if (!heun_step(m, ws, h, ns)) return false;
      t += h;
    }
    record(g);
  }
  return true;
}

void check_grid(std::span<const double> grid) {
  double prev = -1.0;
  for (double t : grid) {
    if (!(t >= 0.0) || t <= prev)
      throw Error(Errc::invalid_argument, "time grid must be increasing and nonnegative");
    prev = t;
  }
}

// f evaluated at a trajectory point, with the model's parameter values
// appended so expressions may reference parameters.
struct FuncEval {
  std::vector<double> point;
  const ScalarFunc& f;
  int dim;

  FuncEval(const SdeModel& m, const ScalarFunc& fn)
      : point(m.space.var_count(), 0.0), f(fn), dim(m.dim) {
    for (size_t p = 0; p < m.param_values.size(); ++p)
      point[static_cast<size_t>(m.dim) + p] = m.param_values[p];
  }

  double operator()(const double* x) {
    for (int c = 0; c < dim; ++c) point[static_cast<size_t>(c)] = x[c];
    return f.evaluate(point);
  }
};

}  // namespace

PathEnd integrate_path(const SdeModel& model, std::span<const double> x0, double T, double dt,
                       std::uint64_t seed, std::uint64_t path_index) {
  if (!(dt > 0.0) || !(T >= 0.0))
    throw Error(Errc::invalid_argument, "need dt > 0 and T >= 0");
  if (static_cast<int>(x0.size()) != model.dim)
    throw Error(Errc::dimension_mismatch, "start point dimension mismatch");
  Workspace ws(model);
  std::copy(x0.begin(), x0.end(), ws.x.begin());
  NoiseStream ns(seed, path_index);
  const double grid[1] = {T};
  PathEnd out;
  out.blown_up = !run_grid(model, ws, grid, dt, ns, [](size_t) {});
  out.x = ws.x;
  return out;
}

McEstimate estimate_semigroup(const SdeModel& model, const ScalarFunc& f,
                              std::span<const double> x, double t, long n_paths, double dt,
                              std::uint64_t seed) {
  if (n_paths < 2) throw Error(Errc::invalid_argument, "need at least 2 paths");
  if (!(dt > 0.0) || !(t >= 0.0))
    throw Error(Errc::invalid_argument, "need dt > 0 and t >= 0");
  if (static_cast<int>(x.size()) != model.dim)
    throw Error(Errc::dimension_mismatch, "start point dimension mismatch");

  std::vector<double> values(static_cast<size_t>(n_paths), 0.0);
  std::vector<char> keep(static_cast<size_t>(n_paths), 0);
  const double grid[1] = {t};
  std::vector<double> start(x.begin(), x.end());
  parallel_paths(n_paths, [&](long i) {
    Workspace local(model);
    std::copy(start.begin(), start.end(), local.x.begin());
    NoiseStream ns(seed, static_cast<std::uint64_t>(i));
    FuncEval fe(model, f);
    double v = 0.0;
    const bool ok = run_grid(model, local, grid, dt, ns, [&](size_t) { v = fe(local.x.data()); });
    if (ok && std::isfinite(v)) {
      values[static_cast<size_t>(i)] = v;
      keep[static_cast<size_t>(i)] = 1;
    }
  });

  const Moments m = moments(values, keep);
  if (m.n < 2) throw Error(Errc::numeric, "NonFinite: fewer than 2 paths survived");
  McEstimate est;
  est.mean = m.mean;
  est.stderr_ = m.stderr_;
  est.n_paths = m.n;
  est.seed = seed;
  est.discarded = n_paths - m.n;
  return est;
}

std::vector<double> flow(const VectorField& V, std::span<const double> x, double h,
                         double max_substep) {
  if (static_cast<int>(x.size()) != V.dim())
    throw Error(Errc::dimension_mismatch, "flow start point dimension mismatch");
  if (!(std::fabs(h) <= 10.0))
    throw Error(Errc::invalid_argument, "flow durations are limited to |h| <= 10");
  if (!(max_substep > 0.0 && max_substep <= 1.0))
    throw Error(Errc::invalid_argument, "flow substep must lie in (0, 1]");
  for (const Expr& c : V.comp)
    if (c.max_var() >= V.dim())
      throw Error(Errc::invalid_argument, "flow field has unbound parameters");
  const int n = V.dim();
  const int steps = std::max(1, static_cast<int>(std::ceil(std::fabs(h) / max_substep - 1e-12)));
  const double hs = h / steps;
  std::vector<double> y(x.begin(), x.end());
  std::vector<double> k1(static_cast<size_t>(n)), k2(k1), k3(k1), k4(k1), tmp(k1);
  auto eval = [&](const std::vector<double>& p, std::vector<double>& out) {
    for (int c = 0; c < n; ++c) out[static_cast<size_t>(c)] = V.comp[static_cast<size_t>(c)].evaluate(p);
  };
  for (int s = 0; s < steps; ++s) {
    eval(y, k1);
    for (int c = 0; c < n; ++c) tmp[static_cast<size_t>(c)] = y[static_cast<size_t>(c)] + 0.5 * hs * k1[static_cast<size_t>(c)];
    eval(tmp, k2);
    for (int c = 0; c < n; ++c) tmp[static_cast<size_t>(c)] = y[static_cast<size_t>(c)] + 0.5 * hs * k2[static_cast<size_t>(c)];
    eval(tmp, k3);
    for (int c = 0; c < n; ++c) tmp[static_cast<size_t>(c)] = y[static_cast<size_t>(c)] + hs * k3[static_cast<size_t>(c)];
    eval(tmp, k4);
    for (int c = 0; c < n; ++c)
      y[static_cast<size_t>(c)] += hs / 6.0 * (k1[static_cast<size_t>(c)] + 2.0 * k2[static_cast<size_t>(c)] +
                                               2.0 * k3[static_cast<size_t>(c)] + k4[static_cast<size_t>(c)]);
    for (double v : y)
      if (!(std::fabs(v) <= kBlowUp)) throw Error(Errc::numeric, "NonFinite: flow blew up");
  }
  return y;
}

namespace {

// Shared engine for paired common-random-number series: one pair of
// trajectories per path (started at xp and xm, same noise), a scalar per
// grid time from each, diff recorded per (grid, path).
struct PairedSeries {
  std::vector<std::vector<double>> diffs;  // [grid][path]
  std::vector<char> keep;                  // [path]
};

PairedSeries paired_series(const SdeModel& model, const ScalarFunc& f, std::span<const double> xp,
                           std::span<const double> xm, std::span<const double> grid, long n_paths,
                           double dt, std::uint64_t seed, double scale) {
  if (n_paths < 2) throw Error(Errc::invalid_argument, "need at least 2 paths");
  if (!(dt > 0.0)) throw Error(Errc::invalid_argument, "need dt > 0");
  check_grid(grid);

  PairedSeries out;
  out.diffs.assign(grid.size(), std::vector<double>(static_cast<size_t>(n_paths), 0.0));
  out.keep.assign(static_cast<size_t>(n_paths), 0);
  std::vector<double> sp(xp.begin(), xp.end()), sm(xm.begin(), xm.end());

  parallel_paths(n_paths, [&](long i) {
    Workspace ws(model);
    FuncEval fe(model, f);
    std::vector<double> fp(grid.size()), fm(grid.size());

    std::copy(sp.begin(), sp.end(), ws.x.begin());
    NoiseStream np(seed, static_cast<std::uint64_t>(i));
    if (!run_grid(model, ws, grid, dt, np, [&](size_t g) { fp[g] = fe(ws.x.data()); })) return;

    std::copy(sm.begin(), sm.end(), ws.x.begin());
    NoiseStream nm(seed, static_cast<std::uint64_t>(i));
    if (!run_grid(model, ws, grid, dt, nm, [&](size_t g) { fm[g] = fe(ws.x.data()); })) return;

    bool finite = true;
    for (size_t g = 0; g < grid.size(); ++g) {
      const double dv = (fp[g] - fm[g]) * scale;
      if (!std::isfinite(dv)) finite = false;
      out.diffs[g][static_cast<size_t>(i)] = dv;
    }
    if (finite) out.keep[static_cast<size_t>(i)] = 1;
  });
  return out;
}

McEstimate estimate_from(const PairedSeries& ps, size_t g, std::uint64_t seed, long n_paths) {
  const Moments m = moments(ps.diffs[g], ps.keep);
  if (m.n < 2) throw Error(Errc::numeric, "NonFinite: fewer than 2 paths survived");
  McEstimate est;
  est.mean = m.mean;
  est.stderr_ = m.stderr_;
  est.n_paths = m.n;
  est.seed = seed;
  est.discarded = n_paths - m.n;
  return est;
}

}  // namespace

std::vector<McEstimate> directional_derivative_series(const SdeModel& model, const ScalarFunc& f,
                                                      std::span<const double> x,
                                                      std::span<const double> t_grid,
                                                      const VectorField& W, double h, long n_paths,
                                                      double dt, std::uint64_t seed) {
  if (!(h >= 1e-4 && h <= 1e-1))
    throw Error(Errc::invalid_argument, "finite-difference step must lie in [1e-4, 1e-1]");
  if (static_cast<int>(x.size()) != model.dim)
    throw Error(Errc::dimension_mismatch, "start point dimension mismatch");
  const std::vector<double> xp = flow(W, x, h);
  const std::vector<double> xm = flow(W, x, -h);
  const PairedSeries ps =
      paired_series(model, f, xp, xm, t_grid, n_paths, dt, seed, 1.0 / (2.0 * h));
  std::vector<McEstimate> out;
  out.reserve(t_grid.size());
  for (size_t g = 0; g < t_grid.size(); ++g) out.push_back(estimate_from(ps, g, seed, n_paths));
  return out;
}

McEstimate directional_derivative(const SdeModel& model, const ScalarFunc& f,
                                  std::span<const double> x, double t, const VectorField& W,
                                  double h, long n_paths, double dt, std::uint64_t seed) {
  const double grid[1] = {t};
  return directional_derivative_series(model, f, x, grid, W, h, n_paths, dt, seed)[0];
}

GammaValue evaluate_gamma(const SdeModel& model, std::span<const double> a,
                          const std::vector<VectorField>& basis_fields, const ScalarFunc& f,
                          std::span<const double> x, double t, double h, long n_paths, double dt,
                          std::uint64_t seed) {
  if (basis_fields.empty()) throw Error(Errc::invalid_argument, "basis must be nonempty");
  if (a.size() != basis_fields.size())
    throw Error(Errc::dimension_mismatch, "one weight per basis field required");
  GammaValue g;
  for (size_t b = 0; b < basis_fields.size(); ++b) {
    const McEstimate est =
        directional_derivative(model, f, x, t, basis_fields[b], h, n_paths, dt, seed);
    g.value += a[b] * est.mean * est.mean;
    g.stderr_ += a[b] * 2.0 * std::fabs(est.mean) * est.stderr_;
  }
  return g;
}

DecayEstimate fit_decay(std::span<const double> times, std::span<const double> values,
                        std::span<const double> stderrs) {
  if (times.size() != values.size())
    throw Error(Errc::dimension_mismatch, "times/values length mismatch");
  check_grid(times);
  DecayEstimate out;
  out.times.assign(times.begin(), times.end());
  out.values.assign(values.begin(), values.end());
  if (!stderrs.empty()) {
    if (stderrs.size() != values.size())
      throw Error(Errc::dimension_mismatch, "stderrs length mismatch");
    out.stderrs.assign(stderrs.begin(), stderrs.end());
  } else {
    out.stderrs.assign(values.size(), 0.0);
  }

  std::vector<double> ts, ys;
  for (size_t i = 0; i < values.size(); ++i) {
    if (values[i] > 0.0) {
      ts.push_back(times[i]);
      ys.push_back(std::log(values[i]));
    }
  }
  const size_t n = ts.size();
  if (n < 4)
    throw Error(Errc::invalid_argument,
                "InsufficientPositiveValues: need at least 4 strictly positive values");
  out.n_used = static_cast<int>(n);

  const double tbar = kahan_sum(ts) / static_cast<double>(n);
  const double ybar = kahan_sum(ys) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = ts[i] - tbar;
    const double dy = ys[i] - ybar;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  const double slope = sxy / sxx;
  out.fitted_exponent = slope == 0.0 ? 0.0 : -slope;

  double ssr = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double r = (ys[i] - ybar) - slope * (ts[i] - tbar);
    ssr += r * r;
  }
  if (ssr < 0.0) ssr = 0.0;
  out.r_squared = syy > 0.0 ? std::max(0.0, 1.0 - ssr / syy) : 1.0;

  // 97.5% Student quantiles for the 95% interval; large samples fall back
  // to the normal value.
  static const double kT975[30] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306,
                                   2.262,  2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
                                   2.110,  2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
                                   2.060,  2.056, 2.052, 2.048, 2.045, 2.042};
  const long dof = static_cast<long>(n) - 2;
  const double q = dof >= 1 && dof <= 30 ? kT975[dof - 1] : 1.96;
  const double s2 = dof >= 1 ? ssr / static_cast<double>(dof) : 0.0;
  const double se = std::sqrt(s2 / sxx);
  out.ci_low = out.fitted_exponent - q * se;
  out.ci_high = out.fitted_exponent + q * se;
  return out;
}

DecayEstimate check_reachability_contraction(const SdeModel& model, const ScalarFunc& f,
                                             std::span<const double> x,
                                             const std::vector<std::pair<VectorField, double>>& chain,
                                             std::span<const double> t_grid, long n_paths,
                                             double dt, std::uint64_t seed) {
  if (static_cast<int>(x.size()) != model.dim)
    throw Error(Errc::dimension_mismatch, "start point dimension mismatch");
  std::vector<double> y(x.begin(), x.end());
  for (const auto& [field, duration] : chain) y = flow(field, y, duration);

  const PairedSeries ps = paired_series(model, f, x, y, t_grid, n_paths, dt, seed, 1.0);
  DecayEstimate out;
  out.times.assign(t_grid.begin(), t_grid.end());
  for (size_t g = 0; g < t_grid.size(); ++g) {
    const McEstimate est = estimate_from(ps, g, seed, n_paths);
    out.values.push_back(std::fabs(est.mean));
    out.stderrs.push_back(est.stderr_);
  }
  size_t positives = 0;
  for (double v : out.values)
    if (v > 0.0) ++positives;
  if (positives >= 4) {
    const DecayEstimate fit = fit_decay(out.times, out.values, out.stderrs);
    out.fitted_exponent = fit.fitted_exponent;
    out.ci_low = fit.ci_low;
    out.ci_high = fit.ci_high;
    out.r_squared = fit.r_squared;
    out.n_used = fit.n_used;
  }
  return out;
}

}  // namespace ufg
