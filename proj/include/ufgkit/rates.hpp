#ifndef UFGKIT_RATES_HPP
#define UFGKIT_RATES_HPP

#include <optional>
#include <span>
#include <vector>

#include "ufgkit/ufgcheck.hpp"

namespace ufg {

/// Sup constants of the certificate rows, per basis element, plus the
/// basis metadata the c/l formulas consume. Parameters are substituted
/// before taking sups, so everything here is numeric except the signed
/// diagonal sums (kept as bound Exprs until their signed sup is taken).
struct SupConstants {
  int d = 0;
  int m = 0;
  int dim = 0;  // state dimension, needed to take sups of bound rows
  std::vector<int> order;     // basis element lengths ||alpha||
  std::vector<bool> sq_ext;   // alpha == beta*j*j with j >= 1
  std::vector<double> J;      // sup over j>=1, beta of |phi_{alpha*j,beta}|
  std::vector<double> H;      // sup over j>=1, beta != alpha of |V_j phi_{alpha*j,beta}|
  std::vector<double> I;      // sup over j>=1, beta != alpha of |phi_{alpha*j*j,beta}|
  std::vector<Expr> diag_c;   // sum_j V_j phi_{alpha*j,alpha}, parameters bound
  std::vector<Expr> diag_l;   // sum_j phi_{alpha*j*j,alpha}, parameters bound
  int aggregate_J = 0;        // count of top-length alpha with J != 0

  size_t size() const { return order.size(); }
};

SupConstants compute_sup_constants(const BracketHierarchy& h, const UfgCertificate& cert,
                                   std::span<const double> param_values);

/// Positive weights of the quadratic form, one value per bracket length.
struct GammaCoefficients {
  std::vector<double> by_order;  // by_order[k-1] = a_k

  double a(int k) const { return by_order.at(static_cast<size_t>(k - 1)); }
};

/// Policy: a_1 = max(1, J+1); a_k = J + a_{k-1}^2 + 1. Strictness of the
/// recursion constraints holds by construction.
GammaCoefficients choose_gamma_coefficients(const SupConstants& s, int m);

struct GammaBreakdown {
  double gamma = 0.0;
  std::vector<double> c;  // per basis element
};

/// Second-order budget: c-values per basis element and
/// gamma = max(0, max c_alpha / a_alpha). Throws when the coefficient
/// recursion constraints are violated.
GammaBreakdown compute_gamma(const GammaCoefficients& a, const SupConstants& s);

struct ThresholdBreakdown {
  double threshold = 0.0;
  std::vector<double> l;  // per basis element
};

/// First-order budget: l-values and the lambda_0 admissibility threshold
/// max(0, max l_alpha / a_alpha).
ThresholdBreakdown compute_lambda0_threshold(const GammaCoefficients& a, const SupConstants& s);

struct RateReport {
  double gamma = 0.0;
  double lambda0_required = 0.0;   // threshold
  double lambda0_available = 0.0;  // from the dilation certificate
  double mu = 0.0;
  std::optional<double> lambda;    // present iff mu > gamma
  std::vector<double> c;           // per basis element
  std::vector<double> l;           // per basis element
};

/// mu = 2*lambda0 - threshold; lambda = mu - gamma when mu > gamma.
RateReport certify_rate(const DilationCertificate& dil, const GammaCoefficients& a,
                        const SupConstants& s);

struct OptimizeResult {
  RateReport report;
  std::vector<double> a;  // per basis element
  long evaluations = 0;
};

/// Per-term Young bookkeeping for m <= 2 systems with a dilation
/// certificate: every cross term is split with a closed-form epsilon
/// allocation, second-order squares -2a_b |V_j V_b f|^2 absorb exactly
/// their capacity, and a deterministic coordinate search over the a's
/// maximizes the certified rate within the evaluation budget. The search
/// region keeps a_alpha >= 2/mu_alpha for first-length elements and
/// a >= max(1, (max shorter a)^2) * 1.05 above, so returned parameters
/// witness the hand-proof constraints. Throws Error(unsupported) when
/// m > 2 (NotSmallSystem).
OptimizeResult optimize_small_system(const BracketHierarchy& h, const UfgCertificate& cert,
                                     const DilationCertificate& dil,
                                     std::span<const double> param_values, long budget);

}  // namespace ufg

#endif
