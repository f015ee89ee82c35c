#ifndef UFGKIT_UFGCHECK_HPP
#define UFGKIT_UFGCHECK_HPP

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ufgkit/liealg.hpp"

namespace ufg {

/// Row set: for each basis representative g and i in 0..d with
/// ||g*i|| > m there is a row of coefficient functions phi over the basis,
/// meaning V_{g*i} = sum_b phi[b] * basis_field[b]. In-range brackets are
/// covered by the hierarchy expansion map and carry no explicit rows.
struct UfgCertificate {
  int m = 0;
  std::map<MultiIndex, std::vector<Expr>> rows;
  bool verified = false;

  struct PhiBound {
    MultiIndex row;
    int basis = 0;
    bool bounded = false;
    double sup = 0.0;          // parameter-free sup bound (params bound at check time)
    bool deriv_bounded = false;  // all V_j phi bounded, j = 1..d
  };
  std::vector<PhiBound> boundedness;
};

enum class CertIssue { missing_row, residual_nonzero, unbounded_phi };

struct VerifyIssue {
  CertIssue kind;
  MultiIndex alpha;
  int detail = -1;  // offending component (residual) or basis index (phi)
};

struct VerifyReport {
  bool verified = false;
  std::vector<VerifyIssue> issues;
  bool zero_check_suspicious = false;
};

/// Checks every required overflow row symbolically (residual must be the
/// zero field componentwise after the trig rewrite) and the boundedness
/// of each phi and V_j phi. Fills cert.verified and cert.boundedness.
VerifyReport verify_certificate(const BracketHierarchy& h, UfgCertificate& cert,
                                std::span<const double> param_values);

/// Coefficient-function search space: products of parameter monomials
/// (harvested from the target) and trig monomials of total degree
/// <= trig_degree (degree 0 = constants-times-parameters).
struct Ansatz {
  int trig_degree = 0;
};

struct SolveOutcome {
  bool found = false;
  UfgCertificate cert;
  double residual = 0.0;      // least-squares residual of the first failing row
  MultiIndex failed_alpha;    // row that could not be matched
};

/// Solves for certificate rows by matching canonical-form coefficients
/// (least squares, pivot tolerance 1e-10), snaps near-rational solutions,
/// and re-verifies symbolically. Requires the hierarchy built with the
/// same m (overflow brackets live in its extended table).
SolveOutcome solve_certificate(const BracketHierarchy& h, int m, const Ansatz& ansatz,
                               std::span<const double> param_values);

enum class DilationStatus { ok, not_proportional, non_negative_factor };

struct DilationCertificate {
  DilationStatus status = DilationStatus::ok;
  MultiIndex failed;                  // set when status != ok
  std::vector<Expr> factors;          // c_alpha per basis index, [V_alpha,V_0] = c_alpha V_alpha
  std::vector<double> sup_factors;    // signed sup bound of bound c_alpha
  double lambda0 = 0.0;               // min over basis of -sup
};

/// Diagonal dilation check over the deduplicated basis. Proportionality
/// is decided by expanding [V_alpha, V_0] over the single-field basis
/// {V_alpha} with a constants-then-trig ansatz; the factor's signed sup
/// must be strictly negative for every alpha.
DilationCertificate check_dilation(const BracketHierarchy& h,
                                   std::span<const double> param_values);

struct V0Decomposition {
  bool ok = false;
  std::vector<Expr> coeff;            // over the basis of A_2 when ok
  std::vector<int> residual_components;
  double residual = 0.0;
};

/// Tries V_0 = sum_{beta in A_2} phi_beta V_beta with bounded phi.
V0Decomposition check_v0_condition(const BracketHierarchy& h,
                                   std::span<const double> param_values);

/// Shared solver: target = sum_b coeff[b] * fields[b] with coeff in
/// span{param monomials x trig monomials <= trig_degree}. Returns
/// std::nullopt when no coefficient choice matches symbolically;
/// *residual then holds the least-squares residual norm.
std::optional<std::vector<Expr>> expand_in_basis(const std::vector<VectorField>& fields,
                                                 const VectorField& target,
                                                 const VarSpace& space, int trig_degree,
                                                 double* residual);

/// Dense basis expansion of V_{rep*i}: the hierarchy expansion when the
/// result stays in A_m, the certificate row otherwise (rep must be a
/// basis representative).
std::vector<Expr> phi_row_for(const BracketHierarchy& h, const UfgCertificate& cert,
                              const MultiIndex& rep, int i);

/// Dense basis expansion of V_{rep*j*j}, composed from first-order rows:
/// phi_{a*j*j,c} = sum_b phi_{a*j,b} psi^{b*j}_c - V_j phi_{a*j,c}.
std::vector<Expr> phi_row_second(const BracketHierarchy& h, const UfgCertificate& cert,
                                 const MultiIndex& rep, int j);

}  // namespace ufg

#endif
