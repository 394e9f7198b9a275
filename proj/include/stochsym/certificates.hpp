#pragma once

#include <optional>

#include "stochsym/model.hpp"

namespace stochsym {

/// Quadratic storage function S(x, x̂) = (x − P x̂)ᵀ M̄ (x − P x̂) together with the
/// data that makes it a storage certificate between a subsystem and its abstraction.
struct StorageCertificate {
  Matrix M_bar;  // n x n, symmetric positive definite
  Matrix K;      // m x n
  Matrix P;      // n x n
  Matrix Q;      // m x n
  Matrix H;      // m x p
  double kappa_tilde = 0.0;
  double tau = 0.0;
  double pi = 1.0;
  double kappa_bar = 0.0;
  Matrix Xbar11;  // p x p
  Matrix Xbar12;  // p x q2
  Matrix Xbar21;  // q2 x p
  Matrix Xbar22;  // q2 x q2
  double eta_bar = 1.0;
  double eta_bar_p = 1.0;
  double eta_bar_pp = 1.0;
  /// Slope of the linear concave majorant γ(s) = L_γ s. Computed by
  /// gamma_slope_bound() when absent.
  std::optional<double> gamma_slope;
  double delta = 0.0;

  double decay_factor() const;  // e^{-κ̃τ}
};

struct SstfConstants {
  double alpha_coeff = 0.0;  // α(s) = alpha_coeff · s²
  double kappa = 0.0;
  double rho_ext_slope = 0.0;  // ρ_ext(s) = rho_ext_slope · s
  double psi = 0.0;
  double gamma_slope = 0.0;
  bool alpha_is_quadratic = true;
  bool rho_is_linear = true;
};

/// Outcome of a semidefinite check: `margin` is the minimum eigenvalue of the
/// matrix required to be PSD and `ok` means margin >= -tolerance.
struct MarginReport {
  bool ok = false;
  double margin = 0.0;
  double tolerance = 0.0;
  Matrix slack;  // the matrix whose minimum eigenvalue is `margin`
};

struct GeometricReport {
  bool ok = false;
  double residual_bq_ap = 0.0;  // ‖BQ − AP‖_F
  double residual_d_bh = 0.0;   // ‖D − BH‖_F
  bool bq_ap_ok = false;
  bool d_bh_ok = false;
};

inline constexpr double kPsdRelTol = 1e-9;
inline constexpr double kEqRelTol = 1e-9;

/// 10⁻⁹ · (1 + max |entry|).
double psd_tolerance(const Matrix& mat);
double min_eigenvalue(const Matrix& symmetric);
double max_eigenvalue(const Matrix& symmetric);

/// −[(A+BK)ᵀM̄ + M̄(A+BK)] − κ̃M̄ ⪰ 0.
MarginReport check_lyapunov(const AffineSystem& sys, const Matrix& M_bar, const Matrix& K, double kappa_tilde);

/// BQ = AP and D = BH within the relative equality tolerance.
GeometricReport check_geometric(const AffineSystem& sys, const Matrix& P, const Matrix& Q, const Matrix& H);

struct CandidateTargets {
  double kappa_tilde = 0.0;
  /// Extra decay demanded beyond κ̃ (scalar closed form subtracts margin/2 from A+BK).
  double margin = 0.0;
  std::optional<Matrix> P;
};

struct Candidates {
  Matrix M_bar;
  Matrix K;
  Matrix P;
  Matrix Q;
  Matrix H;
};

/// Builds (M̄, K, P, Q, H) meeting the Lyapunov and geometric conditions, or
/// throws Error{Infeasible}.
Candidates solve_candidates(const AffineSystem& sys, const CandidateTargets& targets);

/// Solves Aᵀ X + X A = −W for X (A Hurwitz).
Matrix solve_lyapunov(const Matrix& A, const Matrix& W);

/// diag(πe^{−κ̃τ}τBᵀM̄B, πe^{−κ̃τ}τDᵀM̄D) ⪯ [κ̄M̄ + C₂ᵀX̄²²C₂, C₂ᵀX̄²¹; X̄¹²C₂, X̄¹¹].
/// Requires m = n. Throws KappaBarOutOfRange when κ̄ ∉ (0, 1 − e^{−κ̃τ}).
MarginReport check_dissipativity_lmi(const StorageCertificate& cert, const AffineSystem& sys);

/// Slope L_γ with S(x,x′) − S(x,x″) ≤ L_γ‖x′ − x″‖ on the state box.
double gamma_slope_bound(const StorageCertificate& cert, const AffineSystem& sys);

/// Structural invariants of a certificate (shapes, symmetry, positivity).
void validate_certificate(const StorageCertificate& cert, const AffineSystem& sys);

/// Runs every check and evaluates α, κ, ρ_ext, ψ. Throws
/// Error{ConditionViolated, subject = "Con_1" | "Con_2" | "Con_3" | "Eq_8a"} on failure.
SstfConstants derive_constants(const StorageCertificate& cert, const AffineSystem& sys,
                               const DiscretizationSpec& disc, double w_hat_bound);

/// κ̃ = −ln(κ − κ̄)/τ, the decay rate for which κ̄ + e^{−κ̃τ} = κ.
double kappa_tilde_from(double kappa_bar, double kappa_target, double tau);

/// S(x, x̂).
double storage_value(const StorageCertificate& cert, const Vector& x, const Vector& x_hat);

}  // namespace stochsym
