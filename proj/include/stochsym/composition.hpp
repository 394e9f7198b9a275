#pragma once

#include <span>
#include <vector>

#include "stochsym/certificates.hpp"

namespace stochsym {

enum class AlphaMode {
  General,          // α(s) = s² / Σ 1/(aᵢμᵢ)
  StackedQuadratic  // α(s) = minᵢ μᵢaᵢ · s², requires full-state external outputs
};

/// Network-level simulation-function constants.
struct NetworkSsf {
  double alpha_coeff = 0.0;
  double kappa = 0.0;
  double rho_ext_slope = 0.0;
  double psi = 0.0;
  AlphaMode mode = AlphaMode::General;
};

struct LmiReport {
  bool ok = false;
  double lambda_max = 0.0;
  double margin = 0.0;  // −lambda_max
  double tolerance = 0.0;
};

struct ScalarBlocks {
  double a = 0.0;  // X̄¹¹ = a·I (already weighted by μ)
  double d = 0.0;  // X̄²² = d·I (already weighted by μ)
};

enum class GershgorinVerdict { Ok, Inconclusive };

struct CompositionResult {
  SparseMatrix X_cmp;
  LmiReport lmi;
  std::optional<GershgorinVerdict> gershgorin;
  NetworkSsf ssf;
  Index q_tilde = 0;
};

/// [[blockdiag μᵢX̄ᵢ¹¹, blockdiag μᵢX̄ᵢ¹²], [blockdiag μᵢX̄ᵢ²¹, blockdiag μᵢX̄ᵢ²²]].
SparseMatrix build_x_cmp(std::span<const StorageCertificate> certs, std::span<const double> mu);

/// [M; I]ᵀ X_cmp [M; I] ⪯ 0, with ok iff λ_max ≤ tol_psd.
LmiReport check_compositional_lmi(const SparseMatrix& M, const SparseMatrix& X_cmp);

/// Extracts (a, d) when every weighted block is a scalar multiple of the identity with
/// zero off-diagonal blocks and identical across subsystems; throws StructureMismatch otherwise.
ScalarBlocks scalar_block_params(std::span<const StorageCertificate> certs, std::span<const double> mu);

/// a·MᵀM + d·I ⪯ 0 via the row/column-sum bound λ_max(MᵀM) ≤ ‖M‖₁‖M‖_∞.
GershgorinVerdict gershgorin_fast_check(const SparseMatrix& M, const ScalarBlocks& blocks);

/// Aggregates subsystem constants for V = Σ μᵢSᵢ. `full_state_output[i]` says whether C₁ᵢ is
/// square nonsingular; StackedQuadratic requires it for every subsystem.
NetworkSsf compose_ssf(std::span<const SstfConstants> constants, std::span<const double> mu, AlphaMode mode,
                       std::span<const bool> full_state_output);

/// Runs the whole composition stage.
CompositionResult compose_network(std::span<const StorageCertificate> certs,
                                  std::span<const SstfConstants> constants, const InterconnectionSpec& ic,
                                  AlphaMode mode, std::span<const bool> full_state_output);

bool has_full_state_output(const AffineSystem& sys);

}  // namespace stochsym
