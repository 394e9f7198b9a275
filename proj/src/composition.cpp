#include "stochsym/composition.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "stochsym/error.hpp"

namespace stochsym {

namespace {

void require_weights(std::size_t count, std::span<const double> mu) {
  if (count == 0) throw Error(Errc::DimensionMismatch, "certs", "at least one subsystem required");
  if (mu.size() != count) throw Error(Errc::DimensionMismatch, "mu", "one weight per subsystem required");
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!(mu[i] > 0.0)) throw Error(Errc::WeightNotPositive, "mu", "weights must be positive", static_cast<Index>(i));
  }
}

void append_block(std::vector<Triplet>& trips, const Matrix& block, double weight, Index r0, Index c0) {
  for (Index j = 0; j < block.cols(); ++j)
    for (Index i = 0; i < block.rows(); ++i)
      if (block(i, j) != 0.0) trips.emplace_back(r0 + i, c0 + j, weight * block(i, j));
}

bool is_scalar_identity(const Matrix& m, double& value) {
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  value = m(0, 0);
  return (m - value * Matrix::Identity(m.rows(), m.cols())).isZero(0.0);
}

}  // namespace

bool has_full_state_output(const AffineSystem& sys) {
  if (sys.C1.rows() != sys.C1.cols()) return false;
  return Eigen::FullPivLU<Matrix>(sys.C1).isInvertible();
}

SparseMatrix build_x_cmp(std::span<const StorageCertificate> certs, std::span<const double> mu) {
  require_weights(certs.size(), mu);
  Index p_total = 0;
  Index q_total = 0;
  for (const auto& c : certs) {
    p_total += c.Xbar11.rows();
    q_total += c.Xbar22.rows();
  }
  std::vector<Triplet> trips;
  Index p_at = 0;
  Index q_at = 0;
  for (std::size_t i = 0; i < certs.size(); ++i) {
    const auto& c = certs[i];
    append_block(trips, c.Xbar11, mu[i], p_at, p_at);
    append_block(trips, c.Xbar12, mu[i], p_at, p_total + q_at);
    append_block(trips, c.Xbar21, mu[i], p_total + q_at, p_at);
    append_block(trips, c.Xbar22, mu[i], p_total + q_at, p_total + q_at);
    p_at += c.Xbar11.rows();
    q_at += c.Xbar22.rows();
  }
  SparseMatrix out(p_total + q_total, p_total + q_total);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

LmiReport check_compositional_lmi(const SparseMatrix& M, const SparseMatrix& X_cmp) {
  const Index q = M.cols();
  if (X_cmp.rows() != X_cmp.cols() || X_cmp.rows() != M.rows() + q) {
    throw Error(Errc::DimensionMismatch, "X_cmp", "[M; I] is incompatible with X_cmp");
  }
  LmiReport rep;
  if (q == 0) {
    rep.ok = true;
    rep.tolerance = kPsdRelTol;
    return rep;
  }
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(M.nonZeros() + q));
  for (Index k = 0; k < M.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(M, k); it; ++it) trips.emplace_back(it.row(), it.col(), it.value());
  for (Index i = 0; i < q; ++i) trips.emplace_back(M.rows() + i, i, 1.0);
  SparseMatrix T(M.rows() + q, q);
  T.setFromTriplets(trips.begin(), trips.end());

  const SparseMatrix XT = X_cmp * T;
  const SparseMatrix S_sparse = T.transpose() * XT;
  Matrix S = Matrix(S_sparse);
  S = 0.5 * (S + S.transpose());
  rep.lambda_max = max_eigenvalue(S);
  rep.margin = -rep.lambda_max;
  rep.tolerance = psd_tolerance(S);
  rep.ok = rep.lambda_max <= rep.tolerance;
  return rep;
}

ScalarBlocks scalar_block_params(std::span<const StorageCertificate> certs, std::span<const double> mu) {
  require_weights(certs.size(), mu);
  ScalarBlocks out;
  bool first = true;
  for (std::size_t i = 0; i < certs.size(); ++i) {
    const auto& c = certs[i];
    double a = 0.0;
    double d = 0.0;
    if (!is_scalar_identity(c.Xbar11, a) || !is_scalar_identity(c.Xbar22, d) || !c.Xbar12.isZero(0.0) ||
        !c.Xbar21.isZero(0.0)) {
      throw Error(Errc::StructureMismatch, "Xbar", "blocks are not scalar identities with zero coupling",
                  static_cast<Index>(i));
    }
    a *= mu[i];
    d *= mu[i];
    if (first) {
      out = {a, d};
      first = false;
    } else if (a != out.a || d != out.d) {
      throw Error(Errc::StructureMismatch, "Xbar", "weighted blocks differ across subsystems", static_cast<Index>(i));
    }
  }
  return out;
}

GershgorinVerdict gershgorin_fast_check(const SparseMatrix& M, const ScalarBlocks& blocks) {
  if (blocks.a <= 0.0) return blocks.d <= 0.0 ? GershgorinVerdict::Ok : GershgorinVerdict::Inconclusive;
  Vector row_sums = Vector::Zero(M.rows());
  Vector col_sums = Vector::Zero(M.cols());
  for (Index k = 0; k < M.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(M, k); it; ++it) {
      row_sums[it.row()] += std::abs(it.value());
      col_sums[it.col()] += std::abs(it.value());
    }
  }
  const double r_row = row_sums.size() ? row_sums.maxCoeff() : 0.0;
  const double r_col = col_sums.size() ? col_sums.maxCoeff() : 0.0;
  return blocks.a * r_row * r_col + blocks.d <= 0.0 ? GershgorinVerdict::Ok : GershgorinVerdict::Inconclusive;
}

NetworkSsf compose_ssf(std::span<const SstfConstants> constants, std::span<const double> mu, AlphaMode mode,
                       std::span<const bool> full_state_output) {
  require_weights(constants.size(), mu);
  NetworkSsf out;
  out.mode = mode;
  double inv_sum = 0.0;
  double stacked = std::numeric_limits<double>::infinity();
  double rho_sq = 0.0;
  for (std::size_t i = 0; i < constants.size(); ++i) {
    const auto& c = constants[i];
    if (!c.rho_is_linear) throw Error(Errc::NonLinearRho, "rho_ext", "subsystem gain is not linear", static_cast<Index>(i));
    if (!c.alpha_is_quadratic) {
      throw Error(Errc::NonQuadraticAlpha, "alpha", "subsystem lower bound is not quadratic", static_cast<Index>(i));
    }
    out.kappa = std::max(out.kappa, c.kappa);
    out.psi += mu[i] * c.psi;
    rho_sq += (mu[i] * c.rho_ext_slope) * (mu[i] * c.rho_ext_slope);
    inv_sum += 1.0 / (c.alpha_coeff * mu[i]);
    stacked = std::min(stacked, mu[i] * c.alpha_coeff);
  }
  out.rho_ext_slope = std::sqrt(rho_sq);
  if (mode == AlphaMode::StackedQuadratic) {
    if (full_state_output.size() != constants.size() ||
        !std::all_of(full_state_output.begin(), full_state_output.end(), [](bool b) { return b; })) {
      throw Error(Errc::StructureMismatch, "alpha_mode",
                  "stacked-quadratic aggregation needs square nonsingular external output maps");
    }
    out.alpha_coeff = stacked;
  } else {
    out.alpha_coeff = 1.0 / inv_sum;
  }
  return out;
}

CompositionResult compose_network(std::span<const StorageCertificate> certs,
                                  std::span<const SstfConstants> constants, const InterconnectionSpec& ic,
                                  AlphaMode mode, std::span<const bool> full_state_output) {
  CompositionResult out;
  out.X_cmp = build_x_cmp(certs, ic.mu);
  out.q_tilde = ic.total_internal_outputs();
  out.lmi = check_compositional_lmi(ic.M, out.X_cmp);
  try {
    out.gershgorin = gershgorin_fast_check(ic.M, scalar_block_params(certs, ic.mu));
  } catch (const Error& e) {
    if (e.code() != Errc::StructureMismatch) throw;
  }
  if (!out.lmi.ok) {
    throw Error(Errc::ConditionViolated, "Con_1a",
                "[M; I]ᵀ X_cmp [M; I] has eigenvalue " + std::to_string(out.lmi.lambda_max) + " > 0");
  }
  out.ssf = compose_ssf(constants, ic.mu, mode, full_state_output);
  return out;
}

}  // namespace stochsym
