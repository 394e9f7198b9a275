#include "stochsym/certificates.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>
#include <string>

#include "stochsym/error.hpp"

namespace stochsym {

namespace {

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

bool is_diagonal(const Matrix& m) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (i != j && m(i, j) != 0.0) return false;
  return true;
}

void require_dims(const Matrix& m, Index rows, Index cols, const char* field) {
  if (m.rows() != rows || m.cols() != cols) {
    throw Error(Errc::DimensionMismatch, field,
                "expected " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
                    std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

void require_positive_definite(const Matrix& M_bar) {
  if ((M_bar - M_bar.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + M_bar.cwiseAbs().maxCoeff())) {
    throw Error(Errc::NotPositiveDefinite, "M_bar", "matrix is not symmetric");
  }
  const double lmin = min_eigenvalue(M_bar);
  if (!(lmin > 0.0)) {
    throw Error(Errc::NotPositiveDefinite, "M_bar", "minimum eigenvalue " + std::to_string(lmin) + " <= 0");
  }
}

MarginReport psd_report(Matrix slack) {
  slack = symmetrize(slack);
  MarginReport rep;
  rep.margin = slack.size() == 0 ? 0.0 : min_eigenvalue(slack);
  rep.tolerance = psd_tolerance(slack);
  rep.ok = rep.margin >= -rep.tolerance;
  rep.slack = std::move(slack);
  return rep;
}

}  // namespace

double StorageCertificate::decay_factor() const { return std::exp(-kappa_tilde * tau); }

double psd_tolerance(const Matrix& mat) {
  const double maxabs = mat.size() == 0 ? 0.0 : mat.cwiseAbs().maxCoeff();
  return kPsdRelTol * (1.0 + maxabs);
}

double min_eigenvalue(const Matrix& symmetric) {
  if (symmetric.rows() == 1) return symmetric(0, 0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double max_eigenvalue(const Matrix& symmetric) {
  if (symmetric.rows() == 1) return symmetric(0, 0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

MarginReport check_lyapunov(const AffineSystem& sys, const Matrix& M_bar, const Matrix& K, double kappa_tilde) {
  const Index n = sys.n();
  require_dims(M_bar, n, n, "M_bar");
  require_dims(K, sys.m(), n, "K");
  require_positive_definite(M_bar);
  const Matrix closed = sys.A + sys.B * K;
  return psd_report(-(closed.transpose() * M_bar + M_bar * closed) - kappa_tilde * M_bar);
}

GeometricReport check_geometric(const AffineSystem& sys, const Matrix& P, const Matrix& Q, const Matrix& H) {
  require_dims(P, sys.n(), sys.n(), "P");
  require_dims(Q, sys.m(), sys.n(), "Q");
  require_dims(H, sys.m(), sys.p(), "H");
  const Matrix ap = sys.A * P;
  GeometricReport rep;
  rep.residual_bq_ap = (sys.B * Q - ap).norm();
  rep.residual_d_bh = (sys.D - sys.B * H).norm();
  rep.bq_ap_ok = rep.residual_bq_ap <= kEqRelTol * (1.0 + ap.norm());
  rep.d_bh_ok = rep.residual_d_bh <= kEqRelTol * (1.0 + sys.D.norm());
  rep.ok = rep.bq_ap_ok && rep.d_bh_ok;
  return rep;
}

Matrix solve_lyapunov(const Matrix& A, const Matrix& W) {
  const Index n = A.rows();
  const Matrix I = Matrix::Identity(n, n);
  // vec(AᵀX + XA) = (I ⊗ Aᵀ + Aᵀ ⊗ I) vec(X)
  Matrix L = Matrix::Zero(n * n, n * n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      L.block(i * n, j * n, n, n) += I(i, j) * A.transpose();
      L.block(i * n, j * n, n, n) += A(j, i) * I;
    }
  }
  const Vector rhs = -Eigen::Map<const Vector>(W.data(), n * n);
  const Vector x = L.fullPivLu().solve(rhs);
  return symmetrize(Eigen::Map<const Matrix>(x.data(), n, n));
}

Candidates solve_candidates(const AffineSystem& sys, const CandidateTargets& targets) {
  validate_system(sys);
  const Index n = sys.n();
  const Index m = sys.m();
  if (!(targets.kappa_tilde > 0.0)) throw Error(Errc::InvalidSpec, "kappa_tilde", "target decay rate must be > 0");

  Candidates out;
  out.P = targets.P.value_or(Matrix::Identity(n, n));
  require_dims(out.P, n, n, "P");
  const double half_rate = 0.5 * (targets.kappa_tilde + targets.margin);

  if (m == n && is_diagonal(sys.A) && is_diagonal(sys.B)) {
    out.M_bar = Matrix::Identity(n, n);
    out.K = Matrix::Zero(m, n);
    for (Index i = 0; i < n; ++i) {
      const double a = sys.A(i, i);
      const double b = sys.B(i, i);
      if (b != 0.0) {
        out.K(i, i) = (-half_rate - a) / b;
      } else if (a > -half_rate) {
        throw Error(Errc::Infeasible, "Con_1",
                    "coordinate " + std::to_string(i) + " is unactuated and decays slower than the target rate");
      }
    }
  } else {
    // Shifted-controllability Lyapunov rule: with (A + λI)W + W(A + λI)ᵀ = 2BBᵀ and K = −BᵀW⁻¹,
    // the closed loop satisfies A_cl W + W A_clᵀ = −2λW, so M̄ = W⁻¹ certifies rate 2λ.
    Eigen::EigenSolver<Matrix> eig(sys.A, false);
    const double min_re = eig.eigenvalues().real().minCoeff();
    double lambda = std::max(half_rate, -min_re + 0.05 * (1.0 + std::abs(half_rate)));
    const Matrix BBt = sys.B * sys.B.transpose();
    bool found = false;
    for (int attempt = 0; attempt < 30 && !found; ++attempt, lambda *= 2.0) {
      const Matrix shifted = -(sys.A + lambda * Matrix::Identity(n, n));
      const Matrix W = solve_lyapunov(shifted.transpose(), 2.0 * BBt);
      if (!W.allFinite()) continue;
      Eigen::SelfAdjointEigenSolver<Matrix> es(W);
      if (!(es.eigenvalues()(0) > 1e-12 * std::max(1.0, es.eigenvalues()(n - 1)))) break;
      Matrix M_bar = symmetrize(W.inverse());
      M_bar /= max_eigenvalue(M_bar);
      const Matrix K = -sys.B.transpose() * W.inverse();
      if (check_lyapunov(sys, M_bar, K, targets.kappa_tilde).ok) {
        out.M_bar = std::move(M_bar);
        out.K = K;
        found = true;
      }
    }
    if (!found) {
      throw Error(Errc::Infeasible, "Con_1", "(A, B) could not be stabilized to the requested decay rate");
    }
  }

  const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(sys.B);
  out.Q = cod.solve(sys.A * out.P);
  out.H = sys.p() > 0 ? Matrix(cod.solve(sys.D)) : Matrix::Zero(m, 0);
  const GeometricReport geo = check_geometric(sys, out.P, out.Q, out.H);
  if (!geo.bq_ap_ok) throw Error(Errc::Infeasible, "Con_2", "im(AP) is not contained in im(B)");
  if (!geo.d_bh_ok) throw Error(Errc::Infeasible, "Con_3", "im(D) is not contained in im(B)");
  return out;
}

void validate_certificate(const StorageCertificate& cert, const AffineSystem& sys) {
  const Index n = sys.n();
  const Index m = sys.m();
  const Index p = sys.p();
  const Index q2 = sys.q2();
  require_dims(cert.M_bar, n, n, "M_bar");
  require_dims(cert.K, m, n, "K");
  require_dims(cert.P, n, n, "P");
  require_dims(cert.Q, m, n, "Q");
  require_dims(cert.H, m, p, "H");
  require_dims(cert.Xbar11, p, p, "Xbar11");
  require_dims(cert.Xbar12, p, q2, "Xbar12");
  require_dims(cert.Xbar21, q2, p, "Xbar21");
  require_dims(cert.Xbar22, q2, q2, "Xbar22");
  require_positive_definite(cert.M_bar);
  auto symmetric = [](const Matrix& a, const Matrix& b) { return (a - b.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + a.cwiseAbs().maxCoeff()); };
  if ((p > 0 && !symmetric(cert.Xbar11, cert.Xbar11)) || (q2 > 0 && !symmetric(cert.Xbar22, cert.Xbar22)) ||
      (p > 0 && q2 > 0 && !symmetric(cert.Xbar21, cert.Xbar12))) {
    throw Error(Errc::InvalidCertificate, "Xbar", "supply-rate matrix must be symmetric (Xbar21 = Xbar12ᵀ)");
  }
  if (!(cert.kappa_tilde > 0.0)) throw Error(Errc::InvalidCertificate, "kappa_tilde", "must be > 0");
  if (!(cert.tau > 0.0)) throw Error(Errc::InvalidCertificate, "tau", "must be > 0");
  if (!(cert.pi > 0.0)) throw Error(Errc::InvalidCertificate, "pi", "must be > 0");
  if (!(cert.eta_bar > 0.0 && cert.eta_bar_p > 0.0 && cert.eta_bar_pp > 0.0)) {
    throw Error(Errc::InvalidCertificate, "eta_bar", "slack constants must be > 0");
  }
  if (!(cert.delta >= 0.0)) throw Error(Errc::InvalidCertificate, "delta", "must be >= 0");
  if (cert.gamma_slope && !(*cert.gamma_slope >= 0.0)) {
    throw Error(Errc::InvalidCertificate, "gamma_slope", "must be >= 0");
  }
}

MarginReport check_dissipativity_lmi(const StorageCertificate& cert, const AffineSystem& sys) {
  const double decay = cert.decay_factor();
  if (!(cert.kappa_bar > 0.0 && cert.kappa_bar < 1.0 - decay)) {
    throw Error(Errc::KappaBarOutOfRange, "kappa_bar",
                "need 0 < kappa_bar < 1 - exp(-kappa_tilde*tau) = " + std::to_string(1.0 - decay));
  }
  const Index n = sys.n();
  const Index p = sys.p();
  if (sys.m() != n) {
    throw Error(Errc::DimensionMismatch, "B", "the supply-rate inequality needs a square input matrix (m = n)");
  }
  const double scale = cert.pi * decay * cert.tau;

  Matrix lhs = Matrix::Zero(n + p, n + p);
  lhs.topLeftCorner(n, n) = scale * sys.B.transpose() * cert.M_bar * sys.B;
  lhs.bottomRightCorner(p, p) = scale * sys.D.transpose() * cert.M_bar * sys.D;

  Matrix rhs(n + p, n + p);
  rhs.topLeftCorner(n, n) = cert.kappa_bar * cert.M_bar + sys.C2.transpose() * cert.Xbar22 * sys.C2;
  rhs.topRightCorner(n, p) = sys.C2.transpose() * cert.Xbar21;
  rhs.bottomLeftCorner(p, n) = cert.Xbar12 * sys.C2;
  rhs.bottomRightCorner(p, p) = cert.Xbar11;

  return psd_report(rhs - lhs);
}

double gamma_slope_bound(const StorageCertificate& cert, const AffineSystem& sys) {
  const Box& box = sys.state_box;
  if (!box.lower.allFinite() || !box.upper.allFinite()) {
    throw Error(Errc::UnboundedStateBox, "state_box", "state box must be compact");
  }
  const double p_norm = spectral_norm(cert.P);
  if (p_norm == 0.0) return 0.0;
  // x − P x″ over the box, by interval arithmetic.
  const Box image = linear_image(cert.P, box);
  const Vector lo = box.lower - image.upper;
  const Vector hi = box.upper - image.lower;
  const double spread = lo.cwiseAbs().cwiseMax(hi.cwiseAbs()).norm();
  const double diameter = box.widths().norm();
  const double lmax = max_eigenvalue(symmetrize(cert.M_bar));
  return 2.0 * lmax * p_norm * spread + lmax * p_norm * p_norm * diameter;
}

SstfConstants derive_constants(const StorageCertificate& cert, const AffineSystem& sys,
                               const DiscretizationSpec& disc, double w_hat_bound) {
  validate_system(sys);
  validate_discretization(sys, disc);
  validate_certificate(cert, sys);
  if (std::abs(cert.tau - disc.tau) > 1e-12 * disc.tau) {
    throw Error(Errc::InvalidCertificate, "tau", "certificate sampling time differs from the discretization");
  }
  if (w_hat_bound < 0.0) throw Error(Errc::NegativeInput, "w_hat_bound", "must be >= 0");

  if (!check_lyapunov(sys, cert.M_bar, cert.K, cert.kappa_tilde).ok) {
    throw Error(Errc::ConditionViolated, "Con_1", "Lyapunov decay inequality fails");
  }
  const GeometricReport geo = check_geometric(sys, cert.P, cert.Q, cert.H);
  if (!geo.bq_ap_ok) throw Error(Errc::ConditionViolated, "Con_2", "BQ != AP");
  if (!geo.d_bh_ok) throw Error(Errc::ConditionViolated, "Con_3", "D != BH");
  if (!check_dissipativity_lmi(cert, sys).ok) {
    throw Error(Errc::ConditionViolated, "Eq_8a", "supply-rate matrix inequality fails");
  }

  const double decay = cert.decay_factor();
  const double L = cert.gamma_slope ? *cert.gamma_slope : gamma_slope_bound(cert, sys);
  const double eta = cert.eta_bar;
  const double eta_p = cert.eta_bar_p;
  const double eta_pp = cert.eta_bar_pp;

  SstfConstants out;
  out.gamma_slope = L;
  const Matrix c1tc1 = sys.C1.transpose() * sys.C1;
  out.alpha_coeff = min_eigenvalue(symmetrize(cert.M_bar)) / max_eigenvalue(c1tc1);
  out.kappa = cert.kappa_bar + decay;

  const double noise = (sys.G.transpose() * cert.M_bar * sys.G).trace();
  const double offset = sys.b.dot(cert.M_bar * sys.b);
  const double base = decay * cert.tau * (noise + cert.pi * offset);
  const double tr_r = disc.R_tilde.size() == 0 ? 0.0 : std::sqrt((disc.R_tilde.transpose() * disc.R_tilde).trace());
  const double d_w = spectral_norm(disc.D_tilde) * w_hat_bound;

  if (cert.delta == 0.0) {
    if (disc.non_stochastic() && disc.internal_free()) {
      out.rho_ext_slope = L;
      out.psi = base;
    } else {
      out.rho_ext_slope = L * (1.0 + eta) * (1.0 + eta_p);
      out.psi = base + L * (1.0 + 1.0 / eta) * tr_r + L * (1.0 + eta) * (1.0 + 1.0 / eta_p) * d_w;
    }
  } else {
    out.rho_ext_slope = L * (1.0 + 1.0 / eta) * (1.0 + eta_p) * (1.0 + eta_pp);
    out.psi = base + L * (1.0 + eta) * cert.delta + L * (1.0 + 1.0 / eta) * (1.0 + 1.0 / eta_p) * tr_r +
              L * (1.0 + 1.0 / eta) * (1.0 + eta_p) * (1.0 + 1.0 / eta_pp) * d_w;
  }
  return out;
}

double kappa_tilde_from(double kappa_bar, double kappa_target, double tau) {
  const double gap = kappa_target - kappa_bar;
  if (!(gap > 0.0 && gap < 1.0 && tau > 0.0)) {
    throw Error(Errc::InvalidSpec, "kappa_tilde_from", "need 0 < kappa - kappa_bar < 1 and tau > 0");
  }
  return -std::log(gap) / tau;
}

double storage_value(const StorageCertificate& cert, const Vector& x, const Vector& x_hat) {
  const Vector e = x - cert.P * x_hat;
  return e.dot(cert.M_bar * e);
}

}  // namespace stochsym
