#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "stochsym/certificates.hpp"
#include "stochsym/error.hpp"

using namespace stochsym;
using namespace testing_helpers;

namespace {

AffineSystem scalar_system(double a, double b) {
  AffineSystem s = room_system();
  s.A = scalar(a);
  s.B = scalar(b);
  return s;
}

StorageCertificate room_certificate(double pi = 1.0) {
  StorageCertificate c;
  c.M_bar = scalar(1.0);
  c.K = scalar(-200.0);
  c.P = scalar(1.0);
  c.Q = scalar(-0.21);
  c.H = scalar(0.1);
  c.tau = 0.1;
  c.kappa_tilde = -std::log(0.001) / 0.1;
  c.pi = pi;
  c.kappa_bar = 0.499;
  const double e = c.decay_factor();
  c.Xbar11 = scalar(e * 0.1 * 0.05 * 0.05);
  c.Xbar12 = scalar(0.0);
  c.Xbar21 = scalar(0.0);
  c.Xbar22 = scalar(-1.0 * e * 0.1 * 0.01 * 0.01 * 50.0 * 50.0);
  c.gamma_slope = 2.0;
  return c;
}

DiscretizationSpec zero_disc(const AffineSystem& s, double tau = 0.1) {
  return DiscretizationSpec{tau, Matrix::Zero(s.n(), s.p()), Matrix::Zero(s.n(), s.noise_dim())};
}

}  // namespace

TEST_CASE("Lyapunov equality case has zero margin") {
  const auto r = check_lyapunov(scalar_system(-1, 0), scalar(1), scalar(0), 2.0);
  CHECK(r.ok);
  CHECK(r.margin == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("room feedback meets the decay rate") {
  const auto r = check_lyapunov(scalar_system(-0.105, 0.5), scalar(1), scalar(-140), 69.08);
  CHECK(r.ok);
  CHECK(r.margin == doctest::Approx(140.21 - 69.08));
}

TEST_CASE("unstable drift violates the Lyapunov inequality") {
  CHECK_FALSE(check_lyapunov(scalar_system(1, 0), scalar(1), scalar(0), 1.0).ok);
}

TEST_CASE("indefinite storage matrix is rejected") {
  CHECK_THROWS_AS(check_lyapunov(scalar_system(-1, 0), scalar(-1), scalar(0), 1.0), Error);
}

TEST_CASE("room geometric conditions hold") {
  const auto g = check_geometric(room_system(), scalar(1), scalar(-0.21), scalar(0.1));
  CHECK(g.ok);
  CHECK(g.residual_bq_ap < 1e-15);
  CHECK(g.residual_d_bh < 1e-15);
}

TEST_CASE("unactuated unstable coordinate fails BQ = AP") {
  AffineSystem s = scalar_system(1, 0);
  s.D = scalar(0.0);
  const auto g = check_geometric(s, scalar(1), scalar(123.0), scalar(0.0));
  CHECK_FALSE(g.bq_ap_ok);
  CHECK(g.residual_bq_ap == doctest::Approx(1.0));
}

TEST_CASE("room candidates from the scalar closed form") {
  const double kt = 69.08;
  const auto c = solve_candidates(room_system(), {kt, 0.0, std::nullopt});
  CHECK(c.M_bar(0, 0) == 1.0);
  CHECK(c.K(0, 0) <= -68.85 + 1e-9);
  CHECK(c.K(0, 0) == doctest::Approx((-kt / 2 + 0.105) / 0.5));
  CHECK(c.Q(0, 0) == doctest::Approx(-0.21));
  CHECK(c.H(0, 0) == doctest::Approx(0.1));
  CHECK(check_lyapunov(room_system(), c.M_bar, c.K, kt).ok);
}

TEST_CASE("integrator candidates") {
  AffineSystem s = scalar_system(0, 1);
  s.D = scalar(0.3);
  for (double slack : {0.0, 0.5, 3.0}) {
    const auto c = solve_candidates(s, {2.0, 2.0 * slack, std::nullopt});
    CHECK(c.K(0, 0) == doctest::Approx(-1.0 - slack));
    CHECK(c.Q(0, 0) == doctest::Approx(0.0));
    CHECK(c.H(0, 0) == doctest::Approx(0.3));
  }
}

TEST_CASE("unactuated unstable system is infeasible") {
  try {
    solve_candidates(scalar_system(0.5, 0.0), {1.0, 0.0, std::nullopt});
    FAIL("expected Infeasible");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::Infeasible);
  }
}

TEST_CASE("general candidates certify random square systems") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const Index n = 2 + trial % 3;
    AffineSystem s;
    s.A = random_matrix(rng, n, n, 2.0);
    s.B = random_matrix(rng, n, n, 1.0) + 1.5 * Matrix::Identity(n, n);
    s.C1 = Matrix::Identity(n, n);
    s.C2 = Matrix::Zero(0, n);
    s.D = random_matrix(rng, n, 1, 1.0);
    s.G = Matrix::Identity(n, n);
    s.b = Vector::Zero(n);
    s.state_box = make_box(Vector::Zero(n), Vector::Ones(n));
    s.input_box = s.state_box;
    s.internal_box = make_box(Vector::Zero(1), Vector::Ones(1));
    const double kt = 1.0 + trial % 5;
    const auto c = solve_candidates(s, {kt, 0.0, std::nullopt});
    CHECK(check_lyapunov(s, c.M_bar, c.K, kt).ok);
    CHECK(check_geometric(s, c.P, c.Q, c.H).ok);
  }
}

TEST_CASE("general path handles an unstable stabilizable pair") {
  AffineSystem s;
  s.A = (Matrix(2, 2) << 1.0, 2.0, 0.0, 3.0).finished();
  s.B = (Matrix(2, 2) << 0.0, 1.0, 1.0, 0.0).finished();
  s.C1 = Matrix::Identity(2, 2);
  s.C2 = Matrix::Zero(0, 2);
  s.D = Matrix::Zero(2, 0);
  s.G = Matrix::Identity(2, 2);
  s.b = Vector::Zero(2);
  s.state_box = make_box(Vector::Zero(2), Vector::Ones(2));
  s.input_box = s.state_box;
  s.internal_box = Box{Vector(0), Vector(0)};
  const auto c = solve_candidates(s, {10.0, 0.0, std::nullopt});
  CHECK(check_lyapunov(s, c.M_bar, c.K, 10.0).ok);
}

TEST_CASE("room supply-rate inequality holds with the expected slack") {
  const auto r = check_dissipativity_lmi(room_certificate(), room_system());
  CHECK(r.ok);
  CHECK(r.slack(0, 0) == doctest::Approx(0.49895).epsilon(1e-12));
  CHECK(std::abs(r.slack(1, 1)) < 1e-15);
  CHECK(r.slack(0, 1) == 0.0);
}

TEST_CASE("kappa_bar at zero is out of range") {
  StorageCertificate c = room_certificate();
  c.kappa_bar = 0.0;
  try {
    check_dissipativity_lmi(c, room_system());
    FAIL("expected KappaBarOutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::KappaBarOutOfRange);
  }
}

TEST_CASE("large Young constant breaks the internal-input block") {
  const auto r = check_dissipativity_lmi(room_certificate(4.0), room_system());
  CHECK_FALSE(r.ok);
  CHECK(r.slack(1, 1) < 0.0);
}

TEST_CASE("gamma slope on the room box") {
  StorageCertificate c = room_certificate();
  CHECK(gamma_slope_bound(c, room_system()) == doctest::Approx(3.0));
  c.P = scalar(0.0);
  CHECK(gamma_slope_bound(c, room_system()) == 0.0);
  AffineSystem s = room_system();
  s.state_box.upper[0] = INFINITY;
  CHECK_THROWS_AS(gamma_slope_bound(room_certificate(), s), Error);
}

TEST_CASE("gamma slope majorizes sampled increments") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 1 + trial % 3;
    AffineSystem s;
    s.A = -Matrix::Identity(n, n);
    s.B = Matrix::Identity(n, n);
    s.C1 = Matrix::Identity(n, n);
    s.C2 = Matrix::Zero(0, n);
    s.D = Matrix::Zero(n, 0);
    s.G = Matrix::Identity(n, n);
    s.b = Vector::Zero(n);
    const Vector lo = random_matrix(rng, n, 1, 3.0);
    s.state_box = make_box(lo, lo + Vector::Constant(n, 0.5 + u(rng)));
    s.input_box = s.state_box;
    s.internal_box = Box{Vector(0), Vector(0)};
    StorageCertificate c;
    const Matrix R = random_matrix(rng, n, n, 1.0);
    c.M_bar = R * R.transpose() + 0.5 * Matrix::Identity(n, n);
    c.P = random_matrix(rng, n, n, 1.0);
    const double L = gamma_slope_bound(c, s);
    auto sample = [&] {
      Vector x(n);
      for (Index d = 0; d < n; ++d) x[d] = s.state_box.lower[d] + u(rng) * s.state_box.widths()[d];
      return x;
    };
    for (int k = 0; k < 500; ++k) {
      const Vector x = sample(), x1 = sample(), x2 = sample();
      const double dS = storage_value(c, x, x1) - storage_value(c, x, x2);
      CHECK(dS <= L * (x1 - x2).norm() + 1e-9);
    }
  }
}

TEST_CASE("room constants") {
  const AffineSystem s = room_system();
  const StorageCertificate c = room_certificate();
  const SstfConstants k = derive_constants(c, s, zero_disc(s), 42.0);
  CHECK(k.kappa == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(k.alpha_coeff == 1.0);
  CHECK(k.rho_ext_slope == 2.0);
  const double e = std::exp(-c.kappa_tilde * 0.1);
  CHECK(k.psi == doctest::Approx(e * 0.1 * (0.25 + 0.005 * 0.005)).epsilon(1e-14));
  CHECK(k.psi == doctest::Approx(2.50025e-5).epsilon(1e-9));
}

TEST_CASE("noise-free offset-free system has zero psi") {
  AffineSystem s = room_system();
  s.G = scalar(0.0);
  s.b = vec1(0.0);
  CHECK(derive_constants(room_certificate(), s, zero_disc(s), 42.0).psi == 0.0);
}

TEST_CASE("failed checks name the condition") {
  const AffineSystem s = room_system();
  auto subject = [&](StorageCertificate c) {
    try {
      derive_constants(c, s, zero_disc(s), 42.0);
    } catch (const Error& e) {
      return e.subject();
    }
    return std::string("none");
  };
  StorageCertificate c = room_certificate();
  c.K = scalar(0.0);
  CHECK(subject(c) == "Con_1");
  c = room_certificate();
  c.Q = scalar(0.3);
  CHECK(subject(c) == "Con_2");
  c = room_certificate();
  c.H = scalar(0.2);
  CHECK(subject(c) == "Con_3");
  CHECK(subject(room_certificate(4.0)) == "Eq_8a");
}

TEST_CASE("kappa tilde helper") {
  CHECK(kappa_tilde_from(0.499, 0.5, 0.1) == doctest::Approx(69.0775527898).epsilon(1e-10));
  CHECK_THROWS_AS(kappa_tilde_from(0.5, 0.499, 0.1), Error);
}

TEST_CASE("Lyapunov verdict is monotone in the decay rate") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 1 + trial % 3;
    AffineSystem s;
    s.A = random_matrix(rng, n, n, 1.0) - 2.0 * Matrix::Identity(n, n);
    s.B = Matrix::Identity(n, n);
    const Matrix K = random_matrix(rng, n, n, 0.5);
    const Matrix R = random_matrix(rng, n, n, 1.0);
    const Matrix M = R * R.transpose() + 0.2 * Matrix::Identity(n, n);
    const double kt = 3.0 * u(rng);
    if (!check_lyapunov(s, M, K, kt).ok) continue;
    CHECK(check_lyapunov(s, M, K, kt * u(rng)).ok);
  }
}

TEST_CASE("scaling the storage matrix keeps kappa") {
  const AffineSystem s = room_system();
  StorageCertificate base = room_certificate();
  StorageCertificate scaled = base;
  scaled.M_bar *= 4.0;
  scaled.Xbar11 *= 4.0;
  scaled.Xbar22 *= 4.0;
  scaled.kappa_bar = base.kappa_bar;
  const auto k0 = derive_constants(base, s, zero_disc(s), 42.0);
  const auto k1 = derive_constants(scaled, s, zero_disc(s), 42.0);
  CHECK(k1.kappa == k0.kappa);
  CHECK(k1.psi == 4.0 * k0.psi);
}

TEST_CASE("non-stochastic abstractions never have larger psi") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const AffineSystem s = room_system();
  for (int trial = 0; trial < 200; ++trial) {
    StorageCertificate c = room_certificate();
    c.gamma_slope = 5.0 * u(rng);
    c.eta_bar = 0.1 + u(rng);
    c.eta_bar_p = 0.1 + u(rng);
    c.eta_bar_pp = 0.1 + u(rng);
    c.delta = trial % 2 ? 0.0 : 0.1 * u(rng);
    DiscretizationSpec clean = zero_disc(s);
    DiscretizationSpec noisy = clean;
    noisy.R_tilde = scalar(u(rng));
    noisy.D_tilde = scalar(trial % 3 ? 0.0 : u(rng));
    const auto k0 = derive_constants(c, s, clean, 42.0);
    const auto k1 = derive_constants(c, s, noisy, 42.0);
    CHECK(k0.psi <= k1.psi);
    CHECK(k0.kappa > 0.0);
    CHECK(k0.kappa < 1.0);
  }
}
