#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "stochsym/composition.hpp"
#include "stochsym/error.hpp"

using namespace stochsym;
using namespace testing_helpers;

namespace {

StorageCertificate scalar_cert(double a, double d) {
  StorageCertificate c;
  c.Xbar11 = scalar(a);
  c.Xbar12 = Matrix::Zero(1, 1);
  c.Xbar21 = Matrix::Zero(1, 1);
  c.Xbar22 = scalar(d);
  return c;
}

SstfConstants constants(double alpha, double kappa, double rho, double psi) {
  SstfConstants c;
  c.alpha_coeff = alpha;
  c.kappa = kappa;
  c.rho_ext_slope = rho;
  c.psi = psi;
  return c;
}

constexpr double kRoomA = 2.5e-7;
constexpr double kRoomD = -2.5e-5;

}  // namespace

TEST_CASE("X_cmp layout") {
  StorageCertificate c1 = scalar_cert(1.0, -2.0);
  c1.Xbar12 = scalar(0.5);
  c1.Xbar21 = scalar(0.5);
  const StorageCertificate c2 = scalar_cert(3.0, -4.0);
  const std::vector<StorageCertificate> certs{c1, c2};
  const std::vector<double> mu{2.0, 1.0};
  const Matrix X = Matrix(build_x_cmp(certs, mu));
  Matrix expected(4, 4);
  expected << 2, 0, 1, 0,
              0, 3, 0, 0,
              1, 0, -4, 0,
              0, 0, 0, -4;
  CHECK(X == expected);
}

TEST_CASE("X_cmp rejects non-positive weights") {
  const std::vector<StorageCertificate> certs{scalar_cert(1, -1), scalar_cert(1, -1)};
  const std::vector<double> mu{1.0, 0.0};
  CHECK(code_of([&] { build_x_cmp(certs, mu); }) == Errc::WeightNotPositive);
}

TEST_CASE("ring LMI matches the closed-form eigenvalue") {
  for (int n : {3, 4, 10, 100}) {
    const std::vector<StorageCertificate> certs(n, scalar_cert(kRoomA, kRoomD));
    const std::vector<double> mu(n, 1.0);
    const auto rep = check_compositional_lmi(ring(n), build_x_cmp(certs, mu));
    CHECK(rep.ok);
    CHECK(rep.lambda_max == doctest::Approx(4 * kRoomA + kRoomD).epsilon(1e-9));
  }
}

TEST_CASE("LMI fails when the gain dominates") {
  const std::vector<StorageCertificate> certs(5, scalar_cert(1.0, -3.0));
  const std::vector<double> mu(5, 1.0);
  const auto rep = check_compositional_lmi(ring(5), build_x_cmp(certs, mu));
  CHECK_FALSE(rep.ok);
  CHECK(rep.lambda_max == doctest::Approx(1.0));
}

TEST_CASE("LMI with no internal signals is trivially satisfied") {
  const SparseMatrix M(0, 0);
  const SparseMatrix X(0, 0);
  CHECK(check_compositional_lmi(M, X).ok);
}

TEST_CASE("LMI dimension check") {
  const std::vector<StorageCertificate> certs(3, scalar_cert(1, -1));
  const std::vector<double> mu(3, 1.0);
  CHECK(code_of([&] { check_compositional_lmi(ring(4), build_x_cmp(certs, mu)); }) == Errc::DimensionMismatch);
}

TEST_CASE("Gershgorin verdicts") {
  const SparseMatrix M = ring(10);
  CHECK(gershgorin_fast_check(M, {kRoomA, kRoomD}) == GershgorinVerdict::Ok);
  CHECK(gershgorin_fast_check(M, {1.0, -3.0}) == GershgorinVerdict::Inconclusive);
  CHECK(gershgorin_fast_check(M, {-1.0, 0.0}) == GershgorinVerdict::Ok);
  CHECK(gershgorin_fast_check(M, {-1.0, 1.0}) == GershgorinVerdict::Inconclusive);
  CHECK(gershgorin_fast_check(M, {1.0, -4.0}) == GershgorinVerdict::Ok);
}

TEST_CASE("scalar block extraction") {
  const std::vector<StorageCertificate> same(4, scalar_cert(2.0, -1.0));
  const std::vector<double> mu(4, 0.5);
  const auto b = scalar_block_params(same, mu);
  CHECK(b.a == 1.0);
  CHECK(b.d == -0.5);

  std::vector<StorageCertificate> mixed = same;
  mixed[2] = scalar_cert(3.0, -1.0);
  CHECK(code_of([&] { scalar_block_params(mixed, mu); }) == Errc::StructureMismatch);

  std::vector<StorageCertificate> coupled = same;
  coupled[1].Xbar12 = scalar(0.1);
  coupled[1].Xbar21 = scalar(0.1);
  CHECK(code_of([&] { scalar_block_params(coupled, mu); }) == Errc::StructureMismatch);
}

TEST_CASE("Gershgorin Ok implies the exact LMI holds") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int decided = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + trial % 12;
    std::vector<Triplet> t;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (u(rng) < 0.3) t.emplace_back(i, j, 2.0 * u(rng) - 1.0);
    SparseMatrix M(n, n);
    M.setFromTriplets(t.begin(), t.end());
    const ScalarBlocks b{2.0 * u(rng) - 0.5, -3.0 * u(rng)};
    const std::vector<StorageCertificate> certs(n, scalar_cert(b.a, b.d));
    const std::vector<double> mu(n, 1.0);
    if (gershgorin_fast_check(M, b) == GershgorinVerdict::Ok) {
      ++decided;
      CHECK(check_compositional_lmi(M, build_x_cmp(certs, mu)).ok);
    }
  }
  CHECK(decided > 20);
}

TEST_CASE("hundred-room aggregation") {
  const std::vector<SstfConstants> c(100, constants(1.0, 0.5, 2.0, 2.50025e-5));
  const std::vector<double> mu(100, 1.0);
  const bool flags[100] = {};
  bool all[100];
  std::fill(std::begin(all), std::end(all), true);
  const auto s = compose_ssf(c, mu, AlphaMode::StackedQuadratic, std::span<const bool>(all, 100));
  CHECK(s.kappa == 0.5);
  CHECK(s.psi == doctest::Approx(2.50025e-3).epsilon(1e-12));
  CHECK(s.rho_ext_slope == doctest::Approx(20.0).epsilon(1e-14));
  CHECK(s.alpha_coeff == 1.0);
  const auto g = compose_ssf(c, mu, AlphaMode::General, std::span<const bool>(flags, 100));
  CHECK(g.alpha_coeff == doctest::Approx(0.01).epsilon(1e-14));
  CHECK(code_of([&] { compose_ssf(c, mu, AlphaMode::StackedQuadratic, std::span<const bool>(flags, 100)); }) ==
        Errc::StructureMismatch);
}

TEST_CASE("single subsystem keeps its constants") {
  const std::vector<SstfConstants> c{constants(0.3, 0.7, 1.5, 0.02)};
  const std::vector<double> mu{1.0};
  const bool full[1] = {true};
  for (AlphaMode mode : {AlphaMode::General, AlphaMode::StackedQuadratic}) {
    const auto s = compose_ssf(c, mu, mode, full);
    CHECK(s.alpha_coeff == doctest::Approx(0.3));
    CHECK(s.kappa == 0.7);
    CHECK(s.rho_ext_slope == doctest::Approx(1.5));
    CHECK(s.psi == 0.02);
  }
}

TEST_CASE("non-quadratic or non-linear subsystem gains are rejected") {
  std::vector<SstfConstants> c{constants(1, 0.5, 1, 0)};
  const std::vector<double> mu{1.0};
  const bool full[1] = {true};
  c[0].alpha_is_quadratic = false;
  CHECK(code_of([&] { compose_ssf(c, mu, AlphaMode::General, full); }) == Errc::NonQuadraticAlpha);
  c[0].alpha_is_quadratic = true;
  c[0].rho_is_linear = false;
  CHECK(code_of([&] { compose_ssf(c, mu, AlphaMode::General, full); }) == Errc::NonLinearRho);
}

TEST_CASE("general alpha is the minimum over split norms") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  const bool flags[3] = {};
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<SstfConstants> c;
    std::vector<double> mu;
    for (int i = 0; i < 3; ++i) {
      c.push_back(constants(u(rng), 0.5, 1.0, 0.0));
      mu.push_back(u(rng));
    }
    const double alpha = compose_ssf(c, mu, AlphaMode::General, flags).alpha_coeff;
    // min Σ μᵢaᵢtᵢ² over t ≥ 0 with Σtᵢ = 1
    double best = INFINITY;
    const int steps = 400;
    for (int i = 0; i <= steps; ++i) {
      for (int j = 0; i + j <= steps; ++j) {
        const double t0 = double(i) / steps;
        const double t1 = double(j) / steps;
        const double t2 = 1.0 - t0 - t1;
        const double v = mu[0] * c[0].alpha_coeff * t0 * t0 + mu[1] * c[1].alpha_coeff * t1 * t1 +
                         mu[2] * c[2].alpha_coeff * t2 * t2;
        best = std::min(best, v);
      }
    }
    CHECK(alpha <= best + 1e-12);
    CHECK(best - alpha <= 1e-3 * alpha + 1e-4);
  }
}

TEST_CASE("rho slope is the worst-case weighted sum on the unit circle") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  const bool flags[2] = {};
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<SstfConstants> c{constants(1, 0.5, u(rng), 0), constants(1, 0.5, u(rng), 0)};
    const std::vector<double> mu{u(rng), u(rng)};
    const double rho = compose_ssf(c, mu, AlphaMode::General, flags).rho_ext_slope;
    double best = 0.0;
    for (int k = 0; k <= 20000; ++k) {
      const double th = 0.5 * std::numbers::pi * k / 20000.0;
      best = std::max(best, mu[0] * c[0].rho_ext_slope * std::cos(th) + mu[1] * c[1].rho_ext_slope * std::sin(th));
    }
    CHECK(best <= rho + 1e-12);
    CHECK(rho - best <= 1e-6 * rho);
  }
}

TEST_CASE("aggregation properties") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 7;
    std::vector<SstfConstants> c;
    std::vector<double> mu, mu2;
    for (int i = 0; i < n; ++i) {
      c.push_back(constants(u(rng), u(rng), u(rng), u(rng)));
      mu.push_back(u(rng));
      mu2.push_back(u(rng));
    }
    bool full[8];
    std::fill(std::begin(full), std::end(full), true);
    const std::span<const bool> fs(full, n);
    const auto g = compose_ssf(c, mu, AlphaMode::General, fs);
    const auto s = compose_ssf(c, mu, AlphaMode::StackedQuadratic, fs);
    CHECK(g.kappa == compose_ssf(c, mu2, AlphaMode::General, fs).kappa);
    CHECK(g.alpha_coeff <= s.alpha_coeff * (1 + 1e-12));
    std::vector<double> twice(mu);
    for (double& m : twice) m *= 2.0;
    CHECK(compose_ssf(c, twice, AlphaMode::General, fs).psi == doctest::Approx(2.0 * g.psi).epsilon(1e-13));
    CHECK(g.kappa > 0.0);
    CHECK(g.kappa < 1.0);
  }
}

TEST_CASE("network composition reports Con_1a") {
  constexpr int n = 5;
  std::vector<StorageCertificate> certs(n, scalar_cert(1.0, -3.0));
  const std::vector<SstfConstants> c(n, constants(1, 0.5, 1, 0));
  InterconnectionSpec ic;
  ic.M = ring(n);
  ic.mu.assign(n, 1.0);
  ic.subsystem_dims.assign(n, SubsystemDims{1, 1, 1, 1});
  bool full[n];
  std::fill(full, full + n, true);
  try {
    compose_network(certs, c, ic, AlphaMode::General, std::span<const bool>(full, n));
    FAIL("expected Con_1a");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ConditionViolated);
    CHECK(e.subject() == "Con_1a");
  }
  certs.assign(n, scalar_cert(kRoomA, kRoomD));
  const auto r = compose_network(certs, c, ic, AlphaMode::General, std::span<const bool>(full, n));
  CHECK(r.lmi.ok);
  REQUIRE(r.gershgorin.has_value());
  CHECK(*r.gershgorin == GershgorinVerdict::Ok);
  CHECK(r.q_tilde == n);
}

TEST_CASE("full-state output detection") {
  AffineSystem s = room_system();
  CHECK(has_full_state_output(s));
  s.C1 = scalar(0.0);
  CHECK_FALSE(has_full_state_output(s));
  s.C1 = Matrix::Zero(0, 1);
  CHECK_FALSE(has_full_state_output(s));
}
