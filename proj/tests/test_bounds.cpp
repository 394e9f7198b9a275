#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "stochsym/bounds.hpp"
#include "stochsym/log.hpp"

using namespace stochsym;
using namespace testing_helpers;

namespace {

const double kPsiHat = 0.25 * (1.0 - std::pow(0.91, 1.0 / 12.0));

struct SinkCapture {
  std::vector<std::string> lines;
  WarningSink previous;
  SinkCapture() {
    previous = set_warning_sink([this](const std::string& m) { lines.push_back(m); });
  }
  ~SinkCapture() { set_warning_sink(previous); }
};

double binomial_cdf_direct(int k, int n, double p) {
  double sum = 0.0;
  for (int i = 0; i <= k; ++i) {
    double c = 1.0;
    for (int j = 0; j < i; ++j) c = c * (n - j) / (j + 1);
    sum += c * std::pow(p, i) * std::pow(1.0 - p, n - i);
  }
  return sum;
}

}  // namespace

TEST_CASE("room bound hits the reported success probability") {
  CHECK(kPsiHat == doctest::Approx(1.957e-3).epsilon(1e-3));
  const auto b = closeness_bound(1.0, 0.5, 0.5, kPsiHat, 0.0, 12);
  CHECK(b.regime == Regime::Case1);
  CHECK(b.violation_bound == doctest::Approx(0.09).epsilon(1e-12));
  CHECK(b.success_bound == doctest::Approx(0.91).epsilon(1e-12));
  CHECK(std::string(to_string(b.regime)) == "case-1");
}

TEST_CASE("case-2 closed form") {
  const auto v = violation_probability(0.01, 0.2, 0.004, 0.002, 2);
  CHECK(v.regime == Regime::Case2);
  CHECK(v.violation == doctest::Approx(0.2 * 0.64 + 2.0 * 0.36).epsilon(1e-12));
  CHECK(std::string(to_string(v.regime)) == "case-2");
}

TEST_CASE("horizon zero returns the initial ratio") {
  const auto v = violation_probability(0.5, 0.3, 0.01, 0.1, 0);
  CHECK(v.violation == doctest::Approx(0.2));
}

TEST_CASE("smallest epsilon for the room target") {
  const auto q = min_epsilon(1.0, 0.5, kPsiHat, 0.0, 12, 0.09);
  CHECK_FALSE(q.degenerate);
  CHECK(q.epsilon == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("degenerate epsilon query") {
  const auto q = min_epsilon(1.0, 0.5, 0.0, 0.0, 12, 0.0);
  CHECK(q.degenerate);
  CHECK(q.epsilon == 0.0);
}

TEST_CASE("unachievable targets") {
  SinkCapture quiet;
  CHECK(code_of([] { min_epsilon(1.0, 0.5, 0.0, 1e13, 5, 0.01); }) == Errc::Unachievable);
  CHECK(code_of([] { max_horizon(0.1, 0.5, 0.0, 0.05, 0.1); }) == Errc::Unachievable);
}

TEST_CASE("largest horizon") {
  const auto q = max_horizon(0.25, 0.5, kPsiHat, 0.0, 0.09 + 1e-12);
  CHECK(q.horizon == 12);
  CHECK_FALSE(q.capped);
  const auto c = max_horizon(0.25, 0.5, 0.0, 0.0, 0.0, 50);
  CHECK(c.horizon == 50);
  CHECK(c.capped);
}

TEST_CASE("input errors") {
  CHECK(code_of([] { violation_probability(1.0, 0.0, 0.0, 0.0, 1); }) == Errc::InvalidKappa);
  CHECK(code_of([] { violation_probability(1.0, 1.0, 0.0, 0.0, 1); }) == Errc::InvalidKappa);
  CHECK(code_of([] { violation_probability(1.0, 0.5, -1.0, 0.0, 1); }) == Errc::NegativeInput);
  CHECK(code_of([] { violation_probability(1.0, 0.5, 0.0, -1.0, 1); }) == Errc::NegativeInput);
  CHECK(code_of([] { violation_probability(1.0, 0.5, 0.0, 0.0, -1); }) == Errc::NegativeInput);
  CHECK(code_of([] { violation_probability(0.0, 0.5, 0.0, 0.0, 1); }) == Errc::NegativeInput);
  CHECK(code_of([] { psi_hat(-1.0, 0.0, 0.0); }) == Errc::NegativeInput);
  CHECK(psi_hat(2.0, 0.5, 0.1) == doctest::Approx(1.1));
}

TEST_CASE("clamping is logged") {
  SinkCapture sink;
  const auto v = violation_probability(0.1, 0.5, 0.001, 0.2, 4);
  CHECK(v.clamped);
  CHECK(v.violation == 1.0);
  CHECK(v.success == 0.0);
  REQUIRE(sink.lines.size() == 1);
  CHECK(sink.lines[0].find("clamped") != std::string::npos);
  const auto ok = violation_probability(1.0, 0.5, 0.001, 0.2, 4);
  CHECK_FALSE(ok.clamped);
  CHECK(sink.lines.size() == 1);
}

TEST_CASE("regime boundary") {
  const auto v = violation_probability(0.5, 0.5, 0.25, 0.1, 7);
  CHECK(v.on_boundary);
  CHECK(v.regime == Regime::Case1);
  CHECK(v.case1 == doctest::Approx(v.case2).epsilon(1e-13));
}

TEST_CASE("the two branches agree on the boundary") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int trial = 0; trial < 1000; ++trial) {
    const double kappa = u(rng);
    const double psi = u(rng);
    const double alpha = psi / kappa;
    const auto v = violation_probability(alpha, kappa, psi, u(rng) * alpha, trial % 40);
    CHECK(v.case1 == doctest::Approx(v.case2).epsilon(1e-9));
  }
}

TEST_CASE("bound monotonicity") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SinkCapture quiet;
  for (int trial = 0; trial < 5000; ++trial) {
    const double alpha = 0.01 + u(rng);
    const double kappa = 0.01 + 0.98 * u(rng);
    const double psi = 0.2 * u(rng);
    const double v0 = 0.5 * u(rng);
    const int T = static_cast<int>(50 * u(rng));
    const double base = violation_probability(alpha, kappa, psi, v0, T).violation;
    CHECK(violation_probability(alpha, kappa, psi, v0, T + 1).violation >= base - 1e-12);
    CHECK(violation_probability(alpha, kappa, psi + 0.1 * u(rng), v0, T).violation >= base - 1e-12);
    CHECK(violation_probability(alpha, kappa, psi, v0 + 0.1 * u(rng), T).violation >= base - 1e-12);
    CHECK(violation_probability(alpha * (1.0 + u(rng)), kappa, psi, v0, T).violation <= base + 1e-12);
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);
  }
}

TEST_CASE("min epsilon meets the target tightly") {
  std::mt19937_64 rng(47);
  SinkCapture quiet;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = 0.1 + u(rng);
    const double kappa = 0.05 + 0.9 * u(rng);
    const double psi = 0.01 * u(rng);
    const double v0 = 0.01 * u(rng);
    const int T = 1 + trial % 30;
    const double target = 0.01 + 0.5 * u(rng);
    const auto q = min_epsilon(a, kappa, psi, v0, T, target);
    CHECK(violation_probability(a * q.epsilon * q.epsilon, kappa, psi, v0, T).violation <= target);
    const double below = q.epsilon * (1.0 - 1e-6);
    CHECK(violation_probability(a * below * below, kappa, psi, v0, T).violation > target);
  }
}

TEST_CASE("Clopper-Pearson with no successes") {
  for (int n : {1, 10, 100, 10000}) {
    CHECK(clopper_pearson_upper(0, n) == doctest::Approx(1.0 - std::pow(0.025, 1.0 / n)).epsilon(1e-10));
  }
  CHECK(clopper_pearson_upper(10000 - 0, 10000) == 1.0);
  CHECK(clopper_pearson_upper(0, 10000) == doctest::Approx(3.688e-4).epsilon(1e-3));
}

TEST_CASE("Clopper-Pearson against direct summation") {
  for (int n : {5, 20, 60}) {
    for (int k = 0; k < n; k += 1 + n / 7) {
      const double p = clopper_pearson_upper(k, n);
      CHECK(binomial_cdf_direct(k, n, p) == doctest::Approx(0.025).epsilon(1e-7));
      CHECK(p > double(k) / n);
    }
  }
  CHECK(code_of([] { clopper_pearson_upper(3, 2); }) == Errc::NegativeInput);
  CHECK(code_of([] { clopper_pearson_upper(0, 0); }) == Errc::NegativeInput);
}
