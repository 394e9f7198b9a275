#include "stochsym/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "stochsym/error.hpp"
#include "stochsym/log.hpp"

namespace stochsym {

namespace {

void require_nonnegative(double v, const char* field) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw Error(Errc::NegativeInput, field, "must be finite and nonnegative");
}

// log P{X ≤ k}, X ~ Binomial(n, p), 0 < p < 1
double log_binomial_cdf(std::int64_t k, std::int64_t n, double p) {
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  const double lgn = std::lgamma(static_cast<double>(n) + 1.0);
  double peak = -INFINITY;
  std::vector<double> terms(static_cast<std::size_t>(k + 1));
  for (std::int64_t i = 0; i <= k; ++i) {
    const double di = static_cast<double>(i);
    const double t = lgn - std::lgamma(di + 1.0) - std::lgamma(static_cast<double>(n - i) + 1.0) + di * lp +
                     static_cast<double>(n - i) * lq;
    terms[static_cast<std::size_t>(i)] = t;
    peak = std::max(peak, t);
  }
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - peak);
  return peak + std::log(sum);
}

}  // namespace

const char* to_string(Regime r) noexcept { return r == Regime::Case1 ? "case-1" : "case-2"; }

double psi_hat(double rho_ext_slope, double nu_hat_sup, double psi) {
  require_nonnegative(rho_ext_slope, "rho_ext_slope");
  require_nonnegative(nu_hat_sup, "nu_hat_sup");
  require_nonnegative(psi, "psi");
  return rho_ext_slope * nu_hat_sup + psi;
}

ViolationBound violation_probability(double alpha_of_eps, double kappa, double psi_hat, double v0, int horizon) {
  if (!(kappa > 0.0 && kappa < 1.0)) throw Error(Errc::InvalidKappa, "kappa", "must lie in (0, 1)");
  if (!(alpha_of_eps > 0.0) || !std::isfinite(alpha_of_eps)) {
    throw Error(Errc::NegativeInput, "alpha_of_eps", "must be finite and positive");
  }
  require_nonnegative(psi_hat, "psi_hat");
  require_nonnegative(v0, "v0");
  if (horizon < 0) throw Error(Errc::NegativeInput, "horizon", "must be nonnegative");

  ViolationBound out;
  const double T = static_cast<double>(horizon);
  const double threshold = psi_hat / kappa;
  out.case1 = 1.0 - (1.0 - v0 / alpha_of_eps) * std::pow(1.0 - psi_hat / alpha_of_eps, T);
  const double decay = std::pow(1.0 - kappa, T);
  out.case2 = (v0 / alpha_of_eps) * decay + (psi_hat / (kappa * alpha_of_eps)) * (1.0 - decay);
  out.on_boundary = alpha_of_eps == threshold;
  out.regime = alpha_of_eps >= threshold ? Regime::Case1 : Regime::Case2;

  double v = out.regime == Regime::Case1 ? out.case1 : out.case2;
  if (v < 0.0 || v > 1.0) {
    std::ostringstream msg;
    msg << "violation bound " << v << " clamped to [0, 1]";
    warn(msg.str());
    v = std::clamp(v, 0.0, 1.0);
    out.clamped = true;
  }
  out.violation = v;
  out.success = 1.0 - v;
  return out;
}

ClosenessBound closeness_bound(double alpha_coeff, double epsilon, double kappa, double psi_hat, double v0,
                               int horizon) {
  const ViolationBound vb = violation_probability(alpha_coeff * epsilon * epsilon, kappa, psi_hat, v0, horizon);
  ClosenessBound out;
  out.epsilon = epsilon;
  out.horizon = horizon;
  out.psi_hat = psi_hat;
  out.v0 = v0;
  out.regime = vb.regime;
  out.violation_bound = vb.violation;
  out.success_bound = vb.success;
  return out;
}

EpsilonQuery min_epsilon(double alpha_coeff, double kappa, double psi_hat, double v0, int horizon, double target,
                         double eps_max) {
  if (!(alpha_coeff > 0.0)) throw Error(Errc::NegativeInput, "alpha_coeff", "must be positive");
  if (!(target >= 0.0 && target <= 1.0)) throw Error(Errc::InvalidSpec, "target", "must lie in [0, 1]");
  auto viol = [&](double eps) {
    return violation_probability(alpha_coeff * eps * eps, kappa, psi_hat, v0, horizon).violation;
  };
  if (psi_hat == 0.0 && v0 == 0.0) {
    viol(eps_max);
    return {0.0, true};
  }
  if (viol(eps_max) > target) throw Error(Errc::Unachievable, "epsilon", "target missed even at eps_max");
  double lo = 0.0;
  double hi = eps_max;
  while (hi - lo > 1e-12 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (viol(mid) <= target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return {hi, false};
}

HorizonQuery max_horizon(double alpha_of_eps, double kappa, double psi_hat, double v0, double target,
                         int horizon_max) {
  if (!(target >= 0.0 && target <= 1.0)) throw Error(Errc::InvalidSpec, "target", "must lie in [0, 1]");
  if (violation_probability(alpha_of_eps, kappa, psi_hat, v0, 0).violation > target) {
    throw Error(Errc::Unachievable, "horizon", "target missed at T_d = 0");
  }
  int T = 0;
  while (T < horizon_max && violation_probability(alpha_of_eps, kappa, psi_hat, v0, T + 1).violation <= target) ++T;
  return {T, T == horizon_max};
}

double clopper_pearson_upper(std::int64_t k, std::int64_t n, double confidence) {
  if (n <= 0 || k < 0 || k > n) throw Error(Errc::NegativeInput, "k", "need 0 <= k <= n and n > 0");
  if (!(confidence > 0.0 && confidence < 1.0)) throw Error(Errc::InvalidSpec, "confidence", "must lie in (0, 1)");
  if (k == n) return 1.0;
  const double log_tail = std::log((1.0 - confidence) / 2.0);
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (log_binomial_cdf(k, n, mid) > log_tail) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

}  // namespace stochsym
