#pragma once

#include <cstdint>

namespace stochsym {

enum class Regime { Case1, Case2 };

const char* to_string(Regime r) noexcept;

/// Upper bound on P{ sup_k ‖ζ(kτ) − ζ̂(k)‖ ≥ ε } over k = 0..T_d.
struct ViolationBound {
  Regime regime = Regime::Case1;
  double violation = 0.0;
  double success = 1.0;
  double case1 = 0.0;  // both branches evaluated, before clamping
  double case2 = 0.0;
  bool on_boundary = false;  // α(ε) == ψ̂/κ
  bool clamped = false;
};

struct ClosenessBound {
  double epsilon = 0.0;
  int horizon = 0;
  double psi_hat = 0.0;
  double v0 = 0.0;
  Regime regime = Regime::Case1;
  double violation_bound = 0.0;
  double success_bound = 1.0;
};

/// ρ_ext slope · ‖ν̂‖∞ + ψ, the smallest admissible ψ̂.
double psi_hat(double rho_ext_slope, double nu_hat_sup, double psi);

/// Two-regime bound; case 1 when α(ε) ≥ ψ̂/κ. Throws InvalidKappa, NegativeInput.
ViolationBound violation_probability(double alpha_of_eps, double kappa, double psi_hat, double v0, int horizon);

ClosenessBound closeness_bound(double alpha_coeff, double epsilon, double kappa, double psi_hat, double v0,
                               int horizon);

struct EpsilonQuery {
  double epsilon = 0.0;
  bool degenerate = false;  // ψ̂ = v0 = 0: every ε > 0 works, infimum 0⁺
};

/// Smallest ε ∈ (0, eps_max] with violation ≤ target, by bisection to 1e-12.
/// Throws Unachievable when eps_max itself misses the target.
EpsilonQuery min_epsilon(double alpha_coeff, double kappa, double psi_hat, double v0, int horizon, double target,
                         double eps_max = 1e6);

struct HorizonQuery {
  int horizon = 0;
  bool capped = false;  // target still met at horizon_max
};

/// Largest T_d ≤ horizon_max with violation ≤ target. Throws Unachievable when T_d = 0 misses it.
HorizonQuery max_horizon(double alpha_of_eps, double kappa, double psi_hat, double v0, double target,
                         int horizon_max = 1000000);

/// Two-sided Clopper–Pearson upper limit for k successes in n Bernoulli trials.
double clopper_pearson_upper(std::int64_t k, std::int64_t n, double confidence = 0.95);

}  // namespace stochsym
