#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "stochsym/certificates.hpp"
#include "stochsym/synthesis.hpp"

namespace stochsym {

struct InterfaceGains {
  SparseMatrix K;
  SparseMatrix P;
  SparseMatrix Q;
  SparseMatrix H;
};

InterfaceGains gains_of(const StorageCertificate& cert);
InterfaceGains stack_gains(std::span<const StorageCertificate> certs);

/// Values frozen at the sampling instant kτ.
struct InterfaceLatch {
  std::int64_t step = 0;
  Vector xi_k;
  Vector xi_hat;
  Vector w_hat;
  Vector w_k;
};

/// The five summands of ν(t), kept apart for termwise checks.
struct InterfaceTerms {
  Vector feedback;       // K(ξ(t) − Pξ̂(k))
  Vector offset;         // −Qξ̂(k)
  Vector sync;           // ξ(kτ) − Pξ̂(k)
  Vector internal_sync;  // H(w(kτ) − ŵ(k))
  Vector internal_now;   // −Hw(t)

  Vector sum() const { return feedback + offset + sync + internal_sync + internal_now; }
};

InterfaceTerms interface_terms(const InterfaceGains& g, const InterfaceLatch& latch, const Vector& xi_t,
                               const Vector& w_t);

/// ν(t) = K(ξ(t)−Pξ̂(k)) − Qξ̂(k) + (ξ(kτ)−Pξ̂(k)) + H(w(kτ)−ŵ(k)) − Hw(t).
/// Throws StaleLatch unless latch.step = ⌊t/τ⌋.
Vector interface_input(const InterfaceGains& g, const InterfaceLatch& latch, const Vector& xi_t, const Vector& w_t,
                       double t, double tau);

/// x + (Ax + Bν + Dw + b)dt + G√dt·z.
Vector em_step(const AffineSystem& sys, const Vector& x, const Vector& nu, const Vector& w, double dt,
               const Vector& z);

/// Independent stream for one trial, split from the master seed.
std::mt19937_64 trial_rng(std::uint64_t master_seed, std::uint64_t trial);

struct SimConfig {
  int n_substeps = 20;
  std::int64_t n_trials = 1000;
  std::uint64_t seed = 1;
  int horizon = 12;
  double epsilon = 0.5;
  Vector initial_state;  // stacked concrete state
  unsigned threads = 0;  // 0: hardware concurrency, capped by STOCHSYM_THREADS
  int record_outputs = 0;  // trials whose per-step outputs are kept
  bool record_substeps = false;
  bool convergence_check = true;
  double drift_tolerance = 0.01;
  std::int64_t pilot_trials = 1000;
  int max_doublings = 4;
};

struct TrajectoryRecord {
  std::int64_t trial = 0;
  double sup_error = 0.0;
  bool violation = false;
  bool aborted = false;  // abstract state lost (sink or no action)
  int abort_step = -1;
  std::vector<double> errors;  // ‖ζ(kτ) − ζ̂(k)‖ per sampling instant
  double min_output = 0.0;
  double max_output = 0.0;
  std::vector<Vector> outputs;           // recorded trials only
  std::vector<Vector> abstract_outputs;  // recorded trials only
  std::vector<double> substep_errors;    // recorded trials only, not covered by the guarantee
};

struct SimSummary {
  std::int64_t n_trials = 0;
  std::int64_t violations = 0;
  std::int64_t aborted = 0;
  double frequency = 0.0;
  double cp_upper = 0.0;
  double mean_sup_error = 0.0;
  double max_sup_error = 0.0;
  double clean_min_output = 0.0;  // over violation-free trials
  double clean_max_output = 0.0;
  int n_substeps = 0;
};

struct ConvergenceReport {
  int accepted_substeps = 0;
  double frequency_drift = 0.0;
  double mean_error_drift = 0.0;
  bool converged = false;
};

struct SimResult {
  std::vector<TrajectoryRecord> records;
  SimSummary summary;
  std::optional<ConvergenceReport> convergence;
};

struct CosimNetwork {
  std::vector<AffineSystem> systems;
  InterconnectionSpec ic;
  std::vector<StorageCertificate> certs;
  std::vector<const FiniteAbstraction*> abstractions;
  std::vector<const Controller*> controllers;
};

SimResult cosimulate(const CosimNetwork& net, const SimConfig& config);

unsigned worker_count(unsigned requested);

}  // namespace stochsym
