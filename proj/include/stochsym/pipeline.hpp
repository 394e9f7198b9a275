#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stochsym/serialize.hpp"

namespace stochsym {

enum class Stage { Verify, Compose, Abstract, Synthesize, Bound, Simulate };

const char* to_string(Stage s) noexcept;
/// Names must form a prefix of verify, compose, abstract, synthesize, bound, simulate.
std::vector<Stage> parse_stages(const std::vector<std::string>& names);
std::vector<Stage> stages_through(Stage last);

struct CertificateSolve {
  CandidateTargets targets;
  StorageCertificate seed;  // scalars and X̄ blocks; the matrices come from solve_candidates
};

/// `count` identical copies of one subsystem.
struct SubsystemGroup {
  std::string name;
  Index count = 1;
  AffineSystem sys;
  std::optional<StorageCertificate> cert;
  std::optional<CertificateSolve> solve;
  DiscretizationSpec disc;
  std::optional<Grid> state_grid;
  std::optional<Grid> input_grid;
  std::optional<Grid> internal_grid;
  std::optional<Box> safe_box;
  std::optional<Vector> initial_state;
};

struct BoundQuery {
  double epsilon = 0.5;
  int horizon = 12;
  std::optional<double> v0;
  std::optional<double> nu_hat_sup;
  std::optional<double> psi_hat_override;
  std::optional<double> target;  // also report the smallest ε meeting this violation level
};

struct PipelineConfig {
  std::vector<SubsystemGroup> groups;
  SparseMatrix M;
  std::vector<double> mu;
  double tau = 0.1;
  AlphaMode alpha_mode = AlphaMode::General;
  std::optional<Box> safe_box;
  std::optional<double> contraction;
  std::optional<int> safety_horizon;
  BoundQuery bound;
  SimConfig sim;
  std::vector<std::string> stages;
  std::string output_dir = "out";

  Index subsystem_count() const;
};

PipelineConfig config_from_json(const Json& j);
Json config_to_json(const PipelineConfig& cfg);
PipelineConfig load_config(const std::string& path);

struct RoomParams {
  int n = 100;
  double eta = 0.05;
  double beta = 0.005;
  double theta = 0.01;
  double T_h = 50.0;
  double T_e = -1.0;
  double g = 0.5;
  double tau = 0.1;
  double kappa_bar = 0.499;
  double kappa = 0.5;
  double pi = 1.0;
  double K = -200.0;
  double gamma_slope = 2.0;
  double epsilon = 0.5;
  int horizon = 12;
  double success_target = 0.91;  // back-solves the documented ψ̂
  std::int64_t n_trials = 10000;
  std::uint64_t seed = 2024;
  double initial_temperature = 20.5;
};

/// Ring of n rooms with heaters. Throws TooFewRooms for n < 3.
PipelineConfig generate_rooms(const RoomParams& p);

struct GroupResult {
  StorageCertificate cert;
  SstfConstants constants;
  MarginReport lyapunov;
  GeometricReport geometric;
  MarginReport dissipativity;
  std::optional<FiniteAbstraction> abstraction;
  std::vector<char> safe;
  std::optional<Controller> controller;
};

struct BoundReport {
  ClosenessBound bound;
  ClosenessBound formula_bound;  // with the smallest admissible ψ̂
  double psi_hat_formula = 0.0;
  double nu_hat_sup = 0.0;
  double alpha_of_eps = 0.0;
  bool psi_hat_overridden = false;
  std::optional<EpsilonQuery> epsilon_query;
};

struct PipelineResult {
  std::vector<Stage> stages_run;
  std::vector<GroupResult> groups;
  std::optional<CompositionResult> composition;
  std::optional<BoundReport> bound;
  std::optional<SimResult> simulation;
  std::vector<std::string> artifacts;
};

/// Runs the stages in order; errors carry the stage name in their message.
/// Artifacts go to cfg.output_dir unless write_artifacts is false.
PipelineResult run_pipeline(const PipelineConfig& cfg, const std::vector<Stage>& stages, bool write_artifacts = true);

}  // namespace stochsym
