#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "stochsym/error.hpp"
#include "stochsym/pipeline.hpp"

using namespace stochsym;

namespace {

enum Exit { kOk = 0, kCondition = 2, kConfig = 3, kRuntime = 4 };

int exit_code(const Error& e) {
  switch (e.code()) {
    case Errc::ConditionViolated:
    case Errc::NotWellPosed:
    case Errc::Infeasible:
    case Errc::KappaBarOutOfRange:
      return kCondition;
    case Errc::Config:
    case Errc::DimensionMismatch:
    case Errc::NonFiniteEntry:
    case Errc::EmptyBox:
    case Errc::InvalidSpec:
    case Errc::InvalidCertificate:
    case Errc::TooFewRooms:
    case Errc::WeightNotPositive:
      return kConfig;
    default:
      return kRuntime;
  }
}

void report(const PipelineResult& r, const PipelineConfig& cfg) {
  std::ostringstream os;
  for (Stage s : r.stages_run) {
    os << to_string(s) << ": ok";
    switch (s) {
      case Stage::Verify:
        for (std::size_t i = 0; i < r.groups.size(); ++i) {
          const auto& c = r.groups[i].constants;
          os << "\n  " << cfg.groups[i].name << " x" << cfg.groups[i].count << "  kappa=" << c.kappa
             << " psi=" << c.psi << " rho_ext=" << c.rho_ext_slope << "s alpha=" << c.alpha_coeff << "s^2";
        }
        break;
      case Stage::Compose: {
        const auto& c = *r.composition;
        os << "\n  lmi lambda_max=" << c.lmi.lambda_max << " gershgorin="
           << (c.gershgorin ? to_string(*c.gershgorin) : "n/a") << "\n  network kappa=" << c.ssf.kappa
           << " psi=" << c.ssf.psi << " rho_ext=" << c.ssf.rho_ext_slope << "s alpha=" << c.ssf.alpha_coeff << "s^2";
        break;
      }
      case Stage::Abstract:
        for (std::size_t i = 0; i < r.groups.size(); ++i) {
          const auto& a = *r.groups[i].abstraction;
          os << "\n  " << cfg.groups[i].name << " " << to_string(a.kind) << " states=" << a.n_states()
             << " inputs=" << a.n_inputs() << " internal=" << a.n_internal() << " delta=" << delta_of(a.state_grid);
        }
        break;
      case Stage::Synthesize:
        for (std::size_t i = 0; i < r.groups.size(); ++i) {
          os << "\n  " << cfg.groups[i].name << " winning fraction=" << r.groups[i].controller->winning_fraction();
        }
        break;
      case Stage::Bound: {
        const auto& b = r.bound->bound;
        os << "\n  eps=" << b.epsilon << " T_d=" << b.horizon << " psi_hat=" << b.psi_hat << " ("
           << (r.bound->psi_hat_overridden ? "override" : "formula") << ") " << to_string(b.regime)
           << " violation<=" << b.violation_bound << " success>=" << b.success_bound
           << "\n  formula psi_hat=" << r.bound->psi_hat_formula
           << " violation<=" << r.bound->formula_bound.violation_bound;
        break;
      }
      case Stage::Simulate: {
        const auto& s = r.simulation->summary;
        os << "\n  trials=" << s.n_trials << " violations=" << s.violations << " freq=" << s.frequency
           << " cp95_upper=" << s.cp_upper << " mean_sup_err=" << s.mean_sup_error << " substeps=" << s.n_substeps;
        break;
      }
    }
    os << '\n';
  }
  os << "artifacts in " << cfg.output_dir << '\n';
  std::cout << os.str();
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compositional abstractions and safety controllers for networks of stochastic affine systems"};
  app.require_subcommand(1);

  std::string config_path;
  std::string stages_arg;
  std::string out_dir;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "run a pipeline from a JSON config");
  run->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);
  run->add_option("--stages", stages_arg, "comma-separated stage prefix");

  RoomParams rooms;
  auto* demo = app.add_subcommand("demo-rooms", "ring of heated rooms, end to end");
  demo->add_option("--n", rooms.n, "number of rooms");
  demo->add_option("--trials", rooms.n_trials, "Monte Carlo trials");
  demo->add_option("--K", rooms.K, "room feedback gain");
  demo->add_option("--stages", stages_arg, "comma-separated stage prefix");

  std::vector<std::pair<Stage, CLI::App*>> stage_cmds;
  for (Stage s : {Stage::Verify, Stage::Compose, Stage::Abstract, Stage::Synthesize, Stage::Bound, Stage::Simulate}) {
    auto* sub = app.add_subcommand(to_string(s), std::string("run the stages up to ") + to_string(s));
    sub->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);
    stage_cmds.emplace_back(s, sub);
  }
  for (auto* sub : app.get_subcommands([](CLI::App*) { return true; })) {
    sub->add_option("--seed", seed, "master RNG seed");
    sub->add_option("--out", out_dir, "output directory");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    PipelineConfig cfg;
    std::vector<Stage> stages = stages_through(Stage::Simulate);
    if (*demo) {
      cfg = generate_rooms(rooms);
      if (!stages_arg.empty()) stages = parse_stages(split(stages_arg));
    } else {
      cfg = load_config(config_path);
      if (*run) {
        if (!stages_arg.empty()) {
          stages = parse_stages(split(stages_arg));
        } else if (!cfg.stages.empty()) {
          stages = parse_stages(cfg.stages);
        }
      }
      for (auto& [s, sub] : stage_cmds)
        if (*sub) stages = stages_through(s);
    }
    if (seed != 0 || app.get_subcommands().front()->count("--seed")) cfg.sim.seed = seed;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    const PipelineResult res = run_pipeline(cfg, stages);
    report(res, cfg);
    return kOk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}
