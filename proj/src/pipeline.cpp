#include "stochsym/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "stochsym/error.hpp"
#include "stochsym/log.hpp"

namespace stochsym {

namespace {

constexpr Stage kOrder[] = {Stage::Verify, Stage::Compose, Stage::Abstract, Stage::Synthesize, Stage::Bound, Stage::Simulate};

[[noreturn]] void bad(const std::string& field, const std::string& what) { throw Error(Errc::Config, field, what); }

std::string num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class T>
std::optional<T> opt(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Grid zero_dim_grid() { return make_grid(Vector(0), Vector(0), {}); }

Box grid_box(const Grid& g) { return Box{g.lower, g.upper()}; }

// hull of the representative points
Box center_hull(const Grid& g) { return Box{g.lower + 0.5 * g.widths, g.upper() - 0.5 * g.widths}; }

StorageCertificate seed_from_json(const Json& j, const AffineSystem& sys, double tau) {
  Json full = j;
  for (const char* k : {"M_bar", "K", "P", "Q"}) full[k] = 0.0;
  StorageCertificate c = certificate_from_json(full, sys, tau, "certificate_solve");
  c.M_bar.resize(0, 0);
  c.K.resize(0, 0);
  c.P.resize(0, 0);
  c.Q.resize(0, 0);
  return c;
}

SubsystemGroup group_from_json(const Json& j, double tau, std::size_t idx) {
  const std::string field = "subsystems[" + std::to_string(idx) + "]";
  SubsystemGroup g;
  g.name = j.value("name", "sub" + std::to_string(idx));
  g.count = j.value("count", Index{1});
  if (g.count < 1) bad(field, "count must be at least 1");
  g.sys = system_from_json(j, field);
  if (j.contains("certificate")) g.cert = certificate_from_json(j.at("certificate"), g.sys, tau, field + ".certificate");
  if (j.contains("certificate_solve")) {
    const Json& s = j.at("certificate_solve");
    CertificateSolve cs;
    cs.targets.kappa_tilde = s.value("kappa_tilde", 0.0);
    cs.targets.margin = s.value("margin", 0.0);
    if (s.contains("P")) cs.targets.P = matrix_from_json(s.at("P"), "P");
    cs.seed = seed_from_json(s, g.sys, tau);
    cs.seed.kappa_tilde = cs.targets.kappa_tilde;
    g.solve = cs;
  }
  const Index n = g.sys.n();
  const Json disc = j.value("discretization", Json::object());
  g.disc.tau = tau;
  g.disc.D_tilde = matrix_or_zeros(disc, "D_tilde", n, g.sys.p());
  g.disc.R_tilde = matrix_or_zeros(disc, "R_tilde", n, g.sys.noise_dim());
  if (j.contains("grid")) {
    const Json& gr = j.at("grid");
    if (gr.contains("state")) g.state_grid = grid_from_json(gr.at("state"), field + ".grid.state");
    if (gr.contains("input")) g.input_grid = grid_from_json(gr.at("input"), field + ".grid.input");
    if (gr.contains("internal")) {
      g.internal_grid = grid_from_json(gr.at("internal"), field + ".grid.internal");
    } else if (g.sys.p() == 0) {
      g.internal_grid = zero_dim_grid();
    }
  }
  if (j.contains("safe_box")) g.safe_box = box_from_json(j.at("safe_box"), field + ".safe_box");
  if (j.contains("initial_state")) g.initial_state = vector_from_json(j.at("initial_state"), field + ".initial_state");
  return g;
}

Json group_to_json(const SubsystemGroup& g) {
  Json j{{"name", g.name}, {"count", g.count}};
  const Json sys = to_json(g.sys);
  for (auto& [k, v] : sys.items()) j[k] = v;
  if (g.cert) {
    Json c = to_json(*g.cert);
    c.erase("tau");
    j["certificate"] = c;
  }
  if (g.solve) {
    Json s = to_json(g.solve->seed);
    for (const char* k : {"M_bar", "K", "P", "Q", "H", "tau"}) s.erase(k);
    s["kappa_tilde"] = g.solve->targets.kappa_tilde;
    s["margin"] = g.solve->targets.margin;
    if (g.solve->targets.P) s["P"] = to_json(*g.solve->targets.P);
    j["certificate_solve"] = s;
  }
  j["discretization"] = Json{{"D_tilde", to_json(g.disc.D_tilde)}, {"R_tilde", to_json(g.disc.R_tilde)}};
  Json grid = Json::object();
  if (g.state_grid) grid["state"] = to_json(*g.state_grid);
  if (g.input_grid) grid["input"] = to_json(*g.input_grid);
  if (g.internal_grid) grid["internal"] = to_json(*g.internal_grid);
  j["grid"] = grid;
  if (g.safe_box) j["safe_box"] = to_json(*g.safe_box);
  if (g.initial_state) j["initial_state"] = to_json(*g.initial_state);
  return j;
}

template <class T, class F>
std::vector<T> expand(const PipelineConfig& cfg, F get) {
  std::vector<T> out;
  for (std::size_t i = 0; i < cfg.groups.size(); ++i)
    for (Index c = 0; c < cfg.groups[i].count; ++c) out.push_back(get(i));
  return out;
}

Error tagged(const Error& e, Stage s) {
  return Error(e.code(), e.subject(), std::string("[") + to_string(s) + "] " + e.message(), e.index());
}

struct Writer {
  bool enabled;
  std::filesystem::path dir;
  std::vector<std::string>& artifacts;

  void json(const std::string& name, const Json& j) {
    artifacts.push_back(name);
    if (enabled) write_json_file((dir / name).string(), j);
  }
  void text(const std::string& name, const std::string& t) {
    artifacts.push_back(name);
    if (enabled) write_text_file((dir / name).string(), t);
  }
};

Vector stacked_initial_state(const PipelineConfig& cfg) {
  std::vector<Vector> parts;
  for (const auto& g : cfg.groups) {
    if (!g.initial_state) bad(g.name, "initial_state is required for simulation");
    if (g.initial_state->size() != g.sys.n()) bad(g.name + ".initial_state", "expected n entries");
    for (Index c = 0; c < g.count; ++c) parts.push_back(*g.initial_state);
  }
  Index total = 0;
  for (const auto& p : parts) total += p.size();
  Vector x(total);
  Index at = 0;
  for (const auto& p : parts) {
    x.segment(at, p.size()) = p;
    at += p.size();
  }
  return x;
}

// ---- stages ------------------------------------------------------------------

void stage_verify(const PipelineConfig& cfg, PipelineResult& res, Writer& out) {
  Json groups = Json::array();
  res.groups.clear();
  for (const auto& g : cfg.groups) {
    validate_system(g.sys);
    GroupResult gr;
    if (g.cert) {
      gr.cert = *g.cert;
    } else if (g.solve) {
      const Candidates c = solve_candidates(g.sys, g.solve->targets);
      gr.cert = g.solve->seed;
      gr.cert.M_bar = c.M_bar;
      gr.cert.K = c.K;
      gr.cert.P = c.P;
      gr.cert.Q = c.Q;
      gr.cert.H = c.H;
    } else {
      bad(g.name, "needs a certificate or certificate_solve");
    }
    gr.cert.tau = cfg.tau;
    const double w_hat_bound = max_norm(g.internal_grid ? grid_box(*g.internal_grid) : g.sys.internal_box);
    gr.constants = derive_constants(gr.cert, g.sys, g.disc, w_hat_bound);
    gr.lyapunov = check_lyapunov(g.sys, gr.cert.M_bar, gr.cert.K, gr.cert.kappa_tilde);
    gr.geometric = check_geometric(g.sys, gr.cert.P, gr.cert.Q, gr.cert.H);
    gr.dissipativity = check_dissipativity_lmi(gr.cert, g.sys);

    groups.push_back(Json{{"name", g.name},
                          {"count", g.count},
                          {"certificate", to_json(gr.cert)},
                          {"checks",
                           Json{{"lyapunov_margin", gr.lyapunov.margin},
                                {"residual_bq_ap", gr.geometric.residual_bq_ap},
                                {"residual_d_bh", gr.geometric.residual_d_bh},
                                {"dissipativity_margin", gr.dissipativity.margin},
                                {"decay_factor", gr.cert.decay_factor()}}},
                          {"constants", to_json(gr.constants)}});
    res.groups.push_back(std::move(gr));
  }
  out.json("certificates.json", Json{{"tau", cfg.tau}, {"groups", groups}});
}

void stage_compose(const PipelineConfig& cfg, PipelineResult& res, Writer& out) {
  InterconnectionSpec ic;
  ic.M = cfg.M;
  const Index N = cfg.subsystem_count();
  ic.mu = cfg.mu.size() == 1 ? std::vector<double>(static_cast<std::size_t>(N), cfg.mu[0]) : cfg.mu;
  ic.subsystem_dims = expand<SubsystemDims>(cfg, [&](std::size_t i) { return dims_of(cfg.groups[i].sys); });
  validate_interconnection(ic);
  const auto y_boxes = expand<Box>(cfg, [&](std::size_t i) { return internal_output_box(cfg.groups[i].sys); });
  const auto w_boxes = expand<Box>(cfg, [&](std::size_t i) { return cfg.groups[i].sys.internal_box; });
  check_well_posed(ic, y_boxes, w_boxes);

  const auto certs = expand<StorageCertificate>(cfg, [&](std::size_t i) { return res.groups[i].cert; });
  const auto consts = expand<SstfConstants>(cfg, [&](std::size_t i) { return res.groups[i].constants; });
  const auto full = expand<char>(cfg, [&](std::size_t i) { return static_cast<char>(has_full_state_output(cfg.groups[i].sys)); });
  std::unique_ptr<bool[]> flags(new bool[full.size()]);
  for (std::size_t i = 0; i < full.size(); ++i) flags[i] = full[i];
  res.composition = compose_network(certs, consts, ic, cfg.alpha_mode, std::span<const bool>(flags.get(), full.size()));
  Json j = to_json(*res.composition);
  j["well_posed"] = true;
  j["mu"] = ic.mu;
  out.json("composition.json", j);
}

void stage_abstract(const PipelineConfig& cfg, PipelineResult& res, Writer& out) {
  Json groups = Json::array();
  std::ostringstream csv;
  csv << "class,state,input,internal,target,prob\n";
  for (std::size_t i = 0; i < cfg.groups.size(); ++i) {
    const auto& g = cfg.groups[i];
    if (!g.state_grid || !g.input_grid || !g.internal_grid) bad(g.name + ".grid", "state, input and internal grids are required");
    auto& gr = res.groups[i];
    gr.abstraction = g.disc.non_stochastic()
                         ? build_deterministic(g.disc, *g.state_grid, *g.input_grid, *g.internal_grid, gr.cert.P)
                         : build_stochastic(g.disc, *g.state_grid, *g.input_grid, *g.internal_grid, gr.cert.P);
    const auto& a = *gr.abstraction;
    const std::size_t nnz = a.kind == AbstractionKind::Deterministic ? a.successor.size() : a.prob.size();
    groups.push_back(Json{{"name", g.name},
                          {"count", g.count},
                          {"kind", to_string(a.kind)},
                          {"states", a.n_states()},
                          {"inputs", a.n_inputs()},
                          {"internal", a.n_internal()},
                          {"sink", a.sink()},
                          {"delta", delta_of(a.state_grid)},
                          {"state_grid", to_json(a.state_grid)},
                          {"input_grid", to_json(a.input_grid)},
                          {"internal_grid", to_json(a.internal_grid)},
                          {"transitions", nnz}});
    for (Index w = 0; w < a.n_internal(); ++w)
      for (Index u = 0; u < a.n_inputs(); ++u)
        for (Index s = 0; s < a.n_states(); ++s) {
          const Index row = a.row_index(s, u, w);
          if (a.kind == AbstractionKind::Deterministic) {
            csv << i << ',' << s << ',' << u << ',' << w << ',' << a.successor[static_cast<std::size_t>(row)] << ",1\n";
          } else {
            for (std::size_t k = a.row_ptr[static_cast<std::size_t>(row)]; k < a.row_ptr[static_cast<std::size_t>(row) + 1]; ++k) {
              csv << i << ',' << s << ',' << u << ',' << w << ',' << a.col[k] << ',' << num(a.prob[k]) << '\n';
            }
          }
        }
  }

  // abstract interconnection: representative outputs mapped through M stay in the internal grids
  if (cfg.M.size() > 0) {
    InterconnectionSpec ic;
    ic.M = cfg.M;
    const auto y_hat = expand<Box>(cfg, [&](std::size_t i) {
      return linear_image(Matrix(cfg.groups[i].sys.C2 * res.groups[i].cert.P), center_hull(*cfg.groups[i].state_grid));
    });
    const auto w_hat = expand<Box>(cfg, [&](std::size_t i) { return grid_box(*cfg.groups[i].internal_grid); });
    try {
      check_well_posed(ic, y_hat, w_hat);
    } catch (const Error& e) {
      if (e.code() != Errc::NotWellPosed) throw;
      throw Error(Errc::NotWellPosed, "Con111", "abstract internal outputs leave the internal-input grid", e.index());
    }
  }
  out.json("abstraction.json", Json{{"groups", groups}});
  out.text("abstraction.csv", csv.str());
}

void stage_synthesize(const PipelineConfig& cfg, PipelineResult& res, Writer& out) {
  Json groups = Json::array();
  bool any_tv = false;
  for (std::size_t i = 0; i < cfg.groups.size(); ++i) {
    const auto& g = cfg.groups[i];
    auto& gr = res.groups[i];
    SafetySpec spec;
    if (g.safe_box) {
      spec.safe_box = *g.safe_box;
    } else if (cfg.safe_box) {
      spec.safe_box = *cfg.safe_box;
    } else {
      bad(g.name, "no safe_box");
    }
    spec.contraction = cfg.contraction;
    spec.horizon = cfg.safety_horizon;
    gr.safe = safe_states(*gr.abstraction, g.sys.C1, spec);
    if (gr.abstraction->kind == AbstractionKind::Deterministic) {
      gr.controller = safety_fixpoint(*gr.abstraction, gr.safe);
    } else {
      gr.controller = safety_value_iteration(*gr.abstraction, gr.safe, spec.horizon.value_or(cfg.bound.horizon));
    }
    const auto& c = *gr.controller;
    any_tv = any_tv || c.kind == ControllerKind::TimeVarying;
    const auto winning = std::count(c.winning.begin(), c.winning.end(), 1);
    if (winning == 0) warn("EmptyWinningSet: no safe controller for " + g.name);
    Json entry{{"name", g.name},
               {"kind", c.kind == ControllerKind::Stationary ? "stationary" : "time-varying"},
               {"safe_box", to_json(spec.safe_box)},
               {"contraction", opt_json(spec.contraction)},
               {"horizon", spec.horizon ? Json(*spec.horizon) : Json(nullptr)},
               {"safe_states", std::count(gr.safe.begin(), gr.safe.end(), 1)},
               {"winning_states", winning},
               {"winning_fraction", c.winning_fraction()}};
    if (c.kind == ControllerKind::TimeVarying) entry["values"] = c.values;
    groups.push_back(entry);
  }
  std::ostringstream csv;
  csv << (any_tv ? "class,state_idx,step,input_idx\n" : "class,state_idx,input_idx\n");
  for (std::size_t i = 0; i < res.groups.size(); ++i) {
    const auto& c = *res.groups[i].controller;
    if (c.kind == ControllerKind::Stationary) {
      for (Index s = 0; s < c.n_states; ++s) {
        const Index a = c.table[static_cast<std::size_t>(s)];
        if (a < 0) continue;
        csv << i << ',' << s << (any_tv ? ",*," : ",") << a << '\n';
      }
    } else {
      for (std::size_t k = 0; k < c.steps.size(); ++k)
        for (Index s = 0; s < c.n_states; ++s) {
          const Index a = c.steps[k][static_cast<std::size_t>(s)];
          if (a >= 0) csv << i << ',' << s << ',' << k << ',' << a << '\n';
        }
    }
  }
  out.json("controller.json", Json{{"groups", groups}});
  out.text("controller.csv", csv.str());
}

void stage_bound(const PipelineConfig& cfg, PipelineResult& res, Writer& out) {
  const NetworkSsf& ssf = res.composition->ssf;
  BoundReport rep;
  const BoundQuery& q = cfg.bound;
  if (!(q.epsilon > 0.0)) bad("bound.epsilon", "must be positive");
  rep.alpha_of_eps = ssf.alpha_coeff * q.epsilon * q.epsilon;

  if (q.nu_hat_sup) {
    rep.nu_hat_sup = *q.nu_hat_sup;
  } else {
    double sq = 0.0;
    for (std::size_t i = 0; i < cfg.groups.size(); ++i) {
      const Grid& ig = res.groups[i].abstraction->input_grid;
      double best = 0.0;
      for (Index u = 0; u < ig.size(); ++u) best = std::max(best, ig.center(u).squaredNorm());
      sq += best * static_cast<double>(cfg.groups[i].count);
    }
    rep.nu_hat_sup = std::sqrt(sq);
  }
  rep.psi_hat_formula = psi_hat(ssf.rho_ext_slope, rep.nu_hat_sup, ssf.psi);

  double v0 = 0.0;
  if (q.v0) {
    v0 = *q.v0;
  } else {
    std::size_t k = 0;
    for (std::size_t i = 0; i < cfg.groups.size(); ++i) {
      const auto& g = cfg.groups[i];
      double s0 = 0.0;
      if (g.initial_state) {
        const Quantized qz = quantize(res.groups[i].abstraction->state_grid, *g.initial_state);
        if (!qz.inside) bad(g.name + ".initial_state", "outside the abstract state grid");
        s0 = storage_value(res.groups[i].cert, *g.initial_state, qz.rep);
      }
      for (Index c = 0; c < g.count; ++c, ++k) v0 += (cfg.mu.size() == 1 ? cfg.mu[0] : cfg.mu.at(k)) * s0;
    }
  }
  const double used = q.psi_hat_override.value_or(rep.psi_hat_formula);
  rep.psi_hat_overridden = q.psi_hat_override.has_value();
  rep.bound = closeness_bound(ssf.alpha_coeff, q.epsilon, ssf.kappa, used, v0, q.horizon);
  rep.formula_bound = closeness_bound(ssf.alpha_coeff, q.epsilon, ssf.kappa, rep.psi_hat_formula, v0, q.horizon);
  if (q.target) rep.epsilon_query = min_epsilon(ssf.alpha_coeff, ssf.kappa, used, v0, q.horizon, *q.target);
  if (rep.psi_hat_overridden && used < rep.psi_hat_formula) {
    warn("psi_hat override " + num(used) + " is below the admissible value " + num(rep.psi_hat_formula));
  }

  Json j = to_json(rep.bound);
  j["psi_hat_source"] = rep.psi_hat_overridden ? "override" : "formula";
  j["psi_hat_admissible"] = used >= rep.psi_hat_formula;
  j["alpha_of_eps"] = rep.alpha_of_eps;
  j["kappa"] = ssf.kappa;
  j["psi"] = ssf.psi;
  j["rho_ext_slope"] = ssf.rho_ext_slope;
  j["nu_hat_sup"] = rep.nu_hat_sup;
  j["psi_hat_formula"] = rep.psi_hat_formula;
  j["formula_bound"] = to_json(rep.formula_bound);
  if (rep.epsilon_query) {
    j["target"] = *q.target;
    j["min_epsilon"] = rep.epsilon_query->epsilon;
    j["min_epsilon_degenerate"] = rep.epsilon_query->degenerate;
  }
  res.bound = rep;
  out.json("bound.json", j);
}

void stage_simulate(const PipelineConfig& cfg, PipelineResult& res, Writer& out) {
  CosimNetwork net;
  net.systems = expand<AffineSystem>(cfg, [&](std::size_t i) { return cfg.groups[i].sys; });
  net.certs = expand<StorageCertificate>(cfg, [&](std::size_t i) { return res.groups[i].cert; });
  net.abstractions = expand<const FiniteAbstraction*>(cfg, [&](std::size_t i) { return &*res.groups[i].abstraction; });
  net.controllers = expand<const Controller*>(cfg, [&](std::size_t i) { return &*res.groups[i].controller; });
  net.ic.M = cfg.M;
  SimConfig sc = cfg.sim;
  sc.horizon = cfg.bound.horizon;
  sc.epsilon = cfg.bound.epsilon;
  sc.initial_state = stacked_initial_state(cfg);
  res.simulation = cosimulate(net, sc);
  const SimResult& sim = *res.simulation;

  Json j = to_json(sim.summary);
  j["seed"] = sc.seed;
  j["epsilon"] = sc.epsilon;
  j["horizon"] = sc.horizon;
  j["convergence"] = sim.convergence ? to_json(*sim.convergence) : Json(nullptr);
  if (res.bound) {
    j["theoretical_violation_bound"] = res.bound->bound.violation_bound;
    j["dominated"] = sim.summary.cp_upper <= res.bound->bound.violation_bound;
  }
  out.json("simulation_summary.json", j);

  std::ostringstream traj;
  std::ostringstream lng;
  const Index n_out = sim.records.empty() || sim.records[0].outputs.empty() ? 0 : sim.records[0].outputs[0].size();
  traj << "trial,k,err,sup_err";
  for (Index o = 0; o < n_out; ++o) traj << ",y" << o;
  traj << '\n';
  lng << "trial,k,output,concrete,abstract\n";
  for (const auto& r : sim.records) {
    if (r.outputs.empty()) continue;
    double sup = 0.0;
    for (std::size_t k = 0; k < r.outputs.size(); ++k) {
      sup = std::max(sup, r.errors[k]);
      traj << r.trial << ',' << k << ',' << num(r.errors[k]) << ',' << num(sup);
      for (Index o = 0; o < r.outputs[k].size(); ++o) {
        traj << ',' << num(r.outputs[k][o]);
        lng << r.trial << ',' << k << ',' << o << ',' << num(r.outputs[k][o]) << ',' << num(r.abstract_outputs[k][o]) << '\n';
      }
      traj << '\n';
    }
  }
  out.text("trajectories.csv", traj.str());
  out.text("outputs_long.csv", lng.str());
}

}  // namespace

const char* to_string(Stage s) noexcept {
  switch (s) {
    case Stage::Verify: return "verify";
    case Stage::Compose: return "compose";
    case Stage::Abstract: return "abstract";
    case Stage::Synthesize: return "synthesize";
    case Stage::Bound: return "bound";
    case Stage::Simulate: return "simulate";
  }
  return "?";
}

std::vector<Stage> parse_stages(const std::vector<std::string>& names) {
  if (names.empty() || names.size() > std::size(kOrder)) bad("stages", "expected a nonempty prefix of the stage order");
  std::vector<Stage> out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] != to_string(kOrder[i])) {
      bad("stages", "'" + names[i] + "' breaks the order verify,compose,abstract,synthesize,bound,simulate");
    }
    out.push_back(kOrder[i]);
  }
  return out;
}

std::vector<Stage> stages_through(Stage last) {
  std::vector<Stage> out;
  for (Stage s : kOrder) {
    out.push_back(s);
    if (s == last) break;
  }
  return out;
}

Index PipelineConfig::subsystem_count() const {
  Index n = 0;
  for (const auto& g : groups) n += g.count;
  return n;
}

PipelineConfig config_from_json(const Json& j) {
  if (!j.is_object()) bad("config", "expected a JSON object");
  PipelineConfig cfg;
  cfg.tau = j.value("tau", 0.1);
  const std::string mode = j.value("alpha_mode", "general");
  if (mode == "general") {
    cfg.alpha_mode = AlphaMode::General;
  } else if (mode == "stacked") {
    cfg.alpha_mode = AlphaMode::StackedQuadratic;
  } else {
    bad("alpha_mode", "expected general or stacked");
  }
  if (!j.contains("subsystems") || !j.at("subsystems").is_array() || j.at("subsystems").empty()) {
    bad("subsystems", "expected a nonempty array");
  }
  for (std::size_t i = 0; i < j.at("subsystems").size(); ++i) cfg.groups.push_back(group_from_json(j.at("subsystems")[i], cfg.tau, i));

  const Json ic = j.value("interconnection", Json::object());
  Index p_total = 0;
  Index q_total = 0;
  for (const auto& g : cfg.groups) {
    p_total += g.count * g.sys.p();
    q_total += g.count * g.sys.q2();
  }
  cfg.M = ic.contains("M") ? sparse_from_json(ic.at("M"), "interconnection.M") : SparseMatrix(p_total, q_total);
  if (ic.contains("mu")) {
    cfg.mu = ic.at("mu").is_number() ? std::vector<double>{ic.at("mu").get<double>()} : ic.at("mu").get<std::vector<double>>();
  } else {
    cfg.mu = {1.0};
  }

  const Json safety = j.value("safety", Json::object());
  if (safety.contains("safe_box")) cfg.safe_box = box_from_json(safety.at("safe_box"), "safety.safe_box");
  cfg.contraction = opt<double>(safety, "contraction");
  cfg.safety_horizon = opt<int>(safety, "horizon");

  const Json b = j.value("bound", Json::object());
  cfg.bound.epsilon = b.value("epsilon", 0.5);
  cfg.bound.horizon = b.value("horizon", 12);
  cfg.bound.v0 = opt<double>(b, "v0");
  cfg.bound.nu_hat_sup = opt<double>(b, "nu_hat_sup");
  cfg.bound.psi_hat_override = opt<double>(b, "psi_hat_override");
  cfg.bound.target = opt<double>(b, "target");

  const Json s = j.value("simulation", Json::object());
  cfg.sim.n_trials = s.value("n_trials", cfg.sim.n_trials);
  cfg.sim.n_substeps = s.value("n_substeps", cfg.sim.n_substeps);
  cfg.sim.seed = s.value("seed", cfg.sim.seed);
  cfg.sim.record_outputs = s.value("record_outputs", cfg.sim.record_outputs);
  cfg.sim.record_substeps = s.value("record_substeps", cfg.sim.record_substeps);
  cfg.sim.convergence_check = s.value("convergence_check", cfg.sim.convergence_check);
  cfg.sim.drift_tolerance = s.value("drift_tolerance", cfg.sim.drift_tolerance);
  cfg.sim.pilot_trials = s.value("pilot_trials", cfg.sim.pilot_trials);
  cfg.sim.max_doublings = s.value("max_doublings", cfg.sim.max_doublings);
  cfg.sim.threads = s.value("threads", 0u);

  if (j.contains("stages")) cfg.stages = j.at("stages").get<std::vector<std::string>>();
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  return cfg;
}

Json config_to_json(const PipelineConfig& cfg) {
  Json j;
  j["tau"] = cfg.tau;
  j["alpha_mode"] = to_string(cfg.alpha_mode);
  Json groups = Json::array();
  for (const auto& g : cfg.groups) groups.push_back(group_to_json(g));
  j["subsystems"] = groups;
  j["interconnection"] = Json{{"M", sparse_to_json(cfg.M)}, {"mu", cfg.mu}};
  Json safety = Json::object();
  if (cfg.safe_box) safety["safe_box"] = to_json(*cfg.safe_box);
  safety["contraction"] = opt_json(cfg.contraction);
  safety["horizon"] = cfg.safety_horizon ? Json(*cfg.safety_horizon) : Json(nullptr);
  j["safety"] = safety;
  j["bound"] = Json{{"epsilon", cfg.bound.epsilon},
                    {"horizon", cfg.bound.horizon},
                    {"v0", opt_json(cfg.bound.v0)},
                    {"nu_hat_sup", opt_json(cfg.bound.nu_hat_sup)},
                    {"psi_hat_override", opt_json(cfg.bound.psi_hat_override)},
                    {"target", opt_json(cfg.bound.target)}};
  j["simulation"] = Json{{"n_trials", cfg.sim.n_trials},
                         {"n_substeps", cfg.sim.n_substeps},
                         {"seed", cfg.sim.seed},
                         {"record_outputs", cfg.sim.record_outputs},
                         {"record_substeps", cfg.sim.record_substeps},
                         {"convergence_check", cfg.sim.convergence_check},
                         {"drift_tolerance", cfg.sim.drift_tolerance},
                         {"pilot_trials", cfg.sim.pilot_trials},
                         {"max_doublings", cfg.sim.max_doublings}};
  if (!cfg.stages.empty()) j["stages"] = cfg.stages;
  return j;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad(path, "cannot open config");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    bad(path, e.what());
  }
  try {
    return config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    bad(path, e.what());
  }
}

PipelineConfig generate_rooms(const RoomParams& p) {
  if (p.n < 3) throw Error(Errc::TooFewRooms, "n", "a ring needs at least three rooms");
  const double a = -2.0 * p.eta - p.beta;
  const double bb = p.theta * p.T_h;

  SubsystemGroup g;
  g.name = "room";
  g.count = p.n;
  auto scalar = [](double v) { return Matrix::Constant(1, 1, v); };
  g.sys.A = scalar(a);
  g.sys.B = scalar(bb);
  g.sys.C1 = scalar(1.0);
  g.sys.C2 = scalar(1.0);
  g.sys.D = scalar(p.eta);
  g.sys.G = scalar(p.g);
  g.sys.b = Vector::Constant(1, p.beta * p.T_e);
  g.sys.state_box = make_box(Vector::Constant(1, 20.0), Vector::Constant(1, 21.0));
  g.sys.input_box = make_box(Vector::Constant(1, -50.0), Vector::Constant(1, 50.0));
  g.sys.internal_box = make_box(Vector::Constant(1, 40.0), Vector::Constant(1, 42.0));

  StorageCertificate seed;
  seed.kappa_tilde = kappa_tilde_from(p.kappa_bar, p.kappa, p.tau);
  seed.tau = p.tau;
  seed.pi = p.pi;
  seed.kappa_bar = p.kappa_bar;
  const double decay = std::exp(-seed.kappa_tilde * p.tau);
  seed.Xbar11 = scalar(decay * p.tau * p.eta * p.eta);
  seed.Xbar12 = scalar(0.0);
  seed.Xbar21 = scalar(0.0);
  seed.Xbar22 = scalar(-p.pi * decay * p.tau * p.theta * p.theta * p.T_h * p.T_h);
  seed.gamma_slope = p.gamma_slope;
  if (bb != 0.0) {
    StorageCertificate c = seed;
    c.M_bar = scalar(1.0);
    c.K = scalar(p.K);
    c.P = scalar(1.0);
    c.Q = scalar(a / bb);
    c.H = scalar(p.eta / bb);
    g.cert = c;
  } else {
    g.solve = CertificateSolve{CandidateTargets{seed.kappa_tilde, 0.0, scalar(1.0)}, seed};
  }
  g.disc.tau = p.tau;
  g.disc.D_tilde = Matrix::Zero(1, 1);
  g.disc.R_tilde = Matrix::Zero(1, 1);

  const double w = std::ldexp(1.0, -7);
  g.state_grid = make_grid(Vector::Constant(1, 20.0 - w / 2), Vector::Constant(1, w), {129});
  const double du = std::ldexp(1.0, -17);
  g.input_grid = make_grid(Vector::Constant(1, -1.5 * du), Vector::Constant(1, du), {3});
  g.internal_grid = make_grid(Vector::Constant(1, 40.0), Vector::Constant(1, 2.0), {1});
  g.initial_state = Vector::Constant(1, p.initial_temperature);

  PipelineConfig cfg;
  cfg.groups.push_back(std::move(g));
  cfg.tau = p.tau;
  cfg.alpha_mode = AlphaMode::StackedQuadratic;
  std::vector<Triplet> trips;
  for (int i = 0; i < p.n; ++i) {
    trips.emplace_back(i, (i + 1) % p.n, 1.0);
    trips.emplace_back(i, (i + p.n - 1) % p.n, 1.0);
  }
  cfg.M.resize(p.n, p.n);
  cfg.M.setFromTriplets(trips.begin(), trips.end());
  cfg.mu = {1.0};
  cfg.safe_box = make_box(Vector::Constant(1, 20.0), Vector::Constant(1, 21.0));
  cfg.bound.epsilon = p.epsilon;
  cfg.bound.horizon = p.horizon;
  const double alpha_eps = p.epsilon * p.epsilon;
  cfg.bound.psi_hat_override = alpha_eps * (1.0 - std::pow(p.success_target, 1.0 / p.horizon));
  cfg.sim.n_trials = p.n_trials;
  cfg.sim.seed = p.seed;
  cfg.sim.record_outputs = 20;
  cfg.output_dir = "rooms_out";
  return cfg;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const std::vector<Stage>& stages, bool write_artifacts) {
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (stages[i] != kOrder[i]) bad("stages", "stages must form a prefix of the stage order");
  }
  PipelineResult res;
  Writer out{write_artifacts, cfg.output_dir, res.artifacts};
  if (write_artifacts) {
    std::error_code ec;
    std::filesystem::create_directories(out.dir, ec);
    if (ec) bad(cfg.output_dir, "cannot create output directory: " + ec.message());
  }
  out.json("config.json", config_to_json(cfg));
  for (Stage s : stages) {
    try {
      switch (s) {
        case Stage::Verify: stage_verify(cfg, res, out); break;
        case Stage::Compose: stage_compose(cfg, res, out); break;
        case Stage::Abstract: stage_abstract(cfg, res, out); break;
        case Stage::Synthesize: stage_synthesize(cfg, res, out); break;
        case Stage::Bound: stage_bound(cfg, res, out); break;
        case Stage::Simulate: stage_simulate(cfg, res, out); break;
      }
    } catch (const Error& e) {
      throw tagged(e, s);
    }
    res.stages_run.push_back(s);
  }
  return res;
}

}  // namespace stochsym
