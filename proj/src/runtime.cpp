#include "stochsym/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <thread>

#include "stochsym/bounds.hpp"
#include "stochsym/error.hpp"
#include "stochsym/log.hpp"

namespace stochsym {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

SparseMatrix sparse_of(const Matrix& m) { return m.sparseView(0.0, 0.0); }

template <class Get>
SparseMatrix stack_blocks(std::size_t count, Get get) {
  std::vector<Matrix> blocks;
  blocks.reserve(count);
  for (std::size_t i = 0; i < count; ++i) blocks.push_back(get(i));
  return block_diagonal(blocks);
}

// Stacked network data, shared read-only by all trials.
struct Network {
  std::size_t N = 0;
  SparseMatrix A, B, D, G, C1, C2, W, C1_hat, C2_hat, M;
  SparseMatrix L;  // A + BK + (D − BH)W
  Vector b;
  InterfaceGains gains;
  std::vector<Index> x_off, x_dim, w_off, w_dim;
  const CosimNetwork* src = nullptr;
  double tau = 0.0;
};

Network prepare(const CosimNetwork& net) {
  Network nw;
  nw.src = &net;
  nw.N = net.systems.size();
  if (nw.N == 0) throw Error(Errc::InvalidSpec, "network", "no subsystems");
  if (net.certs.size() != nw.N || net.abstractions.size() != nw.N || net.controllers.size() != nw.N) {
    throw Error(Errc::DimensionMismatch, "network", "one certificate, abstraction and controller per subsystem");
  }
  const auto& sys = net.systems;
  nw.A = stack_blocks(nw.N, [&](std::size_t i) { return sys[i].A; });
  nw.B = stack_blocks(nw.N, [&](std::size_t i) { return sys[i].B; });
  nw.D = stack_blocks(nw.N, [&](std::size_t i) { return sys[i].D; });
  nw.G = stack_blocks(nw.N, [&](std::size_t i) { return sys[i].G; });
  nw.C1 = stack_blocks(nw.N, [&](std::size_t i) { return sys[i].C1; });
  nw.C2 = stack_blocks(nw.N, [&](std::size_t i) { return sys[i].C2; });
  nw.C1_hat = stack_blocks(nw.N, [&](std::size_t i) { return Matrix(sys[i].C1 * net.abstractions[i]->P); });
  nw.C2_hat = stack_blocks(nw.N, [&](std::size_t i) { return Matrix(sys[i].C2 * net.abstractions[i]->P); });
  nw.gains = stack_gains(net.certs);
  nw.M = net.ic.M;
  if (nw.M.cols() != nw.C2.rows() || nw.M.rows() != nw.D.cols()) {
    throw Error(Errc::DimensionMismatch, "M", "coupling matrix does not match the stacked subsystems");
  }
  nw.W = nw.M * nw.C2;
  if (nw.B.cols() != nw.gains.K.rows() || nw.gains.K.cols() != nw.A.rows()) {
    throw Error(Errc::DimensionMismatch, "K", "gains do not match the stacked subsystems");
  }
  nw.L = nw.A + nw.B * nw.gains.K + (nw.D - nw.B * nw.gains.H) * nw.W;
  Index xo = 0;
  Index wo = 0;
  nw.b.resize(nw.A.rows());
  for (std::size_t i = 0; i < nw.N; ++i) {
    nw.x_off.push_back(xo);
    nw.x_dim.push_back(sys[i].n());
    nw.w_off.push_back(wo);
    nw.w_dim.push_back(sys[i].p());
    nw.b.segment(xo, sys[i].n()) = sys[i].b;
    if (net.abstractions[i]->state_grid.dim() != sys[i].n()) {
      throw Error(Errc::DimensionMismatch, "abstraction", "state grid dimension differs from subsystem", static_cast<Index>(i));
    }
    xo += sys[i].n();
    wo += sys[i].p();
  }
  nw.tau = net.certs[0].tau;
  for (const auto& c : net.certs) {
    if (c.tau != nw.tau) throw Error(Errc::InvalidSpec, "tau", "subsystems must share the sampling time");
  }
  if (!(nw.tau > 0.0)) throw Error(Errc::InvalidSpec, "tau", "must be positive");
  return nw;
}

Index internal_cell(const Grid& g, const Vector& w) {
  if (g.dim() == 0) return 0;
  Vector c = w;
  const Vector up = g.upper();
  for (Index d = 0; d < g.dim(); ++d) c[d] = std::clamp(c[d], g.lower[d], up[d]);
  return quantize_index(g, c, 0);
}

Index sample_row(const FiniteAbstraction& abs, Index row, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double r = uni(rng);
  double acc = 0.0;
  const std::size_t lo = abs.row_ptr[static_cast<std::size_t>(row)];
  const std::size_t hi = abs.row_ptr[static_cast<std::size_t>(row) + 1];
  for (std::size_t i = lo; i < hi; ++i) {
    acc += abs.prob[i];
    if (r < acc) return abs.col[i];
  }
  return hi > lo ? abs.col[hi - 1] : abs.sink();
}

TrajectoryRecord run_trial(const Network& nw, const SimConfig& cfg, int n_substeps, std::int64_t trial) {
  const CosimNetwork& net = *nw.src;
  TrajectoryRecord rec;
  rec.trial = trial;
  const bool keep = trial < cfg.record_outputs;
  std::mt19937_64 rng = trial_rng(cfg.seed, static_cast<std::uint64_t>(trial));
  std::normal_distribution<double> normal(0.0, 1.0);

  Vector x = cfg.initial_state;
  Vector x_hat(x.size());
  std::vector<Index> s(nw.N);
  rec.min_output = std::numeric_limits<double>::infinity();
  rec.max_output = -std::numeric_limits<double>::infinity();

  auto abort_at = [&](int k) {
    rec.aborted = true;
    rec.abort_step = k;
    rec.violation = true;
  };

  for (std::size_t i = 0; i < nw.N; ++i) {
    const auto& abs = *net.abstractions[i];
    s[i] = quantize_index(abs.state_grid, x.segment(nw.x_off[i], nw.x_dim[i]), abs.sink());
    if (s[i] == abs.sink()) {
      abort_at(0);
      return rec;
    }
    x_hat.segment(nw.x_off[i], nw.x_dim[i]) = abs.state_grid.center(s[i]);
  }

  const double dt = nw.tau / n_substeps;
  const double sqdt = std::sqrt(dt);
  Vector z(nw.G.cols());
  Vector c(x.size());
  Vector drift(x.size());
  Vector noise(x.size());
  std::vector<Index> u(nw.N);
  for (int k = 0;; ++k) {
    const Vector y = nw.C1 * x;
    const Vector y_hat = nw.C1_hat * x_hat;
    const double err = (y - y_hat).norm();
    rec.errors.push_back(err);
    rec.sup_error = std::max(rec.sup_error, err);
    if (y.size()) {
      rec.min_output = std::min(rec.min_output, y.minCoeff());
      rec.max_output = std::max(rec.max_output, y.maxCoeff());
    }
    if (keep) {
      rec.outputs.push_back(y);
      rec.abstract_outputs.push_back(y_hat);
    }
    if (k == cfg.horizon) break;

    for (std::size_t i = 0; i < nw.N; ++i) {
      u[i] = net.controllers[i]->action(s[i], k);
      if (u[i] < 0) {
        abort_at(k);
        rec.sup_error = std::max(rec.sup_error, err);
        return rec;
      }
    }

    InterfaceLatch latch;
    latch.step = k;
    latch.xi_k = x;
    latch.xi_hat = x_hat;
    latch.w_hat = nw.M * (nw.C2_hat * x_hat);
    latch.w_k = nw.W * x;
    // ν(t) = ν(kτ) + K(ξ(t) − ξ(kτ)) − H(w(t) − w(kτ)), so the drift is Lξ + c on [kτ, (k+1)τ)
    const Vector nu_k = interface_input(nw.gains, latch, x, latch.w_k, k * nw.tau, nw.tau);
    c = nw.B * (nu_k - nw.gains.K * latch.xi_k + nw.gains.H * latch.w_k) + nw.b;
    for (int j = 0; j < n_substeps; ++j) {
      for (Index r = 0; r < z.size(); ++r) z[r] = normal(rng);
      drift.noalias() = nw.L * x;
      noise.noalias() = nw.G * z;
      x += (drift + c) * dt + noise * sqdt;
      if (keep && cfg.record_substeps) rec.substep_errors.push_back((nw.C1 * x - y_hat).norm());
    }

    for (std::size_t i = 0; i < nw.N; ++i) {
      const auto& abs = *net.abstractions[i];
      const Index wi = internal_cell(abs.internal_grid, latch.w_hat.segment(nw.w_off[i], nw.w_dim[i]));
      const Index row = abs.row_index(s[i], u[i], wi);
      const Index next = abs.kind == AbstractionKind::Deterministic ? abs.successor[static_cast<std::size_t>(row)]
                                                                    : sample_row(abs, row, rng);
      if (next == abs.sink()) {
        abort_at(k + 1);
        return rec;
      }
      s[i] = next;
      x_hat.segment(nw.x_off[i], nw.x_dim[i]) = abs.state_grid.center(next);
    }
  }
  rec.violation = rec.sup_error >= cfg.epsilon;
  return rec;
}

std::vector<TrajectoryRecord> run_trials(const Network& nw, const SimConfig& cfg, int n_substeps, std::int64_t count) {
  std::vector<TrajectoryRecord> out(static_cast<std::size_t>(count));
  const unsigned workers = std::min<unsigned>(worker_count(cfg.threads), static_cast<unsigned>(std::max<std::int64_t>(1, count)));
  std::atomic<std::int64_t> next{0};
  auto body = [&] {
    for (std::int64_t t = next++; t < count; t = next++) out[static_cast<std::size_t>(t)] = run_trial(nw, cfg, n_substeps, t);
  };
  if (workers <= 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(body);
    for (auto& th : pool) th.join();
  }
  return out;
}

SimSummary summarize(const std::vector<TrajectoryRecord>& recs, int n_substeps) {
  SimSummary s;
  s.n_trials = static_cast<std::int64_t>(recs.size());
  s.n_substeps = n_substeps;
  s.clean_min_output = std::numeric_limits<double>::infinity();
  s.clean_max_output = -std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (const auto& r : recs) {
    s.violations += r.violation;
    s.aborted += r.aborted;
    total += r.sup_error;
    s.max_sup_error = std::max(s.max_sup_error, r.sup_error);
    if (!r.violation) {
      s.clean_min_output = std::min(s.clean_min_output, r.min_output);
      s.clean_max_output = std::max(s.clean_max_output, r.max_output);
    }
  }
  if (s.n_trials > 0) {
    s.frequency = static_cast<double>(s.violations) / static_cast<double>(s.n_trials);
    s.mean_sup_error = total / static_cast<double>(s.n_trials);
    s.cp_upper = clopper_pearson_upper(s.violations, s.n_trials);
  }
  return s;
}

}  // namespace

InterfaceGains gains_of(const StorageCertificate& cert) {
  return {sparse_of(cert.K), sparse_of(cert.P), sparse_of(cert.Q), sparse_of(cert.H)};
}

InterfaceGains stack_gains(std::span<const StorageCertificate> certs) {
  InterfaceGains g;
  g.K = stack_blocks(certs.size(), [&](std::size_t i) { return certs[i].K; });
  g.P = stack_blocks(certs.size(), [&](std::size_t i) { return certs[i].P; });
  g.Q = stack_blocks(certs.size(), [&](std::size_t i) { return certs[i].Q; });
  g.H = stack_blocks(certs.size(), [&](std::size_t i) { return certs[i].H; });
  return g;
}

InterfaceTerms interface_terms(const InterfaceGains& g, const InterfaceLatch& latch, const Vector& xi_t,
                               const Vector& w_t) {
  const Vector p_hat = g.P * latch.xi_hat;
  InterfaceTerms t;
  t.feedback = g.K * (xi_t - p_hat);
  t.offset = -(g.Q * latch.xi_hat);
  t.sync = latch.xi_k - p_hat;
  t.internal_sync = g.H * (latch.w_k - latch.w_hat);
  t.internal_now = -(g.H * w_t);
  return t;
}

Vector interface_input(const InterfaceGains& g, const InterfaceLatch& latch, const Vector& xi_t, const Vector& w_t,
                       double t, double tau) {
  const auto step = static_cast<std::int64_t>(std::floor(t / tau + 1e-9));
  if (step != latch.step) {
    std::ostringstream msg;
    msg << "latched step " << latch.step << " but t/τ gives " << step;
    throw Error(Errc::StaleLatch, "latch", msg.str());
  }
  if (g.K.rows() != g.Q.rows() || latch.xi_k.size() != g.K.rows()) {
    throw Error(Errc::DimensionMismatch, "interface", "the synchronisation term needs m = n");
  }
  return interface_terms(g, latch, xi_t, w_t).sum();
}

Vector em_step(const AffineSystem& sys, const Vector& x, const Vector& nu, const Vector& w, double dt,
               const Vector& z) {
  Vector drift = sys.A * x + sys.B * nu + sys.b;
  if (sys.p() > 0) drift += sys.D * w;
  return x + drift * dt + sys.G * z * std::sqrt(dt);
}

std::mt19937_64 trial_rng(std::uint64_t master_seed, std::uint64_t trial) {
  return std::mt19937_64(splitmix64(splitmix64(master_seed) ^ splitmix64(trial + 0x632be59bd9b4e019ULL)));
}

unsigned worker_count(unsigned requested) {
  unsigned n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("STOCHSYM_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return std::max(1u, n);
}

SimResult cosimulate(const CosimNetwork& net, const SimConfig& config) {
  if (config.n_substeps < 1) throw Error(Errc::InvalidSpec, "n_substeps", "must be at least 1");
  if (config.n_trials < 1) throw Error(Errc::InvalidSpec, "n_trials", "must be at least 1");
  if (config.horizon < 0) throw Error(Errc::InvalidSpec, "horizon", "must be nonnegative");
  const Network nw = prepare(net);
  if (config.initial_state.size() != nw.A.rows()) {
    throw Error(Errc::DimensionMismatch, "initial_state", "expected the stacked state dimension");
  }

  SimResult result;
  int n_sub = config.n_substeps;
  if (config.convergence_check) {
    const std::int64_t pilot = std::min(config.n_trials, config.pilot_trials);
    ConvergenceReport conv;
    SimSummary coarse = summarize(run_trials(nw, config, n_sub, pilot), n_sub);
    for (int d = 0;; ++d) {
      const SimSummary fine = summarize(run_trials(nw, config, 2 * n_sub, pilot), 2 * n_sub);
      conv.frequency_drift = std::abs(fine.frequency - coarse.frequency);
      conv.mean_error_drift = std::abs(fine.mean_sup_error - coarse.mean_sup_error);
      if (conv.frequency_drift < config.drift_tolerance) {
        conv.converged = true;
        break;
      }
      n_sub *= 2;
      coarse = fine;
      if (d + 1 >= config.max_doublings) {
        std::ostringstream msg;
        msg << "Euler-Maruyama drift " << conv.frequency_drift << " still above tolerance at " << n_sub
            << " substeps";
        warn(msg.str());
        break;
      }
    }
    conv.accepted_substeps = n_sub;
    result.convergence = conv;
  }
  result.records = run_trials(nw, config, n_sub, config.n_trials);
  result.summary = summarize(result.records, n_sub);
  return result;
}

}  // namespace stochsym
