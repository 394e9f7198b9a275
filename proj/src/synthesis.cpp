#include "stochsym/synthesis.hpp"

#include <algorithm>

#include "stochsym/error.hpp"

namespace stochsym {

namespace {

double row_value(const FiniteAbstraction& abs, Index row, const std::vector<double>& next) {
  double v = 0.0;
  for (std::size_t i = abs.row_ptr[static_cast<std::size_t>(row)]; i < abs.row_ptr[static_cast<std::size_t>(row) + 1]; ++i) {
    const Index t = abs.col[i];
    if (t != abs.sink()) v += abs.prob[i] * next[static_cast<std::size_t>(t)];
  }
  return v;
}

}  // namespace

Index Controller::action(Index state, int step) const {
  if (state < 0 || state >= n_states) return -1;
  if (kind == ControllerKind::Stationary) return table[static_cast<std::size_t>(state)];
  if (step < 0 || step >= static_cast<int>(steps.size())) return -1;
  return steps[static_cast<std::size_t>(step)][static_cast<std::size_t>(state)];
}

double Controller::winning_fraction() const {
  if (n_states == 0) return 0.0;
  return static_cast<double>(std::count(winning.begin(), winning.end(), 1)) / static_cast<double>(n_states);
}

std::vector<char> safe_states(const FiniteAbstraction& abs, const Matrix& C1, const SafetySpec& spec) {
  const Matrix out_map = C1 * abs.P;
  if (spec.safe_box.dim() != out_map.rows()) throw Error(Errc::DimensionMismatch, "safe_box", "expected output dimension");
  Box box = spec.safe_box;
  if (spec.contraction) {
    box.lower.array() += *spec.contraction;
    box.upper.array() -= *spec.contraction;
    if ((box.lower.array() > box.upper.array()).any()) throw Error(Errc::EmptyBox, "safe_box", "contraction empties the set");
  }
  std::vector<char> safe(static_cast<std::size_t>(abs.n_states()));
  for (Index s = 0; s < abs.n_states(); ++s) safe[static_cast<std::size_t>(s)] = box.contains(out_map * abs.state_grid.center(s), 1e-12);
  return safe;
}

Controller safety_fixpoint(const FiniteAbstraction& abs, const std::vector<char>& safe) {
  if (abs.kind != AbstractionKind::Deterministic) throw Error(Errc::InvalidSpec, "abstraction", "fixpoint needs a deterministic abstraction");
  const Index S = abs.n_states();
  if (static_cast<Index>(safe.size()) != S) throw Error(Errc::DimensionMismatch, "safe", "one flag per state");
  std::vector<char> Z(safe.begin(), safe.end());
  auto in_z = [&](Index t) { return t != abs.sink() && Z[static_cast<std::size_t>(t)]; };
  auto witness = [&](Index s) -> Index {
    for (Index u = 0; u < abs.n_inputs(); ++u) {
      bool all = true;
      for (Index w = 0; w < abs.n_internal() && all; ++w) all = in_z(abs.successor[static_cast<std::size_t>(abs.row_index(s, u, w))]);
      if (all) return u;
    }
    return -1;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<char> next = Z;
    for (Index s = 0; s < S; ++s) {
      if (Z[static_cast<std::size_t>(s)] && witness(s) < 0) {
        next[static_cast<std::size_t>(s)] = 0;
        changed = true;
      }
    }
    Z.swap(next);
  }
  Controller c;
  c.kind = ControllerKind::Stationary;
  c.n_states = S;
  c.winning = Z;
  c.table.assign(static_cast<std::size_t>(S), -1);
  c.values.assign(static_cast<std::size_t>(S), 0.0);
  for (Index s = 0; s < S; ++s) {
    if (!Z[static_cast<std::size_t>(s)]) continue;
    c.table[static_cast<std::size_t>(s)] = witness(s);
    c.values[static_cast<std::size_t>(s)] = 1.0;
  }
  return c;
}

Controller safety_value_iteration(const FiniteAbstraction& abs, const std::vector<char>& safe, int horizon) {
  if (abs.kind != AbstractionKind::Stochastic) throw Error(Errc::InvalidSpec, "abstraction", "value iteration needs a stochastic abstraction");
  if (horizon < 0) throw Error(Errc::InvalidSpec, "horizon", "must be nonnegative");
  const Index S = abs.n_states();
  if (static_cast<Index>(safe.size()) != S) throw Error(Errc::DimensionMismatch, "safe", "one flag per state");
  std::vector<double> V(static_cast<std::size_t>(S));
  for (Index s = 0; s < S; ++s) V[static_cast<std::size_t>(s)] = safe[static_cast<std::size_t>(s)] ? 1.0 : 0.0;

  Controller c;
  c.kind = ControllerKind::TimeVarying;
  c.n_states = S;
  c.steps.assign(static_cast<std::size_t>(horizon), std::vector<Index>(static_cast<std::size_t>(S), -1));
  for (int k = horizon - 1; k >= 0; --k) {
    std::vector<double> Vk(static_cast<std::size_t>(S), 0.0);
    auto& act = c.steps[static_cast<std::size_t>(k)];
    for (Index s = 0; s < S; ++s) {
      if (!safe[static_cast<std::size_t>(s)]) continue;
      double best = -1.0;
      Index best_u = -1;
      for (Index u = 0; u < abs.n_inputs(); ++u) {
        double worst = 1.0;
        for (Index w = 0; w < abs.n_internal(); ++w) worst = std::min(worst, row_value(abs, abs.row_index(s, u, w), V));
        if (worst > best) {
          best = worst;
          best_u = u;
        }
      }
      Vk[static_cast<std::size_t>(s)] = std::clamp(best, 0.0, 1.0);
      act[static_cast<std::size_t>(s)] = best_u;
    }
    V.swap(Vk);
  }
  c.values = V;
  c.winning.resize(static_cast<std::size_t>(S));
  for (Index s = 0; s < S; ++s) c.winning[static_cast<std::size_t>(s)] = V[static_cast<std::size_t>(s)] > 0.0;
  return c;
}

}  // namespace stochsym
