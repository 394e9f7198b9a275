#pragma once

#include <optional>
#include <vector>

#include "stochsym/abstraction.hpp"

namespace stochsym {

struct SafetySpec {
  Box safe_box;                      // output space
  std::optional<double> contraction;  // shrink every side by this much before synthesis
  std::optional<int> horizon;         // empty: invariance fixpoint
};

enum class ControllerKind { Stationary, TimeVarying };

struct Controller {
  ControllerKind kind = ControllerKind::Stationary;
  Index n_states = 0;
  std::vector<Index> table;               // stationary: input per state, -1 when none
  std::vector<std::vector<Index>> steps;  // time-varying: steps[k][s]
  std::vector<char> winning;
  std::vector<double> values;  // stochastic: safety probability from each state

  Index action(Index state, int step = 0) const;
  double winning_fraction() const;
};

/// Cells whose representative output C₁P·x̂ lies in the (optionally contracted) safe box.
std::vector<char> safe_states(const FiniteAbstraction& abs, const Matrix& C1, const SafetySpec& spec);

/// Largest Z ⊆ safe with ∀s∈Z ∃u ∀w: succ(s,u,w) ∈ Z. Lowest-index witness is the action.
Controller safety_fixpoint(const FiniteAbstraction& abs, const std::vector<char>& safe);

/// Finite-horizon maximal safety probability, max over inputs and min over internal inputs.
Controller safety_value_iteration(const FiniteAbstraction& abs, const std::vector<char>& safe, int horizon);

}  // namespace stochsym
