#pragma once

#include <optional>
#include <vector>

#include "stochsym/model.hpp"

namespace stochsym {

/// Uniform grid of half-open cells [lo, lo + w); the last cell in each dimension is closed.
/// Representatives are cell centres. Flat indices run fastest in dimension 0.
struct Grid {
  Vector lower;
  Vector widths;
  std::vector<Index> counts;

  Index dim() const { return lower.size(); }
  Index size() const;
  Vector upper() const;
  Vector center(Index flat) const;
  std::vector<Index> unflatten(Index flat) const;
  Index flatten(const std::vector<Index>& multi) const;
};

/// Grid with the given cell counts starting at `lower`.
Grid make_grid(Vector lower, Vector widths, std::vector<Index> counts);
/// Smallest grid of cells of width `widths` starting at box.lower that covers the box.
Grid grid_covering(const Box& box, const Vector& widths);

struct Quantized {
  bool inside = false;
  Index index = -1;
  Vector rep;
};

Quantized quantize(const Grid& grid, const Vector& x);
/// Flat index of x, or `outside` when x leaves the grid.
Index quantize_index(const Grid& grid, const Vector& x, Index outside);

/// ‖widths‖₂, the largest distance between two points of one cell.
double delta_of(const Grid& grid);

enum class AbstractionKind { Deterministic, Stochastic };

/// ξ̂⁺ = Π(ξ̂ + ν̂ + D̃ŵ + R̃ς) on the grid, with one absorbing sink (index n_states()).
struct FiniteAbstraction {
  AbstractionKind kind = AbstractionKind::Deterministic;
  Grid state_grid;
  Grid input_grid;
  Grid internal_grid;
  DiscretizationSpec disc;
  Matrix P;

  std::vector<Index> successor;  // deterministic, one per row

  std::vector<std::size_t> row_ptr;  // stochastic, CSR over rows
  std::vector<Index> col;
  std::vector<double> prob;

  Index n_states() const { return state_grid.size(); }
  Index n_inputs() const { return input_grid.size(); }
  Index n_internal() const { return internal_grid.size(); }
  Index sink() const { return n_states(); }
  Index n_rows() const { return n_states() * n_inputs() * n_internal(); }
  Index row_index(Index s, Index u, Index w) const { return s + n_states() * (u + n_inputs() * w); }
};

/// Requires R̃ = 0.
FiniteAbstraction build_deterministic(const DiscretizationSpec& disc, const Grid& state_grid, const Grid& input_grid,
                                      const Grid& internal_grid, const Matrix& P = Matrix());

/// Requires R̃R̃ᵀ diagonal. Cell masses are products of per-axis Gaussian interval masses;
/// mass outside the grid goes to the sink.
FiniteAbstraction build_stochastic(const DiscretizationSpec& disc, const Grid& state_grid, const Grid& input_grid,
                                   const Grid& internal_grid, const Matrix& P = Matrix());

/// Standard normal mass of [a, b].
double normal_interval_mass(double a, double b);

}  // namespace stochsym
