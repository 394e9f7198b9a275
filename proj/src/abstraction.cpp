#include "stochsym/abstraction.hpp"

#include <cmath>
#include <sstream>

#include "stochsym/error.hpp"
#include "stochsym/log.hpp"

namespace stochsym {

namespace {

constexpr double kSnap = 1e-9;

// cell index along one axis, or -1 outside
Index axis_cell(double x, double lo, double w, Index count) {
  const double t = (x - lo) / w;
  if (!std::isfinite(t)) return -1;
  if (t < 0.0) return t > -kSnap ? 0 : -1;
  auto k = static_cast<Index>(std::floor(t));
  if (static_cast<double>(k + 1) - t < kSnap) ++k;
  if (k >= count) return t <= static_cast<double>(count) + kSnap ? count - 1 : -1;
  return k;
}

void check_grid(const Grid& g, const char* name) {
  if (static_cast<Index>(g.counts.size()) != g.dim() || g.widths.size() != g.dim()) {
    throw Error(Errc::DimensionMismatch, name, "lower, widths and counts disagree");
  }
  for (Index d = 0; d < g.dim(); ++d) {
    if (!(g.widths[d] > 0.0) || !std::isfinite(g.widths[d]) || !std::isfinite(g.lower[d])) {
      throw Error(Errc::InvalidSpec, name, "widths must be finite and positive", d);
    }
    if (g.counts[static_cast<std::size_t>(d)] < 1) throw Error(Errc::InvalidSpec, name, "empty axis", d);
  }
}

void check_shapes(const DiscretizationSpec& disc, const Grid& state_grid, const Grid& input_grid,
                  const Grid& internal_grid, const Matrix& P) {
  check_grid(state_grid, "state_grid");
  check_grid(input_grid, "input_grid");
  check_grid(internal_grid, "internal_grid");
  const Index n = state_grid.dim();
  if (input_grid.dim() != n) throw Error(Errc::DimensionMismatch, "input_grid", "abstract inputs live in the state space");
  if (disc.D_tilde.rows() != n || disc.D_tilde.cols() != internal_grid.dim()) {
    throw Error(Errc::DimensionMismatch, "D_tilde", "expected n x p");
  }
  if (disc.R_tilde.size() != 0 && disc.R_tilde.rows() != n) throw Error(Errc::DimensionMismatch, "R_tilde", "expected n rows");
  if (P.size() != 0 && (P.rows() != P.cols() || P.rows() != n)) throw Error(Errc::DimensionMismatch, "P", "expected n x n");
}

FiniteAbstraction skeleton(AbstractionKind kind, const DiscretizationSpec& disc, const Grid& state_grid,
                           const Grid& input_grid, const Grid& internal_grid, const Matrix& P) {
  FiniteAbstraction a;
  a.kind = kind;
  a.state_grid = state_grid;
  a.input_grid = input_grid;
  a.internal_grid = internal_grid;
  a.disc = disc;
  a.P = P.size() ? P : Matrix::Identity(state_grid.dim(), state_grid.dim());
  return a;
}

std::vector<Vector> centers(const Grid& g) {
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(g.size()));
  for (Index i = 0; i < g.size(); ++i) out.push_back(g.center(i));
  return out;
}

void warn_if_coarse(const Grid& state_grid, const std::vector<Vector>& inputs) {
  const Vector span = state_grid.upper() - state_grid.lower;
  for (std::size_t u = 0; u < inputs.size(); ++u) {
    if ((inputs[u].cwiseAbs().array() > span.array()).any()) {
      std::ostringstream msg;
      msg << "GridTooCoarse: abstract input " << u << " exceeds the state grid span";
      warn(msg.str());
      return;
    }
  }
}

}  // namespace

Index Grid::size() const {
  Index s = 1;
  for (Index c : counts) s *= c;
  return s;
}

Vector Grid::upper() const {
  Vector u(dim());
  for (Index d = 0; d < dim(); ++d) u[d] = lower[d] + widths[d] * static_cast<double>(counts[static_cast<std::size_t>(d)]);
  return u;
}

std::vector<Index> Grid::unflatten(Index flat) const {
  std::vector<Index> m(counts.size());
  for (std::size_t d = 0; d < counts.size(); ++d) {
    m[d] = flat % counts[d];
    flat /= counts[d];
  }
  return m;
}

Index Grid::flatten(const std::vector<Index>& multi) const {
  Index flat = 0;
  for (std::size_t d = counts.size(); d-- > 0;) flat = flat * counts[d] + multi[d];
  return flat;
}

Vector Grid::center(Index flat) const {
  Vector c(dim());
  for (Index d = 0; d < dim(); ++d) {
    const Index cd = counts[static_cast<std::size_t>(d)];
    c[d] = lower[d] + (static_cast<double>(flat % cd) + 0.5) * widths[d];
    flat /= cd;
  }
  return c;
}

Grid make_grid(Vector lower, Vector widths, std::vector<Index> counts) {
  Grid g{std::move(lower), std::move(widths), std::move(counts)};
  check_grid(g, "grid");
  return g;
}

Grid grid_covering(const Box& box, const Vector& widths) {
  if (widths.size() != box.dim()) throw Error(Errc::DimensionMismatch, "widths", "one width per box axis");
  std::vector<Index> counts(static_cast<std::size_t>(box.dim()));
  for (Index d = 0; d < box.dim(); ++d) {
    if (!(widths[d] > 0.0)) throw Error(Errc::InvalidSpec, "widths", "must be positive", d);
    const double cells = (box.upper[d] - box.lower[d]) / widths[d];
    counts[static_cast<std::size_t>(d)] = std::max<Index>(1, static_cast<Index>(std::ceil(cells - kSnap)));
  }
  return make_grid(box.lower, widths, std::move(counts));
}

Quantized quantize(const Grid& grid, const Vector& x) {
  Quantized q;
  q.index = quantize_index(grid, x, -1);
  q.inside = q.index >= 0;
  if (q.inside) q.rep = grid.center(q.index);
  return q;
}

Index quantize_index(const Grid& grid, const Vector& x, Index outside) {
  if (x.size() != grid.dim()) throw Error(Errc::DimensionMismatch, "x", "point and grid dimensions differ");
  Index flat = 0;
  Index stride = 1;
  for (Index d = 0; d < grid.dim(); ++d) {
    const Index cd = grid.counts[static_cast<std::size_t>(d)];
    const Index k = axis_cell(x[d], grid.lower[d], grid.widths[d], cd);
    if (k < 0) return outside;
    flat += k * stride;
    stride *= cd;
  }
  return flat;
}

double delta_of(const Grid& grid) { return grid.widths.norm(); }

double normal_interval_mass(double a, double b) {
  if (b <= a) return 0.0;
  // take the difference on the side of the smaller tail for accuracy
  if (a >= 0.0) return 0.5 * (std::erfc(a / M_SQRT2) - std::erfc(b / M_SQRT2));
  if (b <= 0.0) return 0.5 * (std::erfc(-b / M_SQRT2) - std::erfc(-a / M_SQRT2));
  return 1.0 - 0.5 * std::erfc(-a / M_SQRT2) - 0.5 * std::erfc(b / M_SQRT2);
}

FiniteAbstraction build_deterministic(const DiscretizationSpec& disc, const Grid& state_grid, const Grid& input_grid,
                                      const Grid& internal_grid, const Matrix& P) {
  check_shapes(disc, state_grid, input_grid, internal_grid, P);
  if (!disc.non_stochastic()) throw Error(Errc::InvalidSpec, "R_tilde", "deterministic abstraction needs R_tilde = 0");
  FiniteAbstraction a = skeleton(AbstractionKind::Deterministic, disc, state_grid, input_grid, internal_grid, P);
  const auto xs = centers(state_grid);
  const auto us = centers(input_grid);
  const auto ws = centers(internal_grid);
  warn_if_coarse(state_grid, us);
  a.successor.assign(static_cast<std::size_t>(a.n_rows()), a.sink());
  for (Index w = 0; w < a.n_internal(); ++w) {
    const Vector dw = disc.D_tilde * ws[static_cast<std::size_t>(w)];
    for (Index u = 0; u < a.n_inputs(); ++u) {
      for (Index s = 0; s < a.n_states(); ++s) {
        const Vector next = xs[static_cast<std::size_t>(s)] + us[static_cast<std::size_t>(u)] + dw;
        a.successor[static_cast<std::size_t>(a.row_index(s, u, w))] = quantize_index(state_grid, next, a.sink());
      }
    }
  }
  return a;
}

FiniteAbstraction build_stochastic(const DiscretizationSpec& disc, const Grid& state_grid, const Grid& input_grid,
                                   const Grid& internal_grid, const Matrix& P) {
  check_shapes(disc, state_grid, input_grid, internal_grid, P);
  const Index n = state_grid.dim();
  const Matrix cov = disc.R_tilde.size() ? Matrix(disc.R_tilde * disc.R_tilde.transpose()) : Matrix::Zero(n, n);
  const double scale = cov.size() ? cov.cwiseAbs().maxCoeff() : 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (i != j && std::abs(cov(i, j)) > 1e-12 * scale) {
        throw Error(Errc::NonDiagonalNoise, "R_tilde", "R_tilde R_tildeᵀ must be diagonal");
      }
  const Vector sigma = cov.diagonal().cwiseSqrt();

  FiniteAbstraction a = skeleton(AbstractionKind::Stochastic, disc, state_grid, input_grid, internal_grid, P);
  const auto us = centers(input_grid);
  const auto ws = centers(internal_grid);
  warn_if_coarse(state_grid, us);
  a.row_ptr.assign(1, 0);

  std::vector<std::vector<double>> axis_mass(static_cast<std::size_t>(n));
  std::vector<Index> multi(static_cast<std::size_t>(n));
  for (Index row = 0; row < a.n_rows(); ++row) {
    const Index s = row % a.n_states();
    const Index u = (row / a.n_states()) % a.n_inputs();
    const Index w = row / (a.n_states() * a.n_inputs());
    const Vector mean = state_grid.center(s) + us[static_cast<std::size_t>(u)] + disc.D_tilde * ws[static_cast<std::size_t>(w)];

    bool empty = false;
    for (Index d = 0; d < n; ++d) {
      const Index cd = state_grid.counts[static_cast<std::size_t>(d)];
      auto& mass = axis_mass[static_cast<std::size_t>(d)];
      mass.assign(static_cast<std::size_t>(cd), 0.0);
      if (sigma[d] == 0.0) {
        const Index k = axis_cell(mean[d], state_grid.lower[d], state_grid.widths[d], cd);
        if (k >= 0) mass[static_cast<std::size_t>(k)] = 1.0;
      } else {
        for (Index k = 0; k < cd; ++k) {
          const double lo = state_grid.lower[d] + static_cast<double>(k) * state_grid.widths[d];
          const double hi = lo + state_grid.widths[d];
          mass[static_cast<std::size_t>(k)] = normal_interval_mass((lo - mean[d]) / sigma[d], (hi - mean[d]) / sigma[d]);
        }
      }
      bool any = false;
      for (double m : mass) any = any || m > 0.0;
      empty = empty || !any;
    }

    double total = 0.0;
    const std::size_t start = a.prob.size();
    if (!empty) {
      std::fill(multi.begin(), multi.end(), 0);
      for (Index t = 0; t < a.n_states(); ++t) {
        double p = 1.0;
        for (Index d = 0; d < n && p > 0.0; ++d) p *= axis_mass[static_cast<std::size_t>(d)][static_cast<std::size_t>(multi[static_cast<std::size_t>(d)])];
        if (p > 0.0) {
          a.col.push_back(t);
          a.prob.push_back(p);
          total += p;
        }
        for (std::size_t d = 0; d < multi.size(); ++d) {
          if (++multi[d] < state_grid.counts[d]) break;
          multi[d] = 0;
        }
      }
    }
    if (total > 1.0 + 1e-9) throw Error(Errc::RowMassError, "row", "in-grid mass exceeds one", row);
    if (total > 1.0) {
      for (std::size_t i = start; i < a.prob.size(); ++i) a.prob[i] /= total;
      total = 1.0;
    }
    const double sink_mass = 1.0 - total;
    if (sink_mass > 0.0) {
      a.col.push_back(a.sink());
      a.prob.push_back(sink_mass);
    }
    a.row_ptr.push_back(a.prob.size());
  }
  return a;
}

}  // namespace stochsym
