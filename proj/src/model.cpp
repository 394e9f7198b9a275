#include "stochsym/model.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "stochsym/error.hpp"

namespace stochsym {

namespace {

void require_shape(const Matrix& mat, Index rows, Index cols, const char* field) {
  if (mat.rows() != rows || mat.cols() != cols) {
    throw Error(Errc::DimensionMismatch, field,
                "expected " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
                    std::to_string(mat.rows()) + "x" + std::to_string(mat.cols()));
  }
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& mat, const char* field) {
  if (!mat.allFinite()) throw Error(Errc::NonFiniteEntry, field, "matrix has NaN or infinite entries");
}

void require_box(const Box& box, Index dim, const char* field) {
  if (box.lower.size() != dim || box.upper.size() != dim) {
    throw Error(Errc::DimensionMismatch, field, "box dimension must be " + std::to_string(dim));
  }
  if (box.lower.hasNaN() || box.upper.hasNaN()) throw Error(Errc::NonFiniteEntry, field, "box has NaN bounds");
  for (Index i = 0; i < dim; ++i) {
    if (box.lower[i] > box.upper[i]) {
      throw Error(Errc::EmptyBox, field, "lower > upper in component " + std::to_string(i), i);
    }
  }
}

}  // namespace

Index InterconnectionSpec::total_internal_inputs() const {
  return std::accumulate(subsystem_dims.begin(), subsystem_dims.end(), Index{0},
                         [](Index acc, const SubsystemDims& d) { return acc + d.p; });
}

Index InterconnectionSpec::total_internal_outputs() const {
  return std::accumulate(subsystem_dims.begin(), subsystem_dims.end(), Index{0},
                         [](Index acc, const SubsystemDims& d) { return acc + d.q2; });
}

SubsystemDims dims_of(const AffineSystem& sys) { return {sys.n(), sys.m(), sys.p(), sys.q2()}; }

void validate_system(const AffineSystem& sys) {
  const Index n = sys.A.rows();
  if (n <= 0) throw Error(Errc::DimensionMismatch, "A", "state dimension must be positive");
  require_shape(sys.A, n, n, "A");
  if (sys.B.cols() <= 0) throw Error(Errc::DimensionMismatch, "B", "external input dimension must be positive");
  require_shape(sys.B, n, sys.B.cols(), "B");
  if (sys.C1.rows() <= 0) throw Error(Errc::DimensionMismatch, "C1", "external output dimension must be positive");
  require_shape(sys.C1, sys.C1.rows(), n, "C1");
  require_shape(sys.C2, sys.C2.rows(), n, "C2");
  require_shape(sys.D, n, sys.D.cols(), "D");
  if (sys.G.cols() <= 0) throw Error(Errc::DimensionMismatch, "G", "noise dimension must be positive");
  require_shape(sys.G, n, sys.G.cols(), "G");
  if (sys.b.size() != n) throw Error(Errc::DimensionMismatch, "b", "offset must have length " + std::to_string(n));

  require_finite(sys.A, "A");
  require_finite(sys.B, "B");
  require_finite(sys.C1, "C1");
  require_finite(sys.C2, "C2");
  require_finite(sys.D, "D");
  require_finite(sys.G, "G");
  require_finite(sys.b, "b");

  require_box(sys.state_box, n, "state_box");
  require_box(sys.input_box, sys.m(), "input_box");
  require_box(sys.internal_box, sys.D.cols(), "internal_box");
}

void validate_discretization(const AffineSystem& sys, const DiscretizationSpec& disc) {
  if (!(disc.tau > 0.0) || !std::isfinite(disc.tau)) throw Error(Errc::InvalidSpec, "tau", "sampling time must be > 0");
  require_shape(disc.D_tilde, sys.n(), sys.p(), "D_tilde");
  require_shape(disc.R_tilde, sys.n(), disc.R_tilde.cols(), "R_tilde");
  require_finite(disc.D_tilde, "D_tilde");
  require_finite(disc.R_tilde, "R_tilde");
}

void validate_interconnection(const InterconnectionSpec& ic) {
  if (ic.mu.size() != ic.subsystem_dims.size()) {
    throw Error(Errc::DimensionMismatch, "mu", "one weight per subsystem required");
  }
  for (std::size_t i = 0; i < ic.mu.size(); ++i) {
    if (!(ic.mu[i] > 0.0)) throw Error(Errc::WeightNotPositive, "mu", "weights must be positive", static_cast<Index>(i));
  }
  if (ic.M.rows() != ic.total_internal_inputs() || ic.M.cols() != ic.total_internal_outputs()) {
    throw Error(Errc::DimensionMismatch, "M",
                "coupling matrix must be " + std::to_string(ic.total_internal_inputs()) + "x" +
                    std::to_string(ic.total_internal_outputs()));
  }
}

Box linear_image(const Matrix& L, const Box& box) {
  if (L.cols() != box.dim()) throw Error(Errc::DimensionMismatch, "linear_image", "matrix/box size mismatch");
  const Vector c = box.center();
  const Vector r = 0.5 * box.widths();
  const Vector mid = L * c;
  const Vector rad = L.cwiseAbs() * r;
  return Box{mid - rad, mid + rad};
}

Box linear_image(const SparseMatrix& L, const Box& box) {
  if (L.cols() != box.dim()) throw Error(Errc::DimensionMismatch, "linear_image", "matrix/box size mismatch");
  const Vector c = box.center();
  const Vector r = 0.5 * box.widths();
  const Vector mid = L * c;
  const Vector rad = L.cwiseAbs() * r;
  return Box{mid - rad, mid + rad};
}

Box stack_boxes(std::span<const Box> boxes) {
  Index total = 0;
  for (const auto& b : boxes) total += b.dim();
  Box out{Vector(total), Vector(total)};
  Index at = 0;
  for (const auto& b : boxes) {
    out.lower.segment(at, b.dim()) = b.lower;
    out.upper.segment(at, b.dim()) = b.upper;
    at += b.dim();
  }
  return out;
}

Box internal_output_box(const AffineSystem& sys) { return linear_image(sys.C2, sys.state_box); }

void check_well_posed(const InterconnectionSpec& ic, std::span<const Box> internal_output_boxes,
                      std::span<const Box> internal_input_boxes) {
  const Box y2 = stack_boxes(internal_output_boxes);
  const Box w = stack_boxes(internal_input_boxes);
  if (ic.M.cols() != y2.dim() || ic.M.rows() != w.dim()) {
    throw Error(Errc::DimensionMismatch, "M", "coupling matrix does not match stacked internal boxes");
  }
  const Box image = linear_image(ic.M, y2);
  for (Index i = 0; i < w.dim(); ++i) {
    const double tol_lo = 1e-12 * (1.0 + std::abs(w.lower[i]));
    const double tol_hi = 1e-12 * (1.0 + std::abs(w.upper[i]));
    if (image.lower[i] < w.lower[i] - tol_lo || image.upper[i] > w.upper[i] + tol_hi) {
      throw Error(Errc::NotWellPosed, "well-posedness",
                  "image [" + std::to_string(image.lower[i]) + ", " + std::to_string(image.upper[i]) +
                      "] not contained in internal-input interval [" + std::to_string(w.lower[i]) + ", " +
                      std::to_string(w.upper[i]) + "] at component " + std::to_string(i),
                  i);
    }
  }
}

SparseMatrix block_diagonal(std::span<const Matrix> blocks) {
  Index rows = 0;
  Index cols = 0;
  std::size_t nnz = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
    nnz += static_cast<std::size_t>(b.size());
  }
  std::vector<Triplet> trips;
  trips.reserve(nnz);
  Index r0 = 0;
  Index c0 = 0;
  for (const auto& b : blocks) {
    for (Index j = 0; j < b.cols(); ++j)
      for (Index i = 0; i < b.rows(); ++i)
        if (b(i, j) != 0.0) trips.emplace_back(r0 + i, c0 + j, b(i, j));
    r0 += b.rows();
    c0 += b.cols();
  }
  SparseMatrix out(rows, cols);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

}  // namespace stochsym
