#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace stochsym {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Axis-aligned interval box. A zero-dimensional box is the single point of R^0.
struct Box {
  Vector lower;
  Vector upper;

  Index dim() const { return lower.size(); }
  bool contains(const Vector& x, double tol = 0.0) const {
    return ((x - lower).array() >= -tol).all() && ((upper - x).array() >= -tol).all();
  }
  Vector center() const { return 0.5 * (lower + upper); }
  Vector widths() const { return upper - lower; }
};

inline Box make_box(Vector lower, Vector upper) { return Box{std::move(lower), std::move(upper)}; }

/// Largest Euclidean norm attained on a box (corner with the largest magnitudes).
inline double max_norm(const Box& box) {
  return box.lower.cwiseAbs().cwiseMax(box.upper.cwiseAbs()).norm();
}

}  // namespace stochsym
