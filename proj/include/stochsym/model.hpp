#pragma once

#include <span>
#include <vector>

#include "stochsym/types.hpp"

namespace stochsym {

/// dξ = (Aξ + Bν + Dw + b)dt + G dW,  ζ1 = C1ξ,  ζ2 = C2ξ.
struct AffineSystem {
  Matrix A;   // n x n
  Matrix B;   // n x m
  Matrix C1;  // q1 x n
  Matrix C2;  // q2 x n
  Matrix D;   // n x p
  Matrix G;   // n x bw
  Vector b;   // n
  Box state_box;
  Box input_box;
  Box internal_box;

  Index n() const { return A.rows(); }
  Index m() const { return B.cols(); }
  Index p() const { return D.cols(); }
  Index q1() const { return C1.rows(); }
  Index q2() const { return C2.rows(); }
  Index noise_dim() const { return G.cols(); }
};

/// Time-discretized companion: ξ̃(k+1) = ξ̃(k) + ν̃(k) + D̃w̃(k) + R̃ς(k).
struct DiscretizationSpec {
  double tau = 0.0;
  Matrix D_tilde;  // n x p
  Matrix R_tilde;  // n x bw

  bool non_stochastic() const { return R_tilde.size() == 0 || R_tilde.isZero(0.0); }
  bool internal_free() const { return D_tilde.size() == 0 || D_tilde.isZero(0.0); }
};

struct SubsystemDims {
  Index n = 0;
  Index m = 0;
  Index p = 0;
  Index q2 = 0;
};

/// Stacked internal inputs w = M · (stacked internal outputs).
struct InterconnectionSpec {
  SparseMatrix M;
  std::vector<double> mu;
  std::vector<SubsystemDims> subsystem_dims;

  Index total_internal_inputs() const;
  Index total_internal_outputs() const;
};

SubsystemDims dims_of(const AffineSystem& sys);

/// Throws Error{DimensionMismatch | NonFiniteEntry | EmptyBox} naming the first offending field.
void validate_system(const AffineSystem& sys);
void validate_discretization(const AffineSystem& sys, const DiscretizationSpec& disc);
void validate_interconnection(const InterconnectionSpec& ic);

/// Tight interval image {L x : x in box}.
Box linear_image(const Matrix& L, const Box& box);
Box linear_image(const SparseMatrix& L, const Box& box);
Box stack_boxes(std::span<const Box> boxes);

/// Internal-output box C2 · state_box of a subsystem.
Box internal_output_box(const AffineSystem& sys);

/// Throws Error{NotWellPosed, index = first violated stacked component} unless
/// M · ∏ Y2ᵢ ⊆ ∏ Wᵢ under interval arithmetic.
void check_well_posed(const InterconnectionSpec& ic, std::span<const Box> internal_output_boxes,
                      std::span<const Box> internal_input_boxes);

/// Stacks block-diagonal copies: blockdiag(blocks[0], blocks[1], ...).
SparseMatrix block_diagonal(std::span<const Matrix> blocks);

}  // namespace stochsym
