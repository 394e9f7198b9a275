#pragma once

#include <doctest.h>

#include <random>

#include "stochsym/error.hpp"
#include "stochsym/model.hpp"

namespace testing_helpers {

using namespace stochsym;

inline Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }
inline Vector vec1(double v) { return Vector::Constant(1, v); }
inline Box box1(double lo, double hi) { return make_box(vec1(lo), vec1(hi)); }

inline AffineSystem room_system() {
  AffineSystem s;
  s.A = scalar(-0.105);
  s.B = scalar(0.5);
  s.C1 = scalar(1.0);
  s.C2 = scalar(1.0);
  s.D = scalar(0.05);
  s.G = scalar(0.5);
  s.b = vec1(-0.005);
  s.state_box = box1(20.0, 21.0);
  s.input_box = box1(-50.0, 50.0);
  s.internal_box = box1(40.0, 42.0);
  return s;
}

inline Matrix random_matrix(std::mt19937_64& rng, Index r, Index c, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

inline SparseMatrix ring(int n) {
  std::vector<Triplet> t;
  for (int i = 0; i < n; ++i) {
    t.emplace_back(i, (i + 1) % n, 1.0);
    t.emplace_back(i, (i + n - 1) % n, 1.0);
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

template <class Fn>
Errc code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::Config;
}

}  // namespace testing_helpers
