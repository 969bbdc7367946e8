#ifndef NODALFLOW_TESTS_SUPPORT_HPP
#define NODALFLOW_TESTS_SUPPORT_HPP

#include "nodalflow/core_types.hpp"
#include "nodalflow/rng.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <numbers>
#include <vector>

namespace nftest {

using namespace nodalflow;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline Vector random_vector(Rng& rng, Index n, double scale = 1.0) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.uniform(-scale, scale);
  return v;
}

inline Matrix random_matrix(Rng& rng, Index rows, Index cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-scale, scale);
  }
  return m;
}

inline Permutation random_permutation(Rng& rng, std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
  return Permutation(std::move(p));
}

inline double max_abs(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

inline double rel_err(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

inline bool bit_equal(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) return false;
  for (Index i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

/// Nodal values of f on the uniform periodic N-point grid.
template <typename F>
Vector on_uniform(Index n, F&& f) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = f(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
  return v;
}

}  // namespace nftest

#endif
