#ifndef NODALFLOW_SAMPLING_HPP
#define NODALFLOW_SAMPLING_HPP

#include "nodalflow/core_types.hpp"
#include "nodalflow/rng.hpp"

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace nodalflow {

/// U[-scale / n^power, scale / n^power] for the n-th Fourier coefficient.
struct SymmetricBound {
  double scale = 1.0;
  double power = 0.0;
  double at(int n) const { return scale / std::pow(static_cast<double>(n), power); }
};

struct FourierCoeffSpec {
  double a0_lower = 0.0;
  double a0_upper = 0.0;
  SymmetricBound a_bound;
  SymmetricBound b_bound;
  int modes_min = 1;  // N_c ~ U{modes_min..modes_max}
  int modes_max = 1;

  void validate() const;

  static FourierCoeffSpec advection_diffusion();  // a0 = 0, a_n,b_n ~ U[-1,1], N_c ~ U{1..10}
  static FourierCoeffSpec burgers(int modes = 10);  // a0 ~ U[-1/2,1/2], a_n,b_n ~ U[-1/n,1/n]
};

/// a0 + sum_n a_n cos(n x) + b_n sin(n x).
struct FourierSeries {
  double a0 = 0.0;
  std::vector<double> a;
  std::vector<double> b;

  double operator()(double x) const;
};

template <typename Scalar>
Scalar evaluate_fourier_series(Scalar a0, std::span<const Scalar> a, std::span<const Scalar> b, Scalar x) {
  if (a.size() != b.size()) throw std::invalid_argument("Fourier coefficient lengths differ");
  Scalar sum = a0;
  for (std::size_t n = 1; n <= a.size(); ++n) {
    const Scalar nx = static_cast<Scalar>(n) * x;
    sum += a[n - 1] * std::cos(nx) + b[n - 1] * std::sin(nx);
  }
  return sum;
}

FourierSeries draw_fourier_series(const FourierCoeffSpec& spec, Rng& rng);
NodalState sample_fourier_ic(const FourierCoeffSpec& spec, const GridSet& grid, Rng& rng);

/// u1 on [x_l, x_r] (as a subset of [-pi, pi)), u2 elsewhere.
struct PiecewiseConstant {
  double inside = 0.0;
  double outside = 0.0;
  double left = 0.0;
  double right = 0.0;

  double operator()(double x) const;
};

PiecewiseConstant draw_piecewise_constant(Rng& rng);
NodalState sample_piecewise_constant_ic(const GridSet& grid, Rng& rng);

/// sum_{k,l} c(k-1,l-1) sin(k pi (x+1)/2) sin(l pi (y+1)/2) on [-1,1]^2.
struct SineSeries2D {
  Eigen::MatrixXd coeffs;

  double operator()(double x, double y) const;
};

SineSeries2D draw_sine_series_2d(int modes, Rng& rng);
NodalState sample_2d_sine_ic(int modes, const GridSet& grid, Rng& rng);

struct Gaussian2D {
  double amplitude = 0.2;
  double mean_x = 0.2;
  double mean_y = 0.2;
  double sigma_x = 0.18;
  double sigma_y = 0.18;

  double operator()(double x, double y) const;
};

NodalState gaussian_2d_ic(const Gaussian2D& g, const GridSet& grid);

/// 2-D Sobol points in [0,1)^2 in Gray-code order, skipping the first `skip`.
std::vector<std::array<double, 2>> sobol_2d(std::size_t count, std::size_t skip = 1);

/// 200 cosine-mapped Sobol interior nodes, 8 random nodes per edge, 4 corners.
GridSet make_2d_unstructured_grid(Rng& rng);

/// Evaluates `f` at every node of a 1D grid.
template <typename F>
NodalState sample_on_grid_1d(const F& f, const GridSet& grid) {
  if (grid.dim() != 1) throw std::invalid_argument("expected a 1D grid");
  Vector v(grid.size());
  for (Index i = 0; i < grid.size(); ++i) v[i] = f(grid.nodes()(i, 0));
  return NodalState::scalar(std::move(v));
}

template <typename F>
NodalState sample_on_grid_2d(const F& f, const GridSet& grid) {
  if (grid.dim() != 2) throw std::invalid_argument("expected a 2D grid");
  Vector v(grid.size());
  for (Index i = 0; i < grid.size(); ++i) v[i] = f(grid.nodes()(i, 0), grid.nodes()(i, 1));
  return NodalState::scalar(std::move(v));
}

}  // namespace nodalflow

#endif
