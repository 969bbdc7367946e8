#ifndef NODALFLOW_SPECTRAL_HPP
#define NODALFLOW_SPECTRAL_HPP

#include "nodalflow/core_types.hpp"

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

#include <complex>
#include <memory>

namespace nodalflow {

using ComplexVector = Eigen::VectorXcd;

/// Fourier collocation on N equispaced nodes of a periodic interval of
/// length L. Wavenumbers follow the FFT ordering 0, 1, ..., N/2-1, -N/2, ...,
/// -1 scaled by 2 pi / L.
///
/// Not safe for concurrent use: the FFT plan cache is mutable. Give each
/// thread its own operator.
class SpectralOperator1D {
public:
  explicit SpectralOperator1D(Index n, double length = 2.0 * 3.14159265358979323846);

  Index size() const { return n_; }
  double length() const { return length_; }

  /// Integer mode index of FFT slot j (Nyquist reported as -N/2).
  Index mode(Index j) const { return j < (n_ + 1) / 2 ? j : j - n_; }
  double wavenumber(Index j) const { return scale_ * static_cast<double>(mode(j)); }
  bool is_nyquist(Index j) const { return n_ % 2 == 0 && j == n_ / 2; }

  ComplexVector forward(const Eigen::Ref<const Vector>& values) const;
  Vector inverse(const ComplexVector& coeffs) const;

  /// d^m/dx^m of the trigonometric interpolant. The Nyquist mode is dropped
  /// for odd m.
  Vector derivative(const Eigen::Ref<const Vector>& values, int order) const;

  /// Dense N x N matrix of derivative(., order).
  Matrix differentiation_matrix(int order) const;

  /// Multiplies each mode by multiplier(|n|) where n is the integer mode.
  template <typename F>
  Vector apply_radial(const Eigen::Ref<const Vector>& values, F&& multiplier) const {
    ComplexVector c = forward(values);
    for (Index j = 0; j < n_; ++j) c[j] *= multiplier(std::abs(mode(j)));
    return inverse(c);
  }

  /// Periodic translation u(x) -> u(x + shift) of the interpolant. The Nyquist
  /// mode keeps only its real part.
  Vector shift(const Eigen::Ref<const Vector>& values, double shift) const;

  /// Evaluates the trigonometric interpolant at arbitrary points.
  Vector interpolate(const Eigen::Ref<const Vector>& values, const Eigen::Ref<const Vector>& points) const;

  /// Zeroes modes with |n| > N/3 (2/3 rule).
  void dealias(ComplexVector& coeffs) const;

private:
  Index n_;
  double length_;
  double scale_;
  std::unique_ptr<Eigen::FFT<double>> fft_;
};

/// Free-function form; requires a uniform periodic grid with even N.
NodalState spectral_derivative(const NodalState& state, const GridSet& grid, int order);

}  // namespace nodalflow

#endif
