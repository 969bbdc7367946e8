#include "nodalflow/spectral.hpp"

#include <numbers>
#include <stdexcept>
#include <vector>

namespace nodalflow {

SpectralOperator1D::SpectralOperator1D(Index n, double length)
    : n_(n), length_(length), scale_(2.0 * std::numbers::pi / length), fft_(std::make_unique<Eigen::FFT<double>>()) {
  if (n < 2) throw std::invalid_argument("spectral operator needs N >= 2");
  if (!(length > 0.0)) throw std::invalid_argument("period must be positive");
}

ComplexVector SpectralOperator1D::forward(const Eigen::Ref<const Vector>& values) const {
  if (values.size() != n_) throw std::invalid_argument("spectral forward: length mismatch");
  std::vector<double> in(values.data(), values.data() + n_);
  std::vector<std::complex<double>> out;
  fft_->fwd(out, in);
  return Eigen::Map<ComplexVector>(out.data(), n_);
}

Vector SpectralOperator1D::inverse(const ComplexVector& coeffs) const {
  if (coeffs.size() != n_) throw std::invalid_argument("spectral inverse: length mismatch");
  std::vector<std::complex<double>> in(coeffs.data(), coeffs.data() + n_);
  std::vector<double> out;
  fft_->inv(out, in);
  return Eigen::Map<Vector>(out.data(), n_);
}

Vector SpectralOperator1D::derivative(const Eigen::Ref<const Vector>& values, int order) const {
  if (order < 0) throw std::invalid_argument("derivative order must be non-negative");
  if (order == 0) return values;
  ComplexVector c = forward(values);
  // (ik)^m = k^m i^m with i^m cycling through 1, i, -1, -i.
  static constexpr std::complex<double> kUnitPowers[4] = {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};
  const std::complex<double> unit = kUnitPowers[order % 4];
  for (Index j = 0; j < n_; ++j) {
    if (is_nyquist(j) && order % 2 == 1) {
      c[j] = 0.0;
      continue;
    }
    double km = 1.0;
    for (int p = 0; p < order; ++p) km *= wavenumber(j);
    c[j] *= unit * km;
  }
  return inverse(c);
}

Matrix SpectralOperator1D::differentiation_matrix(int order) const {
  Matrix d(n_, n_);
  Vector e = Vector::Zero(n_);
  for (Index j = 0; j < n_; ++j) {
    e[j] = 1.0;
    d.col(j) = derivative(e, order);
    e[j] = 0.0;
  }
  return d;
}

Vector SpectralOperator1D::shift(const Eigen::Ref<const Vector>& values, double shift) const {
  ComplexVector c = forward(values);
  for (Index j = 0; j < n_; ++j) {
    const double phase = wavenumber(j) * shift;
    if (is_nyquist(j)) {
      c[j] *= std::cos(phase);
    } else {
      c[j] *= std::complex<double>(std::cos(phase), std::sin(phase));
    }
  }
  return inverse(c);
}

Vector SpectralOperator1D::interpolate(const Eigen::Ref<const Vector>& values,
                                       const Eigen::Ref<const Vector>& points) const {
  const ComplexVector c = forward(values) / static_cast<double>(n_);
  Vector out(points.size());
  for (Index p = 0; p < points.size(); ++p) {
    double sum = c[0].real();
    for (Index j = 1; j < n_; ++j) {
      const double phase = wavenumber(j) * points[p];
      if (is_nyquist(j)) {
        sum += c[j].real() * std::cos(phase);
      } else {
        sum += c[j].real() * std::cos(phase) - c[j].imag() * std::sin(phase);
      }
    }
    out[p] = sum;
  }
  return out;
}

void SpectralOperator1D::dealias(ComplexVector& coeffs) const {
  const Index cutoff = n_ / 3;
  for (Index j = 0; j < n_; ++j) {
    if (std::abs(mode(j)) > cutoff) coeffs[j] = 0.0;
  }
}

NodalState spectral_derivative(const NodalState& state, const GridSet& grid, int order) {
  if (!grid.is_uniform_periodic()) throw std::invalid_argument("spectral_derivative needs a uniform periodic grid");
  if (grid.size() % 2 != 0) throw std::invalid_argument("spectral_derivative needs even N");
  if (state.layout.nodes != grid.size()) throw std::invalid_argument("state does not match grid");
  SpectralOperator1D op(grid.size(), grid.period());
  NodalState out = state;
  for (Index c = 0; c < state.layout.components; ++c) out.component(c) = op.derivative(state.component(c), order);
  return out;
}

}  // namespace nodalflow
