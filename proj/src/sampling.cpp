#include "nodalflow/sampling.hpp"

#include <bit>
#include <numbers>

namespace nodalflow {

namespace {

constexpr double kPi = std::numbers::pi;

// Direction numbers scaled to 32 bits. Dimension 1 is van der Corput;
// dimension 2 uses the primitive polynomial x^2 + x + 1 (s = 2, a = 1) with
// initial m = (1, 3).
std::array<std::array<std::uint32_t, 32>, 2> sobol_directions() {
  std::array<std::array<std::uint32_t, 32>, 2> v{};
  for (int k = 0; k < 32; ++k) v[0][k] = 1u << (31 - k);
  v[1][0] = 1u << 31;
  v[1][1] = 3u << 30;
  for (int k = 2; k < 32; ++k) {
    // m_k = 2 m_{k-1} ^ 4 m_{k-2} ^ m_{k-2}, on values scaled by 2^-k.
    v[1][k] = v[1][k - 1] ^ v[1][k - 2] ^ (v[1][k - 2] >> 2);
  }
  return v;
}

}  // namespace

void FourierCoeffSpec::validate() const {
  if (modes_min < 0 || modes_max < modes_min) throw std::invalid_argument("invalid Fourier mode range");
  if (!std::isfinite(a0_lower) || !std::isfinite(a0_upper) || a0_lower > a0_upper) {
    throw std::invalid_argument("invalid a0 bounds");
  }
  for (const auto& bound : {a_bound, b_bound}) {
    if (!std::isfinite(bound.scale) || bound.scale < 0.0 || !std::isfinite(bound.power)) {
      throw std::invalid_argument("invalid coefficient bound");
    }
  }
}

FourierCoeffSpec FourierCoeffSpec::advection_diffusion() {
  FourierCoeffSpec s;
  s.a_bound = {1.0, 0.0};
  s.b_bound = {1.0, 0.0};
  s.modes_min = 1;
  s.modes_max = 10;
  return s;
}

FourierCoeffSpec FourierCoeffSpec::burgers(int modes) {
  FourierCoeffSpec s;
  s.a0_lower = -0.5;
  s.a0_upper = 0.5;
  s.a_bound = {1.0, 1.0};
  s.b_bound = {1.0, 1.0};
  s.modes_min = modes;
  s.modes_max = modes;
  return s;
}

double FourierSeries::operator()(double x) const {
  return evaluate_fourier_series<double>(a0, a, b, x);
}

FourierSeries draw_fourier_series(const FourierCoeffSpec& spec, Rng& rng) {
  spec.validate();
  FourierSeries s;
  const int modes = spec.modes_min == spec.modes_max ? spec.modes_min
                                                      : static_cast<int>(rng.uniform_int(spec.modes_min, spec.modes_max));
  s.a0 = rng.uniform(spec.a0_lower, spec.a0_upper);
  s.a.resize(static_cast<std::size_t>(modes));
  s.b.resize(static_cast<std::size_t>(modes));
  for (int n = 1; n <= modes; ++n) {
    const double ab = spec.a_bound.at(n);
    const double bb = spec.b_bound.at(n);
    s.a[static_cast<std::size_t>(n - 1)] = rng.uniform(-ab, ab);
    s.b[static_cast<std::size_t>(n - 1)] = rng.uniform(-bb, bb);
  }
  return s;
}

NodalState sample_fourier_ic(const FourierCoeffSpec& spec, const GridSet& grid, Rng& rng) {
  if (grid.dim() != 1) throw std::invalid_argument("sample_fourier_ic expects a 1D grid");
  return sample_on_grid_1d(draw_fourier_series(spec, rng), grid);
}

double PiecewiseConstant::operator()(double x) const {
  const double shifted = x >= kPi ? x - 2.0 * kPi : x;
  return (left <= shifted && shifted <= right) ? inside : outside;
}

PiecewiseConstant draw_piecewise_constant(Rng& rng) {
  PiecewiseConstant p;
  p.inside = rng.uniform(-1.0, 1.0);
  p.outside = rng.uniform(-1.0, 1.0);
  p.left = rng.uniform(-kPi, kPi);
  p.right = rng.uniform(-kPi, kPi);
  if (p.left > p.right) std::swap(p.left, p.right);
  return p;
}

NodalState sample_piecewise_constant_ic(const GridSet& grid, Rng& rng) {
  if (grid.dim() != 1 || grid.domain().kind != DomainKind::PeriodicInterval) {
    throw std::invalid_argument("piecewise-constant sampler expects a 1D periodic grid");
  }
  return sample_on_grid_1d(draw_piecewise_constant(rng), grid);
}

double SineSeries2D::operator()(double x, double y) const {
  const Index modes = coeffs.rows();
  Eigen::VectorXd sx(modes), sy(modes);
  for (Index k = 0; k < modes; ++k) {
    sx[k] = std::sin(static_cast<double>(k + 1) * kPi * (x + 1.0) / 2.0);
    sy[k] = std::sin(static_cast<double>(k + 1) * kPi * (y + 1.0) / 2.0);
  }
  return sx.dot(coeffs * sy);
}

SineSeries2D draw_sine_series_2d(int modes, Rng& rng) {
  if (modes < 0) throw std::invalid_argument("mode count must be non-negative");
  SineSeries2D s;
  s.coeffs.resize(modes, modes);
  for (int k = 1; k <= modes; ++k) {
    for (int l = 1; l <= modes; ++l) s.coeffs(k - 1, l - 1) = rng.uniform(-1.0, 1.0) / static_cast<double>(k + l);
  }
  return s;
}

NodalState sample_2d_sine_ic(int modes, const GridSet& grid, Rng& rng) {
  if (grid.dim() != 2) throw std::invalid_argument("sample_2d_sine_ic expects a 2D grid");
  return sample_on_grid_2d(draw_sine_series_2d(modes, rng), grid);
}

double Gaussian2D::operator()(double x, double y) const {
  const double dx = x - mean_x;
  const double dy = y - mean_y;
  const double norm = amplitude / std::sqrt(4.0 * kPi * kPi * sigma_x * sigma_x * sigma_y * sigma_y);
  return norm * std::exp(-0.5 * dx * dx / (sigma_x * sigma_x) - 0.5 * dy * dy / (sigma_y * sigma_y));
}

NodalState gaussian_2d_ic(const Gaussian2D& g, const GridSet& grid) {
  if (!(g.sigma_x > 0.0) || !(g.sigma_y > 0.0)) throw std::invalid_argument("Gaussian widths must be positive");
  return sample_on_grid_2d(g, grid);
}

std::vector<std::array<double, 2>> sobol_2d(std::size_t count, std::size_t skip) {
  static const auto v = sobol_directions();
  std::vector<std::array<double, 2>> points;
  points.reserve(count);
  std::array<std::uint32_t, 2> x{0u, 0u};
  for (std::size_t i = 0; i < count + skip; ++i) {
    if (i >= skip) points.push_back({x[0] * 0x1.0p-32, x[1] * 0x1.0p-32});
    const int c = std::countr_one(i);  // bit flipped between gray(i) and gray(i+1)
    if (c >= 32) throw std::out_of_range("Sobol index exceeds 2^32");
    x[0] ^= v[0][static_cast<std::size_t>(c)];
    x[1] ^= v[1][static_cast<std::size_t>(c)];
  }
  return points;
}

GridSet make_2d_unstructured_grid(Rng& rng) {
  constexpr std::size_t kInterior = 200;
  constexpr int kPerEdge = 8;
  Matrix nodes(kInterior + 4 * kPerEdge + 4, 2);
  Index row = 0;
  for (const auto& p : sobol_2d(kInterior, 1)) {
    nodes(row, 0) = std::cos(kPi * p[0]);
    nodes(row, 1) = std::cos(kPi * p[1]);
    ++row;
  }
  auto edge_coordinate = [&rng] {
    double theta = 0.0;
    while (theta == 0.0) theta = rng.uniform(0.0, kPi);  // open interval (0, pi)
    return std::cos(theta);
  };
  // Bottom, right, top, left.
  for (int k = 0; k < kPerEdge; ++k, ++row) nodes.row(row) << edge_coordinate(), -1.0;
  for (int k = 0; k < kPerEdge; ++k, ++row) nodes.row(row) << 1.0, edge_coordinate();
  for (int k = 0; k < kPerEdge; ++k, ++row) nodes.row(row) << edge_coordinate(), 1.0;
  for (int k = 0; k < kPerEdge; ++k, ++row) nodes.row(row) << -1.0, edge_coordinate();
  nodes.row(row++) << -1.0, -1.0;
  nodes.row(row++) << 1.0, -1.0;
  nodes.row(row++) << 1.0, 1.0;
  nodes.row(row++) << -1.0, 1.0;
  return GridSet(std::move(nodes), Permutation::identity(static_cast<std::size_t>(row)), Domain::box(-1.0, 1.0, 2));
}

}  // namespace nodalflow
