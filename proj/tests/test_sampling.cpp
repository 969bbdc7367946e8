#include "doctest.h"
#include "support.hpp"

#include "nodalflow/sampling.hpp"
#include "nodalflow/solvers.hpp"

using namespace nodalflow;
using nftest::kTwoPi;

TEST_CASE("Fourier series evaluation") {
  const std::vector<double> none(3, 0.0);
  CHECK(evaluate_fourier_series<double>(1.0, none, none, 0.7) == 1.0);

  const std::vector<double> a{0.0, 0.0};
  const std::vector<double> b{1.0, 0.0};
  CHECK(evaluate_fourier_series<double>(0.0, a, b, std::numbers::pi / 2) == doctest::Approx(1.0).epsilon(1e-15));

  // alpha(0) = a0 + sum a_n for the fixed variable-coefficient case.
  const double expected = 1.0 + 0.05 * (0.5426 + 0.2673 - 0.0030 - 0.6039 + 0.6618);
  CHECK(expected == doctest::Approx(1.04324).epsilon(1e-12));
  CHECK(AdvectionDiffusion1D::table1().alpha(0.0) == doctest::Approx(expected).epsilon(1e-14));

  const std::vector<double> short_b{1.0};
  CHECK_THROWS_AS(evaluate_fourier_series<double>(0.0, a, short_b, 0.0), std::invalid_argument);
}

TEST_CASE("coefficient specs follow the experiment definitions") {
  const auto ad = FourierCoeffSpec::advection_diffusion();
  CHECK(ad.a0_lower == 0.0);
  CHECK(ad.a0_upper == 0.0);
  CHECK(ad.modes_min == 1);
  CHECK(ad.modes_max == 10);
  CHECK(ad.a_bound.at(7) == 1.0);

  const auto bg = FourierCoeffSpec::burgers();
  CHECK(bg.a0_lower == -0.5);
  CHECK(bg.a0_upper == 0.5);
  CHECK(bg.modes_min == 10);
  CHECK(bg.modes_max == 10);
  CHECK(bg.a_bound.at(4) == 0.25);

  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const FourierSeries s = draw_fourier_series(ad, rng);
    CHECK(s.a0 == 0.0);
    CHECK(s.a.size() >= 1);
    CHECK(s.a.size() <= 10);
    for (double v : s.a) CHECK(std::abs(v) <= 1.0);
    const FourierSeries t = draw_fourier_series(bg, rng);
    CHECK(t.a.size() == 10);
    CHECK(std::abs(t.a0) <= 0.5);
    for (std::size_t n = 1; n <= 10; ++n) {
      CHECK(std::abs(t.a[n - 1]) <= 1.0 / static_cast<double>(n));
      CHECK(std::abs(t.b[n - 1]) <= 1.0 / static_cast<double>(n));
    }
  }
}

TEST_CASE("degenerate spec gives a constant state") {
  FourierCoeffSpec spec;
  spec.a0_lower = spec.a0_upper = 0.3;
  spec.a_bound = spec.b_bound = {0.0, 0.0};
  spec.modes_min = spec.modes_max = 4;
  Rng rng(1);
  const NodalState s = sample_fourier_ic(spec, make_uniform_periodic_grid(16, kTwoPi), rng);
  for (Index i = 0; i < 16; ++i) CHECK(s.values[i] == 0.3);
}

TEST_CASE("property: sampled state equals the drawn series at every node") {
  Rng outer(100);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = static_cast<Index>(4 + outer.below(60));
    GridSet grid = make_uniform_periodic_grid(n, kTwoPi);
    if (trial % 2) grid = perturb_and_permute_grid(grid, 0.3, outer.next_u64());
    const FourierCoeffSpec spec = trial % 3 ? FourierCoeffSpec::burgers() : FourierCoeffSpec::advection_diffusion();
    const std::uint64_t seed = outer.next_u64();
    Rng a(seed), b(seed);
    const NodalState s = sample_fourier_ic(spec, grid, a);
    const FourierSeries series = draw_fourier_series(spec, b);
    for (Index i = 0; i < n; ++i) {
      CHECK(s.values[i] == evaluate_fourier_series<double>(series.a0, series.a, series.b, grid.nodes()(i, 0)));
    }
    CHECK(a.counter() == b.counter());
  }
}

TEST_CASE("samplers are pure functions of the rng state") {
  const GridSet grid = make_uniform_periodic_grid(32, kTwoPi);
  Rng a(42), b(42);
  CHECK(sample_fourier_ic(FourierCoeffSpec::burgers(), grid, a) == sample_fourier_ic(FourierCoeffSpec::burgers(), grid, b));
  CHECK(sample_piecewise_constant_ic(grid, a) == sample_piecewise_constant_ic(grid, b));
  CHECK_THROWS_AS(sample_fourier_ic(FourierCoeffSpec::burgers(), make_2d_unstructured_grid(a), a), std::invalid_argument);
}

TEST_CASE("piecewise constant initial data takes only its two values") {
  const GridSet grid = make_uniform_periodic_grid(64, kTwoPi);
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    Rng replay = rng;
    const NodalState s = sample_piecewise_constant_ic(grid, rng);
    const PiecewiseConstant p = draw_piecewise_constant(replay);
    CHECK(p.left <= p.right);
    CHECK(std::abs(p.inside) <= 1.0);
    CHECK(std::abs(p.outside) <= 1.0);
    for (Index i = 0; i < 64; ++i) CHECK((s.values[i] == p.inside || s.values[i] == p.outside));
    // Node x is read on [-pi, pi) after a shift by 2 pi.
    for (Index i = 0; i < 64; ++i) {
      double x = grid.nodes()(i, 0);
      if (x >= std::numbers::pi) x -= kTwoPi;
      CHECK(s.values[i] == ((p.left <= x && x <= p.right) ? p.inside : p.outside));
    }
  }
  PiecewiseConstant same{0.4, 0.4, -1.0, 1.0};
  const NodalState flat = sample_on_grid_1d(same, grid);
  CHECK(flat.values.isConstant(0.4));
}

TEST_CASE("2D sine series vanishes on the boundary") {
  Rng rng(12);
  const GridSet grid = make_2d_unstructured_grid(rng);
  for (int trial = 0; trial < 20; ++trial) {
    const NodalState s = sample_2d_sine_ic(7, grid, rng);
    for (Index i = 0; i < grid.size(); ++i) {
      const double x = grid.nodes()(i, 0), y = grid.nodes()(i, 1);
      if (std::abs(x) == 1.0 || std::abs(y) == 1.0) CHECK(std::abs(s.values[i]) < 1e-14);
    }
  }
  SineSeries2D one;
  one.coeffs = Matrix::Zero(7, 7);
  one.coeffs(0, 0) = 1.0;
  CHECK(one(0.0, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  SineSeries2D zero;
  zero.coeffs = Matrix::Zero(7, 7);
  CHECK(sample_on_grid_2d(zero, grid).values.isZero(0.0));

  Rng draws(5);
  const SineSeries2D drawn = draw_sine_series_2d(7, draws);
  for (int k = 1; k <= 7; ++k) {
    for (int l = 1; l <= 7; ++l) CHECK(std::abs(drawn.coeffs(k - 1, l - 1)) <= 1.0 / (k + l));
  }
}

TEST_CASE("Gaussian validation field") {
  const Gaussian2D g;
  const double peak = 0.2 / (2.0 * std::numbers::pi * 0.18 * 0.18);
  CHECK(peak == doctest::Approx(0.982443).epsilon(1e-5));  // quoted value is rounded
  CHECK(g(0.2, 0.2) == doctest::Approx(peak).epsilon(1e-14));
  CHECK(g(0.2 + 0.13, 0.2) == g(0.2 - 0.13, 0.2));
  CHECK(g(0.2, 0.2 + 0.31) == doctest::Approx(g(0.2, 0.2 - 0.31)).epsilon(1e-15));
  Gaussian2D flat;
  flat.amplitude = 0.0;
  Rng rng(1);
  CHECK(gaussian_2d_ic(flat, make_2d_unstructured_grid(rng)).values.isZero(0.0));
  Gaussian2D bad;
  bad.sigma_y = 0.0;
  CHECK_THROWS_AS(gaussian_2d_ic(bad, make_2d_unstructured_grid(rng)), std::invalid_argument);
}

namespace {

// Bratley-Fox construction from the integer m_k recurrence, point n taken at
// Gray-code index n ^ (n >> 1).
std::array<double, 2> sobol_oracle(std::uint64_t n) {
  std::array<std::uint64_t, 33> m1{}, m2{};
  for (int k = 1; k <= 32; ++k) m1[k] = 1;
  m2[1] = 1;
  m2[2] = 3;
  for (int k = 3; k <= 32; ++k) m2[k] = (2 * m2[k - 1]) ^ (4 * m2[k - 2]) ^ m2[k - 2];
  const std::uint64_t g = n ^ (n >> 1);
  double x = 0.0, y = 0.0;
  std::uint64_t xi = 0, yi = 0;
  for (int k = 1; k <= 32; ++k) {
    if ((g >> (k - 1)) & 1u) {
      xi ^= m1[k] << (32 - k);
      yi ^= m2[k] << (32 - k);
    }
  }
  x = static_cast<double>(xi) / 4294967296.0;
  y = static_cast<double>(yi) / 4294967296.0;
  return {x, y};
}

}  // namespace

TEST_CASE("Sobol sequence matches the direct construction") {
  const auto pts = sobol_2d(1024, 1);
  REQUIRE(pts.size() == 1024);
  CHECK(pts[0][0] == 0.5);
  CHECK(pts[0][1] == 0.5);
  CHECK(pts[1][0] == 0.75);
  CHECK(pts[1][1] == 0.25);
  CHECK(pts[2][0] == 0.25);
  CHECK(pts[2][1] == 0.75);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto o = sobol_oracle(i + 1);
    CHECK(pts[i][0] == o[0]);
    CHECK(pts[i][1] == o[1]);
    CHECK(pts[i][0] >= 0.0);
    CHECK(pts[i][0] < 1.0);
    CHECK(pts[i][1] >= 0.0);
    CHECK(pts[i][1] < 1.0);
  }
  const auto from_zero = sobol_2d(4, 0);
  CHECK(from_zero[0][0] == 0.0);
  CHECK(from_zero[1] == pts[0]);
  CHECK(sobol_2d(300, 1) == sobol_2d(300, 1));

}

TEST_CASE("unstructured 2D grid layout") {
  Rng rng(2);
  const GridSet g = make_2d_unstructured_grid(rng);
  CHECK(g.size() == 236);
  CHECK(g.dim() == 2);
  int corners = 0, edges = 0;
  for (Index i = 0; i < g.size(); ++i) {
    const double x = g.nodes()(i, 0), y = g.nodes()(i, 1);
    CHECK(std::abs(x) <= 1.0);
    CHECK(std::abs(y) <= 1.0);
    const bool bx = std::abs(x) == 1.0, by = std::abs(y) == 1.0;
    if (bx && by) ++corners;
    else if (bx || by) ++edges;
    if (i < 200) {
      CHECK(std::abs(x) < 1.0);
      CHECK(std::abs(y) < 1.0);
    }
  }
  CHECK(corners == 4);
  CHECK(edges == 32);
  Rng again(2);
  CHECK(make_2d_unstructured_grid(again) == g);
}
