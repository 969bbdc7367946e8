#ifndef NODALFLOW_SOLVERS_HPP
#define NODALFLOW_SOLVERS_HPP

#include "nodalflow/core_types.hpp"
#include "nodalflow/rng.hpp"
#include "nodalflow/sampling.hpp"
#include "nodalflow/spectral.hpp"

#include <Eigen/LU>
#include <Eigen/SparseLU>

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace nodalflow {

class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// PDE descriptions. These are the "true" equations used to synthesize data and
// reference solutions; the learner never sees them.

/// u_t = -(alpha u)_x + (kappa u_x)_x, coefficients given as Fourier series.
struct AdvectionDiffusion1D {
  FourierSeries alpha;
  FourierSeries kappa;

  static AdvectionDiffusion1D table1();
  static AdvectionDiffusion1D constant(double alpha, double kappa);
};

/// u_t = -c u_xxxx
struct FourthOrder {
  double c = 1e-2;
};

/// u_t + u u_x = nu u_xx
struct ViscousBurgers {
  double nu = 0.1;
};

/// u_t + (u^2/2)_x = 0
struct InviscidBurgers {
  double cfl = 0.4;  // target Courant number for internal sub-steps
};

/// (u1, u2)_t = [[0,1],[1,0]] (u1, u2)_x
struct WaveSystem {};

/// u_t + div(a u) = kappa lap u on [-1,1]^2, a = velocity_scale * (y, -x),
/// zero Dirichlet data.
struct AdvDiff2D {
  double kappa = 5e-3;
  double velocity_scale = 1.0;
  int fine_nodes = 129;
  double max_dt = 2e-3;
};

/// u_t = nu u_xx + gamma * mean(u)
struct IntegroDiffDemo {
  double nu = 0.05;
  double gamma = -0.5;
};

using PdeSpec =
    std::variant<AdvectionDiffusion1D, FourthOrder, ViscousBurgers, InviscidBurgers, WaveSystem, AdvDiff2D, IntegroDiffDemo>;

std::string pde_name(const PdeSpec& spec);
Index pde_components(const PdeSpec& spec);
int pde_dimension(const PdeSpec& spec);
void validate(const PdeSpec& spec);

// ---------------------------------------------------------------------------
// Single steps on uniform periodic grids.

/// Crank-Nicolson for the variable-coefficient advection-diffusion operator
/// assembled from spectral differentiation matrices. The LU factor is built
/// once per (spec, N, dt).
class CrankNicolsonAdvDiff {
public:
  CrankNicolsonAdvDiff(const AdvectionDiffusion1D& spec, Index n, double length, double dt);

  Vector step(const Eigen::Ref<const Vector>& u) const;
  const Matrix& spatial_operator() const { return op_; }
  double dt() const { return dt_; }
  double reciprocal_condition() const { return rcond_; }

private:
  double dt_;
  Matrix op_;
  Matrix explicit_part_;
  Eigen::PartialPivLU<Matrix> lu_;
  double rcond_ = 0.0;
};

NodalState advdiff1d_step_cn(const NodalState& state, const GridSet& grid, const AdvectionDiffusion1D& spec, double dt);
NodalState fourth_order_exact_step(const NodalState& state, const GridSet& grid, double c, double dt);
NodalState viscous_burgers_step(const NodalState& state, const GridSet& grid, double nu, double dt);
NodalState inviscid_burgers_step(const NodalState& state, const GridSet& grid, double dt);
std::pair<NodalState, NodalState> wave_system_exact(const NodalState& u1, const NodalState& u2, const GridSet& grid,
                                                    double t);
NodalState integro_differential_step(const NodalState& state, const GridSet& grid, double nu, double gamma, double dt);

/// Right-hand side of viscous Burgers with the 2/3 rule on u u_x.
Vector viscous_burgers_rhs(const SpectralOperator1D& op, const Eigen::Ref<const Vector>& u, double nu);
/// One classical RK4 step.
Vector viscous_burgers_rk4(const SpectralOperator1D& op, const Eigen::Ref<const Vector>& u, double nu, double dt);
/// -(F_{i+1/2} - F_{i-1/2}) / h with WENO5 reconstruction and Rusanov flux.
Vector weno5_burgers_rhs(const Eigen::Ref<const Vector>& u, double h);
/// One TVD-RK3 step; throws std::invalid_argument when dt max|u| / h > 0.5.
Vector weno5_burgers_rk3(const Eigen::Ref<const Vector>& u, double h, double dt);

// ---------------------------------------------------------------------------
// Multi-step propagation.

/// Advances a uniform-grid state by one output step, taking as many internal
/// sub-steps as accuracy or stability requires.
class UniformStepper {
public:
  virtual ~UniformStepper() = default;
  /// Returns the number of internal sub-steps used.
  virtual int advance(Vector& u, double dt) = 0;
  /// Exact steppers can jump directly to time t from the initial state.
  virtual bool exact() const { return false; }
};

std::unique_ptr<UniformStepper> make_uniform_stepper(const PdeSpec& spec, Index n, double length);

/// Initial data as functions of position, one per PDE component; the 2D form
/// is used only by AdvDiff2D.
struct InitialCondition {
  std::vector<std::function<double(double)>> components;
  std::function<double(double, double)> field2d;
  std::string descriptor;

  NodalState on_grid(const GridSet& grid) const;
};

class AdvDiff2DSolver;

struct SolveOptions {
  Index solver_nodes = 64;  // uniform solver grid for scattered 1D targets
};

struct SolveResult {
  TrajectorySequence sequence;
  int max_substeps = 1;
};

/// Reusable oracle bound to (spec, target grid, dt): holds the stepper and any
/// cached factorization. One session per thread.
class OracleSession {
public:
  OracleSession(PdeSpec spec, GridSet grid, double dt, SolveOptions options = {});
  ~OracleSession();
  OracleSession(OracleSession&&) noexcept;
  OracleSession& operator=(OracleSession&&) noexcept;

  SolveResult solve(const InitialCondition& ic, Index steps);
  /// Uniform-grid targets only: iterate from nodal values.
  SolveResult solve(const NodalState& ic, Index steps);

  const GridSet& grid() const { return grid_; }

private:
  SolveResult solve_uniform(const Vector& values, Index components, Index steps, UniformStepper& stepper);

  PdeSpec spec_;
  GridSet grid_;
  double dt_;
  SolveOptions options_;
  Index solver_nodes_ = 0;
  std::unique_ptr<UniformStepper> stepper_;
  std::unique_ptr<SpectralOperator1D> interpolator_;
  std::unique_ptr<AdvDiff2DSolver> solver2d_;
  int substeps2d_ = 1;
};

/// Iterates the oracle stepper `steps` times from a state on a uniform grid.
SolveResult solve_trajectory(const PdeSpec& spec, const GridSet& grid, const NodalState& ic, double dt, Index steps);

/// General form: integrates on a uniform solver grid (or the fine 2D grid)
/// and samples the solution at the nodes of `grid` in storage order.
SolveResult solve_trajectory(const PdeSpec& spec, const GridSet& grid, const InitialCondition& ic, double dt,
                             Index steps, const SolveOptions& options = {});

// ---------------------------------------------------------------------------
// 2D reference: second-order centred differences + Crank-Nicolson on a fine
// tensor grid, bicubic interpolation to scattered nodes.

class AdvDiff2DSolver {
public:
  AdvDiff2DSolver(const AdvDiff2D& spec, double dt);

  int fine_nodes() const { return m_; }
  double spacing() const { return h_; }
  double dt() const { return dt_; }

  /// Fine-grid values (boundary rows/cols included, held at zero).
  Matrix initial(const std::function<double(double, double)>& field) const;
  void step(Matrix& u) const;
  /// Cubic-convolution interpolation with odd reflection across the walls.
  Vector sample(const Matrix& u, const GridSet& grid) const;
  double value_at(const Matrix& u, double x, double y) const;

private:
  AdvDiff2D spec_;
  int m_;
  double h_;
  double dt_;
  Eigen::SparseMatrix<double> explicit_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
};

struct AdvDiff2DReport {
  std::vector<NodalState> states;
  double interpolation_error = 0.0;  // max |interp(ic) - ic| at the nodes
  int substeps = 1;
  std::vector<std::string> warnings;
};

AdvDiff2DReport advdiff2d_reference(const std::function<double(double, double)>& ic, const AdvDiff2D& spec,
                                    const GridSet& grid, const std::vector<double>& output_times, double dt);

// ---------------------------------------------------------------------------
// Dataset synthesis.

/// Draws the initial condition for trajectory `index` from its substream.
using IcSampler = std::function<InitialCondition(std::uint64_t index, Rng& rng)>;

IcSampler fourier_sampler(const FourierCoeffSpec& spec, Index components = 1);
IcSampler piecewise_constant_sampler();
IcSampler sine_2d_sampler(int modes);
IcSampler constant_sampler(double value);
/// Splits trajectory indices in contiguous blocks proportional to `weights`
/// (e.g. first half Fourier, second half piecewise constant).
IcSampler mixture_sampler(std::vector<std::pair<double, IcSampler>> parts, std::uint64_t total);

struct GenerateOptions {
  SolveOptions solve;
  int threads = 1;
};

TrajectoryDataset generate_dataset(const PdeSpec& spec, const IcSampler& sampler, const GridSet& grid, std::uint64_t m,
                                   Index steps, double dt, std::uint64_t seed, const GenerateOptions& options = {});

}  // namespace nodalflow

#endif
