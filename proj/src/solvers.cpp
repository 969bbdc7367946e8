#include "nodalflow/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace nodalflow {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

const SpectralOperator1D& checked_operator(const GridSet& grid, std::unique_ptr<SpectralOperator1D>& holder) {
  if (!grid.is_uniform_periodic()) throw std::invalid_argument("oracle steppers need a uniform periodic grid");
  holder = std::make_unique<SpectralOperator1D>(grid.size(), grid.period());
  return *holder;
}

void require_scalar(const NodalState& state, const GridSet& grid) {
  if (state.layout.nodes != grid.size() || state.layout.components != 1) {
    throw std::invalid_argument("expected a scalar state on the given grid");
  }
}

NodalState advanced(const NodalState& state, Vector values, double dt) {
  if (!values.allFinite()) throw NumericalError("oracle step produced non-finite values");
  return NodalState(std::move(values), state.time + dt, state.layout);
}

}  // namespace

AdvectionDiffusion1D AdvectionDiffusion1D::table1() {
  AdvectionDiffusion1D s;
  s.alpha.a0 = 1.0;
  s.alpha.a = {0.5426, 0.2673, -0.0030, -0.6039, 0.6618};
  s.alpha.b = {-0.9585, 0.4976, -0.5504, 0.5211, -0.8233};
  for (auto& v : s.alpha.a) v *= 0.05;
  for (auto& v : s.alpha.b) v *= 0.05;
  s.kappa.a0 = 1e-3;
  s.kappa.a = {0.3707, -0.9921, 0.62524, 0.4435, 0.8355};
  s.kappa.b = {0.9068, 0.0243, 0.2251, -0.4162, 0.4291};
  for (auto& v : s.kappa.a) v *= 5e-5;
  for (auto& v : s.kappa.b) v *= 5e-5;
  return s;
}

AdvectionDiffusion1D AdvectionDiffusion1D::constant(double alpha, double kappa) {
  AdvectionDiffusion1D s;
  s.alpha.a0 = alpha;
  s.kappa.a0 = kappa;
  return s;
}

std::string pde_name(const PdeSpec& spec) {
  return std::visit(Overloaded{
                        [](const AdvectionDiffusion1D&) { return std::string("advection_diffusion_1d"); },
                        [](const FourthOrder&) { return std::string("fourth_order"); },
                        [](const ViscousBurgers&) { return std::string("viscous_burgers"); },
                        [](const InviscidBurgers&) { return std::string("inviscid_burgers"); },
                        [](const WaveSystem&) { return std::string("wave_system"); },
                        [](const AdvDiff2D&) { return std::string("advection_diffusion_2d"); },
                        [](const IntegroDiffDemo&) { return std::string("integro_differential"); },
                    },
                    spec);
}

Index pde_components(const PdeSpec& spec) { return std::holds_alternative<WaveSystem>(spec) ? 2 : 1; }

int pde_dimension(const PdeSpec& spec) { return std::holds_alternative<AdvDiff2D>(spec) ? 2 : 1; }

void validate(const PdeSpec& spec) {
  std::visit(Overloaded{
                 [](const AdvectionDiffusion1D& s) {
                   if (s.alpha.a.size() != s.alpha.b.size() || s.kappa.a.size() != s.kappa.b.size()) {
                     throw std::invalid_argument("coefficient series lengths differ");
                   }
                   // kappa > 0 is checked on the actual nodes when the operator is built.
                 },
                 [](const FourthOrder& s) {
                   if (!(s.c > 0.0)) throw std::invalid_argument("fourth-order coefficient c must be positive");
                 },
                 [](const ViscousBurgers& s) {
                   if (!(s.nu >= 0.0)) throw std::invalid_argument("viscosity must be non-negative");
                 },
                 [](const InviscidBurgers& s) {
                   if (!(s.cfl > 0.0 && s.cfl <= 0.5)) throw std::invalid_argument("CFL target must lie in (0, 0.5]");
                 },
                 [](const WaveSystem&) {},
                 [](const AdvDiff2D& s) {
                   if (!(s.kappa >= 0.0)) throw std::invalid_argument("2D diffusivity must be non-negative");
                   if (s.fine_nodes < 5) throw std::invalid_argument("2D fine grid too small");
                   if (!(s.max_dt > 0.0)) throw std::invalid_argument("2D max_dt must be positive");
                 },
                 [](const IntegroDiffDemo& s) {
                   if (!(s.nu >= 0.0)) throw std::invalid_argument("viscosity must be non-negative");
                 },
             },
             spec);
}

// ---------------------------------------------------------------------------

CrankNicolsonAdvDiff::CrankNicolsonAdvDiff(const AdvectionDiffusion1D& spec, Index n, double length, double dt)
    : dt_(dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  SpectralOperator1D op(n, length);
  Vector x(n);
  for (Index i = 0; i < n; ++i) x[i] = static_cast<double>(i) * length / static_cast<double>(n);
  Vector alpha(n), kappa(n);
  for (Index i = 0; i < n; ++i) {
    alpha[i] = spec.alpha(x[i]);
    kappa[i] = spec.kappa(x[i]);
    if (!(kappa[i] > 0.0)) throw std::invalid_argument("diffusivity must be positive at every node");
  }
  const Matrix d1 = op.differentiation_matrix(1);
  op_ = -d1 * alpha.asDiagonal() + d1 * kappa.asDiagonal() * d1;
  const Matrix identity = Matrix::Identity(n, n);
  explicit_part_ = identity + 0.5 * dt * op_;
  lu_.compute(identity - 0.5 * dt * op_);
  rcond_ = lu_.rcond();
  if (!(rcond_ > 1e-14)) {
    throw NumericalError("Crank-Nicolson system is singular (reciprocal condition " + std::to_string(rcond_) + ")");
  }
}

Vector CrankNicolsonAdvDiff::step(const Eigen::Ref<const Vector>& u) const { return lu_.solve(explicit_part_ * u); }

NodalState advdiff1d_step_cn(const NodalState& state, const GridSet& grid, const AdvectionDiffusion1D& spec,
                             double dt) {
  require_scalar(state, grid);
  if (!grid.is_uniform_periodic()) throw std::invalid_argument("advdiff1d_step_cn needs a uniform periodic grid");
  CrankNicolsonAdvDiff cn(spec, grid.size(), grid.period(), dt);
  return advanced(state, cn.step(state.values), dt);
}

NodalState fourth_order_exact_step(const NodalState& state, const GridSet& grid, double c, double dt) {
  require_scalar(state, grid);
  std::unique_ptr<SpectralOperator1D> holder;
  const auto& op = checked_operator(grid, holder);
  const double scale = 2.0 * std::numbers::pi / grid.period();
  Vector out = op.apply_radial(state.values, [&](Index n) {
    const double k = scale * static_cast<double>(n);
    return std::exp(-c * k * k * k * k * dt);
  });
  return advanced(state, std::move(out), dt);
}

Vector viscous_burgers_rhs(const SpectralOperator1D& op, const Eigen::Ref<const Vector>& u, double nu) {
  const Index n = op.size();
  const ComplexVector uh = op.forward(u);
  ComplexVector uxh(n), uxxh(n);
  for (Index j = 0; j < n; ++j) {
    const double k = op.wavenumber(j);
    uxh[j] = op.is_nyquist(j) ? std::complex<double>(0.0) : uh[j] * std::complex<double>(0.0, k);
    uxxh[j] = -k * k * uh[j];
  }
  ComplexVector uf = uh;
  op.dealias(uf);
  op.dealias(uxh);
  const Vector product = op.inverse(uf).cwiseProduct(op.inverse(uxh));
  ComplexVector ph = op.forward(product);
  op.dealias(ph);
  return -op.inverse(ph) + nu * op.inverse(uxxh);
}

Vector viscous_burgers_rk4(const SpectralOperator1D& op, const Eigen::Ref<const Vector>& u, double nu, double dt) {
  const Vector k1 = viscous_burgers_rhs(op, u, nu);
  const Vector k2 = viscous_burgers_rhs(op, u + 0.5 * dt * k1, nu);
  const Vector k3 = viscous_burgers_rhs(op, u + 0.5 * dt * k2, nu);
  const Vector k4 = viscous_burgers_rhs(op, u + dt * k3, nu);
  return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

NodalState viscous_burgers_step(const NodalState& state, const GridSet& grid, double nu, double dt) {
  require_scalar(state, grid);
  std::unique_ptr<SpectralOperator1D> holder;
  const auto& op = checked_operator(grid, holder);
  return advanced(state, viscous_burgers_rk4(op, state.values, nu, dt), dt);
}

namespace {

// Left-biased WENO5 value at the right face of the middle cell of
// (v[0], ..., v[4]).
inline double weno5_face(double vm2, double vm1, double v0, double vp1, double vp2) {
  constexpr double kEps = 1e-6;
  const double p0 = (2.0 * vm2 - 7.0 * vm1 + 11.0 * v0) / 6.0;
  const double p1 = (-vm1 + 5.0 * v0 + 2.0 * vp1) / 6.0;
  const double p2 = (2.0 * v0 + 5.0 * vp1 - vp2) / 6.0;
  const double b0 = 13.0 / 12.0 * std::pow(vm2 - 2.0 * vm1 + v0, 2) + 0.25 * std::pow(vm2 - 4.0 * vm1 + 3.0 * v0, 2);
  const double b1 = 13.0 / 12.0 * std::pow(vm1 - 2.0 * v0 + vp1, 2) + 0.25 * std::pow(vm1 - vp1, 2);
  const double b2 = 13.0 / 12.0 * std::pow(v0 - 2.0 * vp1 + vp2, 2) + 0.25 * std::pow(3.0 * v0 - 4.0 * vp1 + vp2, 2);
  const double a0 = 0.1 / ((kEps + b0) * (kEps + b0));
  const double a1 = 0.6 / ((kEps + b1) * (kEps + b1));
  const double a2 = 0.3 / ((kEps + b2) * (kEps + b2));
  return (a0 * p0 + a1 * p1 + a2 * p2) / (a0 + a1 + a2);
}

}  // namespace

Vector weno5_burgers_rhs(const Eigen::Ref<const Vector>& u, double h) {
  const Index n = u.size();
  auto at = [&](Index i) { return u[((i % n) + n) % n]; };
  // flux[i] is the numerical flux at the face between cells i and i+1.
  Vector flux(n);
  for (Index i = 0; i < n; ++i) {
    const double left = weno5_face(at(i - 2), at(i - 1), at(i), at(i + 1), at(i + 2));
    const double right = weno5_face(at(i + 3), at(i + 2), at(i + 1), at(i), at(i - 1));
    const double speed = std::max(std::abs(left), std::abs(right));
    flux[i] = 0.25 * (left * left + right * right) - 0.5 * speed * (right - left);
  }
  Vector rhs(n);
  for (Index i = 0; i < n; ++i) rhs[i] = -(flux[i] - flux[(i + n - 1) % n]) / h;
  return rhs;
}

Vector weno5_burgers_rk3(const Eigen::Ref<const Vector>& u, double h, double dt) {
  const double courant = dt * u.cwiseAbs().maxCoeff() / h;
  if (courant > 0.5) {
    throw std::invalid_argument("WENO step violates CFL: dt*max|u|/h = " + std::to_string(courant));
  }
  const Vector u1 = u + dt * weno5_burgers_rhs(u, h);
  const Vector u2 = 0.75 * u + 0.25 * (u1 + dt * weno5_burgers_rhs(u1, h));
  return u / 3.0 + (2.0 / 3.0) * (u2 + dt * weno5_burgers_rhs(u2, h));
}

NodalState inviscid_burgers_step(const NodalState& state, const GridSet& grid, double dt) {
  require_scalar(state, grid);
  if (!grid.is_uniform_periodic()) throw std::invalid_argument("inviscid_burgers_step needs a uniform periodic grid");
  const double h = grid.period() / static_cast<double>(grid.size());
  return advanced(state, weno5_burgers_rk3(state.values, h, dt), dt);
}

std::pair<NodalState, NodalState> wave_system_exact(const NodalState& u1, const NodalState& u2, const GridSet& grid,
                                                    double t) {
  require_scalar(u1, grid);
  require_scalar(u2, grid);
  std::unique_ptr<SpectralOperator1D> holder;
  const auto& op = checked_operator(grid, holder);
  // w+ = u1 + u2 satisfies w_t = w_x and w- = u1 - u2 satisfies w_t = -w_x.
  const Vector plus = op.shift(u1.values + u2.values, t);
  const Vector minus = op.shift(u1.values - u2.values, -t);
  return {advanced(u1, 0.5 * (plus + minus), t), advanced(u2, 0.5 * (plus - minus), t)};
}

NodalState integro_differential_step(const NodalState& state, const GridSet& grid, double nu, double gamma,
                                     double dt) {
  require_scalar(state, grid);
  std::unique_ptr<SpectralOperator1D> holder;
  const auto& op = checked_operator(grid, holder);
  const double scale = 2.0 * std::numbers::pi / grid.period();
  Vector out = op.apply_radial(state.values, [&](Index n) {
    if (n == 0) return std::exp(gamma * dt);
    const double k = scale * static_cast<double>(n);
    return std::exp(-nu * k * k * dt);
  });
  return advanced(state, std::move(out), dt);
}

// ---------------------------------------------------------------------------

namespace {

class CnStepper final : public UniformStepper {
public:
  CnStepper(AdvectionDiffusion1D spec, Index n, double length) : spec_(std::move(spec)), n_(n), length_(length) {}
  int advance(Vector& u, double dt) override {
    if (!cn_ || cn_->dt() != dt) cn_ = std::make_unique<CrankNicolsonAdvDiff>(spec_, n_, length_, dt);
    u = cn_->step(u);
    return 1;
  }

private:
  AdvectionDiffusion1D spec_;
  Index n_;
  double length_;
  std::unique_ptr<CrankNicolsonAdvDiff> cn_;
};

class RadialExactStepper final : public UniformStepper {
public:
  RadialExactStepper(std::function<double(double k, double dt)> factor, Index n, double length)
      : factor_(std::move(factor)), op_(n, length), scale_(2.0 * std::numbers::pi / length) {}
  int advance(Vector& u, double dt) override {
    u = op_.apply_radial(u, [&](Index n) { return factor_(scale_ * static_cast<double>(n), dt); });
    return 1;
  }

private:
  std::function<double(double, double)> factor_;
  SpectralOperator1D op_;
  double scale_;
};

class ViscousBurgersStepper final : public UniformStepper {
public:
  ViscousBurgersStepper(double nu, Index n, double length) : nu_(nu), op_(n, length), h_(length / static_cast<double>(n)) {}
  int advance(Vector& u, double dt) override {
    // Half of the RK4 stability limits for diffusion (2.78) and advection
    // (2.8 on the imaginary axis).
    const double kmax = std::numbers::pi / h_;
    const double umax = std::max(u.cwiseAbs().maxCoeff(), 1e-12);
    double stable = 0.5 * 2.8 / (kmax * umax);
    if (nu_ > 0.0) stable = std::min(stable, 0.5 * 2.78 / (nu_ * kmax * kmax));
    const int sub = std::max(1, static_cast<int>(std::ceil(dt / stable - 1e-12)));
    const double h = dt / sub;
    for (int s = 0; s < sub; ++s) u = viscous_burgers_rk4(op_, u, nu_, h);
    return sub;
  }

private:
  double nu_;
  SpectralOperator1D op_;
  double h_;
};

class WenoStepper final : public UniformStepper {
public:
  WenoStepper(double cfl, Index n, double length) : cfl_(cfl), h_(length / static_cast<double>(n)) {}
  int advance(Vector& u, double dt) override {
    // max|u| is non-increasing for entropy solutions, so the initial bound holds
    // for every sub-step.
    const double umax = std::max(u.cwiseAbs().maxCoeff(), 1e-12);
    const int sub = std::max(1, static_cast<int>(std::ceil(dt * umax / (cfl_ * h_) - 1e-12)));
    const double step = dt / sub;
    for (int s = 0; s < sub; ++s) u = weno5_burgers_rk3(u, h_, step);
    return sub;
  }

private:
  double cfl_;
  double h_;
};

class WaveStepper final : public UniformStepper {
public:
  WaveStepper(Index n, double length) : op_(n, length), n_(n) {}
  int advance(Vector& u, double dt) override {
    const Vector plus = op_.shift(u.head(n_) + u.tail(n_), dt);
    const Vector minus = op_.shift(u.head(n_) - u.tail(n_), -dt);
    u.head(n_) = 0.5 * (plus + minus);
    u.tail(n_) = 0.5 * (plus - minus);
    return 1;
  }
  bool exact() const override { return true; }

private:
  SpectralOperator1D op_;
  Index n_;
};

}  // namespace

std::unique_ptr<UniformStepper> make_uniform_stepper(const PdeSpec& spec, Index n, double length) {
  validate(spec);
  return std::visit(
      Overloaded{
          [&](const AdvectionDiffusion1D& s) -> std::unique_ptr<UniformStepper> {
            return std::make_unique<CnStepper>(s, n, length);
          },
          [&](const FourthOrder& s) -> std::unique_ptr<UniformStepper> {
            const double c = s.c;
            return std::make_unique<RadialExactStepper>(
                [c](double k, double dt) { return std::exp(-c * k * k * k * k * dt); }, n, length);
          },
          [&](const ViscousBurgers& s) -> std::unique_ptr<UniformStepper> {
            return std::make_unique<ViscousBurgersStepper>(s.nu, n, length);
          },
          [&](const InviscidBurgers& s) -> std::unique_ptr<UniformStepper> {
            return std::make_unique<WenoStepper>(s.cfl, n, length);
          },
          [&](const WaveSystem&) -> std::unique_ptr<UniformStepper> { return std::make_unique<WaveStepper>(n, length); },
          [&](const AdvDiff2D&) -> std::unique_ptr<UniformStepper> {
            throw std::invalid_argument("the 2D problem has no uniform 1D stepper");
          },
          [&](const IntegroDiffDemo& s) -> std::unique_ptr<UniformStepper> {
            const double nu = s.nu, gamma = s.gamma;
            return std::make_unique<RadialExactStepper>(
                [nu, gamma](double k, double dt) { return k == 0.0 ? std::exp(gamma * dt) : std::exp(-nu * k * k * dt); },
                n, length);
          },
      },
      spec);
}

}  // namespace nodalflow
