#include "nodalflow/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

namespace nodalflow {

NodalState InitialCondition::on_grid(const GridSet& grid) const {
  if (grid.dim() == 2) {
    if (!field2d) throw std::invalid_argument("initial condition has no 2D field");
    return sample_on_grid_2d(field2d, grid);
  }
  if (components.empty()) throw std::invalid_argument("initial condition has no 1D components");
  std::vector<NodalState> parts;
  for (const auto& f : components) parts.push_back(sample_on_grid_1d(f, grid));
  return concat_components(parts);
}

OracleSession::OracleSession(PdeSpec spec, GridSet grid, double dt, SolveOptions options)
    : spec_(std::move(spec)), grid_(std::move(grid)), dt_(dt), options_(options) {
  validate(spec_);
  if (!(dt_ > 0.0)) throw std::invalid_argument("output time step must be positive");
  if (pde_dimension(spec_) != grid_.dim()) throw std::invalid_argument("PDE and grid dimensions differ");
  if (const auto* s2 = std::get_if<AdvDiff2D>(&spec_)) {
    substeps2d_ = std::max(1, static_cast<int>(std::ceil(dt_ / s2->max_dt - 1e-12)));
    solver2d_ = std::make_unique<AdvDiff2DSolver>(*s2, dt_ / substeps2d_);
    return;
  }
  if (grid_.domain().kind != DomainKind::PeriodicInterval) throw std::invalid_argument("1D problems need a periodic grid");
  if (grid_.is_uniform_periodic()) {
    solver_nodes_ = grid_.size();
  } else {
    solver_nodes_ = options_.solver_nodes;
    if (solver_nodes_ < 4 || solver_nodes_ % 2 != 0) throw std::invalid_argument("solver_nodes must be even and >= 4");
    interpolator_ = std::make_unique<SpectralOperator1D>(solver_nodes_, grid_.period());
  }
  stepper_ = make_uniform_stepper(spec_, solver_nodes_, grid_.period());
}

OracleSession::~OracleSession() = default;
OracleSession::OracleSession(OracleSession&&) noexcept = default;
OracleSession& OracleSession::operator=(OracleSession&&) noexcept = default;

SolveResult OracleSession::solve_uniform(const Vector& values, Index components, Index steps, UniformStepper& stepper) {
  const Index n = solver_nodes_;
  const StateLayout layout{grid_.size(), components};
  SolveResult result;
  result.sequence.dt = dt_;
  auto emit = [&](const Vector& u, Index k) {
    if (!u.allFinite()) throw NumericalError("oracle produced non-finite values at step " + std::to_string(k));
    const double t = static_cast<double>(k) * dt_;
    if (!interpolator_) {
      result.sequence.states.emplace_back(u, t, layout);
      return;
    }
    Vector out(layout.size());
    const Vector points = grid_.nodes().col(0);
    for (Index c = 0; c < components; ++c) {
      out.segment(c * layout.nodes, layout.nodes) = interpolator_->interpolate(u.segment(c * n, n), points);
    }
    result.sequence.states.emplace_back(std::move(out), t, layout);
  };
  emit(values, 0);
  Vector u = values;
  for (Index k = 1; k <= steps; ++k) {
    int sub = 1;
    if (stepper.exact()) {
      u = values;
      sub = stepper.advance(u, static_cast<double>(k) * dt_);
    } else {
      sub = stepper.advance(u, dt_);
    }
    result.max_substeps = std::max(result.max_substeps, sub);
    emit(u, k);
  }
  return result;
}

SolveResult OracleSession::solve(const InitialCondition& ic, Index steps) {
  if (steps < 0) throw std::invalid_argument("step count must be non-negative");
  if (solver2d_) {
    if (!ic.field2d) throw std::invalid_argument("2D problem needs a 2D initial field");
    SolveResult result;
    result.sequence.dt = dt_;
    result.max_substeps = substeps2d_;
    Matrix u = solver2d_->initial(ic.field2d);
    for (Index k = 0; k <= steps; ++k) {
      if (k > 0) {
        for (int s = 0; s < substeps2d_; ++s) solver2d_->step(u);
      }
      result.sequence.states.push_back(NodalState::scalar(solver2d_->sample(u, grid_), static_cast<double>(k) * dt_));
    }
    return result;
  }
  const Index components = pde_components(spec_);
  if (static_cast<Index>(ic.components.size()) != components) {
    throw std::invalid_argument("initial condition has the wrong number of components");
  }
  const Index n = solver_nodes_;
  Vector values(n * components);
  for (Index c = 0; c < components; ++c) {
    for (Index i = 0; i < n; ++i) {
      values[c * n + i] = ic.components[static_cast<std::size_t>(c)](static_cast<double>(i) * grid_.period() / static_cast<double>(n));
    }
  }
  return solve_uniform(values, components, steps, *stepper_);
}

SolveResult OracleSession::solve(const NodalState& ic, Index steps) {
  if (steps < 0) throw std::invalid_argument("step count must be non-negative");
  if (solver2d_ || interpolator_) throw std::invalid_argument("nodal initial data needs a uniform periodic target grid");
  if (ic.layout.nodes != grid_.size() || ic.layout.components != pde_components(spec_)) {
    throw std::invalid_argument("initial state does not match the grid/PDE layout");
  }
  return solve_uniform(ic.values, ic.layout.components, steps, *stepper_);
}

SolveResult solve_trajectory(const PdeSpec& spec, const GridSet& grid, const NodalState& ic, double dt, Index steps) {
  OracleSession session(spec, grid, dt);
  return session.solve(ic, steps);
}

SolveResult solve_trajectory(const PdeSpec& spec, const GridSet& grid, const InitialCondition& ic, double dt,
                             Index steps, const SolveOptions& options) {
  OracleSession session(spec, grid, dt, options);
  return session.solve(ic, steps);
}

// ---------------------------------------------------------------------------

IcSampler fourier_sampler(const FourierCoeffSpec& spec, Index components) {
  spec.validate();
  return [spec, components](std::uint64_t, Rng& rng) {
    InitialCondition ic;
    for (Index c = 0; c < components; ++c) ic.components.push_back(draw_fourier_series(spec, rng));
    ic.descriptor = "fourier";
    return ic;
  };
}

IcSampler piecewise_constant_sampler() {
  return [](std::uint64_t, Rng& rng) {
    InitialCondition ic;
    ic.components.push_back(draw_piecewise_constant(rng));
    ic.descriptor = "piecewise_constant";
    return ic;
  };
}

IcSampler sine_2d_sampler(int modes) {
  return [modes](std::uint64_t, Rng& rng) {
    InitialCondition ic;
    ic.field2d = draw_sine_series_2d(modes, rng);
    ic.descriptor = "sine_2d";
    return ic;
  };
}

IcSampler constant_sampler(double value) {
  return [value](std::uint64_t, Rng&) {
    InitialCondition ic;
    ic.components.push_back([value](double) { return value; });
    ic.field2d = [value](double, double) { return value; };
    ic.descriptor = "constant";
    return ic;
  };
}

IcSampler mixture_sampler(std::vector<std::pair<double, IcSampler>> parts, std::uint64_t total) {
  if (parts.empty()) throw std::invalid_argument("mixture needs at least one part");
  double weight_sum = 0.0;
  for (const auto& [w, s] : parts) {
    if (!(w > 0.0)) throw std::invalid_argument("mixture weights must be positive");
    weight_sum += w;
  }
  std::vector<std::uint64_t> ends;
  double acc = 0.0;
  for (const auto& [w, s] : parts) {
    acc += w;
    ends.push_back(static_cast<std::uint64_t>(std::llround(acc / weight_sum * static_cast<double>(total))));
  }
  ends.back() = total;
  return [parts = std::move(parts), ends = std::move(ends)](std::uint64_t index, Rng& rng) {
    std::size_t k = 0;
    while (k + 1 < ends.size() && index >= ends[k]) ++k;
    return parts[k].second(index, rng);
  };
}

TrajectoryDataset generate_dataset(const PdeSpec& spec, const IcSampler& sampler, const GridSet& grid, std::uint64_t m,
                                   Index steps, double dt, std::uint64_t seed, const GenerateOptions& options) {
  if (m < 1) throw std::invalid_argument("dataset needs at least one trajectory");
  if (steps < 1) throw std::invalid_argument("dataset needs n_L >= 1");
  TrajectoryDataset ds;
  ds.grid = grid;
  ds.steps = steps;
  ds.dt = dt;
  ds.layout = StateLayout{grid.size(), pde_components(spec)};
  ds.pde_name = pde_name(spec);
  ds.seed = seed;
  ds.sequences.resize(m);

  const int threads = std::max(1, std::min<int>(options.threads, static_cast<int>(m)));
  std::vector<int> substeps(static_cast<std::size_t>(threads), 1);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  const Rng root(seed);
  auto work = [&](int worker) {
    try {
      OracleSession session(spec, grid, dt, options.solve);
      for (std::uint64_t i = static_cast<std::uint64_t>(worker); i < m; i += static_cast<std::uint64_t>(threads)) {
        Rng rng = root.substream(i);
        auto result = session.solve(sampler(i, rng), steps);
        substeps[static_cast<std::size_t>(worker)] = std::max(substeps[static_cast<std::size_t>(worker)], result.max_substeps);
        ds.sequences[i] = std::move(result.sequence);
      }
    } catch (...) {
      errors[static_cast<std::size_t>(worker)] = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  ds.oracle_substeps = *std::max_element(substeps.begin(), substeps.end());
  ds.validate();
  return ds;
}

}  // namespace nodalflow
