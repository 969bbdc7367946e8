#ifndef NODALFLOW_ROLLOUT_HPP
#define NODALFLOW_ROLLOUT_HPP

#include "nodalflow/model.hpp"
#include "nodalflow/solvers.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nodalflow {

struct Prediction {
  TrajectorySequence sequence;
  bool non_finite = false;  // rollout stopped at the first non-finite state
};

/// v0 = ic, v_{k+1} = N(v_k). Sees only parameters and nodal values.
Prediction predict(const NetworkParams& params, const NodalState& ic, Index steps, double dt);

inline constexpr double kBlowUpThreshold = 1e3;

struct ErrorReport {
  std::vector<double> times;
  std::vector<double> rel_l2;
  std::vector<double> linf;
  /// Per-component relative L2 (rows: components, one series each).
  std::vector<std::vector<double>> rel_l2_components;
  std::optional<Index> blow_up_step;
  std::string model_hash;
  std::string pde;
  std::string ic;
  double train_horizon = 0.0;
  double horizon = 0.0;

  double extrapolation_factor() const { return train_horizon > 0.0 ? horizon / train_horizon : 0.0; }
  /// Deterministic JSON text (fixed key order, shortest round-trip doubles).
  std::string to_json() const;
};

/// Per-time relative L2 (denominator max(|u|, 1e-14)) and L-infinity errors.
/// Truncates at the first step whose relative error exceeds the blow-up
/// threshold or is non-finite, and records that step.
ErrorReport compute_error_metrics(const TrajectorySequence& pred, const TrajectorySequence& ref);

using StepMap = std::function<Vector(const Vector&)>;

struct EvaluationSetup {
  PdeSpec spec;
  GridSet grid;
  InitialCondition ic;
  double horizon = 0.0;  // T
  double dt = 0.0;
  double train_horizon = 0.0;
  SolveOptions solve;
};

struct Evaluation {
  ErrorReport report;
  TrajectorySequence prediction;
  TrajectorySequence reference;
};

/// Rolls the model out to K = T/dt steps and compares against the oracle at
/// the same output times.
Evaluation evaluate_against_reference(const NetworkParams& params, const EvaluationSetup& setup);
/// Same pipeline with an arbitrary one-step map in place of the model.
Evaluation evaluate_against_reference(const StepMap& step, const EvaluationSetup& setup, const std::string& model_id);

/// "node,x[,y],t0,t1,..." one row per node, `component` selects the block.
std::string trajectory_csv(const TrajectorySequence& seq, const GridSet& grid, Index component,
                           const std::vector<Index>& steps);

}  // namespace nodalflow

#endif
