#include "nodalflow/rollout.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace nodalflow {

Prediction predict(const NetworkParams& params, const NodalState& ic, Index steps, double dt) {
  if (ic.values.size() != params.dims.input) {
    throw std::invalid_argument("initial state has length " + std::to_string(ic.values.size()) + ", model expects " +
                                std::to_string(params.dims.input));
  }
  if (steps < 0) throw std::invalid_argument("step count must be non-negative");
  Prediction out;
  out.sequence.dt = dt;
  out.sequence.states.push_back(ic);
  Vector v = ic.values;
  for (Index k = 1; k <= steps; ++k) {
    v = model_apply(params, v);
    if (!v.allFinite()) {
      out.non_finite = true;
      break;
    }
    out.sequence.states.emplace_back(v, ic.time + static_cast<double>(k) * dt, ic.layout);
  }
  return out;
}

ErrorReport compute_error_metrics(const TrajectorySequence& pred, const TrajectorySequence& ref) {
  ErrorReport r;
  const std::size_t n = std::min(pred.states.size(), ref.states.size());
  if (n == 0) throw std::invalid_argument("empty trajectory");
  const Index components = ref.states[0].layout.components;
  r.rel_l2_components.resize(static_cast<std::size_t>(components));
  for (std::size_t k = 0; k < n; ++k) {
    const auto& p = pred.states[k];
    const auto& u = ref.states[k];
    if (!(p.layout == u.layout)) throw std::invalid_argument("prediction and reference layouts differ");
    if (std::abs(p.time - u.time) > 1e-9 * std::max(1.0, std::abs(u.time))) {
      throw std::invalid_argument("prediction and reference times are not aligned");
    }
    const Vector diff = p.values - u.values;
    const double rel = diff.norm() / std::max(u.values.norm(), 1e-14);
    const double inf = diff.size() ? diff.cwiseAbs().maxCoeff() : 0.0;
    r.times.push_back(u.time);
    r.rel_l2.push_back(rel);
    r.linf.push_back(inf);
    for (Index c = 0; c < components; ++c) {
      const Vector dc = p.component(c) - u.component(c);
      r.rel_l2_components[static_cast<std::size_t>(c)].push_back(dc.norm() / std::max(u.component(c).norm(), 1e-14));
    }
    if (!std::isfinite(rel) || rel > kBlowUpThreshold) {
      r.blow_up_step = static_cast<Index>(k);
      return r;
    }
  }
  if (pred.states.size() < ref.states.size()) r.blow_up_step = static_cast<Index>(pred.states.size());
  return r;
}

std::string ErrorReport::to_json() const {
  nlohmann::ordered_json j;
  j["pde"] = pde;
  j["ic"] = ic;
  j["model_hash"] = model_hash;
  j["train_horizon"] = train_horizon;
  j["horizon"] = horizon;
  j["extrapolation_factor"] = extrapolation_factor();
  j["blow_up_step"] = blow_up_step ? nlohmann::ordered_json(*blow_up_step) : nlohmann::ordered_json(nullptr);
  j["times"] = times;
  j["rel_l2"] = rel_l2;
  j["linf"] = linf;
  j["rel_l2_components"] = rel_l2_components;
  return j.dump(2);
}

namespace {

Evaluation evaluate(const std::function<TrajectorySequence(const NodalState&, Index)>& roll,
                    const EvaluationSetup& setup, const std::string& model_id) {
  if (!(setup.dt > 0.0) || !(setup.horizon >= 0.0)) throw std::invalid_argument("evaluation needs dt > 0 and T >= 0");
  const double ratio = setup.horizon / setup.dt;
  const auto steps = static_cast<Index>(std::llround(ratio));
  if (std::abs(ratio - static_cast<double>(steps)) > 1e-9 * std::max(1.0, ratio)) {
    throw std::invalid_argument("T must be a whole number of steps");
  }
  Evaluation e;
  e.reference = solve_trajectory(setup.spec, setup.grid, setup.ic, setup.dt, steps, setup.solve).sequence;
  e.prediction = roll(e.reference.states.front(), steps);
  e.report = compute_error_metrics(e.prediction, e.reference);
  e.report.model_hash = model_id;
  e.report.pde = pde_name(setup.spec);
  e.report.ic = setup.ic.descriptor;
  e.report.train_horizon = setup.train_horizon;
  e.report.horizon = setup.horizon;
  return e;
}

}  // namespace

Evaluation evaluate_against_reference(const NetworkParams& params, const EvaluationSetup& setup) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(model_hash(params)));
  return evaluate([&](const NodalState& ic, Index k) { return predict(params, ic, k, setup.dt).sequence; }, setup, hash);
}

Evaluation evaluate_against_reference(const StepMap& step, const EvaluationSetup& setup, const std::string& model_id) {
  return evaluate(
      [&](const NodalState& ic, Index k) {
        TrajectorySequence seq;
        seq.dt = setup.dt;
        seq.states.push_back(ic);
        Vector v = ic.values;
        for (Index s = 1; s <= k; ++s) {
          v = step(v);
          if (!v.allFinite()) break;
          seq.states.emplace_back(v, ic.time + static_cast<double>(s) * setup.dt, ic.layout);
        }
        return seq;
      },
      setup, model_id);
}

std::string trajectory_csv(const TrajectorySequence& seq, const GridSet& grid, Index component,
                           const std::vector<Index>& steps) {
  if (seq.states.empty()) throw std::invalid_argument("empty trajectory");
  const auto& layout = seq.states[0].layout;
  if (layout.nodes != grid.size()) throw std::invalid_argument("grid does not match the trajectory");
  if (component < 0 || component >= layout.components) throw std::invalid_argument("component out of range");
  std::ostringstream out;
  out.precision(17);
  out << "node,x";
  if (grid.dim() == 2) out << ",y";
  for (Index k : steps) {
    if (k < 0 || k > seq.steps()) throw std::invalid_argument("requested step outside the trajectory");
    char label[32];
    std::snprintf(label, sizeof label, ",t=%.10g", seq.states[static_cast<std::size_t>(k)].time);
    out << label;
  }
  out << '\n';
  for (Index i = 0; i < grid.size(); ++i) {
    out << i;
    for (int d = 0; d < grid.dim(); ++d) out << ',' << grid.nodes()(i, d);
    for (Index k : steps) out << ',' << seq.states[static_cast<std::size_t>(k)].component(component)[i];
    out << '\n';
  }
  return out.str();
}

}  // namespace nodalflow
