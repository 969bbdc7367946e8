#ifndef NODALFLOW_TOOLS_EXPERIMENT_HPP
#define NODALFLOW_TOOLS_EXPERIMENT_HPP

#include "nodalflow/rollout.hpp"
#include "nodalflow/training.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nodalflow::cli {

/// Schema violation in an experiment config; `path` is the dotted key.
class ConfigError : public std::runtime_error {
public:
  ConfigError(const std::string& path, const std::string& what)
      : std::runtime_error(path.empty() ? what : path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

private:
  std::string path_;
};

struct GridConfig {
  std::string type = "uniform";  // uniform | perturbed | unstructured_2d
  Index nodes = 50;
  double fraction = 0.25;
  std::uint64_t seed = 0;
  SolveOptions solve;
};

struct DatasetConfig {
  std::uint64_t m = 0;
  Index n_l = 0;
  double dt = 0.0;
  std::uint64_t seed = 0;
};

struct NetworkConfig {
  std::optional<Index> width;  // defaults to the input size
  Index depth = 1;
  Index thickness = 5;
  Index assembly_depth = 1;
  std::uint64_t init_seed = 0;
};

struct EvaluationConfig {
  double horizon = 0.0;
  std::vector<std::string> ics;
  std::vector<double> slice_times;  // empty: 0, T/4, T/2, T
  std::optional<double> train_horizon;
};

struct ExperimentConfig {
  std::string name;
  std::string description;
  PdeSpec pde;
  GridConfig grid;
  nlohmann::json sampler;  // validated at parse time, built by make_sampler
  DatasetConfig dataset;
  NetworkConfig network;
  TrainingConfig training;
  EvaluationConfig evaluation;

  /// Parses and validates; relative fragment paths resolve against `base_dir`.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static ExperimentConfig load(const std::filesystem::path& path);

  GridSet make_grid() const;
  IcSampler make_sampler() const;
  Index components() const { return pde_components(pde); }
  NetworkDims dims() const;
  /// Evaluation setup for one named initial condition.
  EvaluationSetup evaluation_setup(const std::string& ic) const;
  std::vector<double> slice_times() const;
};

/// Named initial conditions: exp_sin2, sin, exp_sin_exp_cos, gaussian_2d.
InitialCondition named_ic(const std::string& name, const PdeSpec& pde);
std::vector<std::string> named_ics();

/// Reads nodal values: one row per node, one column per component, optional
/// non-numeric header line.
NodalState read_ic_csv(const std::filesystem::path& path, Index nodes, Index components);

}  // namespace nodalflow::cli

#endif
