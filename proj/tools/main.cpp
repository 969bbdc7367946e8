#include "experiment.hpp"

#include "nodalflow/io.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace nodalflow;
using namespace nodalflow::cli;
using ojson = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kFormat = 3, kDimension = 4, kNumerical = 5 };

struct CommandError : std::runtime_error {
  CommandError(Exit code, std::string kind, const std::string& what)
      : std::runtime_error(what), code(code), kind(std::move(kind)) {}
  Exit code;
  std::string kind;
};

int report_error(Exit code, const std::string& kind, const std::string& message) {
  ojson j;
  j["error"] = {{"kind", kind}, {"message", message}};
  std::cerr << j.dump() << '\n';
  return code;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw CommandError(kFormat, "io", "cannot write " + path.string());
}

int threads_from(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("NODALFLOW_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

std::filesystem::path with_suffix(const std::filesystem::path& path, const std::string& suffix) {
  std::filesystem::path out = path;
  out.replace_extension();
  out += suffix;
  return out;
}

struct Options {
  std::string config;
  std::string out;
  std::string data;
  std::string model;
  std::string ic;
  std::string resume;
  std::string history;
  std::string path;
  std::optional<std::uint64_t> seed;
  Index steps = 0;
  int threads = 0;
  bool dry_run = false;
  bool self_test = false;
};

int cmd_generate(const Options& o) {
  ExperimentConfig cfg = ExperimentConfig::load(o.config);
  if (o.seed) cfg.dataset.seed = *o.seed;
  if (o.dry_run) {
    std::cout << ojson{{"config", cfg.name}, {"valid", true}}.dump() << '\n';
    return kOk;
  }
  if (o.out.empty()) throw CommandError(kUsage, "usage", "--out is required");
  GenerateOptions options;
  options.solve = cfg.grid.solve;
  options.threads = threads_from(o.threads);
  const TrajectoryDataset ds = generate_dataset(cfg.pde, cfg.make_sampler(), cfg.make_grid(), cfg.dataset.m,
                                                cfg.dataset.n_l, cfg.dataset.dt, cfg.dataset.seed, options);
  write_dataset(ds, o.out);
  ojson summary;
  summary["pde"] = ds.pde_name;
  summary["M"] = ds.sequences.size();
  summary["n_L"] = ds.steps;
  summary["dt"] = ds.dt;
  summary["nodes"] = ds.layout.nodes;
  summary["components"] = ds.layout.components;
  summary["seed"] = ds.seed;
  summary["oracle_substeps"] = ds.oracle_substeps;
  write_text(o.out + ".json", summary.dump(2) + "\n");
  std::cout << summary.dump() << '\n';
  return kOk;
}

int cmd_train(const Options& o) {
  ExperimentConfig cfg = ExperimentConfig::load(o.config);
  if (o.seed) {
    cfg.network.init_seed = *o.seed;
    cfg.training.shuffle_seed = *o.seed;
  }
  cfg.training.threads = threads_from(o.threads);
  const NetworkDims dims = cfg.dims();
  if (o.dry_run) {
    std::cout << ojson{{"config", cfg.name}, {"valid", true}, {"parameters", dims.parameter_count()}}.dump() << '\n';
    return kOk;
  }
  if (o.data.empty() || o.out.empty()) throw CommandError(kUsage, "usage", "--data and --out are required");
  TrajectoryDataset ds = read_dataset(o.data);
  if (ds.layout.size() != dims.input) {
    throw CommandError(kDimension, "dimension", "dataset state length " + std::to_string(ds.layout.size()) +
                                                    " does not match network input " + std::to_string(dims.input));
  }
  if (ds.dt != cfg.dataset.dt) throw CommandError(kDimension, "dimension", "dataset dt differs from the config");
  try {
    cfg.training.validate(ds.steps, ds.sequences.size());
  } catch (const std::invalid_argument& e) {
    throw CommandError(kDimension, "dimension", e.what());
  }

  TrainResult start;
  if (!o.resume.empty()) {
    Checkpoint ck = load_checkpoint(o.resume, dims);
    start.params = std::move(ck.params);
    start.history = std::move(ck.history);
    start.adam = ck.adam ? *ck.adam : AdamState::zeros(start.params.parameter_count());
  } else {
    start.params = init_params(dims, cfg.network.init_seed);
    start.adam = AdamState::zeros(start.params.parameter_count());
  }

  const auto t0 = std::chrono::steady_clock::now();
  TrainResult result;
  std::optional<std::string> diverged;
  try {
    result = train(ds, std::move(start), cfg.training, [](std::uint64_t epoch, double loss, double lr) {
      std::printf("epoch %llu loss %.6e lr %.6e\n", static_cast<unsigned long long>(epoch), loss, lr);
      std::fflush(stdout);
    });
  } catch (const TrainingDiverged& e) {
    result = e.last_finite;
    diverged = e.what();
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  save_checkpoint(Checkpoint{result.params, result.history, result.adam}, o.out);
  std::ostringstream csv;
  csv << "epoch,loss,lr\n";
  csv.precision(17);
  for (std::size_t e = 0; e < result.history.epochs(); ++e) {
    csv << e << ',' << result.history.loss[e] << ',' << result.history.lr[e] << '\n';
  }
  write_text(o.history.empty() ? with_suffix(o.out, ".history.csv") : std::filesystem::path(o.history), csv.str());
  if (diverged) throw CommandError(kNumerical, "training_diverged", *diverged);

  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(model_hash(result.params)));
  ojson summary;
  summary["epochs"] = result.history.epochs();
  summary["steps"] = result.adam.step;
  summary["final_loss"] = result.history.loss.empty() ? 0.0 : result.history.loss.back();
  summary["parameters"] = result.params.parameter_count();
  summary["model_hash"] = hash;
  summary["seconds"] = seconds;
  std::cout << summary.dump() << '\n';
  return kOk;
}

NodalState resolve_ic(const std::string& source, const ExperimentConfig& cfg, const GridSet& grid) {
  for (const auto& name : named_ics()) {
    if (source == name) {
      try {
        return named_ic(name, cfg.pde).on_grid(grid);
      } catch (const std::invalid_argument& e) {
        throw CommandError(kDimension, "dimension", e.what());
      }
    }
  }
  try {
    return read_ic_csv(source, grid.size(), cfg.components());
  } catch (const std::invalid_argument& e) {
    throw CommandError(kDimension, "dimension", e.what());
  }
}

int cmd_predict(const Options& o) {
  const ExperimentConfig cfg = ExperimentConfig::load(o.config);
  const GridSet grid = cfg.make_grid();
  const Checkpoint ck = load_checkpoint(o.model);
  const NodalState ic = resolve_ic(o.ic, cfg, grid);
  if (ic.values.size() != ck.params.dims.input) {
    throw CommandError(kDimension, "dimension", "initial condition length does not match the model input");
  }
  if (o.steps < 0) throw CommandError(kUsage, "usage", "--steps must be non-negative");
  const Prediction p = predict(ck.params, ic, o.steps, cfg.dataset.dt);
  std::vector<Index> steps;
  for (Index k = 0; k <= p.sequence.steps(); ++k) steps.push_back(k);
  const Index comps = cfg.components();
  for (Index c = 0; c < comps; ++c) {
    const std::string path = comps == 1 ? o.out : with_suffix(o.out, ".u" + std::to_string(c + 1) + ".csv").string();
    write_text(path, trajectory_csv(p.sequence, grid, c, steps));
  }
  if (p.non_finite) {
    throw CommandError(kNumerical, "non_finite_rollout",
                       "rollout stopped at step " + std::to_string(p.sequence.steps() + 1));
  }
  std::cout << ojson{{"steps", p.sequence.steps()}, {"components", comps}}.dump() << '\n';
  return kOk;
}

int cmd_evaluate(const Options& o) {
  const ExperimentConfig cfg = ExperimentConfig::load(o.config);
  if (o.out.empty()) throw CommandError(kUsage, "usage", "--out is required");
  std::optional<Checkpoint> ck;
  if (!o.self_test) {
    if (o.model.empty()) throw CommandError(kUsage, "usage", "--model is required unless --self-test is given");
    ck = load_checkpoint(o.model, cfg.dims());
  }
  const std::filesystem::path out(o.out);
  ojson summary = ojson::array();
  for (const auto& name : cfg.evaluation.ics) {
    const EvaluationSetup setup = cfg.evaluation_setup(name);
    Evaluation e;
    if (o.self_test) {
      if (!setup.grid.is_uniform_periodic()) {
        throw CommandError(kUsage, "usage", "--self-test needs a uniform periodic grid");
      }
      OracleSession session(setup.spec, setup.grid, setup.dt, setup.solve);
      const StateLayout layout{setup.grid.size(), cfg.components()};
      const StepMap step = [&](const Vector& v) {
        return session.solve(NodalState(v, 0.0, layout), 1).sequence.states[1].values;
      };
      e = evaluate_against_reference(step, setup, "oracle");
    } else {
      e = evaluate_against_reference(ck->params, setup);
    }
    const bool single = cfg.evaluation.ics.size() == 1;
    const std::filesystem::path report = single ? out : with_suffix(out, "." + name + ".json");
    write_text(report, e.report.to_json() + "\n");

    std::vector<Index> slices;
    for (double t : cfg.slice_times()) {
      const auto k = static_cast<Index>(std::llround(t / setup.dt));
      if (k <= e.prediction.steps()) slices.push_back(k);
    }
    const std::string stem = single ? "" : "." + name;
    for (Index c = 0; c < cfg.components(); ++c) {
      const std::string comp = ".u" + std::to_string(c + 1);
      write_text(with_suffix(out, stem + comp + ".prediction.csv"), trajectory_csv(e.prediction, setup.grid, c, slices));
      write_text(with_suffix(out, stem + comp + ".reference.csv"), trajectory_csv(e.reference, setup.grid, c, slices));
    }
    ojson item;
    item["ic"] = name;
    item["report"] = report.string();
    item["final_rel_l2"] = e.report.rel_l2.empty() ? 0.0 : e.report.rel_l2.back();
    if (e.report.blow_up_step) item["blow_up_step"] = *e.report.blow_up_step;
    else item["blow_up_step"] = nullptr;
    summary.push_back(item);
  }
  std::cout << summary.dump() << '\n';
  return kOk;
}

int cmd_inspect(const Options& o) {
  const auto bytes = read_file_bytes(o.path);
  if (bytes.size() < 4) throw FormatError(FormatErrorKind::Truncated, "file too short for a magic tag");
  const std::string magic(bytes.begin(), bytes.begin() + 4);
  ojson j;
  if (magic == "NTDF") {
    const NtdfHeader h = read_ntdf_header(bytes);
    j["format"] = "NTDF";
    j["version"] = h.version;
    j["d"] = h.dim;
    j["N"] = h.nodes;
    j["L"] = h.components;
    j["n_L"] = h.steps;
    j["dt"] = h.dt;
    j["M"] = h.sequences;
    j["bytes"] = bytes.size();
  } else if (magic == "NPMC") {
    const NpmcHeader h = read_npmc_header(bytes);
    const Checkpoint ck = decode_checkpoint(bytes);
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(model_hash(ck.params)));
    j["format"] = "NPMC";
    j["version"] = h.version;
    j["N"] = h.dims.input;
    j["n_w"] = h.dims.width;
    j["n_d"] = h.dims.depth;
    j["J"] = h.dims.thickness;
    j["n_a"] = h.dims.assembly_depth;
    j["lift"] = h.dims.lift == LiftKind::Identity ? "identity" : "affine";
    j["parameters"] = h.parameters;
    j["init_seed"] = ck.params.init_seed;
    j["epochs"] = ck.history.epochs();
    if (ck.adam) j["adam_step"] = ck.adam->step;
    else j["adam_step"] = nullptr;
    j["model_hash"] = hash;
  } else {
    throw FormatError(FormatErrorKind::BadMagic, "unknown magic tag");
  }
  std::cout << j.dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nodalflow: learn PDE flow maps in nodal space"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--threads", o.threads, "worker threads (default: NODALFLOW_THREADS or 1)")->check(CLI::PositiveNumber);
  };
  auto add_seed = [&](CLI::App* cmd) { cmd->add_option("--seed", seed, "seed override"); };

  auto* gen = app.add_subcommand("generate", "synthesize a trajectory dataset (NTDF)");
  gen->add_option("--config", o.config, "experiment config")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", o.out, "output NTDF path");
  gen->add_flag("--dry-run", o.dry_run, "validate the config only");
  add_seed(gen);
  add_common(gen);

  auto* tr = app.add_subcommand("train", "train a model on a dataset (NPMC)");
  tr->add_option("--config", o.config, "experiment config")->required()->check(CLI::ExistingFile);
  tr->add_option("--data", o.data, "NTDF dataset")->check(CLI::ExistingFile);
  tr->add_option("--out", o.out, "output checkpoint");
  tr->add_option("--resume", o.resume, "checkpoint to continue from")->check(CLI::ExistingFile);
  tr->add_option("--history", o.history, "history CSV path (default: <out>.history.csv)");
  tr->add_flag("--dry-run", o.dry_run, "validate the config only");
  add_seed(tr);
  add_common(tr);

  auto* pr = app.add_subcommand("predict", "roll a model out from an initial condition");
  pr->add_option("--config", o.config, "experiment config (grid and dt)")->required()->check(CLI::ExistingFile);
  pr->add_option("--model", o.model, "NPMC checkpoint")->required()->check(CLI::ExistingFile);
  pr->add_option("--ic", o.ic, "named initial condition or CSV of nodal values")->required();
  pr->add_option("--steps", o.steps, "number of model steps")->required();
  pr->add_option("--out", o.out, "output CSV")->required();
  add_common(pr);

  auto* ev = app.add_subcommand("evaluate", "compare a model rollout against the reference solver");
  ev->add_option("--config", o.config, "experiment config")->required()->check(CLI::ExistingFile);
  ev->add_option("--model", o.model, "NPMC checkpoint")->check(CLI::ExistingFile);
  ev->add_option("--out", o.out, "report JSON path")->required();
  ev->add_flag("--self-test", o.self_test, "use the reference solver as the model");
  add_common(ev);

  auto* in = app.add_subcommand("inspect", "print an NTDF or NPMC header");
  in->add_option("path", o.path, "file to inspect")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(kUsage, "usage", e.what());
  }
  for (auto* cmd : {gen, tr}) {
    if (cmd->parsed() && cmd->count("--seed") > 0) o.seed = seed;
  }

  try {
    if (gen->parsed()) return cmd_generate(o);
    if (tr->parsed()) return cmd_train(o);
    if (pr->parsed()) return cmd_predict(o);
    if (ev->parsed()) return cmd_evaluate(o);
    return cmd_inspect(o);
  } catch (const CommandError& e) {
    return report_error(e.code, e.kind, e.what());
  } catch (const ConfigError& e) {
    return report_error(kUsage, "config", e.what());
  } catch (const FormatError& e) {
    return report_error(kFormat, to_string(e.kind()), e.what());
  } catch (const std::invalid_argument& e) {
    return report_error(kDimension, "invalid_argument", e.what());
  } catch (const std::exception& e) {
    return report_error(kFailure, "failure", e.what());
  }
}
