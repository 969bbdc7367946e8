#include "experiment.hpp"

#include "nodalflow/sampling.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace nodalflow::cli {

using nlohmann::json;

namespace {

// Strict view of one JSON object: every key must be consumed before finish().
class Fields {
public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& raw(const std::string& key) const {
    if (!j_.contains(key)) throw ConfigError(at(key), "missing required key");
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(at(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(at(key), "expected a finite number");
    return d;
  }
  double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  std::uint64_t count(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      throw ConfigError(at(key), "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }
  std::uint64_t count(const std::string& key, std::uint64_t fallback) const { return has(key) ? count(key) : fallback; }

  Index index(const std::string& key) const { return static_cast<Index>(count(key)); }
  Index index(const std::string& key, Index fallback) const { return has(key) ? index(key) : fallback; }

  std::string text(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(at(key), "expected a string");
    return v.get<std::string>();
  }
  std::string text(const std::string& key, const std::string& fallback) const {
    return has(key) ? text(key) : fallback;
  }

  std::vector<double> numbers(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(at(key), "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(at(key), "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  Fields object(const std::string& key) const { return Fields(raw(key), at(key)); }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(at(key), "unknown key");
    }
  }

  const std::string& path() const { return path_; }

private:
  const json& j_;
  std::string path_;
  mutable std::set<std::string> seen_;
};

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", path.string() + ": " + e.what());
  }
}

FourierSeries parse_series(const Fields& f) {
  FourierSeries s;
  s.a0 = f.number("a0", 0.0);
  if (f.has("a")) s.a = f.numbers("a");
  if (f.has("b")) s.b = f.numbers("b");
  if (s.a.size() != s.b.size()) throw ConfigError(f.path(), "a and b must have the same length");
  const double scale = f.number("scale", 1.0);
  for (auto& v : s.a) v *= scale;
  for (auto& v : s.b) v *= scale;
  f.finish();
  return s;
}

AdvectionDiffusion1D parse_coefficients(const Fields& f) {
  AdvectionDiffusion1D s;
  s.alpha = parse_series(f.object("alpha"));
  s.kappa = parse_series(f.object("kappa"));
  return s;
}

PdeSpec parse_pde(const Fields& f, const std::filesystem::path& base_dir) {
  const std::string type = f.text("type");
  PdeSpec spec;
  if (type == "advection_diffusion_1d") {
    if (f.has("fragment")) {
      if (f.has("alpha") || f.has("kappa")) throw ConfigError(f.at("fragment"), "use either a fragment or inline coefficients");
      const std::filesystem::path frag = base_dir / f.text("fragment");
      const json j = read_json_file(frag);
      const Fields ff(j, frag.filename().string());
      spec = parse_coefficients(ff);
      ff.finish();
    } else {
      spec = parse_coefficients(f);
    }
  } else if (type == "fourth_order") {
    spec = FourthOrder{f.number("c", 1e-2)};
  } else if (type == "viscous_burgers") {
    spec = ViscousBurgers{f.number("nu", 0.1)};
  } else if (type == "inviscid_burgers") {
    spec = InviscidBurgers{f.number("cfl", 0.4)};
  } else if (type == "wave_system") {
    spec = WaveSystem{};
  } else if (type == "advection_diffusion_2d") {
    AdvDiff2D s;
    s.kappa = f.number("kappa", s.kappa);
    s.velocity_scale = f.number("velocity_scale", s.velocity_scale);
    s.fine_nodes = static_cast<int>(f.count("fine_nodes", static_cast<std::uint64_t>(s.fine_nodes)));
    s.max_dt = f.number("max_dt", s.max_dt);
    spec = s;
  } else if (type == "integro_differential") {
    IntegroDiffDemo s;
    s.nu = f.number("nu", s.nu);
    s.gamma = f.number("gamma", s.gamma);
    spec = s;
  } else {
    throw ConfigError(f.at("type"), "unknown pde type '" + type + "'");
  }
  f.finish();
  try {
    validate(spec);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(f.path(), e.what());
  }
  return spec;
}

GridConfig parse_grid(const Fields& f) {
  GridConfig g;
  g.type = f.text("type");
  if (g.type == "uniform" || g.type == "perturbed") {
    g.nodes = f.index("nodes");
    if (g.nodes < 2) throw ConfigError(f.at("nodes"), "need at least 2 nodes");
    if (g.type == "perturbed") {
      g.fraction = f.number("fraction", 0.25);
      if (!(g.fraction >= 0.0) || g.fraction >= 0.5) throw ConfigError(f.at("fraction"), "must lie in [0, 0.5)");
      g.seed = f.count("seed");
    }
  } else if (g.type == "unstructured_2d") {
    g.seed = f.count("seed");
  } else {
    throw ConfigError(f.at("type"), "unknown grid type '" + g.type + "'");
  }
  g.solve.solver_nodes = f.index("solver_nodes", g.solve.solver_nodes);
  f.finish();
  return g;
}

SymmetricBound parse_bound(const Fields& f) {
  SymmetricBound b;
  b.scale = f.number("scale", 1.0);
  b.power = f.number("power", 0.0);
  f.finish();
  return b;
}

IcSampler build_sampler(const json& j, const std::string& path, Index components, int dim, std::uint64_t total) {
  const Fields f(j, path);
  const std::string type = f.text("type");
  IcSampler out;
  if (type == "fourier") {
    if (dim != 1) throw ConfigError(f.at("type"), "fourier sampler needs a 1D problem");
    FourierCoeffSpec s;
    if (f.has("a0")) {
      const auto a0 = f.numbers("a0");
      if (a0.size() != 2) throw ConfigError(f.at("a0"), "expected [lower, upper]");
      s.a0_lower = a0[0];
      s.a0_upper = a0[1];
    }
    if (f.has("a")) s.a_bound = parse_bound(f.object("a"));
    if (f.has("b")) s.b_bound = parse_bound(f.object("b"));
    const auto modes = f.numbers("modes");
    if (modes.size() != 2) throw ConfigError(f.at("modes"), "expected [min, max]");
    s.modes_min = static_cast<int>(modes[0]);
    s.modes_max = static_cast<int>(modes[1]);
    try {
      s.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(path, e.what());
    }
    out = fourier_sampler(s, components);
  } else if (type == "piecewise_constant") {
    if (dim != 1 || components != 1) throw ConfigError(f.at("type"), "piecewise_constant needs a scalar 1D problem");
    out = piecewise_constant_sampler();
  } else if (type == "sine_2d") {
    if (dim != 2) throw ConfigError(f.at("type"), "sine_2d sampler needs a 2D problem");
    out = sine_2d_sampler(static_cast<int>(f.count("modes", 7)));
  } else if (type == "constant") {
    if (components != 1) throw ConfigError(f.at("type"), "constant sampler needs a scalar problem");
    out = constant_sampler(f.number("value"));
  } else if (type == "mixture") {
    const json& parts = f.raw("parts");
    if (!parts.is_array() || parts.empty()) throw ConfigError(f.at("parts"), "expected a non-empty array");
    std::vector<std::pair<double, IcSampler>> built;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const std::string at = f.at("parts") + "[" + std::to_string(i) + "]";
      const Fields p(parts[i], at);
      const double w = p.number("weight");
      built.emplace_back(w, build_sampler(p.raw("sampler"), p.at("sampler"), components, dim, total));
      p.finish();
    }
    try {
      out = mixture_sampler(std::move(built), total);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(path, e.what());
    }
  } else {
    throw ConfigError(f.at("type"), "unknown sampler type '" + type + "'");
  }
  f.finish();
  return out;
}

LrSchedule parse_schedule(const Fields& f) {
  const std::string type = f.text("type");
  LrSchedule out;
  if (type == "cyclic") {
    CyclicSchedule c;
    c.lr_max = f.number("lr_max", c.lr_max);
    c.lr_min = f.number("lr_min", c.lr_min);
    c.decay = f.number("decay", c.decay);
    c.period_steps = f.count("period_steps", c.period_steps);
    out = c;
  } else if (type == "constant") {
    out = ConstantSchedule{f.number("lr", 1e-3)};
  } else {
    throw ConfigError(f.at("type"), "unknown schedule type '" + type + "'");
  }
  f.finish();
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  const Fields top(j, "");
  ExperimentConfig c;
  c.name = top.text("name", "");
  c.description = top.text("description", "");
  c.pde = parse_pde(top.object("pde"), base_dir);
  c.grid = parse_grid(top.object("grid"));
  if ((pde_dimension(c.pde) == 2) != (c.grid.type == "unstructured_2d")) {
    throw ConfigError("grid.type", "grid dimension does not match the pde");
  }

  {
    const Fields d = top.object("dataset");
    c.dataset.m = d.count("M");
    c.dataset.n_l = d.index("n_L");
    c.dataset.dt = d.number("dt");
    c.dataset.seed = d.count("seed");
    d.finish();
    if (c.dataset.m < 1) throw ConfigError("dataset.M", "need at least one trajectory");
    if (c.dataset.n_l < 1) throw ConfigError("dataset.n_L", "need at least one step");
    if (!(c.dataset.dt > 0.0)) throw ConfigError("dataset.dt", "must be positive");
  }

  c.sampler = top.raw("sampler");
  build_sampler(c.sampler, "sampler", c.components(), pde_dimension(c.pde), c.dataset.m);

  {
    const Fields n = top.object("network");
    if (n.has("width")) c.network.width = n.index("width");
    c.network.depth = n.index("depth", c.network.depth);
    c.network.thickness = n.index("thickness", c.network.thickness);
    c.network.assembly_depth = n.index("assembly_depth", c.network.assembly_depth);
    c.network.init_seed = n.count("init_seed");
    n.finish();
    try {
      c.dims().validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("network", e.what());
    }
  }

  {
    const Fields t = top.object("training");
    TrainingConfig& tc = c.training;
    tc.epochs = t.count("epochs");
    tc.batch_size = t.index("batch_size", tc.batch_size);
    tc.n_l = t.index("n_L", c.dataset.n_l);
    if (t.has("schedule")) tc.schedule = parse_schedule(t.object("schedule"));
    if (t.has("adam")) {
      const Fields a = t.object("adam");
      tc.adam.beta1 = a.number("beta1", tc.adam.beta1);
      tc.adam.beta2 = a.number("beta2", tc.adam.beta2);
      tc.adam.eps = a.number("eps", tc.adam.eps);
      a.finish();
    }
    tc.shuffle_seed = t.count("shuffle_seed");
    tc.log_every = t.count("log_every", 0);
    tc.shards = static_cast<int>(t.count("shards", 1));
    t.finish();
    try {
      tc.validate(c.dataset.n_l, c.dataset.m);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("training", e.what());
    }
  }

  {
    const Fields e = top.object("evaluation");
    c.evaluation.horizon = e.number("T");
    if (!(c.evaluation.horizon > 0.0)) throw ConfigError("evaluation.T", "must be positive");
    const json& ics = e.raw("ics");
    if (!ics.is_array() || ics.empty()) throw ConfigError("evaluation.ics", "expected a non-empty array of names");
    for (const auto& name : ics) {
      if (!name.is_string()) throw ConfigError("evaluation.ics", "expected a non-empty array of names");
      c.evaluation.ics.push_back(name.get<std::string>());
      try {
        named_ic(c.evaluation.ics.back(), c.pde);
      } catch (const std::invalid_argument& err) {
        throw ConfigError("evaluation.ics", err.what());
      }
    }
    if (e.has("slice_times")) c.evaluation.slice_times = e.numbers("slice_times");
    if (e.has("train_horizon")) c.evaluation.train_horizon = e.number("train_horizon");
    e.finish();
    const double steps = c.evaluation.horizon / c.dataset.dt;
    if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps)) {
      throw ConfigError("evaluation.T", "must be a whole number of dataset steps");
    }
    for (double t : c.slice_times()) {
      const double k = t / c.dataset.dt;
      if (t < 0.0 || t > c.evaluation.horizon || std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, k)) {
        throw ConfigError("evaluation.slice_times", "times must be whole steps within [0, T]");
      }
    }
  }
  top.finish();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return from_json(read_json_file(path), path.parent_path());
}

GridSet ExperimentConfig::make_grid() const {
  if (grid.type == "unstructured_2d") {
    Rng rng(grid.seed);
    return make_2d_unstructured_grid(rng);
  }
  const GridSet uniform = make_uniform_periodic_grid(grid.nodes, 2.0 * std::numbers::pi);
  if (grid.type == "perturbed") return perturb_and_permute_grid(uniform, grid.fraction, grid.seed);
  return uniform;
}

IcSampler ExperimentConfig::make_sampler() const {
  return build_sampler(sampler, "sampler", components(), pde_dimension(pde), dataset.m);
}

NetworkDims ExperimentConfig::dims() const {
  const Index nodes = grid.type == "unstructured_2d" ? make_grid().size() : grid.nodes;
  const Index input = nodes * components();
  return NetworkDims::standard(input, network.width.value_or(input), network.depth, network.thickness,
                               network.assembly_depth);
}

std::vector<double> ExperimentConfig::slice_times() const {
  if (!evaluation.slice_times.empty()) return evaluation.slice_times;
  const double t = evaluation.horizon;
  std::vector<double> out{0.0};
  // Quarter points rounded to whole steps.
  for (double f : {0.25, 0.5}) out.push_back(std::round(f * t / dataset.dt) * dataset.dt);
  out.push_back(t);
  return out;
}

EvaluationSetup ExperimentConfig::evaluation_setup(const std::string& ic) const {
  EvaluationSetup s;
  s.spec = pde;
  s.grid = make_grid();
  s.ic = named_ic(ic, pde);
  s.horizon = evaluation.horizon;
  s.dt = dataset.dt;
  s.train_horizon = evaluation.train_horizon.value_or(static_cast<double>(training.n_l) * dataset.dt);
  s.solve = grid.solve;
  return s;
}

std::vector<std::string> named_ics() { return {"exp_sin2", "sin", "exp_sin_exp_cos", "gaussian_2d"}; }

InitialCondition named_ic(const std::string& name, const PdeSpec& pde) {
  InitialCondition ic;
  ic.descriptor = name;
  const Index comps = pde_components(pde);
  const int dim = pde_dimension(pde);
  if (name == "exp_sin2" && dim == 1 && comps == 1) {
    ic.components = {[](double x) { return std::exp(-std::sin(x) * std::sin(x)) - 0.5; }};
  } else if (name == "sin" && dim == 1 && comps == 1) {
    ic.components = {[](double x) { return std::sin(x); }};
  } else if (name == "exp_sin_exp_cos" && dim == 1 && comps == 2) {
    ic.components = {[](double x) { return std::exp(std::sin(x)); }, [](double x) { return std::exp(std::cos(x)); }};
  } else if (name == "gaussian_2d" && dim == 2) {
    ic.field2d = Gaussian2D{};
  } else {
    throw std::invalid_argument("initial condition '" + name + "' is unknown or does not fit a " + pde_name(pde) +
                                " problem");
  }
  return ic;
}

NodalState read_ic_csv(const std::filesystem::path& path, Index nodes, Index components) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;  // header
      }
      throw std::invalid_argument("non-numeric value in " + path.string());
    }
    first = false;
    if (static_cast<Index>(row.size()) != components) {
      throw std::invalid_argument("dimension error: expected " + std::to_string(components) + " column(s) per row");
    }
    rows.push_back(std::move(row));
  }
  if (static_cast<Index>(rows.size()) != nodes) {
    throw std::invalid_argument("dimension error: expected " + std::to_string(nodes) + " nodes, got " +
                                std::to_string(rows.size()));
  }
  Vector v(nodes * components);
  for (Index c = 0; c < components; ++c) {
    for (Index i = 0; i < nodes; ++i) v[c * nodes + i] = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
  }
  return NodalState(std::move(v), 0.0, StateLayout{nodes, components});
}

}  // namespace nodalflow::cli
