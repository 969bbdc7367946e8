// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include "experiment.hpp"

#include "nodalflow/io.hpp"
#include "nodalflow/spectral.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace nodalflow;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void run(int id, const std::string& title, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str(), s);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Vector random_vector(Rng& rng, Index n, double scale = 1.0) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.uniform(-scale, scale);
  return v;
}

NetworkParams random_params(const NetworkDims& dims, Rng& rng, double scale) {
  NetworkParams p = NetworkParams::zeros(dims);
  p.unflatten(random_vector(rng, p.parameter_count(), scale));
  return p;
}

Permutation random_permutation(Rng& rng, std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return Permutation(std::move(idx));
}

double rel(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

Vector on_uniform(Index n, const std::function<double(double)>& f) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = f(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
  return v;
}

std::vector<TrajectorySequence> random_sequences(Rng& rng, Index n, Index steps, std::size_t m) {
  std::vector<TrajectorySequence> out(m);
  for (auto& s : out) {
    s.dt = 0.1;
    for (Index k = 0; k <= steps; ++k) s.states.push_back(NodalState::scalar(random_vector(rng, n), 0.1 * static_cast<double>(k)));
  }
  return out;
}

std::vector<const TrajectorySequence*> pointers(const std::vector<TrajectorySequence>& seqs) {
  std::vector<const TrajectorySequence*> p;
  for (const auto& s : seqs) p.push_back(&s);
  return p;
}

Outcome gradient_correctness() {
  Rng rng(20240901);
  double worst = 0.0;
  int cases = 0;
  for (Index n : {4, 16}) {
    for (Index j : {1, 3}) {
      for (Index n_l : {1, 3}) {
        for (int rep = 0; rep < 6; ++rep, ++cases) {
          const NetworkDims dims = NetworkDims::standard(n, n, static_cast<Index>(1 + rng.below(2)), j,
                                                         static_cast<Index>(1 + rng.below(2)));
          const NetworkParams p = random_params(dims, rng, 0.5);
          const auto seqs = random_sequences(rng, n, n_l, 2 + rng.below(3));
          const auto ptrs = pointers(seqs);
          const Vector g = loss_gradient(p, ptrs, n_l).gradient;
          auto f = [&](const Vector& theta) {
            NetworkParams q = p;
            q.unflatten(theta);
            return recurrent_loss(q, ptrs, n_l);
          };
          worst = std::max(worst, ad::grad_check(f, g, p.flatten(), 1e-6));
        }
      }
    }
  }
  return {cases >= 20 && worst < 1e-6, fmt("%.0f cases, max error %.2e (bound 1e-6)", cases, worst)};
}

Outcome permutation_equivariance() {
  Rng rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = static_cast<Index>(2 + rng.below(40));
    const NetworkDims d = NetworkDims::standard(n, n, static_cast<Index>(1 + rng.below(3)),
                                                static_cast<Index>(1 + rng.below(5)), static_cast<Index>(1 + rng.below(2)));
    const NetworkParams p = random_params(d, rng, 0.4);
    const Permutation perm = random_permutation(rng, static_cast<std::size_t>(n));
    const Vector w = random_vector(rng, n);
    const Vector lhs = model_apply(conjugate_params_by_permutation(p, perm), apply_permutation(w, perm));
    worst = std::max(worst, rel(lhs, apply_permutation(model_apply(p, w), perm)));
  }
  double worst_roll = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const NetworkParams p = random_params(NetworkDims::standard(24, 24, 1, 3, 1), rng, 0.3);
    const Permutation perm = random_permutation(rng, 24);
    const NodalState ic = NodalState::scalar(random_vector(rng, 24));
    const Prediction a = predict(p, ic, 20, 0.1);
    const Prediction b = predict(conjugate_params_by_permutation(p, perm), apply_permutation(ic, perm), 20, 0.1);
    if (a.sequence.states.size() != 21 || b.sequence.states.size() != 21) return {false, "rollout stopped early"};
    worst_roll = std::max(worst_roll, rel(b.sequence.states[20].values, apply_permutation(a.sequence.states[20], perm).values));
  }
  return {worst < 1e-12 && worst_roll < 1e-10,
          fmt("forward max rel %.2e (1e-12), 20-step rollout max rel %.2e (1e-10)", worst, worst_roll)};
}

Outcome identity_and_loss() {
  Rng rng(5);
  bool identity = true;
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = static_cast<Index>(2 + rng.below(30));
    const Vector w = random_vector(rng, n, 5.0);
    const Vector out = model_apply(NetworkParams::zeros(NetworkDims::standard(n, n, 2, 3, 2)), w);
    for (Index i = 0; i < n; ++i) identity = identity && std::bit_cast<std::uint64_t>(out[i]) == std::bit_cast<std::uint64_t>(w[i]);
  }
  bool exact = true;
  for (int trial = 0; trial < 20; ++trial) {
    const NetworkParams p = random_params(NetworkDims::standard(10, 10, 1, 3, 1), rng, 0.5);
    const auto seqs = random_sequences(rng, 10, 2, 1 + rng.below(6));
    const auto ptrs = pointers(seqs);
    const double mse = mse_one_step(p, ptrs);
    exact = exact && std::bit_cast<std::uint64_t>(recurrent_loss(p, ptrs, 1)) == std::bit_cast<std::uint64_t>(mse) &&
            std::bit_cast<std::uint64_t>(loss_gradient(p, ptrs, 1).loss) == std::bit_cast<std::uint64_t>(mse);
  }
  return {identity && exact, std::string("zero model identity ") + (identity ? "exact" : "BROKEN") +
                                 ", n_L=1 loss vs MSE " + (exact ? "bit-exact" : "DIFFER")};
}

template <typename Step>
Vector march(Vector u, double t_end, double dt, Step&& step) {
  const auto n = static_cast<int>(std::llround(t_end / dt));
  for (int k = 0; k < n; ++k) u = step(u, dt);
  return u;
}

double observed_order(const Vector& coarse, const Vector& mid, const Vector& fine) {
  return std::log2((coarse - mid).norm() / (mid - fine).norm());
}

Outcome oracle_orders() {
  const Vector u0 = on_uniform(32, [](double x) { return std::exp(-std::sin(x) * std::sin(x)) - 0.5; });
  const auto spec = AdvectionDiffusion1D::table1();
  auto cn = [&](double dt) {
    const CrankNicolsonAdvDiff stepper(spec, 32, kTwoPi, dt);
    return march(u0, 1.0, dt, [&](const Vector& u, double) { return Vector(stepper.step(u)); });
  };
  const double p_cn = observed_order(cn(0.1), cn(0.05), cn(0.025));

  const SpectralOperator1D op(32);
  const Vector s0 = on_uniform(32, [](double x) { return std::sin(x); });
  auto rk = [&](double dt) {
    return march(s0, 0.4, dt, [&](const Vector& u, double h) { return viscous_burgers_rk4(op, u, 0.1, h); });
  };
  const double p_rk = observed_order(rk(0.02), rk(0.01), rk(0.005));

  // Band-limited data: sum of modes below Nyquist with analytic derivatives.
  const Vector f = on_uniform(32, [](double x) { return std::sin(3 * x) + 0.5 * std::cos(7 * x) + 0.25; });
  const Vector df = on_uniform(32, [](double x) { return 3 * std::cos(3 * x) - 3.5 * std::sin(7 * x); });
  const Vector d2f = on_uniform(32, [](double x) { return -9 * std::sin(3 * x) - 24.5 * std::cos(7 * x); });
  const double e_d1 = (op.derivative(f, 1) - df).cwiseAbs().maxCoeff();
  const double e_d2 = (op.derivative(f, 2) - d2f).cwiseAbs().maxCoeff();

  const GridSet g = make_uniform_periodic_grid(32, kTwoPi);
  double e_fourth = 0.0;
  for (int n : {1, 2, 5, 9}) {
    const NodalState m = NodalState::scalar(on_uniform(32, [n](double x) { return std::cos(n * x); }));
    const double factor = std::exp(-0.01 * std::pow(n, 4) * 0.01);
    e_fourth = std::max(e_fourth, (fourth_order_exact_step(m, g, 0.01, 0.01).values - factor * m.values).cwiseAbs().maxCoeff());
  }

  const NodalState sin0 = NodalState::scalar(on_uniform(32, [](double x) { return std::sin(x); }));
  const NodalState zero = NodalState::scalar(Vector::Zero(32));
  double e_wave = 0.0;
  for (double t : {0.3, 1.0, 2.0, 5.0}) {
    const auto [u1, u2] = wave_system_exact(sin0, zero, g, t);
    e_wave = std::max(e_wave, (u1.values - on_uniform(32, [t](double x) { return std::sin(x) * std::cos(t); })).cwiseAbs().maxCoeff());
    e_wave = std::max(e_wave, (u2.values - on_uniform(32, [t](double x) { return std::cos(x) * std::sin(t); })).cwiseAbs().maxCoeff());
  }
  const bool ok = p_cn >= 1.8 && p_cn <= 2.2 && p_rk >= 3.7 && p_rk <= 4.3 && e_d1 < 1e-12 && e_d2 < 1e-12 &&
                  e_fourth < 1e-12 && e_wave < 1e-12;
  std::string d = fmt("CN order %.3f, RK4 order %.3f, ", p_cn, p_rk);
  d += fmt("spectral d1/d2 err %.1e/%.1e, ", e_d1, e_d2);
  d += fmt("4th-order decay err %.1e, wave err %.1e", e_fourth, e_wave);
  return {ok, d};
}

std::string preset(const std::string& name) { return std::string(NODALFLOW_PRESET_DIR) + "/" + name + ".json"; }

struct DeskResult {
  ErrorReport report;
  double final_loss = 0.0;
  double first_loss = 0.0;
};

DeskResult desk_run(const std::string& name) {
  const cli::ExperimentConfig cfg = cli::ExperimentConfig::load(preset(name));
  const TrajectoryDataset ds = generate_dataset(cfg.pde, cfg.make_sampler(), cfg.make_grid(), cfg.dataset.m,
                                                cfg.dataset.n_l, cfg.dataset.dt, cfg.dataset.seed,
                                                GenerateOptions{cfg.grid.solve, 1});
  const TrainResult r = train(ds, init_params(cfg.dims(), cfg.network.init_seed), cfg.training);
  DeskResult out;
  out.report = evaluate_against_reference(r.params, cfg.evaluation_setup(cfg.evaluation.ics.at(0))).report;
  out.first_loss = r.history.loss.front();
  out.final_loss = r.history.loss.back();
  return out;
}

Outcome desk_scalar(const std::string& name, double bound) {
  const DeskResult r = desk_run(name);
  if (r.report.blow_up_step) return {false, fmt("rollout blew up at step %.0f", static_cast<double>(*r.report.blow_up_step))};
  const double e = r.report.rel_l2.back();
  return {e < bound && r.report.times.back() > 2.0 - 1e-9,
          fmt("rel L2 at t=%.2f is %.4f (bound %.2f); ", r.report.times.back(), e, bound) +
              fmt("loss %.3e -> %.3e", r.first_loss, r.final_loss)};
}

Outcome desk_wave() {
  const DeskResult r = desk_run("wave_system_desk");
  if (r.report.blow_up_step) return {false, fmt("rollout blew up at step %.0f", static_cast<double>(*r.report.blow_up_step))};
  const double e1 = r.report.rel_l2_components.at(0).back();
  const double e2 = r.report.rel_l2_components.at(1).back();
  return {e1 < 0.1 && e2 < 0.1 && r.report.times.back() > 2.0 - 1e-9,
          fmt("rel L2 at t=2: u1 %.4f, u2 %.4f (bound 0.10); ", e1, e2) + fmt("loss %.3e -> %.3e", r.first_loss, r.final_loss)};
}

Outcome conservation_and_shock() {
  const Index n = 256;
  const GridSet g = make_uniform_periodic_grid(n, kTwoPi);
  Rng rng(8);
  const FourierSeries f = draw_fourier_series(FourierCoeffSpec::burgers(), rng);
  NodalState u = NodalState::scalar(on_uniform(n, f));
  double drift = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double before = u.values.mean();
    u = inviscid_burgers_step(u, g, 0.005);
    drift = std::max(drift, std::abs(u.values.mean() - before));
  }
  const double h = kTwoPi / static_cast<double>(n);
  auto max_grad = [&](const Vector& v) {
    double m = 0.0;
    for (Index i = 0; i < n; ++i) m = std::max(m, std::abs(v[(i + 1) % n] - v[i]) / h);
    return m;
  };
  NodalState s = NodalState::scalar(on_uniform(n, [](double x) { return std::sin(x); }));
  const double g0 = max_grad(s.values);
  double t_steep = -1.0;
  for (int k = 1; k <= 400 && t_steep < 0.0; ++k) {
    s = inviscid_burgers_step(s, g, 0.005);
    if (max_grad(s.values) > 10.0 * g0) t_steep = 0.005 * k;
  }
  return {drift < 1e-13 && t_steep > 0.0 && t_steep <= 2.0,
          fmt("max mean drift per step %.1e (1e-13); |grad| > 10x initial at t=%.2f (<= 2)", drift, t_steep)};
}

std::vector<std::uint8_t> read_hex(const std::string& name) {
  std::ifstream in(std::string(NODALFLOW_GOLDEN_DIR) + "/" + name);
  if (!in) throw std::runtime_error("missing golden file " + name);
  std::string text;
  in >> text;
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i + 1 < text.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(std::stoul(text.substr(i, 2), nullptr, 16)));
  }
  return out;
}

Outcome serialization() {
  // Golden NTDF: two nodes, one trajectory of two states.
  TrajectoryDataset tiny;
  tiny.grid = make_uniform_periodic_grid(2, kTwoPi);
  tiny.steps = 1;
  tiny.dt = 0.5;
  tiny.layout = {2, 1};
  TrajectorySequence seq;
  seq.dt = 0.5;
  seq.states = {NodalState::scalar((Vector(2) << 1.0, 2.0).finished(), 0.0),
                NodalState::scalar((Vector(2) << 3.0, 4.0).finished(), 0.5)};
  tiny.sequences.push_back(seq);
  const bool ntdf_golden = encode_dataset(tiny) == read_hex("ntdf_minimal.hex");

  NetworkParams small = NetworkParams::zeros(NetworkDims::standard(2, 2, 1, 1, 1));
  small.assembly.back().bias[0] = 0.25;
  const auto npmc = encode_checkpoint(Checkpoint{small, {}, std::nullopt});
  const auto golden = read_hex("npmc_2x2_header.hex");
  const bool npmc_golden = npmc.size() > golden.size() && std::equal(golden.begin(), golden.end(), npmc.begin());

  Rng rng(9);
  bool round_trip = true;
  for (int trial = 0; trial < 5; ++trial) {
    TrajectoryDataset ds;
    const auto n = static_cast<Index>(4 + rng.below(20));
    const auto comps = static_cast<Index>(1 + rng.below(2));
    ds.grid = perturb_and_permute_grid(make_uniform_periodic_grid(n, kTwoPi), 0.25, rng.next_u64());
    ds.steps = static_cast<Index>(1 + rng.below(4));
    ds.dt = 0.01;
    ds.layout = {n, comps};
    for (int j = 0; j < 3; ++j) {
      TrajectorySequence s;
      s.dt = ds.dt;
      for (Index k = 0; k <= ds.steps; ++k) s.states.emplace_back(random_vector(rng, n * comps, 3.0), 0.01 * static_cast<double>(k), ds.layout);
      ds.sequences.push_back(s);
    }
    const auto bytes = encode_dataset(ds);
    round_trip = round_trip && encode_dataset(decode_dataset(bytes)) == bytes;

    const NetworkParams p = random_params(NetworkDims::standard(n, n, 2, 3, 2), rng, 1.0);
    TrainHistory h;
    h.loss = {rng.uniform(), rng.uniform()};
    h.lr = {1e-3, 5e-4};
    h.config = "{}";
    AdamState a{random_vector(rng, p.parameter_count()), random_vector(rng, p.parameter_count()), 17};
    const auto cbytes = encode_checkpoint(Checkpoint{p, h, a});
    const Checkpoint back = decode_checkpoint(cbytes);
    round_trip = round_trip && encode_checkpoint(back) == cbytes && back.params == p && back.adam && *back.adam == a;
  }
  return {ntdf_golden && npmc_golden && round_trip, std::string("NTDF golden ") + (ntdf_golden ? "match" : "MISMATCH") +
                                                        ", NPMC golden " + (npmc_golden ? "match" : "MISMATCH") +
                                                        ", round trips " + (round_trip ? "bit-exact" : "DIFFER")};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome pipeline_determinism() {
  const std::filesystem::path root = std::filesystem::temp_directory_path() / "nodalflow_acceptance";
  std::filesystem::remove_all(root);
  const std::string cli = NODALFLOW_CLI;
  const std::string config = NODALFLOW_PIPELINE_CONFIG;
  std::vector<std::string> bytes[2];
  for (int r = 0; r < 2; ++r) {
    const std::filesystem::path dir = root / ("run" + std::to_string(r));
    std::filesystem::create_directories(dir);
    const std::string d = (dir / "data.ntdf").string(), m = (dir / "model.npmc").string(), j = (dir / "report.json").string();
    const std::string quiet = " > " + (dir / "log.txt").string() + " 2>&1";
    const std::vector<std::string> cmds = {
        cli + " generate --config " + config + " --out " + d + quiet,
        cli + " train --config " + config + " --data " + d + " --out " + m + quiet,
        cli + " evaluate --config " + config + " --model " + m + " --out " + j + quiet,
    };
    for (const auto& c : cmds) {
      if (std::system(c.c_str()) != 0) return {false, "command failed: " + c};
    }
    bytes[r] = {slurp(d), slurp(m), slurp(j)};
  }
  const char* names[] = {"NTDF", "NPMC", "report"};
  std::string detail;
  bool same = true;
  for (int i = 0; i < 3; ++i) {
    const bool eq = !bytes[0][static_cast<std::size_t>(i)].empty() && bytes[0][static_cast<std::size_t>(i)] == bytes[1][static_cast<std::size_t>(i)];
    same = same && eq;
    detail += std::string(i ? ", " : "") + names[i] + (eq ? " identical" : " DIFFER") + " (" +
              std::to_string(bytes[0][static_cast<std::size_t>(i)].size()) + " bytes)";
  }
  std::filesystem::remove_all(root);
  return {same, detail};
}

}  // namespace

int main() {
  run(1, "gradient vs central differences", gradient_correctness);
  run(2, "permutation equivariance", permutation_equivariance);
  run(3, "ResNet identity and loss consistency", identity_and_loss);
  run(4, "oracle solver orders", oracle_orders);
  run(5, "desk advection-diffusion", [] { return desk_scalar("advdiff_desk", 0.05); });
  run(6, "desk mesh-freedom", [] { return desk_scalar("advdiff_perturbed_desk", 0.08); });
  run(7, "desk wave system", desk_wave);
  run(8, "conservation and shock formation", conservation_and_shock);
  run(9, "serialization", serialization);
  run(10, "pipeline determinism", pipeline_determinism);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
