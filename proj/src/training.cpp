#include "nodalflow/training.hpp"

#include "nodalflow/rng.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

namespace nodalflow {

namespace {

Matrix gather_states(Batch batch, Index n) {
  const Index rows = batch.front()->states.at(static_cast<std::size_t>(n)).values.size();
  Matrix out(rows, static_cast<Index>(batch.size()));
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const auto& v = batch[j]->states.at(static_cast<std::size_t>(n)).values;
    if (v.size() != rows) throw std::invalid_argument("batch states have different lengths");
    out.col(static_cast<Index>(j)) = v;
  }
  return out;
}

void check_batch(Batch batch, Index n_l) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  if (n_l < 1) throw std::invalid_argument("n_L must be >= 1");
  for (const auto* seq : batch) {
    if (seq->steps() < n_l) throw std::invalid_argument("sequence shorter than n_L + 1 states");
  }
}

}  // namespace

void TrainingConfig::validate(Index dataset_steps, std::uint64_t trajectories) const {
  if (n_l < 1 || n_l > dataset_steps) throw std::invalid_argument("training n_L must be in [1, dataset n_L]");
  if (batch_size < 1 || static_cast<std::uint64_t>(batch_size) > trajectories) {
    throw std::invalid_argument("batch_size must be in [1, M]");
  }
  if (shards < 1 || shards > batch_size) throw std::invalid_argument("shards must be in [1, batch_size]");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  if (adam.beta1 < 0.0 || adam.beta1 >= 1.0 || adam.beta2 < 0.0 || adam.beta2 >= 1.0 || !(adam.eps > 0.0)) {
    throw std::invalid_argument("Adam constants out of range");
  }
  if (const auto* c = std::get_if<CyclicSchedule>(&schedule)) {
    if (!(c->lr_min > 0.0) || c->lr_min > c->lr_max) throw std::invalid_argument("need 0 < lr_min <= lr_max");
    if (!(c->decay > 0.0) || c->decay > 1.0) throw std::invalid_argument("decay must be in (0, 1]");
    if (c->period_steps < 2) throw std::invalid_argument("cycle period must be >= 2 steps");
  } else if (!(std::get<ConstantSchedule>(schedule).lr > 0.0)) {
    throw std::invalid_argument("learning rate must be positive");
  }
}

std::string TrainingConfig::to_json() const {
  nlohmann::json j;
  j["n_L"] = n_l;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  if (const auto* c = std::get_if<CyclicSchedule>(&schedule)) {
    j["schedule"] = {{"kind", "cyclic"}, {"lr_max", c->lr_max}, {"lr_min", c->lr_min}, {"decay", c->decay},
                     {"period_steps", c->period_steps}};
  } else {
    j["schedule"] = {{"kind", "constant"}, {"lr", std::get<ConstantSchedule>(schedule).lr}};
  }
  j["adam"] = {{"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}};
  j["shuffle_seed"] = shuffle_seed;
  j["shards"] = shards;
  return j.dump();
}

ad::Node recurrent_loss(const NetworkParams& params, const TapeParams& nodes, Batch batch, Index n_l, ad::Tape& tape,
                        double inverse_batch) {
  check_batch(batch, n_l);
  ad::Node x = tape.constant(gather_states(batch, 0));
  ad::Node total{};
  for (Index n = 1; n <= n_l; ++n) {
    x = model_forward(params, nodes, x, tape);
    const ad::Node target = tape.constant(-gather_states(batch, n));
    const ad::Node term = tape.sum_of_squares(tape.add(x, target));
    total = n == 1 ? term : tape.add(total, term);
  }
  return tape.scale(total, inverse_batch);
}

double recurrent_loss(const NetworkParams& params, Batch batch, Index n_l) {
  check_batch(batch, n_l);
  Matrix x = gather_states(batch, 0);
  double total = 0.0;
  for (Index n = 1; n <= n_l; ++n) {
    x = model_apply(params, x);
    const Matrix diff = x + (-gather_states(batch, n));
    total = n == 1 ? diff.squaredNorm() : total + diff.squaredNorm();
  }
  return (1.0 / static_cast<double>(batch.size())) * total;
}

double mse_one_step(const NetworkParams& params, Batch batch) {
  check_batch(batch, 1);
  const Matrix pred = model_apply(params, gather_states(batch, 0));
  const Matrix diff = pred - gather_states(batch, 1);
  return (1.0 / static_cast<double>(batch.size())) * diff.squaredNorm();
}

LossAndGradient loss_gradient(const NetworkParams& params, Batch batch, Index n_l, int shards, int threads) {
  check_batch(batch, n_l);
  const auto b = static_cast<Index>(batch.size());
  shards = std::max(1, std::min<int>(shards, static_cast<int>(b)));
  const double inverse_batch = 1.0 / static_cast<double>(b);
  std::vector<LossAndGradient> parts(static_cast<std::size_t>(shards));
  auto run_shard = [&](int s) {
    const Index lo = b * s / shards, hi = b * (s + 1) / shards;
    ad::Tape tape;
    const TapeParams nodes = register_params(tape, params);
    const ad::Node loss = recurrent_loss(params, nodes, batch.subspan(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi - lo)),
                                         n_l, tape, inverse_batch);
    auto& out = parts[static_cast<std::size_t>(s)];
    out.loss = tape.value(loss)(0, 0);
    out.gradient = flatten_gradient(params, tape.backward(loss));
  };
  threads = std::max(1, std::min(threads, shards));
  if (threads == 1) {
    for (int s = 0; s < shards; ++s) run_shard(s);
  } else {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int s = w; s < shards; s += threads) run_shard(s);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  LossAndGradient total = std::move(parts[0]);
  for (std::size_t s = 1; s < parts.size(); ++s) {
    total.loss += parts[s].loss;
    total.gradient += parts[s].gradient;
  }
  return total;
}

double cyclic_lr(std::uint64_t step, const CyclicSchedule& schedule) {
  const double phase = static_cast<double>(step % schedule.period_steps) / static_cast<double>(schedule.period_steps);
  const double tri = std::abs(1.0 - 2.0 * phase);
  return schedule.lr_min +
         (schedule.lr_max - schedule.lr_min) * std::pow(schedule.decay, static_cast<double>(step)) * tri;
}

double learning_rate(std::uint64_t step, const LrSchedule& schedule) {
  if (const auto* c = std::get_if<CyclicSchedule>(&schedule)) return cyclic_lr(step, *c);
  return std::get<ConstantSchedule>(schedule).lr;
}

void adam_step(AdamState& state, Vector& params, const Eigen::Ref<const Vector>& grads, double lr,
               const AdamConfig& config) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("Adam: shapes do not match");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  state.m = config.beta1 * state.m + (1.0 - config.beta1) * grads;
  state.v = config.beta2 * state.v + (1.0 - config.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + config.eps);
}

TrainResult train(const TrajectoryDataset& dataset, TrainResult start, const TrainingConfig& config,
                  const EpochCallback& on_epoch) {
  const auto m = static_cast<std::uint64_t>(dataset.sequences.size());
  config.validate(dataset.steps, m);
  if (dataset.layout.size() != start.params.dims.input) {
    throw std::invalid_argument("dataset state length " + std::to_string(dataset.layout.size()) +
                                " does not match network input " + std::to_string(start.params.dims.input));
  }
  TrainResult state = std::move(start);
  Vector theta = state.params.flatten();
  if (state.adam.m.size() == 0 && state.adam.step == 0) state.adam = AdamState::zeros(theta.size());
  if (state.adam.m.size() != theta.size()) throw std::invalid_argument("Adam state does not match the parameters");
  state.history.config = config.to_json();
  if (state.history.lr.size() != state.history.loss.size()) throw std::invalid_argument("inconsistent history");
  state.history.seconds.resize(state.history.loss.size(), 0.0);

  const Rng shuffle_root(config.shuffle_seed);
  std::vector<const TrajectorySequence*> order(m);
  for (std::uint64_t epoch = state.history.epochs(); epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::uint64_t i = 0; i < m; ++i) order[i] = &dataset.sequences[i];
    Rng rng = shuffle_root.substream(epoch);
    for (std::uint64_t i = m; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double loss_sum = 0.0, lr = 0.0;
    std::uint64_t batches = 0;
    for (std::uint64_t lo = 0; lo < m; lo += static_cast<std::uint64_t>(config.batch_size)) {
      const std::uint64_t hi = std::min<std::uint64_t>(m, lo + static_cast<std::uint64_t>(config.batch_size));
      const Batch batch(order.data() + lo, hi - lo);
      lr = learning_rate(state.adam.step, config.schedule);
      LossAndGradient lg;
      try {
        lg = loss_gradient(state.params, batch, config.n_l, config.shards, config.threads);
      } catch (const std::domain_error& e) {
        throw TrainingDiverged(std::string("non-finite values during training: ") + e.what(), state, epoch, state.adam.step);
      }
      if (!std::isfinite(lg.loss) || !lg.gradient.allFinite()) {
        throw TrainingDiverged("non-finite loss during training", state, epoch, state.adam.step);
      }
      Vector next = theta;
      AdamState next_adam = state.adam;
      adam_step(next_adam, next, lg.gradient, lr, config.adam);
      if (!next.allFinite()) throw TrainingDiverged("non-finite parameters after update", state, epoch, state.adam.step);
      theta = std::move(next);
      state.adam = std::move(next_adam);
      state.params.unflatten(theta);
      loss_sum += lg.loss;
      ++batches;
    }
    const double mean = loss_sum / static_cast<double>(batches);
    state.history.loss.push_back(mean);
    state.history.lr.push_back(lr);
    state.history.seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    if (on_epoch && config.log_every > 0 && ((epoch + 1) % config.log_every == 0 || epoch + 1 == config.epochs)) {
      on_epoch(epoch, mean, lr);
    }
  }
  return state;
}

TrainResult train(const TrajectoryDataset& dataset, const NetworkParams& initial, const TrainingConfig& config,
                  const EpochCallback& on_epoch) {
  TrainResult start{initial, {}, AdamState::zeros(initial.parameter_count())};
  return train(dataset, std::move(start), config, on_epoch);
}

}  // namespace nodalflow
