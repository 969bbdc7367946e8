#ifndef NODALFLOW_TRAINING_HPP
#define NODALFLOW_TRAINING_HPP

#include "nodalflow/model.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>

namespace nodalflow {

struct CyclicSchedule {
  double lr_max = 1e-3;
  double lr_min = 1e-4;
  double decay = 0.99994;
  std::uint64_t period_steps = 2000;
};

struct ConstantSchedule {
  double lr = 1e-3;
};

using LrSchedule = std::variant<CyclicSchedule, ConstantSchedule>;

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainingConfig {
  Index n_l = 1;
  std::uint64_t epochs = 0;
  Index batch_size = 50;
  LrSchedule schedule = CyclicSchedule{};
  AdamConfig adam;
  std::uint64_t shuffle_seed = 0;
  std::uint64_t log_every = 0;  // epochs between progress callbacks; 0 = never
  int shards = 1;               // fixed-order batch shards, one tape each
  int threads = 1;              // workers evaluating shards

  void validate(Index dataset_steps, std::uint64_t trajectories) const;
  /// Deterministic JSON echo (no wall-clock).
  std::string to_json() const;
};

/// Sequences of length >= n_L + 1 used as one mini-batch.
using Batch = std::span<const TrajectorySequence* const>;

/// sum_{n=1..n_L} (1/B) sum_j |N^n(u_j(0)) - u_j(n dt)|^2 recorded on `tape`.
ad::Node recurrent_loss(const NetworkParams& params, const TapeParams& nodes, Batch batch, Index n_l, ad::Tape& tape,
                        double inverse_batch);
double recurrent_loss(const NetworkParams& params, Batch batch, Index n_l);
/// (1/B) sum_j |N(u_j(0)) - u_j(dt)|^2 without a tape.
double mse_one_step(const NetworkParams& params, Batch batch);

struct LossAndGradient {
  double loss = 0.0;
  Vector gradient;  // flatten() order
};

/// The batch is cut into `shards` contiguous pieces, each on its own tape;
/// losses and gradients are summed in shard order.
LossAndGradient loss_gradient(const NetworkParams& params, Batch batch, Index n_l, int shards = 1, int threads = 1);

double learning_rate(std::uint64_t step, const LrSchedule& schedule);
/// lr_min + (lr_max - lr_min) decay^step tri(step); tri is a triangle wave
/// with tri(0) = 1 and tri(period/2) = 0.
double cyclic_lr(std::uint64_t step, const CyclicSchedule& schedule);

/// One bias-corrected Adam update; increments state.step first.
void adam_step(AdamState& state, Vector& params, const Eigen::Ref<const Vector>& grads, double lr,
               const AdamConfig& config = {});

struct TrainResult {
  NetworkParams params;
  TrainHistory history;
  AdamState adam;
};

class TrainingDiverged : public std::runtime_error {
public:
  TrainingDiverged(const std::string& what, TrainResult last_finite, std::uint64_t epoch, std::uint64_t step)
      : std::runtime_error(what), last_finite(std::move(last_finite)), epoch(epoch), step(step) {}
  TrainResult last_finite;
  std::uint64_t epoch;
  std::uint64_t step;
};

using EpochCallback = std::function<void(std::uint64_t epoch, double loss, double lr)>;

/// Runs epochs history.epochs() .. config.epochs - 1 starting from `start`.
/// Each epoch shuffles with substream `epoch` of the shuffle seed, so a resumed
/// run matches an uninterrupted one bit for bit.
TrainResult train(const TrajectoryDataset& dataset, TrainResult start, const TrainingConfig& config,
                  const EpochCallback& on_epoch = {});
TrainResult train(const TrajectoryDataset& dataset, const NetworkParams& initial, const TrainingConfig& config,
                  const EpochCallback& on_epoch = {});

}  // namespace nodalflow

#endif
