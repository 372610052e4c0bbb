#ifndef PHVAE_TRAINER_HPP
#define PHVAE_TRAINER_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phvae/loss.hpp"
#include "phvae/model.hpp"

namespace phvae {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  PhVaeParams m;
  PhVaeParams v;
  std::int64_t t = 0;

  explicit AdamState(const PhVaeParams& like) : m(like.zeros_like()), v(like.zeros_like()) {}
};

/// One bias-corrected Adam update. Throws NumericalError naming the first
/// parameter array with a non-finite gradient; nothing is modified then.
void adam_step(PhVaeParams& params, const PhVaeParams& grads, AdamState& state, const AdamConfig& config);

struct TrainConfig {
  ModelConfig model;
  AdamConfig adam;
  std::size_t epochs = 100;
  std::size_t batch_size = 5;
  std::uint64_t seed = 0;  // drives the init, shuffle and eps streams
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  LossBreakdown loss;     // sums over the epoch's batches
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> flags;
  PhVaeParams params;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Adam training over a normalized samples x features matrix. One optimizer
/// step per batch; the logged losses are epoch sums. The model seed is
/// overridden by `config.seed`. Throws NumericalError on a non-finite loss.
TrainReport train(const TrainConfig& config, const Eigen::MatrixXd& normalized,
                  const EpochCallback& on_epoch = {});

/// Runs the model `repeats` times over the whole dataset with fresh eps draws
/// and stacks the reconstructions (repeats * n rows).
Eigen::MatrixXd reconstruct(const PhVaeParams& params, const ModelConfig& config,
                            const Eigen::MatrixXd& normalized, double amplitude, std::size_t repeats,
                            std::uint64_t seed);

/// Mean total loss over the last `window` epochs (all epochs if fewer).
double stabilized_loss(const std::vector<EpochRecord>& epochs, std::size_t window = 10);

/// Mean total loss over the first `window` epochs.
double initial_loss(const std::vector<EpochRecord>& epochs, std::size_t window = 10);

}  // namespace phvae

#endif  // PHVAE_TRAINER_HPP
