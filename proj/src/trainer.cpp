#include "phvae/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>

#include "phvae/errors.hpp"

namespace phvae {

void adam_step(PhVaeParams& params, const PhVaeParams& grads, AdamState& state, const AdamConfig& config) {
  std::optional<std::string> bad;
  grads.for_each([&](const std::string& name, const auto& g) {
    if (!bad && !g.allFinite()) bad = name;
  });
  if (bad) throw NumericalError("adam_step: non-finite gradient in '" + *bad + "'");

  state.t += 1;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));

  // Walk the four structures in lockstep through their flat views.
  std::vector<Eigen::Map<const Eigen::ArrayXd>> g_arrays;
  grads.for_each([&](const std::string&, const auto& a) { g_arrays.emplace_back(a.data(), a.size()); });
  std::vector<Eigen::Map<Eigen::ArrayXd>> m_arrays, v_arrays, p_arrays;
  state.m.for_each([&](const std::string&, auto& a) { m_arrays.emplace_back(a.data(), a.size()); });
  state.v.for_each([&](const std::string&, auto& a) { v_arrays.emplace_back(a.data(), a.size()); });
  params.for_each([&](const std::string&, auto& a) { p_arrays.emplace_back(a.data(), a.size()); });
  if (g_arrays.size() != p_arrays.size() || m_arrays.size() != p_arrays.size()) {
    throw DimensionError("adam_step: gradient/state layout does not match parameters");
  }

  for (std::size_t i = 0; i < p_arrays.size(); ++i) {
    const auto& g = g_arrays[i];
    if (g.size() != p_arrays[i].size()) throw DimensionError("adam_step: gradient shape mismatch");
    m_arrays[i] = config.beta1 * m_arrays[i] + (1.0 - config.beta1) * g;
    v_arrays[i] = config.beta2 * v_arrays[i] + (1.0 - config.beta2) * g.square();
    p_arrays[i] -= config.lr * (m_arrays[i] / c1) / ((v_arrays[i] / c2).sqrt() + config.epsilon);
  }
}

namespace {

void add_into(LossBreakdown& acc, const LossBreakdown& b) {
  acc.recon += b.recon;
  if (acc.kl_per_branch.empty()) acc.kl_per_branch.assign(b.kl_per_branch.size(), 0.0);
  for (std::size_t s = 0; s < b.kl_per_branch.size(); ++s) acc.kl_per_branch[s] += b.kl_per_branch[s];
  acc.ph += b.ph;
  acc.mi += b.mi;
  acc.total += b.total;
}

}  // namespace

TrainReport train(const TrainConfig& config, const Eigen::MatrixXd& normalized, const EpochCallback& on_epoch) {
  const auto start = std::chrono::steady_clock::now();
  ModelConfig model = config.model;
  model.seed = config.seed;
  model.validate();
  if (config.batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  if (normalized.cols() != static_cast<Eigen::Index>(model.input_dim)) {
    throw DimensionError("train: data has " + std::to_string(normalized.cols()) + " features, model expects " +
                         std::to_string(model.input_dim));
  }

  TrainReport report;
  report.seed = config.seed;
  report.params = init_params(model);
  AdamState adam(report.params);
  Rng shuffle = Rng::stream(config.seed, "shuffle");
  Rng eps = Rng::stream(config.seed, "eps");

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRecord record;
    record.epoch = epoch;
    const auto batches = data::make_batches(normalized, config.batch_size, model.branches, shuffle);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const std::string where = " at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b + 1);
      StepResult step;
      try {
        step = loss_and_gradients(report.params, model, batches[b], eps);
      } catch (const DomainError& e) {
        throw NumericalError("train: non-finite loss" + where + " (" + e.what() + ")");
      }
      if (!std::isfinite(step.loss.total)) throw NumericalError("train: non-finite loss" + where);
      try {
        adam_step(report.params, step.grads, adam, config.adam);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + where);
      }
      add_into(record.loss, step.loss);
    }
    report.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

Eigen::MatrixXd reconstruct(const PhVaeParams& params, const ModelConfig& config, const Eigen::MatrixXd& normalized,
                            double amplitude, std::size_t repeats, std::uint64_t seed) {
  check_compatible(params, config);
  if (normalized.cols() != static_cast<Eigen::Index>(config.input_dim)) {
    throw DimensionError("reconstruct: data has " + std::to_string(normalized.cols()) +
                         " features, snapshot expects " + std::to_string(config.input_dim));
  }
  Rng eps = Rng::stream(seed, "reconstruct");
  const Eigen::Index n = normalized.rows();
  Eigen::MatrixXd out(n * static_cast<Eigen::Index>(repeats), normalized.cols());
  for (std::size_t r = 0; r < repeats; ++r) {
    out.middleRows(static_cast<Eigen::Index>(r) * n, n) = reconstruct_batch(params, config, normalized, amplitude, eps);
  }
  return out;
}

namespace {

double mean_total(std::vector<EpochRecord>::const_iterator first, std::vector<EpochRecord>::const_iterator last) {
  if (first == last) return 0.0;
  double acc = 0.0;
  for (auto it = first; it != last; ++it) acc += it->loss.total;
  return acc / static_cast<double>(std::distance(first, last));
}

}  // namespace

double stabilized_loss(const std::vector<EpochRecord>& epochs, std::size_t window) {
  const std::size_t k = std::min(window, epochs.size());
  return mean_total(epochs.end() - static_cast<std::ptrdiff_t>(k), epochs.end());
}

double initial_loss(const std::vector<EpochRecord>& epochs, std::size_t window) {
  const std::size_t k = std::min(window, epochs.size());
  return mean_total(epochs.begin(), epochs.begin() + static_cast<std::ptrdiff_t>(k));
}

}  // namespace phvae
