#ifndef PHVAE_CONFIG_HPP
#define PHVAE_CONFIG_HPP

// JSON run configuration. Example:
//
//   {
//     "seed": 1,
//     "dataset":   {"source": "uniform", "n_samples": 50, "n_features": 20, "seed": 0,
//                   "params": {"low": 0, "high": 1}},
//     "model":     {"hidden_dim": 256, "latent_dim": 10, "branches": 3, "amplitude": 1,
//                   "encoder_activation": "relu", "decoder_activation": "sigmoid"},
//     "optimizer": {"lr": 0.0005, "epochs": 100, "batch_size": 5},
//     "eval":      {"n_bins": 20, "n_repeats": 100, "seeds": [1, 2], "S_grid": [1, 2, 3],
//                   "A_grid": [1, 3, 5], "range": [0, 1]},
//     "output_dir": "runs/example1"
//   }
//
// Every section and key is optional; unknown keys are rejected.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "phvae/generators.hpp"
#include "phvae/metrics.hpp"
#include "phvae/model.hpp"
#include "phvae/trainer.hpp"

namespace phvae {

struct EvalConfig {
  std::size_t n_bins = 20;
  std::size_t n_repeats = 100;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<std::size_t> s_grid{1, 2, 3};
  std::vector<double> a_grid{1.0, 3.0, 5.0};
  std::optional<std::pair<double, double>> range;  // histogram range in data units, default per source
  std::size_t threads = 1;
};

struct RunConfig {
  std::uint64_t seed = 1;
  data::DatasetSpec dataset;
  ModelConfig model;  // input_dim is filled in from the dataset
  AdamConfig adam;
  std::size_t epochs = 100;
  std::size_t batch_size = 5;
  EvalConfig eval;
  std::string output_dir = "out";

  /// Throws ConfigError on empty grids or invalid values.
  void validate() const;

  TrainConfig train_config(std::size_t input_dim) const;
  CompareConfig compare_config() const;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json to_json(const RunConfig& config);
nlohmann::json to_json(const data::DatasetSpec& spec);
nlohmann::json to_json(const ModelConfig& model);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace phvae

#endif  // PHVAE_CONFIG_HPP
