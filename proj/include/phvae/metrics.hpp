#ifndef PHVAE_METRICS_HPP
#define PHVAE_METRICS_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "phvae/generators.hpp"
#include "phvae/trainer.hpp"

namespace phvae {

struct DensityEstimate {
  Eigen::VectorXd bin_edges;  // n_bins + 1, increasing
  Eigen::VectorXd masses;     // n_bins, sums to 1
  std::size_t n_samples = 0;
};

/// Uniform-bin histogram over [low, high], normalized by sample count.
/// Samples outside the range land in the end bins.
DensityEstimate histogram_density(const Eigen::Ref<const Eigen::VectorXd>& samples, std::size_t n_bins,
                                  double low, double high);

/// Pools every entry of a matrix into one histogram.
DensityEstimate histogram_density_pooled(const Eigen::MatrixXd& samples, std::size_t n_bins, double low, double high);

/// sum_i |p_i - q_i|, in [0, 2]. Throws DimensionError when the binnings differ.
double l1_density_distance(const DensityEstimate& p, const DensityEstimate& q);

struct CompareConfig {
  data::DatasetSpec dataset;
  TrainConfig train;  // train.model.branches and .amplitude are set per cell
  std::vector<std::size_t> s_values{1, 2, 3};
  std::vector<double> a_values{1.0, 3.0, 5.0};
  std::vector<std::uint64_t> seeds;
  std::size_t n_bins = 20;
  std::size_t n_repeats = 100;
  std::optional<std::pair<double, double>> range;  // histogram range in data units; see density_range
  std::size_t threads = 1;
};

struct ComparisonRow {
  std::size_t S = 1;
  double A = 1.0;
  std::uint64_t seed = 0;
  double l1_distance = 0.0;
  double stabilized_loss = 0.0;
  double wall_seconds = 0.0;
  std::string label;  // "VAE baseline" for S = 1, otherwise "PH-VAE"
  std::vector<EpochRecord> history;
  DensityEstimate density;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;  // ordered by S, then A, then seed
  DensityEstimate ground_truth;
  double low = 0.0;
  double high = 1.0;
  std::vector<std::string> flags;
};

/// Ground-truth sample in data units: `repeats` independent raw draws of the
/// dataset recipe, stacked. For image data it is the pixel matrix itself.
Eigen::MatrixXd ground_truth_sample(const data::DatasetSpec& spec, std::size_t repeats);

/// Default histogram range: [low, high] of a uniform recipe, [0, 1] for
/// images, otherwise the span of the ground-truth sample.
std::pair<double, double> density_range(const data::DatasetSpec& spec, const Eigen::MatrixXd& truth);

/// Trains one model per (S, A, seed), reconstructs n_repeats passes over the
/// training data, maps them back to data units, and scores the pooled
/// reconstruction density against the ground truth. Cells are independent and may run on `threads` workers; the
/// result does not depend on the thread count.
ComparisonTable compare_models(const CompareConfig& config);

}  // namespace phvae

#endif  // PHVAE_METRICS_HPP
