#ifndef PHVAE_GENERATORS_HPP
#define PHVAE_GENERATORS_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phvae/data.hpp"

namespace phvae::data {

enum class Source { uniform, lognormal, normal, gmm_distorted_1, gmm_distorted_2, cluster, idx_file };

Source parse_source(const std::string& name);
std::string to_string(Source s);

/// Parameters of the base distributions. `low`/`high` bound the uniform;
/// `mean`/`stddev` describe the normal and the underlying normal of the log-normal.
struct DistributionParams {
  double low = 0.0;
  double high = 1.0;
  double mean = 0.0;
  double stddev = 1.0;
};

/// Ring of equally weighted isotropic Gaussian clusters.
struct ClusterParams {
  std::size_t n_clusters = 6;
  double radius = 4.0;
  double stddev = 0.3;
};

struct DatasetSpec {
  Source source = Source::uniform;
  std::size_t n_samples = 50;   // points per feature set (rows)
  std::size_t n_features = 20;  // feature sets (columns); 2 for the mixture sources
  std::uint64_t seed = 0;
  DistributionParams dist;
  ClusterParams cluster;
  double noise_stddev = 0.1;  // additive noise of the second pathology case
  std::string path;           // idx_file only
  std::size_t downscale = 16; // idx_file: output side length, 0 keeps native size
  std::size_t limit = 10;     // idx_file: number of images used, 0 for all
};

/// n_samples x n_features matrix; feature sets are drawn column by column.
/// Normal variates use Box-Muller; log-normal is exp(normal).
Eigen::MatrixXd gen_base_distribution(const DatasetSpec& spec);

struct MixtureComponent {
  Eigen::Vector2d mean;
  Eigen::Matrix2d cov;
  double weight;
};

enum class GmmCase { pathology_1, pathology_2, cluster };

/// Component table of each mixture recipe. Validated: weights sum to 1 and
/// covariances are symmetric positive-definite.
std::vector<MixtureComponent> gmm_components(GmmCase c, const ClusterParams& cluster = {});

struct GmmSample {
  Eigen::MatrixXd points;      // n x 2, after distortion
  std::vector<int> component;  // source component per row
};

/// Samples n points of a distorted mixture.
///   pathology_1: u -> tanh(u) + 0.1 sin(2u)
///   pathology_2: u -> v + 0.1 sin(v), v = u + N(0, noise_stddev^2)
///   cluster:     undistorted
GmmSample gen_gmm_distorted(GmmCase c, std::size_t n, std::uint64_t seed,
                            const ClusterParams& cluster = {}, double noise_stddev = 0.1);

/// Raw (un-normalized) samples x features matrix for any source.
/// idx_file loads images already scaled to [0, 1].
Eigen::MatrixXd make_raw_dataset(const DatasetSpec& spec);

/// Raw samples plus their normalized form and any data flags.
/// Synthetic sources are min-max normalized per column; image pixels are
/// already in [0, 1] and pass through unchanged.
struct PreparedDataset {
  Eigen::MatrixXd raw;
  NormalizedMatrix normalized;
  std::vector<std::string> flags;
};

PreparedDataset prepare_dataset(const DatasetSpec& spec);

/// Input width the spec produces without touching disk. For idx_file this is
/// only n_features; the true width is the column count after loading.
std::size_t feature_count(const DatasetSpec& spec);

}  // namespace phvae::data

#endif  // PHVAE_GENERATORS_HPP
