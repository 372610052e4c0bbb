#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "phvae/errors.hpp"
#include "phvae/idx.hpp"
#include "phvae/io.hpp"
#include "phvae/metrics.hpp"

using namespace phvae;
using Vec = Eigen::VectorXd;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

DensityEstimate masses(std::initializer_list<double> m) {
  DensityEstimate d;
  d.masses = vec(m);
  d.bin_edges = Vec::LinSpaced(d.masses.size() + 1, 0.0, 1.0);
  d.n_samples = 1;
  return d;
}

CompareConfig tiny_compare() {
  CompareConfig c;
  c.train.model.hidden_dim = 16;
  c.train.model.latent_dim = 4;
  c.train.epochs = 12;
  c.s_values = {1, 2};
  c.a_values = {1.0, 3.0};
  c.seeds = {1, 2};
  c.n_repeats = 4;
  return c;
}

// Splits one CSV line on commas.
std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  return out;
}

}  // namespace

TEST(Histogram, Examples) {
  const auto mid = histogram_density(Vec::Constant(10, 0.5), 20, 0.0, 1.0);
  EXPECT_EQ(mid.masses.maxCoeff(), 1.0);
  EXPECT_EQ((mid.masses.array() > 0).count(), 1);

  const auto grid = histogram_density(Vec::LinSpaced(40, 0.0125, 0.9875), 4, 0.0, 1.0);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(grid.masses[i], 0.25);

  const auto three = histogram_density(vec({0.1, 0.1, 0.9}), 2, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(three.masses[0], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(three.masses[1], 1.0 / 3.0);
  EXPECT_EQ(three.n_samples, 3u);
  EXPECT_EQ(three.bin_edges, vec({0.0, 0.5, 1.0}));
}

TEST(Histogram, EdgesAndOutOfRangeGoToEndBins) {
  const auto d = histogram_density(vec({-0.5, 0.0, 1.0, 1.5}), 2, 0.0, 1.0);
  EXPECT_EQ(d.masses, vec({0.5, 0.5}));
}

TEST(Histogram, Errors) {
  EXPECT_THROW(histogram_density(Vec(0), 20, 0.0, 1.0), DataError);
  EXPECT_THROW(histogram_density(vec({0.5}), 0, 0.0, 1.0), ConfigError);
  EXPECT_THROW(histogram_density(vec({0.5}), 2, 1.0, 1.0), ConfigError);
}

TEST(Histogram, MassesNormalize) {
  Rng rng = Rng::stream(41, "test");
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd x(1 + rng.below(30), 1 + rng.below(5));
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-0.2, 1.2);
    const auto d = histogram_density_pooled(x, 1 + rng.below(30), 0.0, 1.0);
    EXPECT_NEAR(d.masses.sum(), 1.0, 1e-12);
    EXPECT_EQ(d.n_samples, static_cast<std::size_t>(x.size()));
  }
}

TEST(L1, Examples) {
  EXPECT_EQ(l1_density_distance(masses({0.2, 0.8}), masses({0.2, 0.8})), 0.0);
  EXPECT_EQ(l1_density_distance(masses({1.0, 0.0}), masses({0.0, 1.0})), 2.0);
  EXPECT_EQ(l1_density_distance(masses({0.5, 0.5}), masses({0.25, 0.75})), 0.5);
}

TEST(L1, SymmetricAndBounded) {
  Rng rng = Rng::stream(42, "test");
  for (int trial = 0; trial < 100; ++trial) {
    Vec a(20), b(20);
    for (auto& v : a) v = rng.uniform();
    for (auto& v : b) v = rng.uniform();
    const auto p = histogram_density(a, 10, 0.0, 1.0);
    const auto q = histogram_density(b, 10, 0.0, 1.0);
    const double d = l1_density_distance(p, q);
    EXPECT_EQ(d, l1_density_distance(q, p));
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 2.0 + 1e-12);
  }
}

TEST(L1, MismatchedBinningIsDimensionError) {
  EXPECT_THROW(l1_density_distance(masses({0.5, 0.5}), masses({0.2, 0.3, 0.5})), DimensionError);
  auto shifted = masses({0.5, 0.5});
  shifted.bin_edges = vec({0.0, 0.4, 1.0});
  EXPECT_THROW(l1_density_distance(masses({0.5, 0.5}), shifted), DimensionError);
}

TEST(GroundTruth, UniformMassesWithinMultinomialBounds) {
  data::DatasetSpec spec;
  const Eigen::MatrixXd sample = ground_truth_sample(spec, 100);
  ASSERT_EQ(sample.rows(), 5000);
  const auto [low, high] = density_range(spec, sample);
  EXPECT_EQ(low, 0.0);
  EXPECT_EQ(high, 1.0);
  const double p = 1.0 / 20.0;

  const auto one = histogram_density(sample.col(0), 20, low, high);
  const double sigma = std::sqrt(p * (1.0 - p) / 5000.0);
  for (Eigen::Index b = 0; b < 20; ++b) EXPECT_NEAR(one.masses[b], p, 3.0 * sigma) << "bin " << b;

  const auto pooled = histogram_density_pooled(sample, 20, low, high);
  const double pooled_sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(sample.size()));
  for (Eigen::Index b = 0; b < 20; ++b) EXPECT_NEAR(pooled.masses[b], p, 3.0 * pooled_sigma) << "bin " << b;

  EXPECT_EQ(ground_truth_sample(spec, 100), sample);
}

TEST(GroundTruth, RangeFollowsSource) {
  data::DatasetSpec spec;
  spec.dist.low = -2.0;
  spec.dist.high = 3.0;
  EXPECT_EQ(density_range(spec, Eigen::MatrixXd::Zero(1, 1)), std::make_pair(-2.0, 3.0));
  spec.source = data::Source::gmm_distorted_1;
  Eigen::MatrixXd truth(2, 2);
  truth << -0.5, 0.25, 0.75, -0.9;
  EXPECT_EQ(density_range(spec, truth), std::make_pair(-0.9, 0.75));
}

TEST(Compare, SingleCell) {
  CompareConfig c = tiny_compare();
  c.s_values = {1};
  c.a_values = {1.0};
  c.seeds = {5};
  const auto t = compare_models(c);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].label, "VAE baseline");
  EXPECT_EQ(t.rows[0].S, 1u);
  EXPECT_EQ(t.rows[0].seed, 5u);
  EXPECT_GE(t.rows[0].l1_distance, 0.0);
  EXPECT_LE(t.rows[0].l1_distance, 2.0);
}

TEST(Compare, GridOrderLabelsAndPurity) {
  const CompareConfig c = tiny_compare();
  const auto a = compare_models(c);
  ASSERT_EQ(a.rows.size(), 8u);
  std::size_t i = 0;
  for (std::size_t S : c.s_values) {
    for (double A : c.a_values) {
      for (auto seed : c.seeds) {
        const auto& r = a.rows[i++];
        EXPECT_EQ(r.S, S);
        EXPECT_EQ(r.A, A);
        EXPECT_EQ(r.seed, seed);
        EXPECT_EQ(r.label, S == 1 ? "VAE baseline" : "PH-VAE");
        EXPECT_EQ(r.history.size(), c.train.epochs);
      }
    }
  }
  CompareConfig threaded = c;
  threaded.threads = 3;
  const auto b = compare_models(threaded);
  ASSERT_EQ(b.rows.size(), a.rows.size());
  for (std::size_t k = 0; k < a.rows.size(); ++k) {
    EXPECT_EQ(a.rows[k].l1_distance, b.rows[k].l1_distance);
    EXPECT_EQ(a.rows[k].stabilized_loss, b.rows[k].stabilized_loss);
  }
  EXPECT_EQ(a.ground_truth.masses, b.ground_truth.masses);
}

// Stabilized loss recomputed independently from the written epoch CSV.
TEST(Compare, StabilizedLossMatchesEpochCsv) {
  const CompareConfig c = tiny_compare();
  const auto t = compare_models(c);
  for (const auto& r : t.rows) {
    std::stringstream csv;
    io::write_epoch_csv(csv, r.history, r.S);
    std::string line;
    std::getline(csv, line);
    const auto header = fields(line);
    ASSERT_EQ(header.back(), "total");
    std::vector<double> totals;
    while (std::getline(csv, line)) totals.push_back(std::stod(fields(line).back()));
    ASSERT_EQ(totals.size(), c.train.epochs);
    double acc = 0.0;
    for (std::size_t k = totals.size() - 10; k < totals.size(); ++k) acc += totals[k];
    EXPECT_NEAR(r.stabilized_loss, acc / 10.0, 1e-12 * std::abs(acc));
  }
}

TEST(Compare, ImageWidthComesFromTheLoadedFile) {
  data::ImageSet set;
  set.rows = 4;
  set.cols = 4;
  set.pixels.resize(6, 16);
  Rng rng = Rng::stream(43, "test");
  for (Eigen::Index i = 0; i < set.pixels.size(); ++i) set.pixels.data()[i] = static_cast<double>(rng.below(256)) / 255.0;
  const auto path = std::filesystem::temp_directory_path() / "phvae_metrics_images.idx";
  data::save_idx(path, set);

  CompareConfig c = tiny_compare();
  c.dataset.source = data::Source::idx_file;
  c.dataset.path = path.string();
  c.dataset.downscale = 2;
  c.dataset.limit = 0;
  c.s_values = {1};
  c.a_values = {1.0};
  c.seeds = {1};
  const auto t = compare_models(c);
  std::filesystem::remove(path);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.low, 0.0);
  EXPECT_EQ(t.high, 1.0);
  EXPECT_EQ(t.ground_truth.n_samples, 6u * 4u);
}

TEST(Compare, EmptyGridIsConfigError) {
  CompareConfig c = tiny_compare();
  c.seeds.clear();
  EXPECT_THROW(compare_models(c), ConfigError);
}
