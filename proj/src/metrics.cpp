#include "phvae/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>
#include <tuple>

#include "phvae/errors.hpp"
#include "phvae/rng.hpp"

namespace phvae {

DensityEstimate histogram_density(const Eigen::Ref<const Eigen::VectorXd>& samples, std::size_t n_bins,
                                  double low, double high) {
  if (n_bins == 0) throw ConfigError("histogram_density: n_bins must be >= 1");
  if (!(low < high)) throw ConfigError("histogram_density: range low must be < high");
  if (samples.size() == 0) throw DataError("histogram_density: empty sample set");

  DensityEstimate d;
  const auto bins = static_cast<Eigen::Index>(n_bins);
  d.bin_edges = Eigen::VectorXd::LinSpaced(bins + 1, low, high);
  d.bin_edges[bins] = high;
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(bins);
  const double width = (high - low) / static_cast<double>(n_bins);
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    const double pos = std::floor((samples[i] - low) / width);
    const auto k = static_cast<Eigen::Index>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
    counts[k] += 1.0;
  }
  d.masses = counts / static_cast<double>(samples.size());
  d.n_samples = static_cast<std::size_t>(samples.size());
  return d;
}

DensityEstimate histogram_density_pooled(const Eigen::MatrixXd& samples, std::size_t n_bins, double low, double high) {
  return histogram_density(Eigen::Map<const Eigen::VectorXd>(samples.data(), samples.size()), n_bins, low, high);
}

double l1_density_distance(const DensityEstimate& p, const DensityEstimate& q) {
  if (p.bin_edges.size() != q.bin_edges.size() || p.bin_edges != q.bin_edges) {
    throw DimensionError("l1_density_distance: densities use different binnings");
  }
  return (p.masses - q.masses).cwiseAbs().sum();
}

Eigen::MatrixXd ground_truth_sample(const data::DatasetSpec& spec, std::size_t repeats) {
  if (repeats == 0) throw ConfigError("ground_truth_sample: repeats must be >= 1");
  if (spec.source == data::Source::idx_file) return data::make_raw_dataset(spec);

  std::vector<Eigen::MatrixXd> draws;
  for (std::size_t r = 0; r < repeats; ++r) {
    data::DatasetSpec draw = spec;
    std::uint64_t key = spec.seed ^ hash_name("ground-truth") ^ (0x9E3779B97F4A7C15ull * (r + 1));
    draw.seed = splitmix64(key);
    draws.push_back(data::make_raw_dataset(draw));
  }
  const Eigen::Index rows = draws.front().rows();
  Eigen::MatrixXd out(rows * static_cast<Eigen::Index>(repeats), draws.front().cols());
  for (std::size_t r = 0; r < repeats; ++r) out.middleRows(static_cast<Eigen::Index>(r) * rows, rows) = draws[r];
  return out;
}

std::pair<double, double> density_range(const data::DatasetSpec& spec, const Eigen::MatrixXd& truth) {
  if (spec.source == data::Source::uniform) return {spec.dist.low, spec.dist.high};
  if (spec.source == data::Source::idx_file) return {0.0, 1.0};
  if (truth.size() == 0) throw DataError("density_range: empty ground-truth sample");
  const double lo = truth.minCoeff(), hi = truth.maxCoeff();
  if (!(lo < hi)) return {lo - 0.5, hi + 0.5};
  return {lo, hi};
}

namespace {

struct Cell {
  std::size_t S;
  double A;
  std::uint64_t seed;
};

ComparisonRow run_cell(const CompareConfig& config, const Cell& cell, const data::NormalizedMatrix& data,
                       const ComparisonTable& table) {
  const Eigen::MatrixXd& normalized = data.values;
  const auto start = std::chrono::steady_clock::now();
  TrainConfig tc = config.train;
  tc.model.branches = cell.S;
  tc.model.amplitude = cell.A;
  tc.seed = cell.seed;
  TrainReport report = train(tc, normalized);
  ModelConfig model = tc.model;
  model.seed = cell.seed;
  const Eigen::MatrixXd recon = reconstruct(report.params, model, normalized, cell.A, config.n_repeats, cell.seed);

  ComparisonRow row;
  row.S = cell.S;
  row.A = cell.A;
  row.seed = cell.seed;
  row.density = histogram_density_pooled(data.denormalize(recon), config.n_bins, table.low, table.high);
  row.l1_distance = l1_density_distance(row.density, table.ground_truth);
  row.stabilized_loss = stabilized_loss(report.epochs);
  row.history = std::move(report.epochs);
  row.label = cell.S == 1 ? "VAE baseline" : "PH-VAE";
  row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

}  // namespace

ComparisonTable compare_models(const CompareConfig& requested) {
  if (requested.s_values.empty() || requested.a_values.empty() || requested.seeds.empty()) {
    throw ConfigError("compare_models: S, A and seed grids must be non-empty");
  }
  const auto prepared = data::prepare_dataset(requested.dataset);
  // image width is only known once the file is loaded
  CompareConfig config = requested;
  config.train.model.input_dim = static_cast<std::size_t>(prepared.normalized.values.cols());
  ComparisonTable table;
  table.flags = prepared.flags;
  const Eigen::MatrixXd truth = ground_truth_sample(config.dataset, config.n_repeats);
  std::tie(table.low, table.high) = config.range ? *config.range : density_range(config.dataset, truth);
  table.ground_truth = histogram_density_pooled(truth, config.n_bins, table.low, table.high);

  std::vector<Cell> cells;
  for (auto s : config.s_values) {
    for (auto a : config.a_values) {
      for (auto seed : config.seeds) cells.push_back({s, a, seed});
    }
  }
  table.rows.resize(cells.size());

  const std::size_t workers = std::clamp<std::size_t>(config.threads, 1, cells.size());
  if (workers == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      table.rows[i] = run_cell(config, cells[i], prepared.normalized, table);
    }
    return table;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < cells.size(); i = next++) {
        try {
          table.rows[i] = run_cell(config, cells[i], prepared.normalized, table);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return table;
}

}  // namespace phvae
