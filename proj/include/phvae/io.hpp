#ifndef PHVAE_IO_HPP
#define PHVAE_IO_HPP

// CSV output (comma separated, '.' decimal, LF endings, header row) and the
// JSON parameter snapshot container.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "phvae/metrics.hpp"
#include "phvae/model.hpp"
#include "phvae/trainer.hpp"

namespace phvae::io {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m, const std::vector<std::string>& header);
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header);

/// Header: epoch,recon,kl_1..kl_S,ph,mi,total
std::string epoch_csv_header(std::size_t branches);
std::string epoch_csv_row(const EpochRecord& record);
void write_epoch_csv(std::ostream& out, const std::vector<EpochRecord>& epochs, std::size_t branches);

/// Header: S,A,seed,l1_distance,stabilized_loss,wall_seconds,label
void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows);

/// Header: bin_low,bin_high,mass
void write_density_csv(std::ostream& out, const DensityEstimate& density);

/// {"format": "phvae-snapshot", "version": 1, "model": {...},
///  "arrays": [{"name": "enc.1.W", "shape": [rows, cols], "data": [row-major values]}, ...]}
/// Vectors carry a one-element shape.
nlohmann::json snapshot_to_json(const PhVaeParams& params, const ModelConfig& config);

struct Snapshot {
  ModelConfig config;
  PhVaeParams params;
};

Snapshot snapshot_from_json(const nlohmann::json& j);
void save_snapshot(const std::filesystem::path& path, const PhVaeParams& params, const ModelConfig& config);
Snapshot load_snapshot(const std::filesystem::path& path);

}  // namespace phvae::io

#endif  // PHVAE_IO_HPP
