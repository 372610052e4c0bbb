#include "phvae/io.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <type_traits>

#include "phvae/config.hpp"
#include "phvae/errors.hpp"

namespace phvae::io {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

void write_header(std::ostream& out, const std::vector<std::string>& header) {
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
}

}  // namespace

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m, const std::vector<std::string>& header) {
  if (header.size() != static_cast<std::size_t>(m.cols())) {
    throw DimensionError("write_matrix_csv: header has " + std::to_string(header.size()) + " names for " +
                         std::to_string(m.cols()) + " columns");
  }
  write_header(out, header);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_double(m(r, c));
    out << '\n';
  }
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header) {
  auto out = open_out(path);
  write_matrix_csv(out, m, header);
}

std::string epoch_csv_header(std::size_t branches) {
  std::string h = "epoch,recon";
  for (std::size_t s = 1; s <= branches; ++s) h += ",kl_" + std::to_string(s);
  return h + ",ph,mi,total";
}

std::string epoch_csv_row(const EpochRecord& r) {
  std::string line = std::to_string(r.epoch) + "," + format_double(r.loss.recon);
  for (double k : r.loss.kl_per_branch) line += "," + format_double(k);
  line += "," + format_double(r.loss.ph) + "," + format_double(r.loss.mi) + "," + format_double(r.loss.total);
  return line;
}

void write_epoch_csv(std::ostream& out, const std::vector<EpochRecord>& epochs, std::size_t branches) {
  out << epoch_csv_header(branches) << '\n';
  for (const auto& e : epochs) out << epoch_csv_row(e) << '\n';
}

void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows) {
  out << "S,A,seed,l1_distance,stabilized_loss,wall_seconds,label\n";
  for (const auto& r : rows) {
    out << r.S << ',' << format_double(r.A) << ',' << r.seed << ',' << format_double(r.l1_distance) << ','
        << format_double(r.stabilized_loss) << ',' << format_double(r.wall_seconds) << ',' << r.label << '\n';
  }
}

void write_density_csv(std::ostream& out, const DensityEstimate& d) {
  out << "bin_low,bin_high,mass\n";
  for (Eigen::Index i = 0; i < d.masses.size(); ++i) {
    out << format_double(d.bin_edges[i]) << ',' << format_double(d.bin_edges[i + 1]) << ','
        << format_double(d.masses[i]) << '\n';
  }
}

nlohmann::json snapshot_to_json(const PhVaeParams& params, const ModelConfig& config) {
  nlohmann::json arrays = nlohmann::json::array();
  params.for_each([&](const std::string& name, const auto& a) {
    using T = std::decay_t<decltype(a)>;
    nlohmann::json shape;
    std::vector<double> data;
    if constexpr (T::ColsAtCompileTime == 1) {
      shape = {a.size()};
      data.assign(a.data(), a.data() + a.size());
    } else {
      shape = {a.rows(), a.cols()};
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        for (Eigen::Index c = 0; c < a.cols(); ++c) data.push_back(a(r, c));
      }
    }
    arrays.push_back({{"name", name}, {"shape", shape}, {"data", data}});
  });
  return {{"format", "phvae-snapshot"}, {"version", 1}, {"model", to_json(config)}, {"arrays", arrays}};
}

Snapshot snapshot_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "phvae-snapshot" || j.at("version") != 1) {
      throw DataError("snapshot: unsupported format or version");
    }
    Snapshot s;
    s.config = model_config_from_json(j.at("model"));
    s.params = init_params(s.config);
    const auto& arrays = j.at("arrays");
    std::size_t index = 0;
    s.params.for_each([&](const std::string& name, auto& a) {
      using T = std::decay_t<decltype(a)>;
      if (index >= arrays.size()) throw DataError("snapshot: missing array '" + name + "'");
      const auto& entry = arrays[index++];
      if (entry.at("name") != name) {
        throw DataError("snapshot: expected array '" + name + "', found '" + entry.at("name").get<std::string>() + "'");
      }
      const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
      const auto data = entry.at("data").get<std::vector<double>>();
      const bool vec = T::ColsAtCompileTime == 1;
      const bool shape_ok = vec ? (shape.size() == 1 && shape[0] == a.size())
                                : (shape.size() == 2 && shape[0] == a.rows() && shape[1] == a.cols());
      if (!shape_ok || static_cast<Eigen::Index>(data.size()) != a.size()) {
        throw DataError("snapshot: array '" + name + "' has the wrong shape");
      }
      if constexpr (T::ColsAtCompileTime == 1) {
        for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = data[static_cast<std::size_t>(i)];
      } else {
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
          for (Eigen::Index c = 0; c < a.cols(); ++c) a(r, c) = data[static_cast<std::size_t>(r * a.cols() + c)];
        }
      }
    });
    if (index != arrays.size()) throw DataError("snapshot: unexpected extra arrays");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("snapshot: malformed container: ") + e.what());
  }
}

void save_snapshot(const std::filesystem::path& path, const PhVaeParams& params, const ModelConfig& config) {
  auto out = open_out(path);
  out << snapshot_to_json(params, config).dump() << '\n';
}

Snapshot load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open snapshot '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("snapshot '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return snapshot_from_json(j);
}

}  // namespace phvae::io
