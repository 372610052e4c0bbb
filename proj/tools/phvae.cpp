// phvae: command-line front end.
//
//   phvae gen-data    --config run.json        raw samples -> <out>/dataset.csv + dataset.json
//   phvae train       --config run.json        <out>/epochs.csv, snapshot.json, report.json
//   phvae reconstruct --config run.json --snapshot <out>/snapshot.json
//   phvae compare     --config run.json        <out>/comparison.csv + density CSVs
//   phvae selfcheck
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "phvae/config.hpp"
#include "phvae/errors.hpp"
#include "phvae/generators.hpp"
#include "phvae/io.hpp"
#include "phvae/metrics.hpp"
#include "phvae/selfcheck.hpp"
#include "phvae/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace phvae;

namespace {

constexpr int kConfigError = 2;
constexpr int kDataError = 3;
constexpr int kNumericalError = 4;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<double> amplitude;
  std::optional<std::size_t> s_max;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON run configuration (defaults apply when omitted)");
  cmd->add_option("--seed", o.seed, "run seed");
  cmd->add_option("--epochs", o.epochs, "training epochs");
  cmd->add_option("--amplitude", o.amplitude, "noise amplitude A");
  cmd->add_option("--s-max", o.s_max, "number of polynomial branches S");
  cmd->add_option("--lr", o.lr, "Adam learning rate");
  cmd->add_option("--batch-size", o.batch_size, "minibatch size");
  cmd->add_option("--out", o.out, "output directory");
}

// Flags override scalar fields. For compare, --seed/--amplitude/--s-max
// collapse the corresponding grid to {seed}, {A} and {1..S}.
RunConfig resolve(const Overrides& o) {
  json j = json::object();
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw ConfigError("cannot open config file '" + o.config_path + "'");
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ConfigError("config '" + o.config_path + "' is not valid JSON: " + e.what());
    }
  }
  auto section = [&](const char* key) -> json& {
    if (!j.contains(key)) j[key] = json::object();
    return j[key];
  };
  if (o.seed) {
    j["seed"] = *o.seed;
    section("eval")["seeds"] = {*o.seed};
  }
  if (o.epochs) section("optimizer")["epochs"] = *o.epochs;
  if (o.lr) section("optimizer")["lr"] = *o.lr;
  if (o.batch_size) section("optimizer")["batch_size"] = *o.batch_size;
  if (o.amplitude) {
    section("model")["amplitude"] = *o.amplitude;
    section("eval")["A_grid"] = {*o.amplitude};
  }
  if (o.s_max) {
    section("model")["branches"] = *o.s_max;
    json grid = json::array();
    for (std::size_t s = 1; s <= *o.s_max; ++s) grid.push_back(s);
    section("eval")["S_grid"] = grid;
  }
  if (o.out) j["output_dir"] = *o.out;
  return parse_run_config(j);
}

fs::path prepare_output(const RunConfig& c) {
  fs::path dir(c.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

std::vector<std::string> column_names(Eigen::Index n) {
  std::vector<std::string> names;
  for (Eigen::Index i = 1; i <= n; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

int cmd_gen_data(const RunConfig& c) {
  const fs::path dir = prepare_output(c);
  const auto raw = data::make_raw_dataset(c.dataset);
  io::write_matrix_csv(dir / "dataset.csv", raw, column_names(raw.cols()));
  write_json(dir / "dataset.json", {{"dataset", to_json(c.dataset)},
                                    {"seed", c.dataset.seed},
                                    {"rows", raw.rows()},
                                    {"columns", raw.cols()}});
  std::cout << "wrote " << raw.rows() << "x" << raw.cols() << " samples to " << (dir / "dataset.csv").string()
            << '\n';
  return 0;
}

int cmd_train(const RunConfig& c) {
  const fs::path dir = prepare_output(c);
  const auto prepared = data::prepare_dataset(c.dataset);
  const TrainConfig tc = c.train_config(static_cast<std::size_t>(prepared.normalized.values.cols()));

  auto csv = open_out(dir / "epochs.csv");
  csv << io::epoch_csv_header(tc.model.branches) << '\n';
  json report = {{"command", "train"}, {"config", to_json(c)}, {"seed", c.seed}, {"flags", prepared.flags}};
  const auto start = std::chrono::steady_clock::now();
  try {
    TrainReport r = train(tc, prepared.normalized.values, [&](const EpochRecord& e) {
      csv << io::epoch_csv_row(e) << '\n';
      csv.flush();
    });
    io::save_snapshot(dir / "snapshot.json", r.params, tc.model);
    report["status"] = "ok";
    report["epochs"] = r.epochs.size();
    report["wall_seconds"] = r.wall_seconds;
    report["snapshot"] = (dir / "snapshot.json").string();
    if (!r.epochs.empty()) {
      report["final_total"] = r.epochs.back().loss.total;
      report["stabilized_loss"] = stabilized_loss(r.epochs);
    }
    write_json(dir / "report.json", report);
    std::cout << "trained " << r.epochs.size() << " epochs in " << r.wall_seconds << " s; artifacts in "
              << dir.string() << '\n';
    return 0;
  } catch (const NumericalError& e) {
    report["status"] = "numerical failure";
    report["error"] = e.what();
    report["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_json(dir / "report.json", report);
    throw;
  }
}

int cmd_reconstruct(const RunConfig& c, const std::string& snapshot_path, std::optional<std::size_t> repeats) {
  const fs::path dir = prepare_output(c);
  const io::Snapshot snap = io::load_snapshot(snapshot_path);
  const auto prepared = data::prepare_dataset(c.dataset);
  const std::size_t n_repeats = repeats.value_or(c.eval.n_repeats);
  const double amplitude = snap.config.amplitude;
  const auto recon = reconstruct(snap.params, snap.config, prepared.normalized.values, amplitude, n_repeats, c.seed);

  const Eigen::MatrixXd recon_raw = prepared.normalized.denormalize(recon);
  io::write_matrix_csv(dir / "reconstruction.csv", recon_raw, column_names(recon.cols()));
  const Eigen::MatrixXd truth_sample = ground_truth_sample(c.dataset, n_repeats);
  const auto [low, high] = c.eval.range ? *c.eval.range : density_range(c.dataset, truth_sample);
  const auto recon_density = histogram_density_pooled(recon_raw, c.eval.n_bins, low, high);
  const auto truth = histogram_density_pooled(truth_sample, c.eval.n_bins, low, high);
  {
    auto out = open_out(dir / "density_reconstruction.csv");
    io::write_density_csv(out, recon_density);
  }
  {
    auto out = open_out(dir / "density_truth.csv");
    io::write_density_csv(out, truth);
  }
  const double l1 = l1_density_distance(recon_density, truth);
  write_json(dir / "reconstruct_report.json", {{"command", "reconstruct"},
                                               {"config", to_json(c)},
                                               {"snapshot", snapshot_path},
                                               {"n_repeats", n_repeats},
                                               {"rows", recon.rows()},
                                               {"l1_distance", l1}});
  std::cout << "reconstructed " << recon.rows() << " rows; L1 density distance " << l1 << '\n';
  return 0;
}

int cmd_compare(const RunConfig& c) {
  const fs::path dir = prepare_output(c);
  const CompareConfig cc = c.compare_config();
  const auto table = compare_models(cc);
  {
    auto out = open_out(dir / "comparison.csv");
    io::write_comparison_csv(out, table.rows);
  }
  {
    auto out = open_out(dir / "density_truth.csv");
    io::write_density_csv(out, table.ground_truth);
  }
  const ComparisonRow* best = nullptr;
  const ComparisonRow* baseline = nullptr;
  for (const auto& r : table.rows) {
    if (!best || r.l1_distance < best->l1_distance) best = &r;
    if (r.S == 1 && (!baseline || r.l1_distance < baseline->l1_distance)) baseline = &r;
  }
  json report = {{"command", "compare"}, {"config", to_json(c)}, {"rows", table.rows.size()}, {"flags", table.flags}};
  auto dump_cell = [&](const ComparisonRow* r, const std::string& name) {
    if (!r) return;
    auto out = open_out(dir / ("density_" + name + ".csv"));
    io::write_density_csv(out, r->density);
    report[name] = {{"S", r->S}, {"A", r->A}, {"seed", r->seed}, {"l1_distance", r->l1_distance}};
  };
  dump_cell(best, "best");
  dump_cell(baseline, "baseline");
  write_json(dir / "compare_report.json", report);
  std::cout << "compared " << table.rows.size() << " cells; table in " << (dir / "comparison.csv").string() << '\n';
  return 0;
}

int cmd_selfcheck() {
  const auto results = run_selfcheck(&std::cout);
  for (const auto& r : results) {
    if (!r.passed) return kNumericalError;
  }
  std::cout << "all checks passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polynomial-hierarchical VAE: data generation, training, reconstruction and comparison"};
  app.require_subcommand(1);

  Overrides gen_o, train_o, recon_o, compare_o;
  auto* gen = app.add_subcommand("gen-data", "generate a raw dataset as CSV with a JSON sidecar");
  add_common(gen, gen_o);
  auto* tr = app.add_subcommand("train", "train a model and write epoch log, snapshot and report");
  add_common(tr, train_o);
  auto* rec = app.add_subcommand("reconstruct", "reconstruct the dataset from a snapshot");
  add_common(rec, recon_o);
  std::string snapshot;
  std::optional<std::size_t> repeats;
  rec->add_option("--snapshot", snapshot, "snapshot written by train")->required();
  rec->add_option("--repeats", repeats, "forward passes over the dataset (default eval.n_repeats)");
  auto* cmp = app.add_subcommand("compare", "train and score every (S, A, seed) cell");
  add_common(cmp, compare_o);
  auto* self = app.add_subcommand("selfcheck", "gradient checks, loss identities and IDX round-trip");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(resolve(gen_o));
    if (tr->parsed()) return cmd_train(resolve(train_o));
    if (rec->parsed()) return cmd_reconstruct(resolve(recon_o), snapshot, repeats);
    if (cmp->parsed()) return cmd_compare(resolve(compare_o));
    if (self->parsed()) return cmd_selfcheck();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
