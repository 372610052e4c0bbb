#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "json.hpp"

#include "phvae/config.hpp"
#include "phvae/errors.hpp"
#include "phvae/io.hpp"

#ifndef PHVAE_CLI_PATH
#error "PHVAE_CLI_PATH must point at the phvae executable"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace phvae;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<fs::path> listing(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) out.push_back(fs::relative(e.path(), dir));
  std::sort(out.begin(), out.end());
  return out;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() / ("phvae_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  fs::path write_config(const std::string& name, const json& j) {
    const fs::path p = root_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }

  // Runs the CLI inside the scratch directory; returns the exit code.
  int run(const std::string& args, std::string* output = nullptr) {
    const fs::path log = root_ / "cli.log";
    const std::string cmd = "cd '" + root_.string() + "' && '" + std::string(PHVAE_CLI_PATH) + "' " + args + " > '" +
                            log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    if (output) *output = slurp(log);
    fs::remove(log);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path root_;
};

json small_config(const std::string& out) {
  return {{"seed", 3},
          {"output_dir", out},
          {"model", {{"hidden_dim", 16}, {"latent_dim", 4}}},
          {"optimizer", {{"epochs", 12}}},
          {"eval", {{"n_repeats", 4}, {"seeds", {1}}, {"S_grid", {1, 2}}, {"A_grid", {1}}}}};
}

}  // namespace

// ---- config ----

TEST(Config, DefaultsMatchExampleOne) {
  const RunConfig c = parse_run_config(json::object());
  EXPECT_EQ(c.dataset.n_samples, 50u);
  EXPECT_EQ(c.dataset.n_features, 20u);
  EXPECT_EQ(c.model.input_dim, 20u);
  EXPECT_EQ(c.model.hidden_dim, 256u);
  EXPECT_EQ(c.model.latent_dim, 10u);
  EXPECT_EQ(c.model.branches, 3u);
  EXPECT_EQ(c.batch_size, 5u);
  EXPECT_EQ(c.epochs, 100u);
  EXPECT_EQ(c.adam.lr, 5e-4);
  EXPECT_EQ(c.eval.n_bins, 20u);
  EXPECT_EQ(c.eval.n_repeats, 100u);
  EXPECT_EQ(c.eval.seeds.size(), 10u);
}

TEST(Config, EchoRoundTrips) {
  json j = small_config("runs/x");
  j["dataset"] = {{"source", "gmm_distorted_2"}, {"n_samples", 200}, {"noise_stddev", 0.2}};
  j["eval"]["range"] = {-1.5, 2.5};
  const RunConfig c = parse_run_config(j);
  EXPECT_EQ(c.model.input_dim, 2u);
  const json echo = to_json(c);
  EXPECT_EQ(to_json(parse_run_config(echo)), echo);
  EXPECT_EQ(echo["dataset"]["source"], "gmm_distorted_2");
  EXPECT_EQ(echo["eval"]["range"], json({-1.5, 2.5}));
}

TEST(Config, UnknownKeysAndBadValuesAreRejected) {
  EXPECT_THROW(parse_run_config({{"sed", 1}}), ConfigError);
  EXPECT_THROW(parse_run_config({{"model", {{"hiden_dim", 3}}}}), ConfigError);
  EXPECT_THROW(parse_run_config({{"dataset", {{"params", {{"lo", 0}}}}}}), ConfigError);
  EXPECT_THROW(parse_run_config({{"model", {{"hidden_dim", "wide"}}}}), ConfigError);
  EXPECT_THROW(parse_run_config({{"model", {{"encoder_activation", "gelu"}}}}), ConfigError);
  EXPECT_THROW(parse_run_config({{"dataset", {{"source", "poisson"}}}}), ConfigError);
  EXPECT_THROW(parse_run_config({{"eval", {{"seeds", json::array()}}}}), ConfigError);
  EXPECT_THROW(parse_run_config({{"eval", {{"S_grid", {0}}}}}), ConfigError);
  EXPECT_THROW(parse_run_config({{"eval", {{"range", {1, 0}}}}}), ConfigError);
  EXPECT_THROW(parse_run_config({{"optimizer", {{"batch_size", 0}}}}), ConfigError);
  EXPECT_THROW(parse_run_config({{"output_dir", ""}}), ConfigError);
  EXPECT_THROW(parse_run_config(json::array()), ConfigError);
}

TEST(Config, CompareConfigCarriesGrids) {
  const RunConfig c = parse_run_config(small_config("o"));
  const CompareConfig cc = c.compare_config();
  EXPECT_EQ(cc.s_values, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(cc.a_values, std::vector<double>{1.0});
  EXPECT_EQ(cc.seeds, std::vector<std::uint64_t>{1});
  EXPECT_EQ(cc.train.epochs, 12u);
  EXPECT_EQ(cc.train.model.input_dim, 20u);
}

// ---- files ----

TEST(Io, NumbersAndCsvDialect) {
  EXPECT_EQ(io::format_double(0.5), "0.5");
  EXPECT_EQ(io::format_double(1e-300), "1e-300");
  EXPECT_EQ(std::stod(io::format_double(0.1 + 0.2)), 0.1 + 0.2);
  EXPECT_EQ(io::epoch_csv_header(2), "epoch,recon,kl_1,kl_2,ph,mi,total");

  Eigen::MatrixXd m(2, 2);
  m << 1.25, -3, 1e6, 0.1;
  std::ostringstream out;
  io::write_matrix_csv(out, m, {"a", "b"});
  EXPECT_EQ(out.str(), "a,b\n1.25,-3\n1e+06,0.1\n");

  std::ostringstream cmp;
  io::write_comparison_csv(cmp, {});
  EXPECT_EQ(cmp.str(), "S,A,seed,l1_distance,stabilized_loss,wall_seconds,label\n");
}

TEST(Io, SnapshotRoundTripAndValidation) {
  ModelConfig c;
  c.input_dim = 3;
  c.hidden_dim = 5;
  c.latent_dim = 2;
  c.decoder_hidden = 4;
  c.seed = 11;
  PhVaeParams p = init_params(c);
  p.head_mu.b[1] = 0.1 + 0.2;
  const json j = io::snapshot_to_json(p, c);
  EXPECT_EQ(j["arrays"][0]["name"], "enc.1.W");
  EXPECT_EQ(j["arrays"][0]["shape"], json({5, 3}));
  const io::Snapshot back = io::snapshot_from_json(j);
  EXPECT_EQ(back.params.flatten(), p.flatten());
  EXPECT_EQ(back.config.decoder_hidden, 4u);
  EXPECT_EQ(io::snapshot_to_json(back.params, back.config), j);

  json bad_name = j;
  bad_name["arrays"][2]["name"] = "enc.9.W";
  EXPECT_THROW(io::snapshot_from_json(bad_name), DataError);
  json bad_shape = j;
  bad_shape["arrays"][0]["shape"] = {3, 5};
  EXPECT_THROW(io::snapshot_from_json(bad_shape), DataError);
  json short_data = j;
  short_data["arrays"][1]["data"].erase(0);
  EXPECT_THROW(io::snapshot_from_json(short_data), DataError);
  EXPECT_THROW(io::load_snapshot("/nonexistent/snapshot.json"), DataError);
}

// ---- command line ----

TEST_F(Cli, GenDataWritesCsvAndSidecarDeterministically) {
  ASSERT_EQ(run("gen-data --out a"), 0);
  const auto rows = lines(root_ / "a/dataset.csv");
  ASSERT_EQ(rows.size(), 51u);
  EXPECT_EQ(std::count(rows[1].begin(), rows[1].end(), ','), 19);
  const json side = json::parse(slurp(root_ / "a/dataset.json"));
  EXPECT_EQ(side["seed"], 0);
  EXPECT_EQ(side["dataset"]["source"], "uniform");
  ASSERT_EQ(run("gen-data --out b"), 0);
  EXPECT_EQ(slurp(root_ / "a/dataset.csv"), slurp(root_ / "b/dataset.csv"));
  EXPECT_EQ(slurp(root_ / "a/dataset.csv").find('\r'), std::string::npos);
}

TEST_F(Cli, MalformedConfigExitsWithConfigError) {
  std::ofstream(root_ / "broken.json") << "{\"dataset\": {\"source\": ";
  std::string out;
  EXPECT_EQ(run("gen-data --config broken.json", &out), 2);
  EXPECT_NE(out.find("config"), std::string::npos);
  write_config("typo.json", {{"datset", json::object()}});
  EXPECT_EQ(run("train --config typo.json", &out), 2);
  EXPECT_NE(out.find("datset"), std::string::npos) << out;
  EXPECT_EQ(run("train --epochs many"), 2);
  EXPECT_EQ(run("frobnicate"), 2);
}

TEST_F(Cli, TrainDefaultConfigWritesArtifacts) {
  ASSERT_EQ(run("train --out run"), 0);
  const auto rows = lines(root_ / "run/epochs.csv");
  ASSERT_EQ(rows.size(), 101u);
  EXPECT_EQ(rows[0], "epoch,recon,kl_1,kl_2,kl_3,ph,mi,total");
  const json report = json::parse(slurp(root_ / "run/report.json"));
  EXPECT_EQ(report["status"], "ok");
  EXPECT_EQ(report["epochs"], 100);
  EXPECT_EQ(report["seed"], 1);
  EXPECT_TRUE(report.contains("wall_seconds"));
  EXPECT_NO_THROW(parse_run_config(report["config"]));
  const io::Snapshot snap = io::load_snapshot(root_ / "run/snapshot.json");
  EXPECT_EQ(snap.config.branches, 3u);
  EXPECT_EQ(snap.config.input_dim, 20u);
}

TEST_F(Cli, ReportEchoReproducesRun) {
  write_config("c.json", small_config("first"));
  ASSERT_EQ(run("train --config c.json"), 0);
  json echo = json::parse(slurp(root_ / "first/report.json"))["config"];
  echo["output_dir"] = "second";
  write_config("echo.json", echo);
  ASSERT_EQ(run("train --config echo.json"), 0);
  EXPECT_EQ(slurp(root_ / "first/epochs.csv"), slurp(root_ / "second/epochs.csv"));
  EXPECT_EQ(slurp(root_ / "first/snapshot.json"), slurp(root_ / "second/snapshot.json"));
}

TEST_F(Cli, ZeroEpochsWritesHeaderAndInitSnapshot) {
  ASSERT_EQ(run("train --epochs 0 --s-max 2 --out z"), 0);
  EXPECT_EQ(lines(root_ / "z/epochs.csv"), std::vector<std::string>{"epoch,recon,kl_1,kl_2,ph,mi,total"});
  const io::Snapshot snap = io::load_snapshot(root_ / "z/snapshot.json");
  ModelConfig m = snap.config;
  EXPECT_EQ(snap.params.flatten(), init_params(m).flatten());
}

TEST_F(Cli, FlagsOverrideConfig) {
  write_config("c.json", small_config("ignored"));
  ASSERT_EQ(run("train --config c.json --epochs 3 --seed 9 --amplitude 2 --lr 0.001 --batch-size 7 --out f"), 0);
  const json report = json::parse(slurp(root_ / "f/report.json"));
  EXPECT_EQ(report["config"]["optimizer"]["epochs"], 3);
  EXPECT_EQ(report["config"]["optimizer"]["batch_size"], 7);
  EXPECT_EQ(report["config"]["optimizer"]["lr"], 0.001);
  EXPECT_EQ(report["config"]["model"]["amplitude"], 2.0);
  EXPECT_EQ(report["seed"], 9);
  EXPECT_EQ(lines(root_ / "f/epochs.csv").size(), 4u);
  EXPECT_FALSE(fs::exists(root_ / "ignored"));
}

TEST_F(Cli, MissingDatasetFileIsDataErrorNamingPath) {
  write_config("idx.json", {{"dataset", {{"source", "idx_file"}, {"path", "no/such/images.idx"}}},
                            {"output_dir", "img"}});
  std::string out;
  EXPECT_EQ(run("train --config idx.json", &out), 3);
  EXPECT_NE(out.find("no/such/images.idx"), std::string::npos) << out;
}

TEST_F(Cli, NumericalFailureExitsFourAndKeepsPartialLogs) {
  ASSERT_EQ(run("train --lr 1e300 --epochs 5 --out boom"), 4);
  const auto rows = lines(root_ / "boom/epochs.csv");
  ASSERT_FALSE(rows.empty());
  EXPECT_EQ(rows[0].rfind("epoch,", 0), 0u);
  const json report = json::parse(slurp(root_ / "boom/report.json"));
  EXPECT_EQ(report["status"], "numerical failure");
  EXPECT_NE(report["error"].get<std::string>().find("epoch"), std::string::npos);
}

TEST_F(Cli, ReconstructFromSnapshot) {
  write_config("c.json", small_config("r"));
  ASSERT_EQ(run("train --config c.json"), 0);
  ASSERT_EQ(run("reconstruct --config c.json --snapshot r/snapshot.json --repeats 3"), 0);
  EXPECT_EQ(lines(root_ / "r/reconstruction.csv").size(), 151u);
  EXPECT_EQ(lines(root_ / "r/density_reconstruction.csv").size(), 21u);
  EXPECT_EQ(lines(root_ / "r/density_truth.csv")[0], "bin_low,bin_high,mass");

  write_config("wide.json", json{{"dataset", {{"n_features", 7}}}, {"output_dir", "r"}});
  EXPECT_EQ(run("reconstruct --config wide.json --snapshot r/snapshot.json"), 2);
}

TEST_F(Cli, CompareWritesTableAndDensities) {
  write_config("c.json", small_config("cmp"));
  ASSERT_EQ(run("compare --config c.json"), 0);
  const auto rows = lines(root_ / "cmp/comparison.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "S,A,seed,l1_distance,stabilized_loss,wall_seconds,label");
  EXPECT_NE(rows[1].find("VAE baseline"), std::string::npos);
  EXPECT_NE(rows[2].find("PH-VAE"), std::string::npos);
  for (const char* f : {"density_truth.csv", "density_best.csv", "density_baseline.csv", "compare_report.json"}) {
    EXPECT_TRUE(fs::exists(root_ / "cmp" / f)) << f;
  }
  const json report = json::parse(slurp(root_ / "cmp/compare_report.json"));
  EXPECT_EQ(report["baseline"]["S"], 1);

  // identical invocation, identical table apart from timing
  auto strip_timing = [](std::vector<std::string> rs) {
    for (auto& r : rs) {
      std::vector<std::string> f;
      std::stringstream ss(r);
      for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
      f[5] = "";
      r.clear();
      for (const auto& x : f) r += x + ",";
    }
    return rs;
  };
  write_config("c2.json", [] {
    json j = small_config("cmp2");
    return j;
  }());
  ASSERT_EQ(run("compare --config c2.json"), 0);
  EXPECT_EQ(strip_timing(rows), strip_timing(lines(root_ / "cmp2/comparison.csv")));
  EXPECT_EQ(slurp(root_ / "cmp/density_best.csv"), slurp(root_ / "cmp2/density_best.csv"));
}

TEST_F(Cli, SingleCellCompare) {
  write_config("c.json", small_config("one"));
  ASSERT_EQ(run("compare --config c.json --s-max 1 --amplitude 3 --seed 4"), 0);
  const auto rows = lines(root_ / "one/comparison.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].rfind("1,3,4,", 0), 0u) << rows[1];
}

TEST_F(Cli, WritesNothingOutsideOutputDir) {
  write_config("c.json", small_config("only"));
  const auto before = listing(root_);
  ASSERT_EQ(run("train --config c.json"), 0);
  ASSERT_EQ(run("reconstruct --config c.json --snapshot only/snapshot.json --repeats 2"), 0);
  ASSERT_EQ(run("compare --config c.json"), 0);
  ASSERT_EQ(run("gen-data --config c.json"), 0);
  for (const auto& p : listing(root_)) {
    const bool old = std::find(before.begin(), before.end(), p) != before.end();
    EXPECT_TRUE(old || p.begin()->string() == "only") << p;
  }
}

TEST_F(Cli, SelfcheckPasses) {
  std::string out;
  ASSERT_EQ(run("selfcheck", &out), 0) << out;
  EXPECT_NE(out.find("PASS gradient check"), std::string::npos);
  EXPECT_NE(out.find("PASS PH identities"), std::string::npos);
  EXPECT_NE(out.find("PASS IDX"), std::string::npos);
  EXPECT_EQ(out.find("FAIL"), std::string::npos);
}
