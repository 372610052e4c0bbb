#include "phvae/config.hpp"

#include <fstream>
#include <set>

#include "phvae/errors.hpp"

namespace phvae {
namespace {

using nlohmann::json;

// Reads keys of one JSON object and rejects the ones nobody asked for.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("config: '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config: " + name_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("config: unknown key '" + name_ + "." + key + "'");
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

data::DatasetSpec parse_dataset(const json& j) {
  Section s(j, "dataset");
  data::DatasetSpec d;
  std::string source = data::to_string(d.source);
  s.get("source", source);
  d.source = data::parse_source(source);
  s.get("n_samples", d.n_samples);
  s.get("n_features", d.n_features);
  s.get("seed", d.seed);
  s.get("noise_stddev", d.noise_stddev);
  s.get("path", d.path);
  s.get("downscale", d.downscale);
  s.get("limit", d.limit);
  if (const json* p = s.child("params")) {
    Section ps(*p, "dataset.params");
    ps.get("low", d.dist.low);
    ps.get("high", d.dist.high);
    ps.get("mean", d.dist.mean);
    ps.get("stddev", d.dist.stddev);
    ps.finish();
  }
  if (const json* c = s.child("cluster")) {
    Section cs(*c, "dataset.cluster");
    cs.get("n_clusters", d.cluster.n_clusters);
    cs.get("radius", d.cluster.radius);
    cs.get("stddev", d.cluster.stddev);
    cs.finish();
  }
  s.finish();
  return d;
}

void parse_model_into(const json& j, ModelConfig& m, bool allow_dims) {
  Section s(j, "model");
  if (allow_dims) {
    s.get("input_dim", m.input_dim);
    s.get("seed", m.seed);
  }
  s.get("hidden_dim", m.hidden_dim);
  s.get("latent_dim", m.latent_dim);
  s.get("branches", m.branches);
  s.get("amplitude", m.amplitude);
  s.get("decoder_hidden", m.decoder_hidden);
  std::string enc = ad::to_string(m.encoder_activation), dec = ad::to_string(m.decoder_activation);
  s.get("encoder_activation", enc);
  s.get("decoder_activation", dec);
  m.encoder_activation = ad::parse_activation(enc);
  m.decoder_activation = ad::parse_activation(dec);
  s.finish();
}

}  // namespace

void RunConfig::validate() const {
  ModelConfig m = model;
  m.input_dim = std::max<std::size_t>(m.input_dim, 1);
  m.validate();
  if (epochs > 1'000'000) throw ConfigError("config: epochs is unreasonably large");
  if (batch_size == 0) throw ConfigError("config: optimizer.batch_size must be >= 1");
  if (!(adam.lr >= 0.0)) throw ConfigError("config: optimizer.lr must be >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("config: Adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw ConfigError("config: optimizer.epsilon must be > 0");
  if (eval.seeds.empty() || eval.s_grid.empty() || eval.a_grid.empty()) {
    throw ConfigError("config: eval grids (seeds, S_grid, A_grid) must be non-empty");
  }
  for (auto s : eval.s_grid) {
    if (s == 0) throw ConfigError("config: eval.S_grid entries must be >= 1");
  }
  for (auto a : eval.a_grid) {
    if (!(a >= 0.0)) throw ConfigError("config: eval.A_grid entries must be >= 0");
  }
  if (eval.range && !(eval.range->first < eval.range->second)) {
    throw ConfigError("config: eval.range low must be < high");
  }
  if (eval.n_bins == 0 || eval.n_repeats == 0) throw ConfigError("config: eval.n_bins and n_repeats must be >= 1");
  if (output_dir.empty()) throw ConfigError("config: output_dir must not be empty");
}

TrainConfig RunConfig::train_config(std::size_t input_dim) const {
  TrainConfig t;
  t.model = model;
  t.model.input_dim = input_dim;
  t.model.seed = seed;
  t.adam = adam;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.seed = seed;
  return t;
}

CompareConfig RunConfig::compare_config() const {
  CompareConfig c;
  c.dataset = dataset;
  c.train = train_config(data::feature_count(dataset));
  c.s_values = eval.s_grid;
  c.a_values = eval.a_grid;
  c.seeds = eval.seeds;
  c.n_bins = eval.n_bins;
  c.n_repeats = eval.n_repeats;
  c.range = eval.range;
  c.threads = eval.threads;
  return c;
}

RunConfig parse_run_config(const json& j) {
  Section root(j, "config");
  RunConfig c;
  root.get("seed", c.seed);
  root.get("output_dir", c.output_dir);
  if (const json* d = root.child("dataset")) c.dataset = parse_dataset(*d);
  if (const json* m = root.child("model")) parse_model_into(*m, c.model, false);
  if (const json* o = root.child("optimizer")) {
    Section s(*o, "optimizer");
    s.get("lr", c.adam.lr);
    s.get("beta1", c.adam.beta1);
    s.get("beta2", c.adam.beta2);
    s.get("epsilon", c.adam.epsilon);
    s.get("epochs", c.epochs);
    s.get("batch_size", c.batch_size);
    s.finish();
  }
  if (const json* e = root.child("eval")) {
    Section s(*e, "eval");
    s.get("n_bins", c.eval.n_bins);
    s.get("n_repeats", c.eval.n_repeats);
    s.get("seeds", c.eval.seeds);
    s.get("S_grid", c.eval.s_grid);
    s.get("A_grid", c.eval.a_grid);
    s.get("threads", c.eval.threads);
    if (const json* r = s.child("range")) {
      if (!r->is_array() || r->size() != 2 || !(*r)[0].is_number() || !(*r)[1].is_number()) {
        throw ConfigError("config: eval.range must be [low, high]");
      }
      c.eval.range = std::make_pair((*r)[0].get<double>(), (*r)[1].get<double>());
    }
    s.finish();
  }
  root.finish();
  c.model.input_dim = data::feature_count(c.dataset);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

json to_json(const data::DatasetSpec& d) {
  json j = {{"source", data::to_string(d.source)},
            {"n_samples", d.n_samples},
            {"n_features", d.n_features},
            {"seed", d.seed},
            {"params", {{"low", d.dist.low}, {"high", d.dist.high}, {"mean", d.dist.mean}, {"stddev", d.dist.stddev}}},
            {"cluster",
             {{"n_clusters", d.cluster.n_clusters}, {"radius", d.cluster.radius}, {"stddev", d.cluster.stddev}}},
            {"noise_stddev", d.noise_stddev}};
  if (d.source == data::Source::idx_file) {
    j["path"] = d.path;
    j["downscale"] = d.downscale;
    j["limit"] = d.limit;
  }
  return j;
}

json to_json(const ModelConfig& m) {
  return {{"input_dim", m.input_dim},
          {"hidden_dim", m.hidden_dim},
          {"latent_dim", m.latent_dim},
          {"branches", m.branches},
          {"amplitude", m.amplitude},
          {"encoder_activation", ad::to_string(m.encoder_activation)},
          {"decoder_activation", ad::to_string(m.decoder_activation)},
          {"decoder_hidden", m.decoder_hidden},
          {"seed", m.seed}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig m;
  parse_model_into(j, m, true);
  m.validate();
  return m;
}

json to_json(const RunConfig& c) {
  json model = to_json(c.model);
  model.erase("input_dim");
  model.erase("seed");
  json eval = {{"n_bins", c.eval.n_bins},
               {"n_repeats", c.eval.n_repeats},
               {"seeds", c.eval.seeds},
               {"S_grid", c.eval.s_grid},
               {"A_grid", c.eval.a_grid},
               {"threads", c.eval.threads}};
  if (c.eval.range) eval["range"] = {c.eval.range->first, c.eval.range->second};
  return {{"seed", c.seed},
          {"dataset", to_json(c.dataset)},
          {"model", model},
          {"optimizer",
           {{"lr", c.adam.lr},
            {"beta1", c.adam.beta1},
            {"beta2", c.adam.beta2},
            {"epsilon", c.adam.epsilon},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size}}},
          {"eval", eval},
          {"output_dir", c.output_dir}};
}

}  // namespace phvae
