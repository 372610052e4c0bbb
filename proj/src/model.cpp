#include "phvae/model.hpp"

#include <cmath>
#include <string>

#include "phvae/errors.hpp"

namespace phvae {

void ModelConfig::validate() const {
  if (input_dim == 0 || hidden_dim == 0 || latent_dim == 0) {
    throw ConfigError("model: input_dim, hidden_dim and latent_dim must be >= 1");
  }
  if (branches == 0) throw ConfigError("model: branch count S must be >= 1");
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) throw ConfigError("model: amplitude A must be >= 0");
}

std::size_t PhVaeParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const auto& a) { n += static_cast<std::size_t>(a.size()); });
  return n;
}

Eigen::VectorXd PhVaeParams::flatten() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index offset = 0;
  for_each([&](const std::string&, const auto& a) {
    flat.segment(offset, a.size()) = Eigen::Map<const Eigen::VectorXd>(a.data(), a.size());
    offset += a.size();
  });
  return flat;
}

void PhVaeParams::unflatten(const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(parameter_count())) {
    throw DimensionError("unflatten: expected " + std::to_string(parameter_count()) + " values, got " +
                         std::to_string(flat.size()));
  }
  Eigen::Index offset = 0;
  for_each([&](const std::string&, auto& a) {
    Eigen::Map<Eigen::VectorXd>(a.data(), a.size()) = flat.segment(offset, a.size());
    offset += a.size();
  });
}

PhVaeParams PhVaeParams::zeros_like() const {
  PhVaeParams z = *this;
  z.for_each([](const std::string&, auto& a) { a.setZero(); });
  return z;
}

bool PhVaeParams::all_finite() const {
  bool ok = true;
  for_each([&](const std::string&, const auto& a) { ok = ok && a.allFinite(); });
  return ok;
}

namespace {

DenseLayer init_layer(std::size_t out, std::size_t in, Rng& rng) {
  DenseLayer layer;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  layer.W.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  for (Eigen::Index r = 0; r < layer.W.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.W.cols(); ++c) layer.W(r, c) = rng.uniform(-bound, bound);
  }
  layer.b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out));
  return layer;
}

void check_layer(const DenseLayer& layer, std::size_t out, std::size_t in, const std::string& name) {
  if (layer.W.rows() != static_cast<Eigen::Index>(out) || layer.W.cols() != static_cast<Eigen::Index>(in) ||
      layer.b.size() != static_cast<Eigen::Index>(out)) {
    throw DimensionError(name + ": expected W " + std::to_string(out) + "x" + std::to_string(in) + ", got " +
                         std::to_string(layer.W.rows()) + "x" + std::to_string(layer.W.cols()));
  }
}

DenseVars bind_layer(Tape& tape, const DenseLayer& layer) {
  return {tape.leaf(layer.W), tape.vector_leaf(layer.b)};
}

void collect(const DenseVars& vars, DenseLayer& out) {
  out.W = vars.W.grad();
  out.b = vars.b.grad().transpose();
}

}  // namespace

PhVaeParams init_params(const ModelConfig& config) {
  config.validate();
  Rng rng = Rng::stream(config.seed, "init");
  PhVaeParams p;
  p.head_mu = init_layer(config.latent_dim, config.hidden_dim, rng);
  p.head_logvar = init_layer(config.latent_dim, config.hidden_dim, rng);
  if (config.decoder_hidden > 0) {
    p.decoder_hidden = init_layer(config.decoder_hidden, config.latent_dim, rng);
    p.decoder = init_layer(config.input_dim, config.decoder_hidden, rng);
  } else {
    p.decoder = init_layer(config.input_dim, config.latent_dim, rng);
  }
  for (std::size_t s = 0; s < config.branches; ++s) {
    p.encoders.push_back(init_layer(config.hidden_dim, config.input_dim, rng));
  }
  return p;
}

void check_compatible(const PhVaeParams& params, const ModelConfig& config) {
  if (params.encoders.size() != config.branches) {
    throw DimensionError("params carry " + std::to_string(params.encoders.size()) + " branches, config has S=" +
                         std::to_string(config.branches));
  }
  for (std::size_t s = 0; s < params.encoders.size(); ++s) {
    check_layer(params.encoders[s], config.hidden_dim, config.input_dim, "enc." + std::to_string(s + 1));
  }
  check_layer(params.head_mu, config.latent_dim, config.hidden_dim, "head.mu");
  check_layer(params.head_logvar, config.latent_dim, config.hidden_dim, "head.logvar");
  if (config.decoder_hidden > 0) {
    if (!params.decoder_hidden) throw DimensionError("params lack the decoder hidden layer");
    check_layer(*params.decoder_hidden, config.decoder_hidden, config.latent_dim, "dec.hidden");
    check_layer(params.decoder, config.input_dim, config.decoder_hidden, "dec");
  } else {
    if (params.decoder_hidden) throw DimensionError("params carry an unexpected decoder hidden layer");
    check_layer(params.decoder, config.input_dim, config.latent_dim, "dec");
  }
}

ParamVars bind(Tape& tape, const PhVaeParams& params) {
  ParamVars v;
  for (const auto& e : params.encoders) v.encoders.push_back(bind_layer(tape, e));
  v.head_mu = bind_layer(tape, params.head_mu);
  v.head_logvar = bind_layer(tape, params.head_logvar);
  if (params.decoder_hidden) v.decoder_hidden = bind_layer(tape, *params.decoder_hidden);
  v.decoder = bind_layer(tape, params.decoder);
  return v;
}

PhVaeParams gradients(const ParamVars& vars, const PhVaeParams& like) {
  PhVaeParams g = like;
  for (std::size_t s = 0; s < vars.encoders.size(); ++s) collect(vars.encoders[s], g.encoders[s]);
  collect(vars.head_mu, g.head_mu);
  collect(vars.head_logvar, g.head_logvar);
  if (vars.decoder_hidden) collect(*vars.decoder_hidden, *g.decoder_hidden);
  collect(vars.decoder, g.decoder);
  return g;
}

Gaussian encode_branch(const Var& x_power, std::size_t branch, const ParamVars& params,
                       ad::Activation activation) {
  if (branch >= params.encoders.size()) {
    throw DimensionError("encode_branch: branch " + std::to_string(branch) + " out of range");
  }
  const auto& enc = params.encoders[branch];
  const Var h = ad::activation(ad::affine(x_power, enc.W, enc.b), activation);
  return {ad::affine(h, params.head_mu.W, params.head_mu.b),
          ad::affine(h, params.head_logvar.W, params.head_logvar.b)};
}

Gaussian aggregate_latent(std::span<const Gaussian> branches) {
  if (branches.empty()) throw DimensionError("aggregate_latent: empty branch list");
  std::vector<Var> logvars;
  logvars.reserve(branches.size());
  Var mu_sum = branches.front().mu;
  logvars.push_back(branches.front().logvar);
  for (const auto& b : branches.subspan(1)) {
    mu_sum = mu_sum + b.mu;
    logvars.push_back(b.logvar);
  }
  const double inv = 1.0 / static_cast<double>(branches.size());
  return {inv * mu_sum, ad::logsumexp_branches(logvars)};
}

Var reparameterize(const Gaussian& latent, double amplitude, const Eigen::MatrixXd& eps) {
  const Var& mu = latent.mu;
  if (eps.rows() != mu.rows() || eps.cols() != mu.cols()) {
    throw DimensionError("reparameterize: eps shape does not match mu " + ad::shape_string(mu));
  }
  const Var noise = mu.tape().constant(amplitude * eps, mu.rank());
  return mu + ad::mul(noise, ad::exp(0.5 * latent.logvar));
}

Var decode(const Var& z, const ParamVars& params, const ModelConfig& config) {
  Var h = z;
  if (params.decoder_hidden) {
    h = ad::relu(ad::affine(h, params.decoder_hidden->W, params.decoder_hidden->b));
  }
  return ad::activation(ad::affine(h, params.decoder.W, params.decoder.b), config.decoder_activation);
}

namespace {

Eigen::MatrixXd draw_eps(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd eps(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) eps(r, c) = rng.normal();
  }
  return eps;
}

}  // namespace

ForwardPass forward(Tape& tape, const data::ExpandedBatch& batch, const ParamVars& params,
                    const ModelConfig& config, double amplitude, Rng& eps_rng) {
  if (batch.branches() != config.branches || params.encoders.size() != config.branches) {
    throw DimensionError("forward: batch has " + std::to_string(batch.branches()) + " powers, model expects S=" +
                         std::to_string(config.branches));
  }
  ForwardPass out;
  out.stats.per_branch.reserve(config.branches);
  for (std::size_t s = 0; s < config.branches; ++s) {
    const Var x = tape.constant(batch.x_powers[s]);
    out.stats.per_branch.push_back(encode_branch(x, s, params, config.encoder_activation));
  }
  out.stats.aggregated = aggregate_latent(out.stats.per_branch);
  const Eigen::MatrixXd eps =
      draw_eps(batch.rows(), static_cast<Eigen::Index>(config.latent_dim), eps_rng);
  out.z = reparameterize(out.stats.aggregated, amplitude, eps);
  out.reconstruction = decode(out.z, params, config);
  out.target = tape.constant(batch.target());
  return out;
}

StepResult loss_and_gradients(const PhVaeParams& params, const ModelConfig& config,
                              const data::ExpandedBatch& batch, Rng& eps_rng) {
  Tape tape;
  const ParamVars vars = bind(tape, params);
  const ForwardPass pass = forward(tape, batch, vars, config, config.amplitude, eps_rng);
  const auto terms = total_loss(pass.reconstruction, pass.target, pass.stats.per_branch);
  tape.backward(terms.total);
  return {terms.breakdown(), gradients(vars, params)};
}

Eigen::MatrixXd reconstruct_batch(const PhVaeParams& params, const ModelConfig& config,
                                  const Eigen::MatrixXd& normalized, double amplitude, Rng& eps_rng) {
  check_compatible(params, config);
  const auto batch = data::polynomial_expand(normalized, config.branches);
  Tape tape;
  const ParamVars vars = bind(tape, params);
  return forward(tape, batch, vars, config, amplitude, eps_rng).reconstruction.value();
}

Eigen::MatrixXd generate(const PhVaeParams& params, const ModelConfig& config, std::size_t count,
                         double amplitude, Rng& eps_rng) {
  check_compatible(params, config);
  Tape tape;
  const ParamVars vars = bind(tape, params);
  const Eigen::MatrixXd eps =
      draw_eps(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(config.latent_dim), eps_rng);
  const Var z = tape.constant(amplitude * eps);
  return decode(z, vars, config).value();
}

}  // namespace phvae
