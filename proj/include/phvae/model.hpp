#ifndef PHVAE_MODEL_HPP
#define PHVAE_MODEL_HPP

// Polynomial-hierarchical VAE network.
//
//   h_s    = g(W^s x^s + b^s)                s = 1..S, one encoder per power
//   mu_s   = W_mu h_s + b_mu                 heads shared across branches
//   lv_s   = W_lv h_s + b_lv
//   mu     = mean_s mu_s
//   lv     = log(mean_s exp(lv_s))           log of the mean variance
//   z      = mu + A * eps * exp(lv / 2)
//   x_hat  = f(W z + b)                      shared decoder
//
// Batches carry one sample per row; every op is row-independent.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phvae/autodiff.hpp"
#include "phvae/data.hpp"
#include "phvae/loss.hpp"
#include "phvae/rng.hpp"

namespace phvae {

using Tape = ad::Tape<double>;
using Var = ad::Var<double>;
using Gaussian = GaussianVars<double>;

struct ModelConfig {
  std::size_t input_dim = 20;
  std::size_t hidden_dim = 256;
  std::size_t latent_dim = 10;
  std::size_t branches = 3;  // S
  double amplitude = 1.0;    // A
  ad::Activation encoder_activation = ad::Activation::relu;
  ad::Activation decoder_activation = ad::Activation::sigmoid;
  std::size_t decoder_hidden = 0;  // width of an optional decoder hidden layer (relu); 0 disables it
  std::uint64_t seed = 0;

  /// Throws ConfigError on zero dims, S == 0 or negative/non-finite A.
  void validate() const;
};

struct DenseLayer {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;  // out
};

struct PhVaeParams {
  std::vector<DenseLayer> encoders;  // one per branch
  DenseLayer head_mu;
  DenseLayer head_logvar;
  std::optional<DenseLayer> decoder_hidden;
  DenseLayer decoder;

  /// Visits every array in snapshot order with (name, array&), where array
  /// is an Eigen::MatrixXd or Eigen::VectorXd. Branch names are 1-based.
  template <typename F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  std::size_t parameter_count() const;
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& flat);
  PhVaeParams zeros_like() const;
  bool all_finite() const;

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F& f) {
    for (std::size_t s = 0; s < self.encoders.size(); ++s) {
      const std::string prefix = "enc." + std::to_string(s + 1);
      f(prefix + ".W", self.encoders[s].W);
      f(prefix + ".b", self.encoders[s].b);
    }
    f(std::string("head.mu.W"), self.head_mu.W);
    f(std::string("head.mu.b"), self.head_mu.b);
    f(std::string("head.logvar.W"), self.head_logvar.W);
    f(std::string("head.logvar.b"), self.head_logvar.b);
    if (self.decoder_hidden) {
      f(std::string("dec.hidden.W"), self.decoder_hidden->W);
      f(std::string("dec.hidden.b"), self.decoder_hidden->b);
    }
    f(std::string("dec.W"), self.decoder.W);
    f(std::string("dec.b"), self.decoder.b);
  }
};

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
/// Heads and decoder are drawn before the encoders so that models differing
/// only in S share their common parameters under the same seed.
PhVaeParams init_params(const ModelConfig& config);

/// Throws DimensionError when params do not match config.
void check_compatible(const PhVaeParams& params, const ModelConfig& config);

struct DenseVars {
  Var W;
  Var b;
};

/// Parameters bound to a tape as differentiable leaves.
struct ParamVars {
  std::vector<DenseVars> encoders;
  DenseVars head_mu;
  DenseVars head_logvar;
  std::optional<DenseVars> decoder_hidden;
  DenseVars decoder;
};

ParamVars bind(Tape& tape, const PhVaeParams& params);

/// Collects leaf gradients into a parameter-shaped structure.
PhVaeParams gradients(const ParamVars& vars, const PhVaeParams& like);

struct GaussianLatentStats {
  std::vector<Gaussian> per_branch;
  Gaussian aggregated;
};

/// Branch `branch` (0-based) of the encoder applied to x^(branch+1).
Gaussian encode_branch(const Var& x_power, std::size_t branch, const ParamVars& params,
                       ad::Activation activation);

/// mu = mean of branch means; logvar = log of the mean branch variance.
Gaussian aggregate_latent(std::span<const Gaussian> branches);

/// z = mu + A * eps * exp(logvar / 2), with eps held constant.
Var reparameterize(const Gaussian& latent, double amplitude, const Eigen::MatrixXd& eps);

Var decode(const Var& z, const ParamVars& params, const ModelConfig& config);

struct ForwardPass {
  Var reconstruction;
  Var target;
  GaussianLatentStats stats;
  Var z;
};

/// Full forward pass over one expanded batch; draws one eps per sample and
/// latent dimension from `eps_rng` (row by row).
ForwardPass forward(Tape& tape, const data::ExpandedBatch& batch, const ParamVars& params,
                    const ModelConfig& config, double amplitude, Rng& eps_rng);

/// Loss and parameter gradients for one batch.
struct StepResult {
  LossBreakdown loss;
  PhVaeParams grads;
};

StepResult loss_and_gradients(const PhVaeParams& params, const ModelConfig& config,
                              const data::ExpandedBatch& batch, Rng& eps_rng);

/// Value-only reconstruction of a normalized samples x features matrix.
Eigen::MatrixXd reconstruct_batch(const PhVaeParams& params, const ModelConfig& config,
                                  const Eigen::MatrixXd& normalized, double amplitude, Rng& eps_rng);

/// Generation mode: z = A * eps pushed through the decoder.
Eigen::MatrixXd generate(const PhVaeParams& params, const ModelConfig& config, std::size_t count,
                         double amplitude, Rng& eps_rng);

}  // namespace phvae

#endif  // PHVAE_MODEL_HPP
