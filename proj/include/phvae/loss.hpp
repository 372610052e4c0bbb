#ifndef PHVAE_LOSS_HPP
#define PHVAE_LOSS_HPP

// Loss algebra of the polynomial-hierarchical VAE.
//
// Each encoder branch s yields a diagonal Gaussian q_s = N(mu_s, exp(logvar_s)).
// Its divergence from the standard-normal prior has the closed form
//
//   KL_s = -1/2 * sum_i (1 + logvar_i - mu_i^2 - exp(logvar_i))   (>= 0)
//
// and the hierarchical divergence is their arithmetic mean PH = (1/S) sum_s KL_s.
// The training loss is recon + PH, where recon is the summed squared error of
// the decoder output. PH splits into a base term KL_1 / S and a mutual
// information term (1/S) sum_{s>=2} KL_s.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phvae/autodiff.hpp"
#include "phvae/errors.hpp"

namespace phvae {

/// Mean and log-variance of a diagonal Gaussian, as tape nodes.
template <typename Scalar>
struct GaussianVars {
  ad::Var<Scalar> mu;
  ad::Var<Scalar> logvar;
};

struct LossBreakdown {
  double recon = 0.0;
  std::vector<double> kl_per_branch;
  double ph = 0.0;
  double mi = 0.0;
  double total = 0.0;
};

struct MiDecomposition {
  double mi = 0.0;
  double base_kl = 0.0;
};

/// Splits the hierarchical divergence into mi = (1/S) sum_{s>=2} KL_s and
/// base_kl = KL_1 / S.
inline MiDecomposition mi_decomposition(std::span<const double> kl_per_branch) {
  MiDecomposition out;
  if (kl_per_branch.empty()) return out;
  const auto count = static_cast<double>(kl_per_branch.size());
  double higher = 0.0;
  for (std::size_t s = 1; s < kl_per_branch.size(); ++s) higher += kl_per_branch[s];
  out.mi = higher / count;
  out.base_kl = kl_per_branch.front() / count;
  return out;
}

inline double ph_divergence(std::span<const double> kl_per_branch) {
  if (kl_per_branch.empty()) throw DimensionError("ph_divergence: no branches");
  return std::accumulate(kl_per_branch.begin(), kl_per_branch.end(), 0.0) /
         static_cast<double>(kl_per_branch.size());
}

/// Closed-form KL(N(mu, exp(logvar)) || N(0, I)) on plain values.
template <typename DerivedMu, typename DerivedLv>
typename DerivedMu::Scalar kl_gaussian_standard(const Eigen::MatrixBase<DerivedMu>& mu,
                                                const Eigen::MatrixBase<DerivedLv>& logvar) {
  using Scalar = typename DerivedMu::Scalar;
  if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols()) {
    throw DimensionError("kl_gaussian_standard: mu and logvar shapes differ");
  }
  if (!mu.allFinite() || !logvar.allFinite()) throw DomainError("kl_gaussian_standard: non-finite input", 0);
  return Scalar(0.5) *
         (mu.array().square() + logvar.array().exp() - (Scalar(1) + logvar.array())).sum();
}

/// Same divergence as a differentiable scalar node.
template <typename Scalar>
ad::Var<Scalar> kl_gaussian_standard(const ad::Var<Scalar>& mu, const ad::Var<Scalar>& logvar) {
  if (!mu.value().allFinite() || !logvar.value().allFinite()) {
    throw DomainError("kl_gaussian_standard: non-finite input", 0);
  }
  using ad::exp;
  using ad::square;
  using ad::sum;
  const auto inner = (square(mu) + exp(logvar)) - (Scalar(1) + logvar);
  return Scalar(0.5) * sum(inner);
}

template <typename Scalar>
ad::Var<Scalar> reconstruction_loss(const ad::Var<Scalar>& reconstruction, const ad::Var<Scalar>& target) {
  return ad::mse_sum(reconstruction, target);
}

/// Differentiable pieces of the total loss. `total` is the node to backpropagate.
template <typename Scalar>
struct LossTerms {
  ad::Var<Scalar> recon;
  std::vector<ad::Var<Scalar>> kl;
  ad::Var<Scalar> ph;
  ad::Var<Scalar> total;

  LossBreakdown breakdown() const {
    LossBreakdown b;
    b.recon = static_cast<double>(recon.item());
    for (const auto& k : kl) b.kl_per_branch.push_back(static_cast<double>(k.item()));
    b.ph = static_cast<double>(ph.item());
    b.mi = mi_decomposition(b.kl_per_branch).mi;
    b.total = static_cast<double>(total.item());
    return b;
  }
};

template <typename Scalar>
ad::Var<Scalar> ph_divergence(std::span<const GaussianVars<Scalar>> branches,
                              std::vector<ad::Var<Scalar>>* kl_out = nullptr) {
  if (branches.empty()) throw DimensionError("ph_divergence: no branches");
  std::vector<ad::Var<Scalar>> kls;
  kls.reserve(branches.size());
  for (const auto& b : branches) kls.push_back(kl_gaussian_standard(b.mu, b.logvar));
  ad::Var<Scalar> acc = kls.front();
  for (std::size_t s = 1; s < kls.size(); ++s) acc = acc + kls[s];
  auto ph = (Scalar(1) / static_cast<Scalar>(kls.size())) * acc;
  if (kl_out) *kl_out = std::move(kls);
  return ph;
}

/// recon + PH over per-branch statistics; reconstruction flows through the
/// aggregated latent while the divergence uses every branch.
template <typename Scalar>
LossTerms<Scalar> total_loss(const ad::Var<Scalar>& reconstruction, const ad::Var<Scalar>& target,
                             std::span<const GaussianVars<Scalar>> branches) {
  LossTerms<Scalar> t;
  t.recon = reconstruction_loss(reconstruction, target);
  t.ph = ph_divergence(branches, &t.kl);
  t.total = t.recon + t.ph;
  return t;
}

template <typename Scalar>
LossTerms<Scalar> total_loss(const ad::Var<Scalar>& reconstruction, const ad::Var<Scalar>& target,
                             const std::vector<GaussianVars<Scalar>>& branches) {
  return total_loss(reconstruction, target, std::span<const GaussianVars<Scalar>>(branches));
}

}  // namespace phvae

#endif  // PHVAE_LOSS_HPP
