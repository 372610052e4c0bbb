#ifndef PHVAE_SELFCHECK_HPP
#define PHVAE_SELFCHECK_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "phvae/grad_check.hpp"
#include "phvae/model.hpp"

namespace phvae {

struct GradCheckCase {
  ModelConfig model;
  std::size_t batch_rows = 2;
  std::uint64_t seed = 0;
};

/// Random small configurations: dims in [1, 16], S in {1, 2, 3}, A in {0, 1, 3}.
std::vector<GradCheckCase> random_gradcheck_cases(std::size_t count, std::uint64_t seed);

/// Central-difference check of the full training loss (recon + PH) against
/// backpropagation, on jittered parameters and a random batch with eps fixed.
ad::GradCheckResult<double> check_model_gradients(const GradCheckCase& c, double h = 1e-5);

struct IdentityResiduals {
  double total_split = 0.0;  // |total - recon - ph|
  double ph_mean = 0.0;      // |ph - mean(KL_s)|
  double mi_split = 0.0;     // |ph - mi - base_kl|
};

/// Worst residuals of the loss identities over `trials` random stat sets.
IdentityResiduals divergence_identity_residuals(std::size_t trials, std::uint64_t seed);

/// Parses a hand-built IDX file, writes it back and reparses; true when the
/// pixels match and both byte strings are identical.
bool idx_roundtrip_ok();

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Gradient checks, loss identities and the IDX round-trip. Prints one line
/// per check to `log` when given.
std::vector<CheckResult> run_selfcheck(std::ostream* log = nullptr);

}  // namespace phvae

#endif  // PHVAE_SELFCHECK_HPP
