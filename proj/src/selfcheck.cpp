#include "phvae/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "phvae/data.hpp"
#include "phvae/idx.hpp"
#include "phvae/io.hpp"
#include "phvae/loss.hpp"
#include "phvae/rng.hpp"

namespace phvae {

std::vector<GradCheckCase> random_gradcheck_cases(std::size_t count, std::uint64_t seed) {
  constexpr double kAmplitudes[] = {0.0, 1.0, 3.0};
  constexpr ad::Activation kEncoder[] = {ad::Activation::relu, ad::Activation::tanh, ad::Activation::sigmoid};
  Rng rng = Rng::stream(seed, "gradcheck");
  std::vector<GradCheckCase> cases;
  for (std::size_t i = 0; i < count; ++i) {
    GradCheckCase c;
    c.model.input_dim = 1 + rng.below(16);
    c.model.hidden_dim = 1 + rng.below(16);
    c.model.latent_dim = 1 + rng.below(16);
    c.model.branches = 1 + rng.below(3);
    c.model.amplitude = kAmplitudes[rng.below(3)];
    c.model.encoder_activation = kEncoder[rng.below(3)];
    c.model.decoder_activation = rng.below(2) ? ad::Activation::sigmoid : ad::Activation::tanh;
    c.model.decoder_hidden = rng.below(3) == 0 ? 1 + rng.below(16) : 0;
    c.model.seed = rng();
    c.batch_rows = 1 + rng.below(4);
    c.seed = rng();
    cases.push_back(c);
  }
  return cases;
}

ad::GradCheckResult<double> check_model_gradients(const GradCheckCase& c, double h) {
  Rng rng = Rng::stream(c.seed, "gradcheck-data");
  PhVaeParams params = init_params(c.model);
  // Jitter so biases are nonzero and no unit sits exactly at a relu kink.
  params.for_each([&](const std::string&, auto& a) {
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] += rng.uniform(-0.3, 0.3);
  });
  Eigen::MatrixXd x(static_cast<Eigen::Index>(c.batch_rows), static_cast<Eigen::Index>(c.model.input_dim));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
  const auto batch = data::polynomial_expand(x, c.model.branches);
  const Rng eps_proto = Rng::stream(c.seed, "gradcheck-eps");

  auto value_and_grad = [&](const Eigen::VectorXd& theta) {
    PhVaeParams p = params;
    p.unflatten(theta);
    Rng eps = eps_proto;
    StepResult step = loss_and_gradients(p, c.model, batch, eps);
    return std::pair<double, Eigen::VectorXd>(step.loss.total, step.grads.flatten());
  };
  return ad::grad_check<double>(value_and_grad, params.flatten(), h);
}

IdentityResiduals divergence_identity_residuals(std::size_t trials, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "identities");
  IdentityResiduals worst;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto branches = 1 + static_cast<std::size_t>(rng.below(5));
    const auto rows = static_cast<Eigen::Index>(1 + rng.below(4));
    const auto latent = static_cast<Eigen::Index>(1 + rng.below(8));
    const auto width = static_cast<Eigen::Index>(1 + rng.below(8));
    auto random = [&](Eigen::Index r, Eigen::Index c, double lo, double hi) {
      Eigen::MatrixXd m(r, c);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
      return m;
    };
    Tape tape;
    std::vector<Gaussian> stats;
    for (std::size_t s = 0; s < branches; ++s) {
      stats.push_back({tape.leaf(random(rows, latent, -3, 3)), tape.leaf(random(rows, latent, -3, 3))});
    }
    const Var recon = tape.leaf(random(rows, width, 0, 1));
    const Var target = tape.constant(random(rows, width, 0, 1));
    const auto terms = total_loss(recon, target, stats);
    const LossBreakdown b = terms.breakdown();
    const auto split = mi_decomposition(b.kl_per_branch);
    double kl_sum = 0.0;
    for (double k : b.kl_per_branch) kl_sum += k;
    worst.total_split = std::max(worst.total_split, std::abs(b.total - b.recon - b.ph));
    worst.ph_mean = std::max(worst.ph_mean, std::abs(b.ph - kl_sum / static_cast<double>(branches)));
    worst.mi_split = std::max(worst.mi_split, std::abs(b.ph - split.mi - split.base_kl));
  }
  return worst;
}

bool idx_roundtrip_ok() {
  const std::string bytes{"\x00\x00\x08\x03\x00\x00\x00\x01\x00\x00\x00\x02\x00\x00\x00\x02\x00\xff\xff\x00", 20};
  std::istringstream in(bytes);
  const auto images = data::read_idx_images(in);
  Eigen::MatrixXd expected(1, 4);
  expected << 0, 1, 1, 0;
  if (images.pixels != expected) return false;
  std::ostringstream out;
  data::write_idx_images(out, images);
  std::istringstream again(out.str());
  const auto reparsed = data::read_idx_images(again);
  return out.str() == bytes && reparsed.pixels == images.pixels;
}

std::vector<CheckResult> run_selfcheck(std::ostream* log) {
  std::vector<CheckResult> results;
  auto report = [&](CheckResult r) {
    if (log) *log << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    results.push_back(std::move(r));
  };

  double worst = 0.0;
  bool finite = true;
  for (const auto& c : random_gradcheck_cases(20, 2024)) {
    const auto r = check_model_gradients(c);
    finite = finite && std::isfinite(r.max_rel_error);
    worst = std::max(worst, r.max_rel_error);
  }
  report({"gradient check (20 random configs)", finite && worst < 1e-4,
          "max relative error " + io::format_double(worst) + " (limit 1e-4)"});

  const auto res = divergence_identity_residuals(1000, 2024);
  const double identity = std::max({res.total_split, res.ph_mean, res.mi_split});
  report({"PH identities (1000 random stat sets)", identity < 1e-10,
          "max residual " + io::format_double(identity) + " (limit 1e-10)"});

  Tape tape;
  const double kl0 = kl_gaussian_standard(tape.leaf(Eigen::MatrixXd::Zero(1, 1)), tape.leaf(Eigen::MatrixXd::Zero(1, 1))).item();
  const double kl1 = kl_gaussian_standard(tape.leaf(Eigen::MatrixXd::Ones(1, 1)), tape.leaf(Eigen::MatrixXd::Zero(1, 1))).item();
  report({"KL unit values", kl0 == 0.0 && std::abs(kl1 - 0.5) <= 1e-12,
          "KL(0,0)=" + io::format_double(kl0) + ", KL(1,0)=" + io::format_double(kl1)});

  bool idx_ok = false;
  std::string idx_detail = "byte-stable";
  try {
    idx_ok = idx_roundtrip_ok();
    if (!idx_ok) idx_detail = "round-trip mismatch";
  } catch (const std::exception& e) {
    idx_detail = e.what();
  }
  report({"IDX parse/write round-trip", idx_ok, idx_detail});
  return results;
}

}  // namespace phvae
