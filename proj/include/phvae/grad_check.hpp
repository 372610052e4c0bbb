#ifndef PHVAE_GRAD_CHECK_HPP
#define PHVAE_GRAD_CHECK_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <Eigen/Dense>

namespace phvae::ad {

template <typename Scalar>
struct GradCheckResult {
  Scalar max_rel_error = Scalar(0);
  Eigen::Index worst_index = -1;
  Scalar analytic = Scalar(0);
  Scalar numeric = Scalar(0);
};

/// Compares an analytic gradient against central differences
/// (f(θ + h e_i) - f(θ - h e_i)) / 2h for every coordinate.
///
/// `value_and_grad(θ)` returns {f(θ), ∇f(θ)}; it must be deterministic in θ.
/// The error per coordinate is |analytic - numeric| / max(1, |analytic|).
/// A non-finite function value yields a NaN max_rel_error.
template <typename Scalar, typename F>
GradCheckResult<Scalar> grad_check(F&& value_and_grad,
                                   const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& theta,
                                   Scalar h = Scalar(1e-5)) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  GradCheckResult<Scalar> result;
  const auto [f0, analytic] = value_and_grad(theta);
  if (!std::isfinite(f0) || !analytic.allFinite()) {
    result.max_rel_error = std::numeric_limits<Scalar>::quiet_NaN();
    return result;
  }
  Vector probe = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + h;
    const Scalar up = value_and_grad(probe).first;
    probe[i] = theta[i] - h;
    const Scalar down = value_and_grad(probe).first;
    probe[i] = theta[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      result.max_rel_error = std::numeric_limits<Scalar>::quiet_NaN();
      result.worst_index = i;
      return result;
    }
    const Scalar numeric = (up - down) / (Scalar(2) * h);
    const Scalar err = std::abs(analytic[i] - numeric) / std::max(Scalar(1), std::abs(analytic[i]));
    if (err > result.max_rel_error || result.worst_index < 0) {
      result.max_rel_error = std::max(result.max_rel_error, err);
      result.worst_index = i;
      result.analytic = analytic[i];
      result.numeric = numeric;
    }
  }
  return result;
}

}  // namespace phvae::ad

#endif  // PHVAE_GRAD_CHECK_HPP
