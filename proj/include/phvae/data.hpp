#ifndef PHVAE_DATA_HPP
#define PHVAE_DATA_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "phvae/rng.hpp"

namespace phvae::data {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct NormalizedVector {
  Vector values;
  double min = 0.0;
  double max = 0.0;
  bool constant = false;  // max == min; values are all zero
};

/// Maps y into [0, 1] with (y - min) / (max - min). A constant vector maps to
/// zeros and sets `constant`. Throws DataError on non-finite entries.
NormalizedVector minmax_normalize(const Eigen::Ref<const Vector>& y);

/// Column-wise min-max normalization of a samples x features matrix.
struct NormalizedMatrix {
  Matrix values;
  Eigen::RowVectorXd min;
  Eigen::RowVectorXd max;
  std::vector<Eigen::Index> constant_columns;

  /// Maps normalized values back to the raw scale of each column.
  Matrix denormalize(const Matrix& normalized) const;
};

NormalizedMatrix normalize_columns(const Matrix& raw);

/// Elementwise powers x^1 .. x^S of one normalized minibatch.
struct ExpandedBatch {
  std::vector<Matrix> x_powers;
  std::vector<std::size_t> indices;  // source rows of the batch, in order

  const Matrix& target() const { return x_powers.front(); }
  std::size_t branches() const { return x_powers.size(); }
  Eigen::Index rows() const { return x_powers.empty() ? 0 : x_powers.front().rows(); }
};

/// Builds [x, x^2, ..., x^S] by cumulative elementwise multiplication.
/// Throws ConfigError when S == 0 and DataError when an entry leaves [0, 1].
ExpandedBatch polynomial_expand(const Matrix& x, std::size_t branches);

/// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng);

/// Shuffles rows and splits them into expanded batches; the final short batch is kept.
std::vector<ExpandedBatch> make_batches(const Matrix& normalized, std::size_t batch_size,
                                        std::size_t branches, Rng& rng);

std::vector<ExpandedBatch> make_batches(const Matrix& normalized, std::size_t batch_size,
                                        std::size_t branches, std::uint64_t seed);

}  // namespace phvae::data

#endif  // PHVAE_DATA_HPP
