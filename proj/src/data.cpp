#include "phvae/data.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "phvae/errors.hpp"

namespace phvae::data {

NormalizedVector minmax_normalize(const Eigen::Ref<const Vector>& y) {
  if (y.size() == 0) throw DataError("minmax_normalize: empty input");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) {
      throw DataError("minmax_normalize: non-finite value at index " + std::to_string(i));
    }
  }
  NormalizedVector out;
  out.min = y.minCoeff();
  out.max = y.maxCoeff();
  if (out.max == out.min) {
    out.values = Vector::Zero(y.size());
    out.constant = true;
    return out;
  }
  out.values = (y.array() - out.min) / (out.max - out.min);
  return out;
}

Matrix NormalizedMatrix::denormalize(const Matrix& normalized) const {
  if (normalized.cols() != min.size()) {
    throw DimensionError("denormalize: expected " + std::to_string(min.size()) + " columns, got " +
                         std::to_string(normalized.cols()));
  }
  Matrix out = normalized;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    out.col(c) = out.col(c).array() * (max[c] - min[c]) + min[c];
  }
  return out;
}

NormalizedMatrix normalize_columns(const Matrix& raw) {
  NormalizedMatrix out;
  out.values.resize(raw.rows(), raw.cols());
  out.min.resize(raw.cols());
  out.max.resize(raw.cols());
  for (Eigen::Index c = 0; c < raw.cols(); ++c) {
    NormalizedVector col;
    try {
      col = minmax_normalize(raw.col(c));
    } catch (const DataError& e) {
      throw DataError("column " + std::to_string(c) + ": " + e.what());
    }
    out.values.col(c) = col.values;
    out.min[c] = col.min;
    out.max[c] = col.max;
    if (col.constant) out.constant_columns.push_back(c);
  }
  return out;
}

ExpandedBatch polynomial_expand(const Matrix& x, std::size_t branches) {
  if (branches == 0) throw ConfigError("polynomial_expand: branch count S must be >= 1");
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DataError("polynomial_expand: entry " + std::to_string(i) + " = " + std::to_string(v) +
                      " lies outside [0, 1]");
    }
  }
  ExpandedBatch out;
  out.x_powers.reserve(branches);
  out.x_powers.push_back(x);
  for (std::size_t s = 1; s < branches; ++s) {
    out.x_powers.push_back(out.x_powers.back().cwiseProduct(x));
  }
  out.indices.resize(static_cast<std::size_t>(x.rows()));
  std::iota(out.indices.begin(), out.indices.end(), std::size_t{0});
  return out;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

std::vector<ExpandedBatch> make_batches(const Matrix& normalized, std::size_t batch_size,
                                        std::size_t branches, Rng& rng) {
  if (batch_size == 0) throw ConfigError("make_batches: batch_size must be >= 1");
  if (normalized.rows() == 0) throw DataError("make_batches: empty dataset");
  const auto n = static_cast<std::size_t>(normalized.rows());
  const auto order = shuffled_indices(n, rng);

  std::vector<ExpandedBatch> batches;
  batches.reserve((n + batch_size - 1) / batch_size);
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t len = std::min(batch_size, n - start);
    Matrix rows(static_cast<Eigen::Index>(len), normalized.cols());
    for (std::size_t k = 0; k < len; ++k) {
      rows.row(static_cast<Eigen::Index>(k)) = normalized.row(static_cast<Eigen::Index>(order[start + k]));
    }
    auto batch = polynomial_expand(rows, branches);
    batch.indices.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(start + len));
    batches.push_back(std::move(batch));
  }
  return batches;
}

std::vector<ExpandedBatch> make_batches(const Matrix& normalized, std::size_t batch_size,
                                        std::size_t branches, std::uint64_t seed) {
  Rng rng(seed);
  return make_batches(normalized, batch_size, branches, rng);
}

}  // namespace phvae::data
