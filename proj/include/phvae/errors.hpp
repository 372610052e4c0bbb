#ifndef PHVAE_ERRORS_HPP
#define PHVAE_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace phvae {

/// Shapes of two operands do not conform.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A value lies outside the domain of an operation (e.g. log of a non-positive entry).
class DomainError : public std::domain_error {
 public:
  DomainError(const std::string& what, std::size_t index)
      : std::domain_error(what), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Invalid configuration or malformed spec.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data: non-finite samples, missing files, unparsable payloads.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// IDX header carries an unexpected magic number.
class IdxMagicError : public DataError {
 public:
  using DataError::DataError;
};

/// IDX payload is shorter than its header promises.
class IdxTruncatedError : public DataError {
 public:
  using DataError::DataError;
};

/// Requested downscale size does not divide the image dimensions.
class DownscaleError : public DataError {
 public:
  using DataError::DataError;
};

/// Training produced a non-finite loss or gradient.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace phvae

#endif  // PHVAE_ERRORS_HPP
