#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace sqrtkf {

/// Operand dimensions are not conformable.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input violates a value-level precondition (non-finite entries, empty shapes,
/// out-of-range scalars).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A triangular system has a pivot at or below the rank tolerance.
class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The innovation covariance P_nu = B P B^T + V is (numerically) singular, so
/// the log-likelihood term is undefined. Carries the 1-based time index when
/// raised from inside a filter run.
class DegenerateInnovationError : public SingularSystemError {
 public:
  explicit DegenerateInnovationError(const std::string& what,
                                     std::optional<std::size_t> time_index = std::nullopt)
      : SingularSystemError(what), time_index_(time_index) {}

  std::optional<std::size_t> time_index() const noexcept { return time_index_; }

 private:
  std::optional<std::size_t> time_index_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sqrtkf
