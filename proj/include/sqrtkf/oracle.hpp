#pragma once

// Independent references used to check the square-root filter and its
// derivatives: central finite differences, the textbook covariance-form
// Kalman filter and the classical QR tangent with an explicit L^{-1}.
// None of these share code paths with triangularize() or the dual engine.

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sqrtkf/kalman.hpp"
#include "sqrtkf/matrix.hpp"
#include "sqrtkf/triangularize.hpp"

namespace sqrtkf::oracle {

struct FdConfig {
  double step = 1e-6;    // base step h
  bool relative = true;  // h_i = step * (1 + |theta_i|)

  void validate() const;
  double step_at(double x) const;
};

/// Raised when the objective throws at a perturbed point; names the entry.
class FdEvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Differences are taken in long double, so an extended-precision objective
/// such as dense_loglik_extended() keeps its extra digits.
using Objective = std::function<long double(const ModelParams&)>;

/// Central differences (f(theta + h e_i) - f(theta - h e_i)) / 2h per entry.
ModelParams fd_gradient(const Objective& f, const ModelParams& params, const FdConfig& cfg = {});

/// Central difference of a scalar function.
double fd_derivative(const std::function<double(double)>& f, double x, const FdConfig& cfg = {});

struct DenseFilterResult {
  std::vector<Matrix> means;        // filtered means x_{t|t}
  std::vector<Matrix> covariances;  // filtered covariances P_{t|t}
  std::vector<double> loglik_terms;
  double total_loglik = 0.0;
};

/// Covariance-form filter with P = s0 s0^T, U = u u^T, V = v v^T:
///     P <- A P A^T + U,  P_nu = B P B^T + V,  K = P B^T P_nu^{-1},
///     x <- x + K nu,     P <- P - K P_nu K^T.
/// Throws DegenerateInnovationError if P_nu is not positive definite.
DenseFilterResult dense_filter(const ModelParams& params, std::span<const Matrix> observations);

/// Total log-likelihood of dense_filter() evaluated in long double. Used as the
/// finite-difference objective: at h ~ 1e-6 the double-precision likelihood
/// leaves ~1e-9 of rounding noise in each difference quotient.
long double dense_loglik_extended(const ModelParams& params, std::span<const Matrix> observations);

/// Classical QR tangent L [tril(K + K^T) - diag(K)] with K = L^{-1} dM Q
/// formed through an explicit triangular inverse. Throws SingularSystemError
/// if a diagonal entry of L is exactly zero; near-singular L is inverted
/// anyway, which is the failure mode this oracle exists to show.
Matrix classical_qr_jvp(const TriangularizationResult& res, const Matrix& dm);

}  // namespace sqrtkf::oracle
