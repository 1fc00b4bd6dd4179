#pragma once

// Square-root Kalman filter for the time-invariant linear Gaussian model
//
//     x_{t+1} = A x_t + u_t,   u_t ~ N(0, U),  U = U^{1/2} (U^{1/2})^T
//     y_t     = B x_t + v_t,   v_t ~ N(0, V),  V = V^{1/2} (V^{1/2})^T
//
// Covariances are carried as factors S with P = S S^T. Every step is one
// triangularization:
//
//     predict:  S' = T([A S  U^{1/2}])
//     update:   T([[B S, V^{1/2}], [S, 0]]) = [[L11, 0], [L21, L22]]
//               gain = L21 L11^{-1}, posterior factor = L22
//
// Noise and initial factors may be rank-deficient; only the innovation
// factor L11 has to be non-singular.

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "sqrtkf/matrix.hpp"

namespace sqrtkf {

struct ModelParams {
  Matrix a;       // d_x x d_x
  Matrix b;       // d_y x d_x
  Matrix u_sqrt;  // d_x x d_x
  Matrix v_sqrt;  // d_y x d_y
  Matrix x0;      // d_x x 1
  Matrix s0;      // d_x x d_x, P_{0|0} = s0 s0^T

  static constexpr std::array<std::string_view, 6> kFieldNames = {"a",      "b",  "u_sqrt",
                                                                  "v_sqrt", "x0", "s0"};

  Index state_dim() const { return a.rows(); }
  Index obs_dim() const { return b.rows(); }

  std::array<Matrix*, 6> fields() { return {&a, &b, &u_sqrt, &v_sqrt, &x0, &s0}; }
  std::array<const Matrix*, 6> fields() const { return {&a, &b, &u_sqrt, &v_sqrt, &x0, &s0}; }

  /// Same shapes, all entries zero. Used as the container for gradients.
  ModelParams zeros_like() const;

  /// Throws ShapeError / ValidationError unless all shapes agree with
  /// d_x, d_y >= 1 and every entry is finite.
  void validate() const;
};

struct FilterState {
  Matrix mean;    // d_x x 1
  Matrix factor;  // d_x x d_x

  Matrix covariance() const { return factor * factor.transpose(); }
};

struct StepOutput {
  FilterState state;   // filtered (posterior) moments
  double loglik_term;  // log p(y_t | y_{1:t-1})
  Matrix innovation;   // y_t - B x_{t|t-1}
  Matrix obs_factor;   // L11, L11 L11^T = B P_{t|t-1} B^T + V
  Matrix gain;         // L21 L11^{-1}
};

struct FilterResult {
  std::vector<StepOutput> steps;
  double total_loglik = 0.0;
};

FilterState predict(const FilterState& state, const Matrix& a, const Matrix& u_sqrt);

/// Throws DegenerateInnovationError when L11 has a pivot below the rank
/// tolerance.
StepOutput update(const FilterState& pred, const Matrix& b, const Matrix& v_sqrt,
                  const Matrix& y);

/// -1/2 [d_y ln(2 pi) + 2 sum_i ln L11_ii + |z|^2] with L11 z = innovation.
double loglik_term(const Matrix& obs_factor, const Matrix& innovation);

/// Runs predict-then-update for every observation, starting from (x0, s0).
/// A DegenerateInnovationError escaping a step carries its 1-based index.
FilterResult filter(const ModelParams& params, std::span<const Matrix> observations);

/// Block matrix [[B S, V^{1/2}], [S, 0]] triangularized by update().
Matrix update_block(const Matrix& b, const Matrix& factor, const Matrix& v_sqrt);

/// [A S, U^{1/2}] triangularized by predict().
Matrix predict_block(const Matrix& a, const Matrix& factor, const Matrix& u_sqrt);

}  // namespace sqrtkf
