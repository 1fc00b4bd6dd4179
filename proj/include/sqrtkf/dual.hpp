#pragma once

// Forward-mode differentiation of the square-root filter.
//
// Every value is a (primal, tangent) pair and each filter primitive has its
// own JVP rule: products and sums, block assembly, triangularization (the
// surrogate tangent), lower-triangular solves and the Gaussian log-density
// term. There is no tape; gradient() sweeps the canonical basis of the
// parameters, one forward pass per entry.

#include <span>
#include <vector>

#include "sqrtkf/kalman.hpp"
#include "sqrtkf/matrix.hpp"

namespace sqrtkf {

struct DualMatrix {
  Matrix primal;
  Matrix tangent;

  DualMatrix() = default;
  /// Throws ShapeError if the shapes differ.
  DualMatrix(Matrix primal_value, Matrix tangent_value);

  static DualMatrix constant(Matrix primal_value);
};

struct DualScalar {
  double value = 0.0;
  double tangent = 0.0;
};

struct DualModelParams {
  DualMatrix a;
  DualMatrix b;
  DualMatrix u_sqrt;
  DualMatrix v_sqrt;
  DualMatrix x0;
  DualMatrix s0;

  /// Pairs a primal parameter set with a direction d(theta) of identical
  /// shapes.
  static DualModelParams seed(const ModelParams& primal, const ModelParams& direction);
  static DualModelParams constant(const ModelParams& primal);

  ModelParams primal() const;
  ModelParams tangent() const;
};

DualMatrix dual_matmul(const DualMatrix& a, const DualMatrix& b);
DualMatrix dual_add(const DualMatrix& a, const DualMatrix& b);
DualMatrix dual_scale(double c, const DualMatrix& a);

/// (T(M), surrogate tangent of T at M along dM).
DualMatrix dual_triangularize(const DualMatrix& m);

/// z = l^{-1} b with dz = l^{-1} (db - dl z).
DualMatrix dual_solve_lower(const DualMatrix& l, const DualMatrix& b);

/// Log-density term and its tangent. The log-determinant tangent is
/// 2 tr(L^{-1} dL), which reduces to 2 sum_i dL_ii / L_ii for
/// lower-triangular dL.
DualScalar dual_loglik_term(const DualMatrix& obs_factor, const DualMatrix& innovation);

struct DualFilterState {
  DualMatrix mean;
  DualMatrix factor;

  /// d(S S^T) = dS S^T + S dS^T.
  Matrix covariance_tangent() const;
};

struct DualStepOutput {
  DualFilterState state;
  DualScalar loglik_term;
  DualMatrix innovation;
  DualMatrix obs_factor;
  DualMatrix gain;
};

struct DualFilterResult {
  std::vector<DualStepOutput> steps;
  DualScalar total_loglik;
};

DualFilterState dual_predict(const DualFilterState& state, const DualMatrix& a,
                             const DualMatrix& u_sqrt);

/// Observations are constants. The surrogate tangent of the update block may
/// have a non-zero upper-right block when the block is rank-deficient; it is
/// folded into the L21 / L22 tangents (same Gramian tangent, zero upper-right
/// block) before the gain and posterior factor are read off.
DualStepOutput dual_update(const DualFilterState& pred, const DualMatrix& b,
                           const DualMatrix& v_sqrt, const Matrix& y);

/// Primal outputs equal filter(); tangents are directional derivatives along
/// params.tangent().
DualFilterResult filter_jvp(const DualModelParams& params, std::span<const Matrix> observations);

/// Gradient of the total log-likelihood, laid out like the parameters.
ModelParams gradient(const ModelParams& params, std::span<const Matrix> observations);

}  // namespace sqrtkf
