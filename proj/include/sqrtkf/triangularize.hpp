#pragma once

// Triangularization T(M): for a wide M (n x k, k >= n) returns a lower
// triangular L with non-negative diagonal and L L^T = M M^T, read off the
// thin QR of M^T as L = R^T.
//
// The JVP below is a surrogate tangent: it satisfies the Gramian
// differential identity
//
//     dL L^T + L dL^T = dM M^T + M dM^T
//
// at every rank, so any loss that depends on L only through L L^T is
// differentiated exactly even where T itself is not differentiable (wide M,
// where Q is not unique, or rank-deficient M, where L^{-1} does not exist).
//
//     K       = L^+ dM Q
//     dL_col  = L [tril(K + K^T) - diag(K)]
//     dL_null = (I - L L^+) dM Q
//     dL      = dL_col + dL_null
//
// For invertible L the null part vanishes and dL is the classical QR tangent.

#include <optional>

#include "sqrtkf/matrix.hpp"

namespace sqrtkf {

struct TriangularizationResult {
  Matrix l;       // n x n, lower triangular, diag >= 0
  Matrix q;       // k x n, orthonormal columns; M = l q^T
  Matrix l_pinv;  // n x n, Moore-Penrose pseudoinverse of l
};

/// Throws ShapeError if m has fewer columns than rows and ValidationError on
/// empty or non-finite input. `rank_rtol` is forwarded to pinv_factor.
TriangularizationResult triangularize(const Matrix& m,
                                      std::optional<double> rank_rtol = std::nullopt);

/// Surrogate tangent dL for direction dm (same shape as the triangularized M).
/// Linear in dm; the cached l, q and l_pinv are held fixed.
Matrix jvp_triangularize(const TriangularizationResult& res, const Matrix& dm);

/// Adjoint of jvp_triangularize under the Frobenius inner product:
///     <g_l, jvp(dm)> = <vjp(g_l), dm>   for all dm.
/// With G_N = L^T g_l and G_K = tril(G_N) + tril(G_N)^T - diag(G_N),
///     G_M = (L^+)^T G_K Q^T + (I - L L^+) g_l Q^T.
Matrix vjp_triangularize(const TriangularizationResult& res, const Matrix& g_l);

/// || dl l^T + l dl^T - dm m^T - m dm^T ||_F
double gramian_residual(const Matrix& m, const Matrix& dm, const Matrix& l, const Matrix& dl);

}  // namespace sqrtkf
