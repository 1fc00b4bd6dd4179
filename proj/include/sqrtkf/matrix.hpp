#pragma once

// Dense linear algebra used throughout the filter: checked products,
// sign-normalized Householder thin QR, triangular solves and the
// pseudoinverse of a (possibly rank-deficient) triangular factor.
//
// All functions are pure; they throw ShapeError on non-conformable operands.

#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "sqrtkf/errors.hpp"

namespace sqrtkf {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Default relative rank tolerance for an n-dimensional decision: n * eps.
inline double default_rank_rtol(Index n) {
  return static_cast<double>(n) * std::numeric_limits<double>::epsilon();
}

struct QrResult {
  Matrix q;  // m x n, orthonormal columns
  Matrix r;  // n x n, upper triangular, non-negative diagonal
};

void require_nonempty(const Matrix& a, std::string_view what);
void require_finite(const Matrix& a, std::string_view what);
void require_square(const Matrix& a, std::string_view what);
void require_shape(const Matrix& a, Index rows, Index cols, std::string_view what);
bool all_finite(const Matrix& a);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix scale(double c, const Matrix& a);
double frobenius_inner(const Matrix& a, const Matrix& b);

/// Thin QR of a tall matrix (rows >= cols) by unpivoted Householder
/// reflections. The result is sign-normalized so that diag(r) >= 0 with
/// sign(0) := +1. Rank-deficient input yields zero (or round-off sized)
/// diagonal entries in r and a q that is still orthonormal.
QrResult thin_qr(const Matrix& a);

/// Moore-Penrose pseudoinverse of a square factor via SVD. Singular values
/// sigma_i <= rtol * sigma_max are dropped; rtol defaults to n * eps.
Matrix pinv_factor(const Matrix& l, std::optional<double> rtol = std::nullopt);

Matrix tril(const Matrix& x);
Matrix diag_part(const Matrix& x);
Matrix strict_upper(const Matrix& x);

/// Solves l z = b for lower-triangular l by forward substitution.
/// Throws SingularSystemError when some |l_ii| <= rtol * max|l_ij|
/// (rtol defaults to k * eps).
Matrix solve_lower(const Matrix& l, const Matrix& b, std::optional<double> rtol = std::nullopt);

/// Solves l^T z = b for lower-triangular l (back substitution), same
/// singularity rule as solve_lower.
Matrix solve_lower_transposed(const Matrix& l, const Matrix& b,
                              std::optional<double> rtol = std::nullopt);

/// Text form: first line "rows cols", then one line per row of
/// whitespace-separated shortest round-trip decimals.
std::string to_text(const Matrix& a);
Matrix from_text(std::string_view text);

}  // namespace sqrtkf
