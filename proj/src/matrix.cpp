#include "sqrtkf/matrix.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>
#include <vector>

#include <Eigen/Householder>
#include <Eigen/QR>
#include <Eigen/SVD>

namespace sqrtkf {
namespace {

std::string dims(const Matrix& a) {
  return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

void check_triangular_pivots(const Matrix& l, double rtol, std::string_view what) {
  const double scale = l.cwiseAbs().maxCoeff();
  for (Index i = 0; i < l.rows(); ++i) {
    const double pivot = std::abs(l(i, i));
    if (!(pivot > rtol * scale)) {
      throw SingularSystemError(std::string(what) + ": pivot " + std::to_string(i) +
                                " is below the rank tolerance");
    }
  }
}

}  // namespace

void require_nonempty(const Matrix& a, std::string_view what) {
  if (a.rows() < 1 || a.cols() < 1) {
    throw ValidationError(std::string(what) + ": empty matrix (" + dims(a) + ")");
  }
}

bool all_finite(const Matrix& a) { return a.allFinite(); }

void require_finite(const Matrix& a, std::string_view what) {
  if (!a.allFinite()) {
    throw ValidationError(std::string(what) + ": non-finite entries");
  }
}

void require_square(const Matrix& a, std::string_view what) {
  if (a.rows() != a.cols()) {
    throw ShapeError(std::string(what) + ": expected a square matrix, got " + dims(a));
  }
}

void require_shape(const Matrix& a, Index rows, Index cols, std::string_view what) {
  if (a.rows() != rows || a.cols() != cols) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                     std::to_string(cols) + ", got " + dims(a));
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + dims(a) + " * " + dims(b));
  }
  return a * b;
}

Matrix transpose(const Matrix& a) { return a.transpose(); }

Matrix add(const Matrix& a, const Matrix& b) {
  require_shape(b, a.rows(), a.cols(), "add");
  return a + b;
}

Matrix scale(double c, const Matrix& a) { return c * a; }

double frobenius_inner(const Matrix& a, const Matrix& b) {
  require_shape(b, a.rows(), a.cols(), "frobenius_inner");
  return a.cwiseProduct(b).sum();
}

QrResult thin_qr(const Matrix& a) {
  const Index m = a.rows();
  const Index n = a.cols();
  if (m < n) {
    throw ShapeError("thin_qr: expected rows >= cols, got " + dims(a));
  }
  Eigen::HouseholderQR<Matrix> qr(a);
  QrResult out;
  out.r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  out.q = qr.householderQ() * Matrix::Identity(m, n);
  // D = diag(sign(r_ii)), sign(0) = +1; r <- D r, q <- q D.
  for (Index i = 0; i < n; ++i) {
    if (out.r(i, i) < 0.0) {
      out.r.row(i) *= -1.0;
      out.q.col(i) *= -1.0;
    }
  }
  return out;
}

Matrix pinv_factor(const Matrix& l, std::optional<double> rtol) {
  require_square(l, "pinv_factor");
  const Index n = l.rows();
  const double tol = rtol.value_or(default_rank_rtol(n));
  Eigen::JacobiSVD<Matrix> svd(l, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sigma = svd.singularValues();
  const double cutoff = tol * (sigma.size() > 0 ? sigma(0) : 0.0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sigma.size());
  for (Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > cutoff) inv(i) = 1.0 / sigma(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix tril(const Matrix& x) {
  require_square(x, "tril");
  return x.triangularView<Eigen::Lower>();
}

Matrix diag_part(const Matrix& x) {
  require_square(x, "diag_part");
  return x.diagonal().asDiagonal();
}

Matrix strict_upper(const Matrix& x) {
  require_square(x, "strict_upper");
  return x.triangularView<Eigen::StrictlyUpper>();
}

Matrix solve_lower(const Matrix& l, const Matrix& b, std::optional<double> rtol) {
  require_square(l, "solve_lower");
  if (b.rows() != l.rows()) {
    throw ShapeError("solve_lower: " + dims(l) + " against " + dims(b));
  }
  check_triangular_pivots(l, rtol.value_or(default_rank_rtol(l.rows())), "solve_lower");
  return l.triangularView<Eigen::Lower>().solve(b);
}

Matrix solve_lower_transposed(const Matrix& l, const Matrix& b, std::optional<double> rtol) {
  require_square(l, "solve_lower_transposed");
  if (b.rows() != l.rows()) {
    throw ShapeError("solve_lower_transposed: " + dims(l) + " against " + dims(b));
  }
  check_triangular_pivots(l, rtol.value_or(default_rank_rtol(l.rows())),
                          "solve_lower_transposed");
  return l.triangularView<Eigen::Lower>().transpose().solve(b);
}

std::string to_text(const Matrix& a) {
  std::string out = std::to_string(a.rows()) + " " + std::to_string(a.cols()) + "\n";
  char buf[32];
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      auto res = std::to_chars(buf, buf + sizeof(buf), a(i, j));
      if (j > 0) out.push_back(' ');
      out.append(buf, res.ptr);
    }
    out.push_back('\n');
  }
  return out;
}

Matrix from_text(std::string_view text) {
  std::vector<double> values;
  const char* p = text.data();
  const char* end = p + text.size();
  auto skip_ws = [&] {
    while (p != end && std::isspace(static_cast<unsigned char>(*p))) ++p;
  };
  auto next_token = [&]() -> std::string_view {
    skip_ws();
    const char* start = p;
    while (p != end && !std::isspace(static_cast<unsigned char>(*p))) ++p;
    return {start, static_cast<std::size_t>(p - start)};
  };
  auto parse_count = [&](std::string_view tok) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || v < 1) {
      throw ValidationError("matrix text: invalid dimension '" + std::string(tok) + "'");
    }
    return static_cast<Index>(v);
  };
  const Index rows = parse_count(next_token());
  const Index cols = parse_count(next_token());
  Matrix a(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      const auto tok = next_token();
      if (tok.empty()) {
        throw ValidationError("matrix text: expected " + std::to_string(rows * cols) +
                              " entries");
      }
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw ValidationError("matrix text: invalid number '" + std::string(tok) + "'");
      }
      a(i, j) = v;
    }
  }
  if (!next_token().empty()) {
    throw ValidationError("matrix text: trailing entries");
  }
  require_finite(a, "matrix text");
  return a;
}

}  // namespace sqrtkf
