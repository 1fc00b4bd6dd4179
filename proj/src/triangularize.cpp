#include "sqrtkf/triangularize.hpp"

namespace sqrtkf {

TriangularizationResult triangularize(const Matrix& m, std::optional<double> rank_rtol) {
  require_nonempty(m, "triangularize");
  require_finite(m, "triangularize");
  if (m.cols() < m.rows()) {
    throw ShapeError("triangularize: expected a wide matrix (cols >= rows), got " +
                     std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  QrResult qr = thin_qr(m.transpose());
  TriangularizationResult res;
  res.l = qr.r.transpose();
  res.q = std::move(qr.q);
  res.l_pinv = pinv_factor(res.l, rank_rtol);
  return res;
}

Matrix jvp_triangularize(const TriangularizationResult& res, const Matrix& dm) {
  const Index n = res.l.rows();
  require_shape(dm, n, res.q.rows(), "jvp_triangularize");
  const Matrix dm_q = dm * res.q;
  const Matrix k = res.l_pinv * dm_q;
  const Matrix sym = k + k.transpose();
  const Matrix dn = tril(sym) - diag_part(k);
  const Matrix projector_perp = Matrix::Identity(n, n) - res.l * res.l_pinv;
  return res.l * dn + projector_perp * dm_q;
}

Matrix vjp_triangularize(const TriangularizationResult& res, const Matrix& g_l) {
  const Index n = res.l.rows();
  require_shape(g_l, n, n, "vjp_triangularize");
  const Matrix g_n = res.l.transpose() * g_l;
  const Matrix g_n_lower = tril(g_n);
  const Matrix g_k = g_n_lower + g_n_lower.transpose() - diag_part(g_n);
  const Matrix projector_perp = Matrix::Identity(n, n) - res.l * res.l_pinv;
  return (res.l_pinv.transpose() * g_k + projector_perp * g_l) * res.q.transpose();
}

double gramian_residual(const Matrix& m, const Matrix& dm, const Matrix& l, const Matrix& dl) {
  require_shape(dm, m.rows(), m.cols(), "gramian_residual (dm)");
  require_shape(l, m.rows(), m.rows(), "gramian_residual (l)");
  require_shape(dl, m.rows(), m.rows(), "gramian_residual (dl)");
  const Matrix lhs = dl * l.transpose();
  const Matrix rhs = dm * m.transpose();
  return (lhs + lhs.transpose() - rhs - rhs.transpose()).norm();
}

}  // namespace sqrtkf
