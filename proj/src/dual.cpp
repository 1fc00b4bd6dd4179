#include "sqrtkf/dual.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "sqrtkf/triangularize.hpp"

namespace sqrtkf {

DualMatrix::DualMatrix(Matrix primal_value, Matrix tangent_value)
    : primal(std::move(primal_value)), tangent(std::move(tangent_value)) {
  require_shape(tangent, primal.rows(), primal.cols(), "DualMatrix tangent");
}

DualMatrix DualMatrix::constant(Matrix primal_value) {
  Matrix zero = Matrix::Zero(primal_value.rows(), primal_value.cols());
  return {std::move(primal_value), std::move(zero)};
}

DualModelParams DualModelParams::seed(const ModelParams& primal, const ModelParams& direction) {
  return {{primal.a, direction.a},           {primal.b, direction.b},
          {primal.u_sqrt, direction.u_sqrt}, {primal.v_sqrt, direction.v_sqrt},
          {primal.x0, direction.x0},         {primal.s0, direction.s0}};
}

DualModelParams DualModelParams::constant(const ModelParams& primal) {
  return seed(primal, primal.zeros_like());
}

ModelParams DualModelParams::primal() const {
  return {a.primal, b.primal, u_sqrt.primal, v_sqrt.primal, x0.primal, s0.primal};
}

ModelParams DualModelParams::tangent() const {
  return {a.tangent, b.tangent, u_sqrt.tangent, v_sqrt.tangent, x0.tangent, s0.tangent};
}

DualMatrix dual_matmul(const DualMatrix& a, const DualMatrix& b) {
  return {matmul(a.primal, b.primal), a.tangent * b.primal + a.primal * b.tangent};
}

DualMatrix dual_add(const DualMatrix& a, const DualMatrix& b) {
  return {add(a.primal, b.primal), a.tangent + b.tangent};
}

DualMatrix dual_scale(double c, const DualMatrix& a) { return {c * a.primal, c * a.tangent}; }

DualMatrix dual_triangularize(const DualMatrix& m) {
  const TriangularizationResult res = triangularize(m.primal);
  Matrix dl = jvp_triangularize(res, m.tangent);
  return {res.l, std::move(dl)};
}

DualMatrix dual_solve_lower(const DualMatrix& l, const DualMatrix& b) {
  Matrix z = solve_lower(l.primal, b.primal);
  Matrix dz = solve_lower(l.primal, b.tangent - l.tangent * z);
  return {std::move(z), std::move(dz)};
}

DualScalar dual_loglik_term(const DualMatrix& obs_factor, const DualMatrix& innovation) {
  const Matrix& l = obs_factor.primal;
  DualScalar out;
  out.value = loglik_term(l, innovation.primal);
  const DualMatrix z = dual_solve_lower(obs_factor, innovation);
  const double dlogdet_half = solve_lower(l, obs_factor.tangent).trace();
  out.tangent = -(dlogdet_half + z.primal.cwiseProduct(z.tangent).sum());
  return out;
}

Matrix DualFilterState::covariance_tangent() const {
  const Matrix half = factor.tangent * factor.primal.transpose();
  return half + half.transpose();
}

DualFilterState dual_predict(const DualFilterState& state, const DualMatrix& a,
                             const DualMatrix& u_sqrt) {
  const Index dx = state.factor.primal.rows();
  const DualMatrix as = dual_matmul(a, state.factor);
  DualMatrix m(predict_block(a.primal, state.factor.primal, u_sqrt.primal),
               Matrix(dx, 2 * dx));
  m.tangent << as.tangent, u_sqrt.tangent;
  return {dual_matmul(a, state.mean), dual_triangularize(m)};
}

DualStepOutput dual_update(const DualFilterState& pred, const DualMatrix& b,
                           const DualMatrix& v_sqrt, const Matrix& y) {
  const Index dx = pred.factor.primal.rows();
  const Index dy = b.primal.rows();
  require_shape(y, dy, 1, "update (observation)");

  const DualMatrix bs = dual_matmul(b, pred.factor);
  DualMatrix m(update_block(b.primal, pred.factor.primal, v_sqrt.primal),
               Matrix(dy + dx, dy + dx));
  m.tangent << bs.tangent, v_sqrt.tangent, pred.factor.tangent, Matrix::Zero(dx, dy);
  const DualMatrix tri = dual_triangularize(m);

  const Matrix& l = tri.primal;
  const Matrix& dl = tri.tangent;
  const Matrix l11 = l.topLeftCorner(dy, dy);
  const Matrix l21 = l.bottomLeftCorner(dx, dy);
  const Matrix l22 = l.bottomRightCorner(dx, dx);
  const Matrix dl11 = dl.topLeftCorner(dy, dy);
  const Matrix dl12 = dl.topRightCorner(dy, dx);

  DualStepOutput out;
  out.innovation = DualMatrix(y - b.primal * pred.mean.primal,
                              -(b.tangent * pred.mean.primal + b.primal * pred.mean.tangent));
  try {
    out.loglik_term = dual_loglik_term({l11, dl11}, out.innovation);
  } catch (const SingularSystemError&) {
    throw DegenerateInnovationError("innovation covariance is singular");
  }
  const Matrix gain = solve_lower_transposed(l11, l21.transpose()).transpose();

  // Zero the upper-right block of dL without changing dL L^T + L dL^T:
  //   dL21 += L22 dL12^T L11^{-T},  dL22 -= gain dL12.
  const Matrix dl21 =
      dl.bottomLeftCorner(dx, dy) + solve_lower(l11, dl12 * l22.transpose()).transpose();
  const Matrix dl22 = dl.bottomRightCorner(dx, dx) - gain * dl12;

  const Matrix dgain =
      solve_lower_transposed(l11, (dl21 - gain * dl11).transpose()).transpose();
  out.obs_factor = DualMatrix(l11, dl11);
  out.gain = DualMatrix(gain, dgain);
  out.state.mean = dual_add(pred.mean, dual_matmul(out.gain, out.innovation));
  out.state.factor = DualMatrix(l22, dl22);
  return out;
}

DualFilterResult filter_jvp(const DualModelParams& params, std::span<const Matrix> observations) {
  params.primal().validate();
  params.tangent().validate();
  if (observations.empty()) {
    throw ValidationError("filter_jvp: empty observation sequence");
  }
  DualFilterResult result;
  result.steps.reserve(observations.size());
  DualFilterState state{params.x0, params.s0};
  for (std::size_t t = 0; t < observations.size(); ++t) {
    require_finite(observations[t], "observation");
    try {
      const DualFilterState pred = dual_predict(state, params.a, params.u_sqrt);
      DualStepOutput step = dual_update(pred, params.b, params.v_sqrt, observations[t]);
      result.total_loglik.value += step.loglik_term.value;
      result.total_loglik.tangent += step.loglik_term.tangent;
      state = step.state;
      result.steps.push_back(std::move(step));
    } catch (const DegenerateInnovationError& e) {
      throw DegenerateInnovationError(
          std::string(e.what()) + " at time step " + std::to_string(t + 1), t + 1);
    }
  }
  return result;
}

ModelParams gradient(const ModelParams& params, std::span<const Matrix> observations) {
  ModelParams grad = params.zeros_like();
  ModelParams direction = params.zeros_like();
  auto grad_fields = grad.fields();
  auto dir_fields = direction.fields();
  for (std::size_t f = 0; f < grad_fields.size(); ++f) {
    Matrix& g = *grad_fields[f];
    Matrix& d = *dir_fields[f];
    for (Index j = 0; j < g.cols(); ++j) {
      for (Index i = 0; i < g.rows(); ++i) {
        d(i, j) = 1.0;
        g(i, j) = filter_jvp(DualModelParams::seed(params, direction), observations)
                      .total_loglik.tangent;
        d(i, j) = 0.0;
      }
    }
  }
  return grad;
}

}  // namespace sqrtkf
