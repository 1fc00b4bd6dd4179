#include "sqrtkf/kalman.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "sqrtkf/triangularize.hpp"

namespace sqrtkf {

ModelParams ModelParams::zeros_like() const {
  ModelParams out = *this;
  for (Matrix* f : out.fields()) f->setZero();
  return out;
}

void ModelParams::validate() const {
  const auto names = kFieldNames;
  const auto fs = fields();
  for (std::size_t i = 0; i < fs.size(); ++i) {
    require_nonempty(*fs[i], names[i]);
    require_finite(*fs[i], names[i]);
  }
  const Index dx = state_dim();
  const Index dy = obs_dim();
  require_shape(a, dx, dx, "a");
  require_shape(b, dy, dx, "b");
  require_shape(u_sqrt, dx, dx, "u_sqrt");
  require_shape(v_sqrt, dy, dy, "v_sqrt");
  require_shape(x0, dx, 1, "x0");
  require_shape(s0, dx, dx, "s0");
}

Matrix predict_block(const Matrix& a, const Matrix& factor, const Matrix& u_sqrt) {
  const Index dx = factor.rows();
  require_shape(a, dx, dx, "predict (a)");
  require_shape(u_sqrt, dx, dx, "predict (u_sqrt)");
  Matrix m(dx, 2 * dx);
  m << a * factor, u_sqrt;
  return m;
}

Matrix update_block(const Matrix& b, const Matrix& factor, const Matrix& v_sqrt) {
  const Index dx = factor.rows();
  const Index dy = b.rows();
  require_shape(b, dy, dx, "update (b)");
  require_shape(v_sqrt, dy, dy, "update (v_sqrt)");
  Matrix m(dy + dx, dy + dx);
  m << b * factor, v_sqrt, factor, Matrix::Zero(dx, dy);
  return m;
}

FilterState predict(const FilterState& state, const Matrix& a, const Matrix& u_sqrt) {
  require_square(state.factor, "predict (factor)");
  require_shape(state.mean, state.factor.rows(), 1, "predict (mean)");
  FilterState out;
  out.factor = triangularize(predict_block(a, state.factor, u_sqrt)).l;
  out.mean = a * state.mean;
  return out;
}

double loglik_term(const Matrix& obs_factor, const Matrix& innovation) {
  require_square(obs_factor, "loglik_term");
  const Index dy = obs_factor.rows();
  require_shape(innovation, dy, 1, "loglik_term (innovation)");
  const double tol = default_rank_rtol(dy) * obs_factor.cwiseAbs().maxCoeff();
  double log_det = 0.0;
  for (Index i = 0; i < dy; ++i) {
    if (!(obs_factor(i, i) > tol)) {
      throw DegenerateInnovationError("innovation covariance is singular");
    }
    log_det += std::log(obs_factor(i, i));
  }
  const Matrix z = solve_lower(obs_factor, innovation);
  return -0.5 * (static_cast<double>(dy) * std::log(2.0 * std::numbers::pi) + 2.0 * log_det +
                 z.squaredNorm());
}

StepOutput update(const FilterState& pred, const Matrix& b, const Matrix& v_sqrt,
                  const Matrix& y) {
  const Index dx = pred.factor.rows();
  const Index dy = b.rows();
  require_shape(pred.mean, dx, 1, "update (mean)");
  require_shape(y, dy, 1, "update (observation)");
  const TriangularizationResult tri = triangularize(update_block(b, pred.factor, v_sqrt));
  StepOutput out;
  out.obs_factor = tri.l.topLeftCorner(dy, dy);
  const Matrix l21 = tri.l.bottomLeftCorner(dx, dy);
  out.innovation = y - b * pred.mean;
  out.loglik_term = loglik_term(out.obs_factor, out.innovation);
  try {
    // gain L11 = L21  <=>  L11^T gain^T = L21^T
    out.gain = solve_lower_transposed(out.obs_factor, l21.transpose()).transpose();
  } catch (const SingularSystemError&) {
    throw DegenerateInnovationError("innovation covariance is singular");
  }
  out.state.mean = pred.mean + out.gain * out.innovation;
  out.state.factor = tri.l.bottomRightCorner(dx, dx);
  return out;
}

FilterResult filter(const ModelParams& params, std::span<const Matrix> observations) {
  params.validate();
  if (observations.empty()) {
    throw ValidationError("filter: empty observation sequence");
  }
  FilterResult result;
  result.steps.reserve(observations.size());
  FilterState state{params.x0, params.s0};
  for (std::size_t t = 0; t < observations.size(); ++t) {
    require_finite(observations[t], "observation");
    try {
      const FilterState pred = predict(state, params.a, params.u_sqrt);
      StepOutput step = update(pred, params.b, params.v_sqrt, observations[t]);
      result.total_loglik += step.loglik_term;
      state = step.state;
      result.steps.push_back(std::move(step));
    } catch (const DegenerateInnovationError& e) {
      throw DegenerateInnovationError(
          std::string(e.what()) + " at time step " + std::to_string(t + 1), t + 1);
    }
  }
  return result;
}

}  // namespace sqrtkf
