#include "sqrtkf/oracle.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>

namespace sqrtkf::oracle {

void FdConfig::validate() const {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw ValidationError("fd step must be positive and finite");
  }
}

double FdConfig::step_at(double x) const { return relative ? step * (1.0 + std::abs(x)) : step; }

ModelParams fd_gradient(const Objective& f, const ModelParams& params, const FdConfig& cfg) {
  cfg.validate();
  ModelParams grad = params.zeros_like();
  ModelParams probe = params;
  auto grad_fields = grad.fields();
  auto probe_fields = probe.fields();
  for (std::size_t k = 0; k < grad_fields.size(); ++k) {
    Matrix& g = *grad_fields[k];
    Matrix& p = *probe_fields[k];
    for (Index j = 0; j < g.cols(); ++j) {
      for (Index i = 0; i < g.rows(); ++i) {
        const double x = p(i, j);
        const double h = cfg.step_at(x);
        const double up = x + h;
        const double down = x - h;
        long double plus = 0.0L;
        long double minus = 0.0L;
        try {
          p(i, j) = up;
          plus = f(probe);
          p(i, j) = down;
          minus = f(probe);
        } catch (const std::exception& e) {
          throw FdEvaluationError("fd_gradient: objective failed at " +
                                  std::string(ModelParams::kFieldNames[k]) + "(" +
                                  std::to_string(i) + "," + std::to_string(j) + "): " + e.what());
        }
        p(i, j) = x;
        // divide by the step actually taken after rounding x +- h
        const long double span = static_cast<long double>(up) - static_cast<long double>(down);
        g(i, j) = static_cast<double>((plus - minus) / span);
      }
    }
  }
  return grad;
}

double fd_derivative(const std::function<double(double)>& f, double x, const FdConfig& cfg) {
  cfg.validate();
  const double h = cfg.step_at(x);
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

namespace {

template <class S>
using MatrixOf = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <class S>
struct DenseRun {
  std::vector<MatrixOf<S>> means;
  std::vector<MatrixOf<S>> covariances;
  std::vector<S> terms;
  S total = 0;
};

template <class S>
DenseRun<S> run_dense(const ModelParams& params, std::span<const Matrix> observations) {
  params.validate();
  if (observations.empty()) {
    throw ValidationError("dense_filter: empty observation sequence");
  }
  const MatrixOf<S> a = params.a.cast<S>();
  const MatrixOf<S> b = params.b.cast<S>();
  const MatrixOf<S> u_sqrt = params.u_sqrt.cast<S>();
  const MatrixOf<S> v_sqrt = params.v_sqrt.cast<S>();
  const MatrixOf<S> s0 = params.s0.cast<S>();
  const MatrixOf<S> u = u_sqrt * u_sqrt.transpose();
  const MatrixOf<S> v = v_sqrt * v_sqrt.transpose();
  const S dy = static_cast<S>(params.obs_dim());
  const S log_two_pi = std::log(2 * std::numbers::pi_v<S>);

  DenseRun<S> out;
  MatrixOf<S> x = params.x0.cast<S>();
  MatrixOf<S> p = s0 * s0.transpose();
  for (std::size_t t = 0; t < observations.size(); ++t) {
    x = a * x;
    p = a * p * a.transpose() + u;
    const MatrixOf<S> nu = observations[t].cast<S>() - b * x;
    const MatrixOf<S> p_nu = b * p * b.transpose() + v;
    Eigen::LLT<MatrixOf<S>> llt(p_nu);
    if (llt.info() != Eigen::Success) {
      throw DegenerateInnovationError(
          "dense_filter: innovation covariance is not positive definite at time step " +
              std::to_string(t + 1),
          t + 1);
    }
    const MatrixOf<S> llt_l = llt.matrixL();
    const S log_det = 2 * llt_l.diagonal().array().log().sum();
    const MatrixOf<S> gain = llt.solve(b * p).transpose();  // P B^T P_nu^{-1}
    const S quad = (nu.transpose() * llt.solve(nu))(0, 0);
    const S term = -(dy * log_two_pi + log_det + quad) / 2;
    x = x + gain * nu;
    p = p - gain * p_nu * gain.transpose();
    out.means.push_back(x);
    out.covariances.push_back(p);
    out.terms.push_back(term);
    out.total += term;
  }
  return out;
}

}  // namespace

DenseFilterResult dense_filter(const ModelParams& params, std::span<const Matrix> observations) {
  DenseRun<double> run = run_dense<double>(params, observations);
  return {std::move(run.means), std::move(run.covariances), std::move(run.terms), run.total};
}

long double dense_loglik_extended(const ModelParams& params, std::span<const Matrix> observations) {
  return run_dense<long double>(params, observations).total;
}

Matrix classical_qr_jvp(const TriangularizationResult& res, const Matrix& dm) {
  const Index n = res.l.rows();
  require_shape(dm, n, res.q.rows(), "classical_qr_jvp");
  for (Index i = 0; i < n; ++i) {
    if (res.l(i, i) == 0.0) {
      throw SingularSystemError("classical_qr_jvp: L is exactly singular (zero pivot " +
                                std::to_string(i) + ")");
    }
  }
  // Explicit inverse by forward substitution on the identity, no rank guard.
  Matrix l_inv = Matrix::Identity(n, n);
  res.l.triangularView<Eigen::Lower>().solveInPlace(l_inv);
  const Matrix k = l_inv * dm * res.q;
  const Matrix sym = k + k.transpose();
  return res.l * (Matrix(sym.triangularView<Eigen::Lower>()) - Matrix(k.diagonal().asDiagonal()));
}

}  // namespace sqrtkf::oracle
