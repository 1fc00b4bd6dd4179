#include <cmath>
#include <numbers>
#include <stdexcept>

#include "doctest.h"
#include "sqrtkf/oracle.hpp"
#include "sqrtkf/triangularize.hpp"
#include "test_support.hpp"

using namespace sqrtkf;
using sqrtkf::testing::mat;
using sqrtkf::testing::random_matrix;
using sqrtkf::testing::random_model;
using sqrtkf::testing::random_rank;
using sqrtkf::testing::rel_err;
using sqrtkf::testing::Rng;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

const ModelParams kScalar{scalar(1), scalar(1), scalar(0), scalar(1), scalar(0), scalar(1)};

// Throws, returns non-finite values or breaks the Gramian identity.
bool classical_invalid(const TriangularizationResult& res, const Matrix& m, const Matrix& dm) {
  Matrix dl;
  try {
    dl = oracle::classical_qr_jvp(res, dm);
  } catch (const SingularSystemError&) {
    return true;
  }
  if (!dl.allFinite()) return true;
  const double scale = 1.0 + m.norm() * dm.norm();
  const double surrogate = gramian_residual(m, dm, res.l, jvp_triangularize(res, dm));
  return gramian_residual(m, dm, res.l, dl) > 1e3 * std::max(surrogate, 1e-9 * scale);
}

}  // namespace

TEST_SUITE("oracle") {

TEST_CASE("fd_gradient examples") {
  const auto constant = [](const ModelParams&) { return 4.2; };
  const ModelParams g = oracle::fd_gradient(constant, kScalar);
  for (const Matrix* m : g.fields()) CHECK(m->norm() == 0.0);

  const auto square = [](const ModelParams& p) { return p.x0(0, 0) * p.x0(0, 0); };
  ModelParams p = kScalar;
  p.x0(0, 0) = 3.0;
  CHECK(oracle::fd_gradient(square, p, {1e-3, false}).x0(0, 0) == doctest::Approx(6.0).epsilon(1e-6));
  CHECK(oracle::fd_derivative([](double x) { return x * x; }, 3.0, {1e-3, false}) ==
        doctest::Approx(6.0).epsilon(1e-6));

  const auto explode = [](const ModelParams& q) {
    if (q.b(0, 0) != 1.0) throw std::runtime_error("boom");
    return 0.0;
  };
  CHECK_THROWS_AS(oracle::fd_gradient(explode, kScalar), oracle::FdEvaluationError);
  try {
    oracle::fd_gradient(explode, kScalar);
  } catch (const oracle::FdEvaluationError& e) {
    CHECK(std::string(e.what()).find("b(0,0)") != std::string::npos);
  }
}

TEST_CASE("fd step configuration") {
  CHECK(oracle::FdConfig{1e-6, true}.step_at(-3.0) == doctest::Approx(4e-6));
  CHECK(oracle::FdConfig{1e-6, false}.step_at(-3.0) == 1e-6);
  CHECK_THROWS_AS(oracle::FdConfig({0.0, true}).validate(), ValidationError);
  CHECK_THROWS_AS(oracle::FdConfig({-1e-6, true}).validate(), ValidationError);
  CHECK_THROWS_AS(oracle::FdConfig({std::nan(""), true}).validate(), ValidationError);
}

TEST_CASE("dense_filter examples") {
  const std::vector<Matrix> y0{scalar(0)};
  const auto r = oracle::dense_filter(kScalar, y0);
  CHECK(r.covariances[0](0, 0) == doctest::Approx(0.5));
  CHECK(r.means[0](0, 0) == 0.0);
  CHECK(r.total_loglik == doctest::Approx(-0.5 * std::log(2 * std::numbers::pi * 2.0)));

  // B = 0: the observations carry no information and P follows the Lyapunov
  // recursion P <- A P A^T + U.
  ModelParams p = kScalar;
  p.a = scalar(0.5);
  p.b = scalar(0);
  p.u_sqrt = scalar(1);
  const std::vector<Matrix> ys(4, scalar(1.0));
  const auto lyap = oracle::dense_filter(p, ys);
  double cov = 1.0;
  for (int t = 0; t < 4; ++t) {
    cov = 0.25 * cov + 1.0;
    CHECK(lyap.covariances[t](0, 0) == doctest::Approx(cov).epsilon(1e-14));
  }

  ModelParams degenerate = kScalar;
  degenerate.b = scalar(0);
  degenerate.v_sqrt = scalar(0);
  CHECK_THROWS_AS(oracle::dense_filter(degenerate, y0), DegenerateInnovationError);
  CHECK_THROWS_AS(oracle::dense_filter(kScalar, std::vector<Matrix>{}), ValidationError);
}

TEST_CASE("extended-precision likelihood") {
  Rng rng(53);
  const ModelParams p = random_model(rng, {3, 2});
  const auto ys = sqrtkf::testing::simulate(rng, p, 20);
  const double ref = oracle::dense_filter(p, ys).total_loglik;
  CHECK(std::abs(static_cast<double>(oracle::dense_loglik_extended(p, ys)) - ref) <=
        1e-12 * (1.0 + std::abs(ref)));
  // the quotient keeps digits a double objective would lose
  const auto f = [&](const ModelParams& q) { return oracle::dense_loglik_extended(q, ys); };
  const auto g = [&](const ModelParams& q) { return oracle::dense_filter(q, ys).total_loglik; };
  const ModelParams fine = oracle::fd_gradient(f, p, {1e-6, true});
  const ModelParams coarse = oracle::fd_gradient(g, p, {1e-6, true});
  CHECK(rel_err(fine.s0, coarse.s0) < 1e-6);
}

TEST_CASE("classical_qr_jvp examples") {
  const auto res = triangularize(mat({{2, 0}, {0, 3}}));
  CHECK(rel_err(oracle::classical_qr_jvp(res, Matrix::Identity(2, 2)), Matrix::Identity(2, 2)) <
        1e-15);
  CHECK(oracle::classical_qr_jvp(res, Matrix::Zero(2, 2)).norm() == 0.0);

  const Matrix m = mat({{1, 0}, {0, 0}});
  const Matrix dm = mat({{0, 0}, {0, 1}});
  CHECK(classical_invalid(triangularize(m), m, dm));
  CHECK_THROWS_AS(oracle::classical_qr_jvp(triangularize(m), dm), SingularSystemError);
}

TEST_CASE("classical_qr_jvp is invalid on exactly rank-deficient inputs") {
  Rng rng(51);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = sqrtkf::testing::uniform_int(rng, 2, 6);
    const int k = sqrtkf::testing::uniform_int(rng, n, 2 * n);
    Matrix m = random_matrix(rng, n, k);
    const int zero_rows = sqrtkf::testing::uniform_int(rng, 1, n - 1);
    for (int z = 0; z < zero_rows; ++z) m.row(sqrtkf::testing::uniform_int(rng, 0, n - 1)).setZero();
    const Matrix dm = random_matrix(rng, n, k);
    const auto res = triangularize(m);
    const double scale = (1.0 + m.norm()) * (1.0 + dm.norm());
    CHECK(gramian_residual(m, dm, res.l, jvp_triangularize(res, dm)) <= 1e-9 * scale);
    CHECK(classical_invalid(res, m, dm));
  }
}

TEST_CASE("classical_qr_jvp departs from the surrogate on numerically rank-deficient inputs") {
  // Products of thin factors leave pivots near 1e-16 rather than exactly zero.
  // The classical tangent then stays finite and Gramian-consistent up to
  // rounding, but it is not the surrogate tangent.
  Rng rng(52);
  int raised = 0;
  int departed = 0;
  const int cases = 100;
  for (int trial = 0; trial < cases; ++trial) {
    const int n = sqrtkf::testing::uniform_int(rng, 2, 6);
    const int k = sqrtkf::testing::uniform_int(rng, n, 2 * n);
    const int rank = sqrtkf::testing::uniform_int(rng, 1, n - 1);
    const Matrix m = random_rank(rng, n, k, rank);
    const Matrix dm = random_matrix(rng, n, k);
    const auto res = triangularize(m);
    const Matrix surrogate = jvp_triangularize(res, dm);
    try {
      const Matrix classical = oracle::classical_qr_jvp(res, dm);
      if (!classical.allFinite() || rel_err(classical, surrogate) > 1e-6) ++departed;
    } catch (const SingularSystemError&) {
      ++raised;
    }
  }
  MESSAGE("raised " << raised << ", departed " << departed << " of " << cases);
  CHECK(raised + departed == cases);
}

TEST_CASE("dense_filter agrees with itself under a factor rotation") {
  Rng rng(54);
  ModelParams p = random_model(rng, {3, 2});
  const auto ys = sqrtkf::testing::simulate(rng, p, 10);
  const auto ref = oracle::dense_filter(p, ys);
  p.u_sqrt = p.u_sqrt * sqrtkf::testing::random_orthogonal(rng, 3);
  p.s0 = p.s0 * sqrtkf::testing::random_orthogonal(rng, 3);
  CHECK(oracle::dense_filter(p, ys).total_loglik == doctest::Approx(ref.total_loglik).epsilon(1e-12));
}

}  // TEST_SUITE
