#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sqrtkf/dual.hpp"
#include "sqrtkf/errors.hpp"
#include "sqrtkf/experiment.hpp"
#include "sqrtkf/kalman.hpp"
#include "sqrtkf/oracle.hpp"
#include "sqrtkf/triangularize.hpp"

namespace py = pybind11;
using namespace sqrtkf;

namespace {

// Observations arrive as 1-D arrays or (d_y, 1) columns.
std::vector<Matrix> as_columns(const std::vector<Matrix>& ys) {
  std::vector<Matrix> out;
  out.reserve(ys.size());
  for (const Matrix& y : ys) {
    if (y.cols() != 1 && y.rows() == 1)
      out.push_back(y.transpose());
    else
      out.push_back(y);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Square-root Kalman filter with surrogate QR derivatives";

  auto shape = py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  auto singular = py::register_exception<SingularSystemError>(m, "SingularSystemError", PyExc_ArithmeticError);
  py::register_exception<DegenerateInnovationError>(m, "DegenerateInnovationError", singular.ptr());
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  (void)shape;

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init([](Matrix a, Matrix b, Matrix u_sqrt, Matrix v_sqrt, Matrix x0, Matrix s0) {
             if (x0.rows() == 1 && x0.cols() != 1) x0.transposeInPlace();
             ModelParams p{std::move(a), std::move(b), std::move(u_sqrt), std::move(v_sqrt),
                           std::move(x0), std::move(s0)};
             p.validate();
             return p;
           }),
           py::arg("a"), py::arg("b"), py::arg("u_sqrt"), py::arg("v_sqrt"), py::arg("x0"),
           py::arg("s0"))
      .def_readwrite("a", &ModelParams::a)
      .def_readwrite("b", &ModelParams::b)
      .def_readwrite("u_sqrt", &ModelParams::u_sqrt)
      .def_readwrite("v_sqrt", &ModelParams::v_sqrt)
      .def_readwrite("x0", &ModelParams::x0)
      .def_readwrite("s0", &ModelParams::s0)
      .def_property_readonly("state_dim", &ModelParams::state_dim)
      .def_property_readonly("obs_dim", &ModelParams::obs_dim)
      .def("zeros_like", &ModelParams::zeros_like);

  py::class_<TriangularizationResult>(m, "Triangularization")
      .def_readonly("l", &TriangularizationResult::l)
      .def_readonly("q", &TriangularizationResult::q)
      .def_readonly("l_pinv", &TriangularizationResult::l_pinv);

  m.def("triangularize", [](const Matrix& a) { return triangularize(a); }, py::arg("m"),
        "Lower-triangular L with L L^T = M M^T.");
  m.def("jvp_triangularize",
        [](const Matrix& a, const Matrix& da) { return jvp_triangularize(triangularize(a), da); },
        py::arg("m"), py::arg("dm"));
  m.def("vjp_triangularize",
        [](const Matrix& a, const Matrix& g) { return vjp_triangularize(triangularize(a), g); },
        py::arg("m"), py::arg("g"));

  py::class_<FilterResult>(m, "FilterResult")
      .def_readonly("total_loglik", &FilterResult::total_loglik)
      .def_property_readonly("means",
                             [](const FilterResult& r) {
                               std::vector<Matrix> out;
                               for (const auto& s : r.steps) out.push_back(s.state.mean);
                               return out;
                             })
      .def_property_readonly("covariances", [](const FilterResult& r) {
        std::vector<Matrix> out;
        for (const auto& s : r.steps) out.push_back(s.state.covariance());
        return out;
      });

  py::class_<oracle::DenseFilterResult>(m, "DenseFilterResult")
      .def_readonly("total_loglik", &oracle::DenseFilterResult::total_loglik)
      .def_readonly("means", &oracle::DenseFilterResult::means)
      .def_readonly("covariances", &oracle::DenseFilterResult::covariances)
      .def_readonly("loglik_terms", &oracle::DenseFilterResult::loglik_terms);

  m.def("filter",
        [](const ModelParams& p, const std::vector<Matrix>& ys) { return filter(p, as_columns(ys)); },
        py::arg("params"), py::arg("observations"));
  m.def("dense_filter",
        [](const ModelParams& p, const std::vector<Matrix>& ys) {
          return oracle::dense_filter(p, as_columns(ys));
        },
        py::arg("params"), py::arg("observations"));
  m.def("filter_jvp",
        [](const ModelParams& p, const ModelParams& direction, const std::vector<Matrix>& ys) {
          const auto r = filter_jvp(DualModelParams::seed(p, direction), as_columns(ys));
          return py::make_tuple(r.total_loglik.value, r.total_loglik.tangent);
        },
        py::arg("params"), py::arg("direction"), py::arg("observations"),
        "(log-likelihood, directional derivative)");
  m.def("gradient",
        [](const ModelParams& p, const std::vector<Matrix>& ys) { return gradient(p, as_columns(ys)); },
        py::arg("params"), py::arg("observations"));

  m.def("rank_sweep_model",
        [](double alpha) { return experiment::rank_sweep_model(alpha, {}); }, py::arg("alpha"));
  m.def("run_experiment",
        [](std::vector<double> alphas, std::size_t horizon, double fd_step) {
          experiment::ExperimentConfig cfg;
          cfg.alpha_grid = std::move(alphas);
          cfg.horizon = horizon;
          cfg.fd_step = fd_step;
          Matrix table(0, 4);
          const auto rows = experiment::run_experiment(cfg);
          table.resize(static_cast<Index>(rows.size()), 4);
          for (std::size_t i = 0; i < rows.size(); ++i) {
            table.row(static_cast<Index>(i)) << rows[i].alpha, rows[i].loglik, rows[i].ad_grad,
                rows[i].fd_grad;
          }
          return table;
        },
        py::arg("alphas") = experiment::uniform_grid(experiment::kDefaultGridPoints),
        py::arg("horizon") = experiment::kDefaultHorizon,
        py::arg("fd_step") = experiment::kDefaultFdStep,
        "Rows of (alpha, loglik, ad_grad, fd_grad).");
}
