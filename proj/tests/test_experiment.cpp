#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <Eigen/LU>

#include "doctest.h"
#include "sqrtkf/dual.hpp"
#include "sqrtkf/experiment.hpp"
#include "sqrtkf/model_file.hpp"
#include "test_support.hpp"

using namespace sqrtkf;
using namespace sqrtkf::experiment;
using sqrtkf::testing::rel_err;

namespace {

namespace fs = std::filesystem;

fs::path temp_path(const std::string& name) {
  fs::path dir = fs::path(SQRTKF_TEST_TMPDIR) / "experiment";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

const std::string kScalarJson = R"({
  "d_x": 1, "d_y": 1,
  "a": [[1.0]], "b": [[1.0]], "u_sqrt": [[0.0]], "v_sqrt": "1 1\n1",
  "x0": [0.0], "s0": [[1.0]],
  "observations": [[0.0], [0.3], [-0.2]]
})";

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("sweep model") {
  const ExperimentConfig cfg;
  const ModelParams full = rank_sweep_model(1.0, cfg);
  CHECK(full.v_sqrt == Matrix::Identity(2, 2));
  CHECK(full.a == 0.9 * Matrix::Identity(4, 4));
  CHECK(rel_err(full.u_sqrt * full.u_sqrt.transpose(), 0.01 * Matrix::Identity(4, 4)) < 1e-16);
  const ModelParams rank_one = rank_sweep_model(0.0, cfg);
  CHECK(Eigen::FullPivLU<Matrix>(rank_one.v_sqrt).rank() == 1);
  CHECK(rank_one.b.leftCols(2) == Matrix::Identity(2, 2));
  CHECK(rank_one.b.rightCols(2).norm() == 0.0);
  CHECK_THROWS_AS(rank_sweep_model(-0.1, cfg), ValidationError);
  CHECK_THROWS_AS(rank_sweep_model(1.5, cfg), ValidationError);
  CHECK_THROWS_AS(rank_sweep_model(std::nan(""), cfg), ValidationError);

  const ModelParams dir = alpha_direction(cfg);
  CHECK(dir.v_sqrt(1, 1) == 1.0);
  CHECK(dir.v_sqrt.sum() == 1.0);
  CHECK(sweep_observations(cfg).size() == kDefaultHorizon);
}

TEST_CASE("grid parsing") {
  CHECK(uniform_grid(3) == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(uniform_grid(21).size() == 21);
  CHECK(uniform_grid(21)[20] == 1.0);
  CHECK(parse_alpha_grid("5").size() == 5);
  CHECK(parse_alpha_grid("0,0.25,1") == std::vector<double>{0.0, 0.25, 1.0});
  CHECK(parse_alpha_grid("0.5") == std::vector<double>{0.5});
  CHECK_THROWS_AS(parse_alpha_grid("1"), ValidationError);
  CHECK_THROWS_AS(parse_alpha_grid("abc"), ValidationError);
  CHECK_THROWS_AS(parse_alpha_grid("0,x"), ValidationError);
  CHECK_THROWS_AS(parse_alpha_grid(""), ValidationError);
}

TEST_CASE("config validation") {
  ExperimentConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.fd_step = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.alpha_grid = {0.5, 2.0};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.horizon = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.x0 = Matrix::Zero(3, 1);
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("sweep rows: finite, AD tangent vanishes at rank one and matches FD elsewhere") {
  ExperimentConfig cfg;
  cfg.alpha_grid = {1.0, 0.0, 0.25, 0.5};
  const SweepTable table = run_experiment(cfg);
  REQUIRE(table.size() == 4);
  CHECK(table[0].alpha == 0.0);
  CHECK(table[3].alpha == 1.0);
  for (const SweepRow& r : table) {
    CHECK(std::isfinite(r.loglik));
    CHECK(std::isfinite(r.ad_grad));
    CHECK(std::isfinite(r.fd_grad));
  }
  CHECK(std::abs(table[0].ad_grad) <= 1e-8);
  for (std::size_t i = 1; i < table.size(); ++i) {
    CHECK(std::abs(table[i].ad_grad - table[i].fd_grad) <= 1e-4 * (1.0 + std::abs(table[i].fd_grad)));
  }
  // log-likelihood of a zero sequence falls as the second noise channel widens
  CHECK(table[0].loglik > table[3].loglik);

  const ModelParams p = rank_sweep_model(0.5, cfg);
  CHECK(table[2].loglik == filter(p, sweep_observations(cfg)).total_loglik);
}

TEST_CASE("sweep curve is consistent with its tangents") {
  ExperimentConfig cfg;
  const SweepTable t = run_experiment(cfg);
  REQUIRE(t.size() == kDefaultGridPoints);
  const double step = t[1].alpha - t[0].alpha;
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    const double secant = (t[i + 1].loglik - t[i - 1].loglik) / (2 * step);
    // central secant error is ~ step^2 |L'''| / 6 ~ |g_{i+1} - 2 g_i + g_{i-1}| / 6
    const double curvature = std::abs(t[i + 1].ad_grad - 2 * t[i].ad_grad + t[i - 1].ad_grad);
    CHECK(std::abs(secant - t[i].ad_grad) <= curvature + 1e-6 * (1.0 + std::abs(t[i].ad_grad)));
  }
}

TEST_CASE("failure demo") {
  const ExperimentConfig cfg;
  const FailureReport report = run_failure_demo(cfg);
  REQUIRE(report.cases.size() == 3);
  const FailureCase& zero = report.cases[0];
  const FailureCase& tiny = report.cases[1];
  const FailureCase& one = report.cases[2];
  CHECK(zero.alpha == 0.0);
  CHECK(zero.classical_invalid());
  CHECK(zero.surrogate_residual <= kGramianTol * zero.residual_scale);

  CHECK(tiny.alpha == 1e-8);
  CHECK(tiny.surrogate_residual <= kGramianTol * tiny.residual_scale);
  CHECK(std::isfinite(tiny.surrogate_norm));
  MESSAGE("alpha=1e-8: classical " << to_string(tiny.status) << ", discrepancy " << tiny.discrepancy
                                   << ", norms " << tiny.classical_norm << " / " << tiny.surrogate_norm);

  CHECK(!one.classical_invalid());
  CHECK(one.discrepancy <= 1e-10 * (1.0 + one.surrogate_norm));

  const std::string text = format_report(report);
  CHECK(text.find("alpha=0 classical=") != std::string::npos);
  CHECK(text.find("(INVALID)") != std::string::npos);

  const double custom[] = {0.5};
  CHECK(run_failure_demo(cfg, custom).cases.size() == 1);
}

TEST_CASE("csv output") {
  const SweepTable table{{0.0, 19.25, 0.0, 1e-9}, {0.5, -3.5, -50.125, -50.1}, {1.0, -95.4, -120.0, -119.9}};
  std::ostringstream out;
  write_csv(out, table);
  const std::string text = out.str();
  CHECK(count(text, "\n") == 4);
  CHECK(text.rfind(std::string(kCsvHeader) + "\n", 0) == 0);

  std::istringstream in(text);
  CHECK(read_csv(in) == table);

  std::ostringstream with_prov;
  write_csv(with_prov, table, "# seed=0");
  CHECK(with_prov.str().rfind("# seed=0\n", 0) == 0);
  std::istringstream in2(with_prov.str());
  CHECK(read_csv(in2) == table);

  std::istringstream bad("alpha,loglik\n0,1\n");
  CHECK_THROWS(read_csv(bad));
}

TEST_CASE("outputs are deterministic and reproducible") {
  ExperimentConfig cfg;
  cfg.alpha_grid = uniform_grid(5);
  cfg.horizon = 10;
  cfg.emit_plot = true;
  cfg.output_path = temp_path("a.csv").string();
  const EmittedFiles first = emit_outputs(run_experiment(cfg), cfg);
  cfg.output_path = temp_path("b.csv").string();
  const EmittedFiles second = emit_outputs(run_experiment(cfg), cfg);
  CHECK(slurp(first.csv_path) == slurp(second.csv_path));
  REQUIRE(first.plot_path);
  REQUIRE(second.plot_path);
  CHECK(fs::path(*first.plot_path).extension() == ".svg");
  CHECK(slurp(*first.plot_path) == slurp(*second.plot_path));

  const std::string csv = slurp(first.csv_path);
  CHECK(csv.rfind("# ", 0) == 0);
  CHECK(count(csv, "\n") == 2 + 5);

  std::ifstream back(first.csv_path);
  const SweepTable rows = read_csv(back);
  CHECK(rows == run_experiment(cfg));
}

TEST_CASE("svg plot structure") {
  ExperimentConfig cfg;
  cfg.alpha_grid = uniform_grid(4);
  cfg.horizon = 5;
  std::ostringstream out;
  write_svg(out, run_experiment(cfg));
  const std::string svg = out.str();
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(count(svg, "id=\"curve\"") == 1);
  CHECK(count(svg, "class=\"tangent\"") == 4);
  CHECK(svg.find("nan") == std::string::npos);
}

TEST_CASE("emit_outputs reports unwritable paths") {
  ExperimentConfig cfg;
  cfg.alpha_grid = uniform_grid(2);
  cfg.horizon = 2;
  cfg.output_path = (temp_path("missing") / "dir" / "x.csv").string();
  CHECK_THROWS_AS(emit_outputs(run_experiment(cfg), cfg), IoError);
}

TEST_CASE("model files") {
  const ModelFile f = parse_model_file(kScalarJson);
  CHECK(f.params.v_sqrt(0, 0) == 1.0);
  CHECK(f.observations.size() == 3);
  CHECK(f.observations[1](0, 0) == 0.3);

  const ModelFile again = parse_model_file(to_json(f));
  const auto a = f.params.fields();
  const auto b = again.params.fields();
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(*a[k] == *b[k]);
  REQUIRE(again.observations.size() == 3);
  CHECK(again.observations[2] == f.observations[2]);

  CHECK_THROWS(parse_model_file("{"));
  CHECK_THROWS(parse_model_file(R"({"a": [[1.0]]})"));
  CHECK_THROWS(parse_model_file(R"({"d_x": 2, "a": [[1]], "b": [[1]], "u_sqrt": [[0]],
                                  "v_sqrt": [[1]], "x0": [0], "s0": [[1]]})"));
  CHECK_THROWS(parse_model_file(R"({"a": [[1, 2], [3]], "b": [[1]], "u_sqrt": [[0]],
                                  "v_sqrt": [[1]], "x0": [0], "s0": [[1]]})"));
  CHECK_THROWS_AS(load_model_file(temp_path("nope.json").string()), IoError);
}

TEST_CASE("sweep over a model file") {
  ExperimentConfig cfg;
  const ModelFile f = parse_model_file(kScalarJson);
  cfg.base_model = f.params;
  cfg.observations = f.observations;
  cfg.alpha_grid = {0.5, 1.0};
  const SweepTable t = run_experiment(cfg);
  REQUIRE(t.size() == 2);
  CHECK(rank_sweep_model(0.5, cfg).v_sqrt(0, 0) == 0.5);
  CHECK(t[1].loglik == doctest::Approx(filter(f.params, f.observations).total_loglik));
  CHECK(std::abs(t[0].ad_grad - t[0].fd_grad) <= 1e-4 * (1.0 + std::abs(t[0].fd_grad)));

  // A rank-one scalar V at alpha = 0 with u = 0 and a perfectly observed state
  // leaves a zero innovation variance at the second step.
  cfg.alpha_grid = {0.0};
  CHECK_THROWS_AS(run_experiment(cfg), ExperimentError);
}

}  // TEST_SUITE
