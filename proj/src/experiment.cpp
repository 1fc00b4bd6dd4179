#include "sqrtkf/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <sstream>

#include "sqrtkf/dual.hpp"
#include "sqrtkf/oracle.hpp"
#include "sqrtkf/triangularize.hpp"

namespace sqrtkf::experiment {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string shortest(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

double parse_double(std::string_view tok, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ValidationError(std::string(what) + ": invalid number '" + std::string(tok) + "'");
  }
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// The model at alpha without the [0, 1] range check (finite differences may
// step just outside the grid but never outside the domain).
ModelParams model_at(double alpha, const ExperimentConfig& cfg) {
  ModelParams p;
  if (cfg.base_model) {
    p = *cfg.base_model;
    p.v_sqrt.col(p.v_sqrt.cols() - 1) *= alpha;
  } else {
    p.a = 0.9 * Matrix::Identity(4, 4);
    p.b = Matrix::Zero(2, 4);
    p.b.leftCols(2).setIdentity();
    p.u_sqrt = 0.1 * Matrix::Identity(4, 4);
    p.v_sqrt = Matrix::Identity(2, 2);
    p.v_sqrt(1, 1) = alpha;
    p.x0 = Matrix::Zero(4, 1);
    p.s0 = Matrix::Identity(4, 4);
  }
  if (cfg.x0) p.x0 = *cfg.x0;
  if (cfg.s0) p.s0 = *cfg.s0;
  p.validate();
  return p;
}

SweepRow evaluate(double alpha, const ExperimentConfig& cfg, const std::vector<Matrix>& obs,
                  const ModelParams& direction) {
  SweepRow row;
  row.alpha = alpha;
  const auto dual = filter_jvp(DualModelParams::seed(model_at(alpha, cfg), direction), obs);
  row.loglik = dual.total_loglik.value;
  row.ad_grad = dual.total_loglik.tangent;

  auto loglik = [&](double a) { return filter(model_at(a, cfg), obs).total_loglik; };
  const oracle::FdConfig fd{cfg.fd_step, true};
  const double h = fd.step_at(alpha);
  if (alpha - h < 0.0) {
    row.fd_grad = (loglik(alpha + h) - row.loglik) / h;
  } else if (alpha + h > 1.0) {
    row.fd_grad = (row.loglik - loglik(alpha - h)) / h;
  } else {
    row.fd_grad = oracle::fd_derivative(loglik, alpha, fd);
  }
  return row;
}

}  // namespace

std::vector<double> uniform_grid(std::size_t count) {
  if (count < 2) throw ValidationError("alpha grid: count must be at least 2");
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) {
    grid[i] = static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return grid;
}

std::vector<double> parse_alpha_grid(std::string_view text) {
  text = trim(text);
  if (text.empty()) throw ValidationError("alpha grid: empty");
  if (text.find_first_of(",.") == std::string_view::npos) {
    std::size_t count = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), count);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw ValidationError("alpha grid: invalid count '" + std::string(text) + "'");
    }
    return uniform_grid(count);
  }
  std::vector<double> grid;
  while (true) {
    const auto comma = text.find(',');
    grid.push_back(parse_double(trim(text.substr(0, comma)), "alpha grid"));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return grid;
}

void ExperimentConfig::validate() const {
  if (alpha_grid.empty()) throw ValidationError("alpha grid is empty");
  for (double a : alpha_grid) {
    if (!(a >= 0.0 && a <= 1.0)) {
      throw ValidationError("alpha " + shortest(a) + " outside [0, 1]");
    }
  }
  if (horizon < 1 && observations.empty()) throw ValidationError("horizon must be >= 1");
  oracle::FdConfig{fd_step, true}.validate();
  if (base_model) base_model->validate();
  model_at(1.0, *this);  // x0 / s0 overrides must fit the model
}

ModelParams rank_sweep_model(double alpha, const ExperimentConfig& cfg) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ValidationError("alpha " + shortest(alpha) + " outside [0, 1]");
  }
  return model_at(alpha, cfg);
}

ModelParams alpha_direction(const ExperimentConfig& cfg) {
  const ModelParams at_one = model_at(1.0, cfg);
  ModelParams d = at_one.zeros_like();
  const Index last = d.v_sqrt.cols() - 1;
  d.v_sqrt.col(last) = at_one.v_sqrt.col(last);
  return d;
}

std::vector<Matrix> sweep_observations(const ExperimentConfig& cfg) {
  if (!cfg.observations.empty()) return cfg.observations;
  const Index dy = cfg.base_model ? cfg.base_model->obs_dim() : 2;
  return std::vector<Matrix>(cfg.horizon, Matrix::Zero(dy, 1));
}

SweepTable run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<double> alphas = cfg.alpha_grid;
  std::sort(alphas.begin(), alphas.end());
  const std::vector<Matrix> obs = sweep_observations(cfg);
  const ModelParams direction = alpha_direction(cfg);

  std::vector<std::future<SweepRow>> jobs;
  jobs.reserve(alphas.size());
  for (double alpha : alphas) {
    jobs.push_back(std::async(std::launch::async, [&cfg, &obs, &direction, alpha] {
      try {
        return evaluate(alpha, cfg, obs, direction);
      } catch (const DegenerateInnovationError& e) {
        throw ExperimentError("alpha = " + shortest(alpha) + ": " + e.what(), alpha);
      }
    }));
  }
  SweepTable table;
  table.reserve(jobs.size());
  for (auto& job : jobs) table.push_back(job.get());
  return table;
}

std::string_view to_string(ClassicalStatus s) {
  switch (s) {
    case ClassicalStatus::agrees: return "agrees";
    case ClassicalStatus::singular: return "singular";
    case ClassicalStatus::non_finite: return "non-finite";
    case ClassicalStatus::gramian_violation: return "gramian-violation";
  }
  return "unknown";
}

FailureReport run_failure_demo(const ExperimentConfig& cfg, std::span<const double> alphas) {
  static constexpr double kDefaultAlphas[] = {0.0, 1e-8, 1.0};
  if (alphas.empty()) alphas = kDefaultAlphas;
  const ModelParams direction = alpha_direction(cfg);

  FailureReport report;
  for (double alpha : alphas) {
    const ModelParams p = rank_sweep_model(alpha, cfg);
    const FilterState pred = predict({p.x0, p.s0}, p.a, p.u_sqrt);
    const Matrix m = update_block(p.b, pred.factor, p.v_sqrt);
    const Index dy = p.obs_dim();
    Matrix dm = Matrix::Zero(m.rows(), m.cols());
    dm.topRightCorner(dy, dy) = direction.v_sqrt;

    const TriangularizationResult res = triangularize(m);
    const Matrix surrogate = jvp_triangularize(res, dm);

    FailureCase c;
    c.alpha = alpha;
    c.residual_scale = (1.0 + m.norm()) * (1.0 + dm.norm());
    c.surrogate_residual = gramian_residual(m, dm, res.l, surrogate);
    c.surrogate_norm = surrogate.norm();
    c.classical_residual = kNaN;
    c.classical_norm = kNaN;
    c.discrepancy = kNaN;
    try {
      const Matrix classical = oracle::classical_qr_jvp(res, dm);
      c.classical_norm = classical.norm();
      if (!classical.allFinite()) {
        c.status = ClassicalStatus::non_finite;
      } else {
        c.classical_residual = gramian_residual(m, dm, res.l, classical);
        c.discrepancy = (classical - surrogate).norm();
        const double threshold = kInvalidResidualFactor *
                                 std::max(c.surrogate_residual, kGramianTol * c.residual_scale);
        c.status = c.classical_residual > threshold ? ClassicalStatus::gramian_violation
                                                    : ClassicalStatus::agrees;
      }
    } catch (const SingularSystemError&) {
      c.status = ClassicalStatus::singular;
    }
    report.cases.push_back(c);
  }
  return report;
}

std::string format_report(const FailureReport& report) {
  std::ostringstream out;
  out << "classical QR tangent vs surrogate tangent on the first update block, "
         "direction d/dalpha\n";
  for (const FailureCase& c : report.cases) {
    out << "alpha=" << shortest(c.alpha) << " classical=" << to_string(c.status)
        << (c.classical_invalid() ? " (INVALID)" : "")
        << " classical_residual=" << shortest(c.classical_residual)
        << " classical_norm=" << shortest(c.classical_norm)
        << " surrogate_residual=" << shortest(c.surrogate_residual)
        << " surrogate_norm=" << shortest(c.surrogate_norm)
        << " discrepancy=" << shortest(c.discrepancy) << "\n";
  }
  return out.str();
}

std::string provenance_line(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "# model=" << (cfg.base_model ? "file" : "default")
      << " horizon=" << sweep_observations(cfg).size()
      << " observations=" << (cfg.observations.empty() ? "zeros" : "file")
      << " x0=" << (cfg.x0 ? "override" : "default") << " s0=" << (cfg.s0 ? "override" : "default")
      << " fd_step=" << shortest(cfg.fd_step) << " grid_points=" << cfg.alpha_grid.size()
      << " seed=" << cfg.seed;
  return out.str();
}

void write_csv(std::ostream& out, const SweepTable& table,
               std::optional<std::string_view> provenance) {
  if (provenance) out << *provenance << '\n';
  out << kCsvHeader << '\n';
  for (const SweepRow& r : table) {
    out << shortest(r.alpha) << ',' << shortest(r.loglik) << ',' << shortest(r.ad_grad) << ','
        << shortest(r.fd_grad) << '\n';
  }
}

SweepTable read_csv(std::istream& in) {
  SweepTable table;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != kCsvHeader) throw ValidationError("csv: unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    std::string_view rest = line;
    double v[4];
    for (int k = 0; k < 4; ++k) {
      const auto comma = rest.find(',');
      if ((k < 3) == (comma == std::string_view::npos)) {
        throw ValidationError("csv: expected 4 fields in '" + line + "'");
      }
      v[k] = parse_double(rest.substr(0, comma), "csv");
      if (comma != std::string_view::npos) rest.remove_prefix(comma + 1);
    }
    table.push_back({v[0], v[1], v[2], v[3]});
  }
  if (!header_seen) throw ValidationError("csv: missing header");
  return table;
}

void write_svg(std::ostream& out, const SweepTable& table) {
  constexpr double kWidth = 720, kHeight = 440;
  constexpr double kLeft = 80, kRight = 30, kTop = 40, kBottom = 60;
  constexpr double kArrow = 36;

  double a_min = table.front().alpha, a_max = table.front().alpha;
  double l_min = table.front().loglik, l_max = table.front().loglik;
  for (const SweepRow& r : table) {
    a_min = std::min(a_min, r.alpha);
    a_max = std::max(a_max, r.alpha);
    l_min = std::min(l_min, r.loglik);
    l_max = std::max(l_max, r.loglik);
  }
  if (a_max - a_min <= 0) a_max = a_min + 1;
  if (l_max - l_min <= 0) {
    l_min -= 0.5;
    l_max += 0.5;
  }
  const double pad = 0.08 * (l_max - l_min);
  l_min -= pad;
  l_max += pad;
  const double sx = (kWidth - kLeft - kRight) / (a_max - a_min);
  const double sy = (kHeight - kTop - kBottom) / (l_max - l_min);
  auto px = [&](double a) { return kLeft + (a - a_min) * sx; };
  auto py = [&](double l) { return kHeight - kBottom - (l - l_min) * sy; };

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
      << "<defs><marker id=\"head\" markerWidth=\"8\" markerHeight=\"8\" refX=\"7\" refY=\"4\" "
         "orient=\"auto\"><path d=\"M0,0 L8,4 L0,8 z\" fill=\"#c0392b\"/></marker></defs>\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"15\">log-likelihood vs alpha with AD tangents</text>\n";
  // axes
  out << "<g stroke=\"black\" stroke-width=\"1\">\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << kWidth - kRight
      << "\" y2=\"" << kHeight - kBottom << "\"/>\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << kHeight - kBottom << "\"/>\n</g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int k = 0; k <= 4; ++k) {
    const double a = a_min + (a_max - a_min) * k / 4.0;
    const double l = l_min + (l_max - l_min) * k / 4.0;
    out << "<text x=\"" << fixed(px(a)) << "\" y=\"" << kHeight - kBottom + 16
        << "\" text-anchor=\"middle\">" << fixed(a) << "</text>\n";
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << fixed(py(l) + 4)
        << "\" text-anchor=\"end\">" << fixed(l, 1) << "</text>\n";
  }
  out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 18
      << "\" text-anchor=\"middle\">alpha</text>\n"
      << "<text x=\"18\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << kHeight / 2 << ")\">log-likelihood</text>\n</g>\n";

  out << "<polyline id=\"curve\" fill=\"none\" stroke=\"#2c3e50\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << (i ? " " : "") << fixed(px(table[i].alpha)) << ',' << fixed(py(table[i].loglik));
  }
  out << "\"/>\n<g id=\"tangents\" stroke=\"#c0392b\" stroke-width=\"1.5\">\n";
  for (const SweepRow& r : table) {
    double dx = sx;
    double dy = -r.ad_grad * sy;
    const double len = std::hypot(dx, dy);
    if (!(len > 0) || !std::isfinite(len)) {
      dx = 0;
      dy = 0;
    } else {
      dx *= kArrow / len;
      dy *= kArrow / len;
    }
    const double x0 = px(r.alpha), y0 = py(r.loglik);
    out << "<line class=\"tangent\" x1=\"" << fixed(x0) << "\" y1=\"" << fixed(y0) << "\" x2=\""
        << fixed(x0 + dx) << "\" y2=\"" << fixed(y0 + dy) << "\" marker-end=\"url(#head)\"/>\n";
  }
  out << "</g>\n<g fill=\"#2c3e50\">\n";
  for (const SweepRow& r : table) {
    out << "<circle cx=\"" << fixed(px(r.alpha)) << "\" cy=\"" << fixed(py(r.loglik))
        << "\" r=\"2.5\"/>\n";
  }
  out << "</g>\n</svg>\n";
}

EmittedFiles emit_outputs(const SweepTable& table, const ExperimentConfig& cfg) {
  if (table.empty()) throw ValidationError("emit_outputs: empty table");
  EmittedFiles files;
  files.csv_path = cfg.output_path;
  {
    std::ofstream out(files.csv_path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + files.csv_path + "'");
    write_csv(out, table, provenance_line(cfg));
    if (!out) throw IoError("write failed for '" + files.csv_path + "'");
  }
  if (cfg.emit_plot) {
    std::string plot = cfg.output_path;
    const auto slash = plot.find_last_of('/');
    const auto dot = plot.find_last_of('.');
    if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) {
      plot.erase(dot);
    }
    plot += ".svg";
    std::ofstream out(plot, std::ios::binary);
    if (!out) throw IoError("cannot write '" + plot + "'");
    write_svg(out, table);
    if (!out) throw IoError("write failed for '" + plot + "'");
    files.plot_path = plot;
  }
  return files;
}

}  // namespace sqrtkf::experiment
