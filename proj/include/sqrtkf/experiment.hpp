#pragma once

// Rank-deficiency sweep: the model
//
//     A = 0.9 I_4,  U^{1/2} = 0.1 I_4,  B = [I_2 0],  V^{1/2}(alpha) = diag(1, alpha)
//
// with all observations zero, for alpha in [0, 1]. alpha = 1 gives full-rank
// observation noise and alpha = 0 a rank-one V. For each alpha the sweep
// records the log-likelihood, its forward-mode tangent in alpha and a finite
// difference of the same quantity.
//
// A model file can replace the default model; alpha then scales the last
// column of its v_sqrt.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sqrtkf/kalman.hpp"
#include "sqrtkf/matrix.hpp"

namespace sqrtkf::experiment {

inline constexpr std::size_t kDefaultGridPoints = 21;
inline constexpr std::size_t kDefaultHorizon = 50;
inline constexpr double kDefaultFdStep = 1e-6;
/// Relative tolerance for the Gramian identity residual, scaled by
/// (1 + |M|_F)(1 + |dM|_F).
inline constexpr double kGramianTol = 1e-9;
/// A classical tangent is flagged invalid when its Gramian residual exceeds
/// this multiple of max(surrogate residual, kGramianTol * scale).
inline constexpr double kInvalidResidualFactor = 1e3;

/// count >= 2 uniformly spaced points on [0, 1].
std::vector<double> uniform_grid(std::size_t count);

/// "21" -> uniform_grid(21); "0,0.5,1" or "0.25" -> explicit list.
/// A value containing ',' or '.' is a list, otherwise an integer count.
std::vector<double> parse_alpha_grid(std::string_view text);

struct ExperimentConfig {
  std::vector<double> alpha_grid = uniform_grid(kDefaultGridPoints);
  std::size_t horizon = kDefaultHorizon;
  std::optional<Matrix> x0;
  std::optional<Matrix> s0;
  double fd_step = kDefaultFdStep;
  std::string output_path = "rank_sweep.csv";
  bool emit_plot = false;
  std::uint64_t seed = 0;  // reserved: observations are deterministic

  std::optional<ModelParams> base_model;  // replaces the default model
  std::vector<Matrix> observations;       // empty: `horizon` zero vectors

  void validate() const;
};

class ExperimentError : public std::runtime_error {
 public:
  ExperimentError(const std::string& what, double alpha)
      : std::runtime_error(what), alpha_(alpha) {}
  double alpha() const noexcept { return alpha_; }

 private:
  double alpha_;
};

/// Throws ValidationError unless 0 <= alpha <= 1.
ModelParams rank_sweep_model(double alpha, const ExperimentConfig& cfg);

/// d(theta)/d(alpha): zero except the last column of v_sqrt.
ModelParams alpha_direction(const ExperimentConfig& cfg);

std::vector<Matrix> sweep_observations(const ExperimentConfig& cfg);

struct SweepRow {
  double alpha = 0.0;
  double loglik = 0.0;
  double ad_grad = 0.0;
  double fd_grad = 0.0;

  bool operator==(const SweepRow&) const = default;
};
using SweepTable = std::vector<SweepRow>;

/// Rows sorted by alpha. The FD tangent is central in the interior,
/// forward at alpha = 0 and backward at alpha = 1. Grid points run
/// concurrently. A degenerate innovation surfaces as ExperimentError.
SweepTable run_experiment(const ExperimentConfig& cfg);

enum class ClassicalStatus { agrees, singular, non_finite, gramian_violation };

std::string_view to_string(ClassicalStatus s);

struct FailureCase {
  double alpha = 0.0;
  ClassicalStatus status = ClassicalStatus::agrees;
  double surrogate_residual = 0.0;
  double surrogate_norm = 0.0;
  double classical_residual = 0.0;  // NaN unless computed
  double classical_norm = 0.0;      // NaN unless computed
  double discrepancy = 0.0;         // |classical - surrogate|_F, NaN unless computed
  double residual_scale = 0.0;      // (1 + |M|_F)(1 + |dM|_F)

  bool classical_invalid() const { return status != ClassicalStatus::agrees; }
};

struct FailureReport {
  std::vector<FailureCase> cases;
};

/// Evaluates classical and surrogate tangents of the first update block along
/// d/d(alpha) at each alpha.
FailureReport run_failure_demo(const ExperimentConfig& cfg,
                               std::span<const double> alphas = std::span<const double>{});

std::string format_report(const FailureReport& report);

inline constexpr std::string_view kCsvHeader = "alpha,loglik,ad_grad,fd_grad";

/// One-line "# key=value ..." description of the configuration.
std::string provenance_line(const ExperimentConfig& cfg);

/// Optional provenance comment line, the header, then one row per entry with
/// shortest round-trip decimals.
void write_csv(std::ostream& out, const SweepTable& table,
               std::optional<std::string_view> provenance = std::nullopt);
SweepTable read_csv(std::istream& in);

/// Self-contained SVG: the log-likelihood curve with a tangent arrow at each
/// grid point.
void write_svg(std::ostream& out, const SweepTable& table);

struct EmittedFiles {
  std::string csv_path;
  std::optional<std::string> plot_path;
};

/// Writes cfg.output_path (CSV with provenance) and, if cfg.emit_plot, the SVG
/// next to it. Throws IoError naming the path on failure.
EmittedFiles emit_outputs(const SweepTable& table, const ExperimentConfig& cfg);

}  // namespace sqrtkf::experiment
