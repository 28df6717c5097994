#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dpgmg/multigrid.hpp"

namespace dpgmg {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class TwoGrid { None, H, P };
enum class GuessPolicy { Zero, Previous, Both };
enum class ReportFormat { Json, Csv };

struct ExperimentConfig {
  std::string problem = "poisson";  // poisson | stokes | navier-stokes | cavity | cavity-ns
  int dim = 2;
  int k = 1;
  int delta_k = -1;  // -1: use dim
  int width = 4;
  int coarse_width = 2;  // root grid of multilevel runs
  TwoGrid two_grid = TwoGrid::None;
  int k_coarse = 1;
  bool skip_intermediate_p = true;
  int overlap_h = 1;
  int overlap_p = 0;
  SigmaMode sigma_mode = SigmaMode::Aggressive;
  double tol = 1e-10;
  bool adaptive = false;
  int refs = 8;
  double fraction = 0.2;
  double re = 0.0;  // 0: problem default
  double newton_eps0 = 1e-4;
  double newton_floor = 1e-8;
  int newton_max_steps = 30;
  int background_steps = 3;  // Newton steps of the linear-mesh background in fixed-mesh runs
  GuessPolicy guess = GuessPolicy::Zero;
  std::string out;
  ReportFormat format = ReportFormat::Json;

  int effective_delta_k() const { return delta_k > 0 ? delta_k : dim; }
  double effective_re() const;
  /// Sets one option from its flag name (without dashes) and text value.
  void set(const std::string& key, const std::string& value);
  /// Throws ConfigError when the options are inconsistent.
  void validate() const;
  /// Canonical key = value listing (also the hashed identity of a run).
  std::string to_text() const;
};

/// Flat `key = value` text; blank lines and lines starting with '#' ignored.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
std::uint64_t config_hash(const ExperimentConfig& c);

struct ReportRow {
  int k = 0;
  int width = 0;  // uniform runs
  int ref = -1;  // adaptive runs
  double h_max = 0.0;
  double h_min = 0.0;
  int elements = 0;
  int dofs = 0;
  int h_levels = 0;
  int p_levels = 0;
  std::optional<double> energy_error;
  int iterations = 0;  // zero guess unless only the previous guess was run
  std::optional<int> iterations_previous;
  int nonlinear_steps = 0;
  std::vector<int> step_iterations;
  bool converged = true;
};

struct TableReport {
  std::string experiment;
  ExperimentConfig config;
  std::vector<ReportRow> rows;

  bool all_converged() const;
};

TableReport run_two_grid(const ExperimentConfig& c);
TableReport run_multilevel(const ExperimentConfig& c);
TableReport run_adaptive_stokes(const ExperimentConfig& c);
TableReport run_adaptive_navier_stokes(const ExperimentConfig& c);
/// Dispatches on the adaptive flag, problem and two-grid mode.
TableReport run_experiment(const ExperimentConfig& c);

struct NewtonOptions {
  double threshold = 1e-4;
  int max_steps = 30;
  int fixed_steps = 0;  // > 0: take exactly this many steps
  bool direct = false;  // sparse direct solves instead of multigrid CG
};

struct NewtonResult {
  Solution solution;
  int steps = 0;
  std::vector<int> step_iterations;
  double relative_error = 0.0;
  double increment = 0.0;  // L2 norm of the last field increment
  std::vector<double> increments;
  bool converged = false;  // increment below threshold
  bool solves_converged = true;
  int h_levels = 0;
  int p_levels = 0;
  int dofs = 0;
};

/// Newton iteration on a fixed mesh starting from `initial` (zero fields and
/// Dirichlet traces when null).
NewtonResult newton_solve(const ExperimentConfig& c, const Mesh& mesh, const ProblemSpec& base,
                          const Solution* initial, const NewtonOptions& opt);

/// L2 norm of all field components of a solution.
double field_l2_norm(const Solution& s);

std::string format_report(const TableReport& r, ReportFormat f);
void write_report(const TableReport& r, const std::string& path, ReportFormat f);
/// Inverse of the JSON format (rows and experiment name; config via its text).
TableReport parse_report_json(const std::string& text);

}  // namespace dpgmg
