#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nmpc/panoc.hpp"
#include "nmpc/scenario.hpp"

namespace nmpc {

/// One closed-loop step: the state the controller saw, the input it
/// applied, the obstacle penalty at that state, the solver statistics, and
/// the open-loop prediction the solution implies.
struct StepRecord {
  int step = 0;
  Vector state;
  Vector input;
  double penalty_value = 0.0;
  int iterations = 0;
  double solve_time_ms = 0.0;
  double residual_inf = 0.0;
  SolveStatus solver_status = SolveStatus::Converged;
  std::vector<Vector> predicted;  // x_0 .. x_N under the accepted inputs
};

struct TrajectoryLog {
  std::string scenario_name;
  int start_index = 0;
  std::vector<StepRecord> steps;
  Vector final_state;
  bool reached_target = false;
  /// Per-solve traces, aligned with `steps`; used by the invariant checks.
  std::vector<SolveReport> reports;
};

/// Shift-by-one warm start: drops the first stage input, moves the rest
/// forward and repeats the final stage.
Vector warm_start_shift(const Vector& u_prev, int n_u);

/// Opening guess for the first solve of a run (and for every solve in cold
/// mode): a clamped proportional pull of the velocity inputs toward the
/// reference position, rolled out through the plant model.
Vector first_solve_guess(const ControlProblem& problem);

struct ClosedLoopOptions {
  bool cold_start = false;  // re-start every solve from zero inputs
  bool use_projected_gradient = false;
  /// Keep the full solver trace of every step in the log (memory-heavy).
  bool keep_reports = true;
};

/// Receding-horizon run from scenario start `start_index`: each step solves
/// the horizon problem from the current plant state (warm-started from the
/// shifted previous solution), applies the first input to the nominal
/// plant, and logs one record. Stops early once position and heading are
/// within the scenario radii. Solver failures are logged and the
/// projected-gradient point is applied; a non-finite plant state aborts.
TrajectoryLog run_closed_loop(const Scenario& scenario, int start_index = 0,
                              const ClosedLoopOptions& options = {});

struct ComparisonRow {
  int step = 0;
  int panoc_iters = 0;
  double panoc_ms = 0.0;
  double panoc_resid = 0.0;
  int pg_iters = 0;
  double pg_ms = 0.0;
  double pg_resid = 0.0;
  SolveStatus pg_status = SolveStatus::Converged;
};

struct ComparisonTable {
  std::string scenario_name;
  int start_index = 0;
  std::vector<ComparisonRow> rows;
  double panoc_mean_iters = 0.0;
  double pg_mean_iters = 0.0;
  double panoc_mean_ms = 0.0;
  double pg_mean_ms = 0.0;
  /// pg_mean_iters / panoc_mean_iters (infinity when the denominator is 0).
  double iteration_ratio() const;
};

/// Runs the closed loop under PANOC and, at every step, also solves the
/// identical problem instance from the identical warm start with the
/// projected-gradient baseline, so the two columns compare solver effort on
/// the same sequence of subproblems. The baseline hitting its iteration cap
/// is recorded, not fatal.
ComparisonTable run_baseline_comparison(const Scenario& scenario, int start_index = 0);

/// Writes trajectory.csv, one predicted_<k>.csv per step and a key = value
/// summary.txt into `dir` (created if needed). Numbers carry 17 significant
/// digits so a reload is bit-exact.
void write_log(const TrajectoryLog& log, const std::filesystem::path& dir);

void write_comparison(const ComparisonTable& table, const std::filesystem::path& dir);

/// Reloads a trajectory.csv written by write_log (numeric fields only).
std::vector<std::vector<double>> read_csv(const std::filesystem::path& file);

/// Acceptance predicates of a finished run: target reached (when the
/// scenario enables the early-stop radius), zero obstacle penalty at every
/// applied state, and every solve converged within its iteration budget.
struct RunVerdict {
  bool reached = false;
  bool clear_of_obstacles = false;
  bool within_budget = false;
  bool ok() const { return reached && clear_of_obstacles && within_budget; }
};

RunVerdict evaluate_run(const Scenario& scenario, const TrajectoryLog& log);

}  // namespace nmpc
