#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nmpc/problem.hpp"

namespace nmpc {

/// Solver settings a scenario may override; defaults follow the solver.
struct SolverConfig {
  double tol = 1e-6;
  int max_iter = 500;
  int lbfgs_memory = 10;
  /// Opening guess for from-scratch solves: "zero" inputs or a clamped
  /// "feedback" pull toward the reference rolled through the plant.
  std::string first_guess = "zero";
};

/// One obstacle entry of a scenario file: a kind plus its named numeric
/// parameters, the weight eta, an optional safety margin for the built-in
/// shapes, and an optional stage activation window. A positive soft_buffer
/// additionally surrounds the obstacle with a keep-out skirt of that
/// thickness, realized through the domain-constraint penalty channel (the
/// g-term of the cost, not the obstacle term): unlike the obstacle penalty,
/// whose force fades out exactly at the boundary, the skirt still pushes
/// there, so the closed loop settles strictly outside the obstacle.
struct ObstacleSpec {
  std::string kind;
  std::map<std::string, std::vector<double>> params;
  double eta = 1.0;
  double margin = 0.0;
  double soft_buffer = 0.0;
  double soft_buffer_eta = 1.0;
  int active_from = 0;
  int active_to = -1;
  int line = 0;  // where the entry started, for diagnostics
};

/// Parsed and validated scenario description. See the README for the file
/// schema (versioned key/value text with [section] and [[obstacle]] blocks).
struct Scenario {
  std::string name;
  int schema_version = 1;

  std::string plant_kind = "trailer";
  double trailer_length = 0.5;

  std::string discretization = "rk4";  // rk4 | euler
  double dt = 0.1;

  int horizon = 50;

  Vector q_diag, r_diag, qn_diag;
  Vector x_ref, u_ref;
  Vector u_min, u_max;

  std::vector<ObstacleSpec> obstacle_specs;

  std::vector<Vector> initial_states;
  int sim_steps = 200;
  /// Early-stop radii; a negative pos_tol disables the early stop.
  double pos_tol = 1e-2;
  double heading_tol = 1e-2;
  /// Additive per-step state perturbation scale (zero = nominal plant).
  Vector perturbation_scale;
  unsigned int seed = 0;

  SolverConfig solver;

  /// Assembles the control problem (without an initial state; use
  /// ControlProblem::with_initial_state per solve).
  ControlProblem build_problem() const;
  Obstacle build_obstacle(const ObstacleSpec& spec) const;
};

struct SchemaError {
  int line = 0;
  std::string message;
};

struct ScenarioLoadResult {
  std::optional<Scenario> scenario;
  std::vector<SchemaError> errors;
  bool ok() const { return scenario.has_value() && errors.empty(); }
  std::string error_text() const;
};

/// Reads and fully validates a scenario file. On failure the result carries
/// every schema error found, each with the offending line number.
ScenarioLoadResult load_scenario(const std::string& path);

/// Same, from an already-open stream (used by tests and embedded configs).
ScenarioLoadResult parse_scenario(std::istream& in, const std::string& name);

}  // namespace nmpc
