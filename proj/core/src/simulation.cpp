#include "nmpc/simulation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "nmpc/projected_gradient.hpp"
#include "nmpc/shooting.hpp"

namespace nmpc {

Vector warm_start_shift(const Vector& u_prev, int n_u) {
  if (n_u < 1 || u_prev.size() % n_u != 0) {
    throw std::invalid_argument("warm start shift: length is not a multiple of n_u");
  }
  const Eigen::Index N = u_prev.size() / n_u;
  Vector shifted(u_prev.size());
  if (N == 1) {
    return u_prev;
  }
  shifted.head((N - 1) * n_u) = u_prev.tail((N - 1) * n_u);
  shifted.tail(n_u) = u_prev.tail(n_u);
  return shifted;
}

namespace {

double applied_state_penalty(const ControlProblem& problem, const Vector& x) {
  const std::vector<int> slice = problem.effective_slice();
  if (slice.empty()) {
    return 0.0;
  }
  Vector z(static_cast<Eigen::Index>(slice.size()));
  for (std::size_t i = 0; i < slice.size(); ++i) {
    z[static_cast<Eigen::Index>(i)] = x[slice[i]];
  }
  double sum = 0.0;
  for (const auto& ao : problem.obstacles) {
    if (ao.active_at(0, problem.N)) {
      sum += 2.0 * ao.obstacle.eta() * violation(ao.obstacle, z);
    }
  }
  return sum;
}

bool at_target(const Scenario& sc, const Vector& x) {
  if (sc.pos_tol < 0.0) {
    return false;
  }
  const double pos_err = (x.head(2) - sc.x_ref.head(2)).norm();
  const double heading_err = std::abs(x[2] - sc.x_ref[2]);
  return pos_err <= sc.pos_tol && heading_err <= sc.heading_tol;
}

PanocParams solver_params(const Scenario& sc) {
  PanocParams params;
  params.tol = sc.solver.tol;
  params.max_iter = sc.solver.max_iter;
  params.lbfgs_memory = sc.solver.lbfgs_memory;
  return params;
}

}  // namespace

Vector first_solve_guess(const ControlProblem& problem) {
  const int n_u = problem.input_dim();
  Vector guess(problem.num_inputs());
  Vector x = problem.x0;
  Vector x_next(problem.state_dim());
  Vector u_k(n_u);
  for (int k = 0; k < problem.N; ++k) {
    // clamped proportional pull toward the reference position; crude, but a
    // dynamically consistent unroll is a far better opener than all zeros
    u_k = 0.5 * (problem.cost.x_ref.head(n_u) - x.head(n_u));
    for (int i = 0; i < n_u; ++i) {
      u_k[i] = std::clamp(u_k[i], problem.box.u_min[i], problem.box.u_max[i]);
    }
    guess.segment(static_cast<Eigen::Index>(k) * n_u, n_u) = u_k;
    problem.dynamics.step(x, u_k, x_next);
    x.swap(x_next);
  }
  return guess;
}

TrajectoryLog run_closed_loop(const Scenario& scenario, int start_index,
                              const ClosedLoopOptions& options) {
  if (start_index < 0 || start_index >= static_cast<int>(scenario.initial_states.size())) {
    throw std::out_of_range("scenario has no initial state with that index");
  }
  const ControlProblem base = scenario.build_problem();
  const PanocParams params = solver_params(scenario);
  RolloutWorkspace ws;

  const bool perturbed =
      scenario.perturbation_scale.size() == base.state_dim() &&
      scenario.perturbation_scale.cwiseAbs().maxCoeff() > 0.0;
  std::mt19937 rng(scenario.seed);
  std::normal_distribution<double> unit_noise(0.0, 1.0);

  TrajectoryLog log;
  log.scenario_name = scenario.name;
  log.start_index = start_index;

  Vector x = scenario.initial_states[static_cast<std::size_t>(start_index)];
  Vector u_prev = Vector::Zero(base.num_inputs());
  Vector x_next(base.state_dim());

  for (int step = 0; step < scenario.sim_steps; ++step) {
    const ControlProblem problem = base.with_initial_state(x);
    const CostFunction objective = make_objective(problem, ws);
    const BoxProjector box = make_input_projector(problem);
    const bool fresh = options.cold_start || step == 0;
    const Vector u0 = !fresh ? warm_start_shift(u_prev, base.input_dim())
                     : scenario.solver.first_guess == "feedback"
                         ? first_solve_guess(problem)
                         : Vector(Vector::Zero(base.num_inputs()));

    SolveReport report = options.use_projected_gradient
                             ? projected_gradient_solve(objective, box, u0, params)
                             : panoc_solve(objective, box, u0, params);

    StepRecord rec;
    rec.step = step;
    rec.state = x;
    rec.input = report.u_star.head(base.input_dim());
    rec.penalty_value = applied_state_penalty(problem, x);
    rec.iterations = report.iterations;
    rec.solve_time_ms = report.solve_time_ms;
    rec.residual_inf = report.residual_inf;
    rec.solver_status = report.status;
    rec.predicted = rollout(problem, report.u_star, ws);

    base.dynamics.step(x, rec.input, x_next);
    if (perturbed) {
      for (Eigen::Index i = 0; i < x_next.size(); ++i) {
        x_next[i] += scenario.perturbation_scale[i] * unit_noise(rng);
      }
    }
    if (!x_next.allFinite()) {
      throw DivergedRolloutError(step + 1);
    }

    u_prev = report.u_star;
    log.steps.push_back(std::move(rec));
    if (options.keep_reports) {
      log.reports.push_back(std::move(report));
    }

    x = x_next;
    if (at_target(scenario, x)) {
      log.reached_target = true;
      break;
    }
  }
  log.final_state = x;
  return log;
}

double ComparisonTable::iteration_ratio() const {
  if (panoc_mean_iters <= 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return pg_mean_iters / panoc_mean_iters;
}

ComparisonTable run_baseline_comparison(const Scenario& scenario, int start_index) {
  if (start_index < 0 || start_index >= static_cast<int>(scenario.initial_states.size())) {
    throw std::out_of_range("scenario has no initial state with that index");
  }
  const ControlProblem base = scenario.build_problem();
  const PanocParams params = solver_params(scenario);
  RolloutWorkspace ws;

  ComparisonTable table;
  table.scenario_name = scenario.name;
  table.start_index = start_index;

  Vector x = scenario.initial_states[static_cast<std::size_t>(start_index)];
  Vector u_prev = Vector::Zero(base.num_inputs());
  Vector x_next(base.state_dim());

  double panoc_iter_sum = 0.0, pg_iter_sum = 0.0, panoc_ms_sum = 0.0, pg_ms_sum = 0.0;

  for (int step = 0; step < scenario.sim_steps; ++step) {
    const ControlProblem problem = base.with_initial_state(x);
    const CostFunction objective = make_objective(problem, ws);
    const BoxProjector box = make_input_projector(problem);
    const Vector u0 = step != 0 ? warm_start_shift(u_prev, base.input_dim())
                     : scenario.solver.first_guess == "feedback"
                         ? first_solve_guess(problem)
                         : Vector(Vector::Zero(base.num_inputs()));

    // Identical subproblem and warm start for both solvers; the plant is
    // driven by the PANOC input.
    const SolveReport pg = projected_gradient_solve(objective, box, u0, params);
    const SolveReport pn = panoc_solve(objective, box, u0, params);

    table.rows.push_back({step, pn.iterations, pn.solve_time_ms, pn.residual_inf,
                          pg.iterations, pg.solve_time_ms, pg.residual_inf, pg.status});
    panoc_iter_sum += pn.iterations;
    pg_iter_sum += pg.iterations;
    panoc_ms_sum += pn.solve_time_ms;
    pg_ms_sum += pg.solve_time_ms;

    base.dynamics.step(x, Vector(pn.u_star.head(base.input_dim())), x_next);
    if (!x_next.allFinite()) {
      throw DivergedRolloutError(step + 1);
    }
    u_prev = pn.u_star;
    x = x_next;
    if (at_target(scenario, x)) {
      break;
    }
  }
  const double n = static_cast<double>(table.rows.size());
  if (n > 0) {
    table.panoc_mean_iters = panoc_iter_sum / n;
    table.pg_mean_iters = pg_iter_sum / n;
    table.panoc_mean_ms = panoc_ms_sum / n;
    table.pg_mean_ms = pg_ms_sum / n;
  }
  return table;
}

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) {
    throw std::runtime_error("cannot open '" + file.string() + "' for writing");
  }
  return out;
}

}  // namespace

void write_log(const TrajectoryLog& log, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  {
    auto out = open_out(dir / "trajectory.csv");
    const Eigen::Index n_x = log.steps.empty() ? 0 : log.steps.front().state.size();
    const Eigen::Index n_u = log.steps.empty() ? 0 : log.steps.front().input.size();
    out << "step";
    for (Eigen::Index i = 0; i < n_x; ++i) {
      out << ",x" << i;
    }
    for (Eigen::Index i = 0; i < n_u; ++i) {
      out << ",u" << i;
    }
    out << ",penalty,iters,solve_ms,resid_inf\n";
    for (const auto& rec : log.steps) {
      out << rec.step;
      for (Eigen::Index i = 0; i < n_x; ++i) {
        out << ',' << fmt17(rec.state[i]);
      }
      for (Eigen::Index i = 0; i < n_u; ++i) {
        out << ',' << fmt17(rec.input[i]);
      }
      out << ',' << fmt17(rec.penalty_value) << ',' << rec.iterations << ','
          << fmt17(rec.solve_time_ms) << ',' << fmt17(rec.residual_inf) << '\n';
    }
  }

  for (const auto& rec : log.steps) {
    auto out = open_out(dir / ("predicted_" + std::to_string(rec.step) + ".csv"));
    const Eigen::Index n_x = rec.predicted.empty() ? 0 : rec.predicted.front().size();
    out << "stage";
    for (Eigen::Index i = 0; i < n_x; ++i) {
      out << ",x" << i;
    }
    out << '\n';
    for (std::size_t k = 0; k < rec.predicted.size(); ++k) {
      out << k;
      for (Eigen::Index i = 0; i < n_x; ++i) {
        out << ',' << fmt17(rec.predicted[k][i]);
      }
      out << '\n';
    }
  }

  {
    auto out = open_out(dir / "summary.txt");
    out << "scenario = " << log.scenario_name << '\n';
    out << "start_index = " << log.start_index << '\n';
    out << "steps = " << log.steps.size() << '\n';
    out << "reached_target = " << (log.reached_target ? "true" : "false") << '\n';
    out << "final_state =";
    for (Eigen::Index i = 0; i < log.final_state.size(); ++i) {
      out << ' ' << fmt17(log.final_state[i]);
    }
    out << '\n';
    long total_iters = 0;
    double max_resid = 0.0;
    double total_ms = 0.0;
    int nonconverged = 0;
    double max_penalty = 0.0;
    for (const auto& rec : log.steps) {
      total_iters += rec.iterations;
      total_ms += rec.solve_time_ms;
      max_resid = std::max(max_resid, rec.residual_inf);
      max_penalty = std::max(max_penalty, rec.penalty_value);
      if (rec.solver_status != SolveStatus::Converged) {
        ++nonconverged;
      }
    }
    out << "total_iterations = " << total_iters << '\n';
    if (!log.steps.empty()) {
      out << "mean_iterations = "
          << fmt17(static_cast<double>(total_iters) / static_cast<double>(log.steps.size()))
          << '\n';
      out << "mean_solve_ms = " << fmt17(total_ms / static_cast<double>(log.steps.size()))
          << '\n';
    }
    out << "max_residual_inf = " << fmt17(max_resid) << '\n';
    out << "max_penalty = " << fmt17(max_penalty) << '\n';
    out << "nonconverged_steps = " << nonconverged << '\n';
  }
}

void write_comparison(const ComparisonTable& table, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto out = open_out(dir / "compare.csv");
  out << "step,panoc_iters,panoc_ms,panoc_resid,pg_iters,pg_ms,pg_resid,pg_status\n";
  for (const auto& row : table.rows) {
    out << row.step << ',' << row.panoc_iters << ',' << fmt17(row.panoc_ms) << ','
        << fmt17(row.panoc_resid) << ',' << row.pg_iters << ',' << fmt17(row.pg_ms) << ','
        << fmt17(row.pg_resid) << ',' << to_string(row.pg_status) << '\n';
  }
  auto sum = open_out(dir / "compare_summary.txt");
  sum << "scenario = " << table.scenario_name << '\n';
  sum << "start_index = " << table.start_index << '\n';
  sum << "steps = " << table.rows.size() << '\n';
  sum << "panoc_mean_iters = " << fmt17(table.panoc_mean_iters) << '\n';
  sum << "pg_mean_iters = " << fmt17(table.pg_mean_iters) << '\n';
  sum << "panoc_mean_ms = " << fmt17(table.panoc_mean_ms) << '\n';
  sum << "pg_mean_ms = " << fmt17(table.pg_mean_ms) << '\n';
  sum << "iteration_ratio = " << fmt17(table.iteration_ratio()) << '\n';
}

std::vector<std::vector<double>> read_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) {
    throw std::runtime_error("cannot open '" + file.string() + "'");
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) {
      continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      row.push_back(end != cell.c_str() ? v : std::numeric_limits<double>::quiet_NaN());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

RunVerdict evaluate_run(const Scenario& scenario, const TrajectoryLog& log) {
  RunVerdict v;
  if (scenario.pos_tol < 0.0) {
    v.reached = true;  // early stop disabled; nothing to reach
  } else {
    v.reached = log.final_state.size() >= 3 &&
                (log.final_state.head(2) - scenario.x_ref.head(2)).norm() <= scenario.pos_tol &&
                std::abs(log.final_state[2] - scenario.x_ref[2]) <= scenario.heading_tol;
  }
  v.clear_of_obstacles = true;
  v.within_budget = true;
  for (const auto& rec : log.steps) {
    if (rec.penalty_value != 0.0) {
      v.clear_of_obstacles = false;
    }
    if (rec.solver_status != SolveStatus::Converged) {
      v.within_budget = false;
    }
  }
  return v;
}

}  // namespace nmpc
