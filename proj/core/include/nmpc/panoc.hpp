#pragma once

#include <optional>
#include <vector>

#include "nmpc/box.hpp"
#include "nmpc/cost_function.hpp"
#include "nmpc/lbfgs.hpp"

namespace nmpc {

/// Solver configuration. Defaults: gamma = 0.95/L with L estimated by a
/// gradient difference quotient, sigma = gamma (1 - gamma L) / 4 (strictly
/// inside the admissible interval (0, gamma/2 (1 - gamma L))), memory 10,
/// tolerance 1e-6 on the sup norm of the fixed-point residual, at most 500
/// iterations and 10 line-search halvings before falling back to the pure
/// projected-gradient step.
struct PanocParams {
  double tol = 1e-6;
  int max_iter = 500;
  int lbfgs_memory = 10;
  int max_ls_halvings = 10;
  /// Cap on Lipschitz doublings per backtracking pass; exceeding it signals
  /// a non-smooth or non-finite cost.
  int max_backtracks = 64;
  double gamma_l_coefficient = 0.95;
  double lipschitz_floor = 1e-12;
  double cautious_eps = LbfgsBuffer::kCautiousEps;
  /// Optional overrides of the automatic initialization.
  std::optional<double> lipschitz0;
  std::optional<double> gamma0;
  std::optional<double> sigma0;
  /// Test instrumentation: store every accepted iterate in the report.
  bool record_iterates = false;
};

enum class SolveStatus {
  Converged,
  MaxIterations,
  LineSearchExhausted,
};

const char* to_string(SolveStatus status);

/// One row per iteration: the merit value and step data the invariant
/// checks need. `gamma_changed` marks iterations whose gamma differs from
/// the previous row's, so merit monotonicity is only asserted between
/// changes.
struct IterationRecord {
  double fbe = 0.0;
  double gamma = 0.0;
  double sigma = 0.0;
  double res_norm_sq = 0.0;
  double res_inf = 0.0;
  double tau = 1.0;
  bool gamma_changed = false;
};

struct SolveReport {
  Vector u_star;
  double residual_inf = 0.0;
  int iterations = 0;
  SolveStatus status = SolveStatus::MaxIterations;
  double cost = 0.0;
  double solve_time_ms = 0.0;
  std::vector<IterationRecord> trace;
  long n_cost_evals = 0;
  long n_grad_evals = 0;
  /// Filled only when PanocParams::record_iterates is set.
  std::vector<Vector> iterate_history;

  bool converged() const { return status == SolveStatus::Converged; }
  std::vector<double> fbe_history() const;
};

/// Mutable per-solve state: the iterate, its cached evaluations and the
/// adaptive (gamma, L, sigma) triple. gamma * L stays below one after every
/// backtracking pass.
struct SolverState {
  Vector u;
  Vector grad;
  double cost = 0.0;
  Vector forward;  // u - gamma * grad
  Vector u_bar;    // proj(forward)
  Vector pg_step;  // u - u_bar = gamma * r, kept unrounded by the division
  Vector r;        // fixed-point residual
  Vector d;        // quasi-Newton direction
  double fbe = 0.0;
  double gamma = 0.0;
  double lipschitz = 0.0;
  double sigma = 0.0;
  double res_inf = 0.0;
  int iter = 0;
  std::vector<double> tau_log;
};

/// Forward-backward envelope at u via the closed form
///   phi(u) = l(u) - gamma/2 |grad l(u)|^2 + 1/(2 gamma) dist^2(u - gamma grad l(u)).
/// Requires gamma > 0.
double fbe(double gamma, const Vector& u, double cost_u, const Vector& grad_u,
           const BoxProjector& box);

/// Fixed-point residual r = (u - proj(u - gamma grad)) / gamma; zero exactly
/// at gamma-critical points.
Vector residual(double gamma, const Vector& u, const Vector& grad_u,
                const BoxProjector& box);

/// Local Lipschitz estimate |grad l(u0 + du) - grad l(u0)| / |du| with
/// du_i = max(1e-6, 1e-6 |u0_i|) unless a perturbation is supplied; floored
/// at 1e-12. Deliberately crude: the per-iteration backtracking corrects it.
double lipschitz_estimate(const CostFunction& f, const Vector& u0,
                          const std::optional<Vector>& delta = std::nullopt,
                          double floor = 1e-12);

/// Lipschitz backtracking: while the descent inequality
///   l(u_bar) <= l(u) - grad'(u - u_bar) + L/2 |u - u_bar|^2
/// fails, double L, halve sigma and gamma, and recompute the projected
/// gradient point. Returns the number of doublings; throws when `cap` is
/// exceeded. The state's u, cost, grad, u_bar, pg_step, r must be in sync
/// on entry; fbe is refreshed on exit.
int backtrack_gamma(const CostFunction& f, const BoxProjector& box, SolverState& state,
                    int cap = 64);

/// PANOC: per iteration, a projected-gradient point with adaptive gamma, an
/// L-BFGS direction on the fixed-point residual, and the largest
/// tau in {1, 1/2, ...} whose averaged candidate passes the envelope
/// decrease test phi(u+) <= phi(u) - sigma |r|^2. The L-BFGS memory is
/// flushed whenever gamma shrinks, since stored residual pairs belong to
/// the old operator.
SolveReport panoc_solve(const CostFunction& f, const BoxProjector& box, const Vector& u0,
                        const PanocParams& params = {});

}  // namespace nmpc
