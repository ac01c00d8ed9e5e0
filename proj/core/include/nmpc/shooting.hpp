#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "nmpc/box.hpp"
#include "nmpc/cost_function.hpp"
#include "nmpc/problem.hpp"

namespace nmpc {

/// Raised when a forward rollout produces a non-finite state; carries the
/// stage at which the blow-up was detected.
class DivergedRolloutError : public std::runtime_error {
 public:
  explicit DivergedRolloutError(int stage)
      : std::runtime_error("rollout diverged at stage " + std::to_string(stage)),
        stage_(stage) {}
  int stage() const { return stage_; }

 private:
  int stage_;
};

/// Classical four-stage explicit Runge-Kutta discretization of a
/// continuous-time model. The adjoint differentiates exactly through the
/// four stages, so the discrete model satisfies the same finite-difference
/// consistency contract as the continuous one.
DynamicsModel discretize_rk4(const DynamicsModel& continuous, double dt);

/// Explicit Euler discretization x + dt * f(x, u), with exact adjoint.
DynamicsModel discretize_euler(const DynamicsModel& continuous, double dt);

/// Preallocated storage for rollouts and reverse sweeps. Reusable across
/// calls without reallocation; all contents are outputs only, so results
/// never depend on what a previous call left behind. One workspace per
/// concurrent solve.
struct RolloutWorkspace {
  std::vector<Vector> states;    // x_0 .. x_N
  std::vector<Vector> costates;  // p_k scratch for the reverse sweep
  Vector z;                      // position slice scratch
  Vector gvals;                  // state-constraint values
  Vector weights;                // 2*beta*[g]_+ weight vector
  Vector gx, gu;                 // adjoint accumulators
  std::vector<std::vector<const Obstacle*>> stage_obstacles;
  std::vector<int> slice;

  /// Sizes the workspace for `problem` and caches the per-stage active
  /// obstacle lists. Called automatically by the evaluation routines;
  /// idempotent and allocation-free once shaped.
  void bind(const ControlProblem& problem);
};

/// Forward simulation x_{k+1} = f(x_k, u_k) from problem.x0. Returns the
/// workspace state trajectory x_0..x_N. Throws DivergedRolloutError on a
/// non-finite state.
const std::vector<Vector>& rollout(const ControlProblem& problem, const Vector& u,
                                   RolloutWorkspace& ws);

/// Total relaxed cost: tracking cost plus the [g]_+^2 state penalties and
/// the obstacle penalty evaluated on the position slice, summed over stages
/// 0..N-1 and the terminal stage.
double cost(const ControlProblem& problem, const Vector& u, RolloutWorkspace& ws);

/// Cost and its exact gradient by a reverse sweep over the rollout:
///   p_N = grad l~_N(x_N)
///   p_k = (df_k/dx)' p_{k+1} + grad_x l~_k(x_k, u_k)
///   du_k = (df_k/du)' p_{k+1} + grad_u l~_k(x_k, u_k)
/// The cost output is bit-identical to `cost` on the same inputs. Note the
/// input-channel line: the dynamics term is the costate product
/// (df_k/du)' p_{k+1}; reverse-sweep pseudocode is sometimes printed with
/// the costate factor dropped there, which is dimensionally inconsistent —
/// the finite-difference suite pins the correct form.
double cost_and_gradient(const ControlProblem& problem, const Vector& u,
                         RolloutWorkspace& ws, Vector& grad);

/// Separately accumulated cost pieces; tracking + obstacle + state_penalty
/// equals `cost` and the two penalty parts are nonnegative.
struct CostBreakdown {
  double tracking = 0.0;
  double obstacle = 0.0;
  double state_penalty = 0.0;
  double total() const { return tracking + obstacle + state_penalty; }
};

CostBreakdown cost_breakdown(const ControlProblem& problem, const Vector& u,
                             RolloutWorkspace& ws);

/// Wraps the problem as a solver objective. The returned closure keeps
/// references to both arguments; they must outlive it.
CostFunction make_objective(const ControlProblem& problem, RolloutWorkspace& ws);

/// The solver-side box U = U_0 x ... x U_{N-1}: the input box tiled over
/// the horizon.
BoxProjector make_input_projector(const ControlProblem& problem);

}  // namespace nmpc
