#pragma once

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nmpc/obstacles.hpp"

namespace nmpc {

using Matrix = Eigen::MatrixXd;

/// A differentiable map x' = f(x, u), either a continuous-time right-hand
/// side or a discrete-time transition, together with the Jacobian-transpose
/// products the reverse sweep needs. Models supply analytic adjoints; no
/// general AD machinery is involved.
struct DynamicsModel {
  int n_x = 0;
  int n_u = 0;

  /// x_next = f(x, u). Deterministic: equal inputs give bit-equal outputs.
  std::function<void(const Vector& x, const Vector& u, Vector& x_next)> step;

  /// gx = (df/dx)' p,  gu = (df/du)' p.
  std::function<void(const Vector& x, const Vector& u, const Vector& p,
                     Vector& gx, Vector& gu)>
      adjoint_step;
};

/// Quadratic tracking cost
///   stage(x, u) = (x - x_ref)'Q(x - x_ref) + (u - u_ref)'R(u - u_ref),
///   terminal(x) = (x - x_ref)'Q_N(x - x_ref).
/// Q, R, Q_N are expected symmetric positive semidefinite; `validate`
/// checks symmetry and diagonal nonnegativity.
struct QuadraticStageCost {
  Matrix Q;
  Matrix R;
  Matrix Q_N;
  Vector x_ref;
  Vector u_ref;

  static QuadraticStageCost diagonal(const Vector& q, const Vector& r,
                                     const Vector& q_n, Vector x_ref,
                                     Vector u_ref);

  double stage(const Vector& x, const Vector& u) const;
  double terminal(const Vector& x) const;
  void add_stage_gradient(const Vector& x, const Vector& u, Vector& gx,
                          Vector& gu) const;
  void add_terminal_gradient(const Vector& x, Vector& gx) const;
};

/// Box U = [u_min, u_max] on each stage input; entries may be +-infinity.
struct InputBox {
  Vector u_min;
  Vector u_max;
};

/// Soft inequality constraint g(x, u) <= 0 applied at stages 0..N-1 as the
/// penalty term beta * sum_i [g_i]_+^2, with an optional terminal-only part
/// g_N(x) <= 0 weighted by beta_terminal.
struct StateInequalityPenalty {
  int n_c = 0;
  double beta = 1.0;
  std::function<void(const Vector& x, const Vector& u, Vector& g)> g;
  /// gx += (dg/dx)' w, gu += (dg/du)' w for a weight vector w.
  std::function<void(const Vector& x, const Vector& u, const Vector& w,
                     Vector& gx, Vector& gu)>
      grad_g;

  int n_c_terminal = 0;
  double beta_terminal = 1.0;
  std::function<void(const Vector& x, Vector& g)> g_terminal;
  std::function<void(const Vector& x, const Vector& w, Vector& gx)>
      grad_g_terminal;
};

/// An obstacle together with the window of stages at which it is active.
/// last_stage == -1 means active through the terminal stage N.
struct ActiveObstacle {
  Obstacle obstacle;
  int first_stage = 0;
  int last_stage = -1;

  bool active_at(int k, int N) const {
    const int last = last_stage < 0 ? N : last_stage;
    return k >= first_stage && k <= last;
  }
};

/// A complete horizon-N control problem instance. Immutable after
/// construction by convention; `with_initial_state` makes a per-solve copy
/// instead of mutating. Safe to share read-only across concurrent solves.
struct ControlProblem {
  int N = 0;
  DynamicsModel dynamics;
  QuadraticStageCost cost;
  InputBox box;
  std::vector<ActiveObstacle> obstacles;
  std::optional<StateInequalityPenalty> state_penalty;
  /// Indices selecting the position z from the state x. Empty means the
  /// leading entries of x, as many as the obstacles' dimension.
  std::vector<int> position_slice;
  Vector x0;

  int state_dim() const { return dynamics.n_x; }
  int input_dim() const { return dynamics.n_u; }
  /// Total decision-vector length n = N * n_u.
  int num_inputs() const { return N * dynamics.n_u; }

  std::vector<int> effective_slice() const;
  ControlProblem with_initial_state(Vector x) const;
};

/// Checks every structural invariant of the problem and returns all
/// violations found; an empty result means the problem is well formed.
std::vector<std::string> validate(const ControlProblem& problem);

/// Continuous-time trailer kinematics with state x = (p_x, p_y, theta) and
/// velocity input u = (u_x, u_y):
///   theta_dot = (u_y cos(theta) - u_x sin(theta)) / L
///   p_x_dot   = u_x + L sin(theta) theta_dot
///   p_y_dot   = u_y - L cos(theta) theta_dot
/// where L is the hitch offset in meters. The adjoint is analytic.
DynamicsModel make_trailer_model(double length);

}  // namespace nmpc
