#include "nmpc/shooting.hpp"

#include <cmath>
#include <stdexcept>

namespace nmpc {

DynamicsModel discretize_rk4(const DynamicsModel& continuous, double dt) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("rk4 step size must be positive");
  }
  DynamicsModel d;
  d.n_x = continuous.n_x;
  d.n_u = continuous.n_u;
  d.step = [f = continuous, dt](const Vector& x, const Vector& u, Vector& out) {
    Vector k1, k2, k3, k4;
    f.step(x, u, k1);
    f.step(Vector(x + 0.5 * dt * k1), u, k2);
    f.step(Vector(x + 0.5 * dt * k2), u, k3);
    f.step(Vector(x + dt * k3), u, k4);
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  };
  d.adjoint_step = [f = continuous, dt](const Vector& x, const Vector& u, const Vector& p,
                                        Vector& gx, Vector& gu) {
    // Recompute the stage states, then run the chain rule backwards through
    // x+ = x + dt/6 (k1 + 2 k2 + 2 k3 + k4).
    Vector k1, k2, k3;
    f.step(x, u, k1);
    const Vector x2 = x + 0.5 * dt * k1;
    f.step(x2, u, k2);
    const Vector x3 = x + 0.5 * dt * k2;
    f.step(x3, u, k3);
    const Vector x4 = x + dt * k3;

    Vector v4, w4, v3, w3, v2, w2, v1, w1;
    const Vector bar_k4 = (dt / 6.0) * p;
    f.adjoint_step(x4, u, bar_k4, v4, w4);
    const Vector bar_k3 = (dt / 3.0) * p + dt * v4;
    f.adjoint_step(x3, u, bar_k3, v3, w3);
    const Vector bar_k2 = (dt / 3.0) * p + 0.5 * dt * v3;
    f.adjoint_step(x2, u, bar_k2, v2, w2);
    const Vector bar_k1 = (dt / 6.0) * p + 0.5 * dt * v2;
    f.adjoint_step(x, u, bar_k1, v1, w1);

    gx = p + v1 + v2 + v3 + v4;
    gu = w1 + w2 + w3 + w4;
  };
  return d;
}

DynamicsModel discretize_euler(const DynamicsModel& continuous, double dt) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("euler step size must be positive");
  }
  DynamicsModel d;
  d.n_x = continuous.n_x;
  d.n_u = continuous.n_u;
  d.step = [f = continuous, dt](const Vector& x, const Vector& u, Vector& out) {
    Vector k;
    f.step(x, u, k);
    out = x + dt * k;
  };
  d.adjoint_step = [f = continuous, dt](const Vector& x, const Vector& u, const Vector& p,
                                        Vector& gx, Vector& gu) {
    Vector v, w;
    f.adjoint_step(x, u, Vector(dt * p), v, w);
    gx = p + v;
    gu = w;
  };
  return d;
}

void RolloutWorkspace::bind(const ControlProblem& problem) {
  const int N = problem.N;
  states.resize(N + 1);
  costates.resize(N + 1);
  for (auto& v : states) {
    v.resize(problem.state_dim());
  }
  for (auto& v : costates) {
    v.resize(problem.state_dim());
  }
  slice = problem.effective_slice();
  z.resize(static_cast<Eigen::Index>(slice.size()));
  stage_obstacles.resize(N + 1);
  for (int k = 0; k <= N; ++k) {
    stage_obstacles[k].clear();
    for (const auto& ao : problem.obstacles) {
      if (ao.active_at(k, N)) {
        stage_obstacles[k].push_back(&ao.obstacle);
      }
    }
  }
}

namespace {

void check_input_length(const ControlProblem& p, const Vector& u) {
  if (u.size() != p.num_inputs()) {
    throw std::invalid_argument("input sequence has length " + std::to_string(u.size()) +
                                ", expected N*n_u = " + std::to_string(p.num_inputs()));
  }
}

void slice_position(const std::vector<int>& slice, const Vector& x, Vector& z) {
  for (std::size_t i = 0; i < slice.size(); ++i) {
    z[static_cast<Eigen::Index>(i)] = x[slice[i]];
  }
}

/// Obstacle penalty at stage k evaluated on the position slice of x.
double stage_obstacle_penalty(RolloutWorkspace& ws, int k, const Vector& x) {
  if (ws.stage_obstacles[k].empty()) {
    return 0.0;
  }
  slice_position(ws.slice, x, ws.z);
  return penalty(std::span<const Obstacle* const>(ws.stage_obstacles[k]), ws.z);
}

void add_stage_obstacle_gradient(RolloutWorkspace& ws, int k, const Vector& x, Vector& gx) {
  if (ws.stage_obstacles[k].empty()) {
    return;
  }
  slice_position(ws.slice, x, ws.z);
  const Vector gz = penalty_gradient(std::span<const Obstacle* const>(ws.stage_obstacles[k]), ws.z);
  for (std::size_t i = 0; i < ws.slice.size(); ++i) {
    gx[ws.slice[i]] += gz[static_cast<Eigen::Index>(i)];
  }
}

double stage_state_penalty(const ControlProblem& p, RolloutWorkspace& ws, const Vector& x,
                           const Vector& u_k) {
  if (!p.state_penalty || p.state_penalty->n_c == 0) {
    return 0.0;
  }
  const auto& sp = *p.state_penalty;
  sp.g(x, u_k, ws.gvals);
  double val = 0.0;
  for (Eigen::Index i = 0; i < ws.gvals.size(); ++i) {
    const double gp = std::max(ws.gvals[i], 0.0);
    val += gp * gp;
  }
  return sp.beta * val;
}

void add_stage_state_penalty_gradient(const ControlProblem& p, RolloutWorkspace& ws,
                                      const Vector& x, const Vector& u_k, Vector& gx,
                                      Vector& gu) {
  if (!p.state_penalty || p.state_penalty->n_c == 0) {
    return;
  }
  const auto& sp = *p.state_penalty;
  sp.g(x, u_k, ws.gvals);
  ws.weights.resize(ws.gvals.size());
  for (Eigen::Index i = 0; i < ws.gvals.size(); ++i) {
    ws.weights[i] = 2.0 * sp.beta * std::max(ws.gvals[i], 0.0);
  }
  sp.grad_g(x, u_k, ws.weights, gx, gu);
}

double terminal_state_penalty(const ControlProblem& p, RolloutWorkspace& ws, const Vector& x) {
  if (!p.state_penalty || p.state_penalty->n_c_terminal == 0) {
    return 0.0;
  }
  const auto& sp = *p.state_penalty;
  Vector g(sp.n_c_terminal);
  sp.g_terminal(x, g);
  double val = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double gp = std::max(g[i], 0.0);
    val += gp * gp;
  }
  (void)ws;
  return sp.beta_terminal * val;
}

void add_terminal_state_penalty_gradient(const ControlProblem& p, const Vector& x, Vector& gx) {
  if (!p.state_penalty || p.state_penalty->n_c_terminal == 0) {
    return;
  }
  const auto& sp = *p.state_penalty;
  Vector g(sp.n_c_terminal);
  sp.g_terminal(x, g);
  Vector w(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    w[i] = 2.0 * sp.beta_terminal * std::max(g[i], 0.0);
  }
  sp.grad_g_terminal(x, w, gx);
}

/// Rollout plus cost accumulation; the single forward path shared by
/// `cost` and `cost_and_gradient` so the two agree bit for bit.
double forward_pass(const ControlProblem& p, const Vector& u, RolloutWorkspace& ws) {
  check_input_length(p, u);
  if (p.x0.size() != p.state_dim()) {
    throw std::invalid_argument("problem has no initial state of the right length");
  }
  ws.bind(p);
  const int n_u = p.input_dim();
  ws.states[0] = p.x0;
  if (!ws.states[0].allFinite()) {
    throw DivergedRolloutError(0);
  }
  double total = 0.0;
  for (int k = 0; k < p.N; ++k) {
    const auto u_k = u.segment(static_cast<Eigen::Index>(k) * n_u, n_u);
    total += p.cost.stage(ws.states[k], u_k);
    total += stage_state_penalty(p, ws, ws.states[k], u_k);
    total += stage_obstacle_penalty(ws, k, ws.states[k]);
    p.dynamics.step(ws.states[k], u_k, ws.states[k + 1]);
    if (!ws.states[k + 1].allFinite()) {
      throw DivergedRolloutError(k + 1);
    }
  }
  total += p.cost.terminal(ws.states[p.N]);
  total += terminal_state_penalty(p, ws, ws.states[p.N]);
  total += stage_obstacle_penalty(ws, p.N, ws.states[p.N]);
  return total;
}

}  // namespace

const std::vector<Vector>& rollout(const ControlProblem& p, const Vector& u,
                                   RolloutWorkspace& ws) {
  check_input_length(p, u);
  if (p.x0.size() != p.state_dim()) {
    throw std::invalid_argument("problem has no initial state of the right length");
  }
  ws.bind(p);
  const int n_u = p.input_dim();
  ws.states[0] = p.x0;
  if (!ws.states[0].allFinite()) {
    throw DivergedRolloutError(0);
  }
  for (int k = 0; k < p.N; ++k) {
    p.dynamics.step(ws.states[k], u.segment(static_cast<Eigen::Index>(k) * n_u, n_u),
                    ws.states[k + 1]);
    if (!ws.states[k + 1].allFinite()) {
      throw DivergedRolloutError(k + 1);
    }
  }
  return ws.states;
}

double cost(const ControlProblem& p, const Vector& u, RolloutWorkspace& ws) {
  return forward_pass(p, u, ws);
}

double cost_and_gradient(const ControlProblem& p, const Vector& u, RolloutWorkspace& ws,
                         Vector& grad) {
  const double total = forward_pass(p, u, ws);
  const int n_u = p.input_dim();
  grad.resize(p.num_inputs());

  // p_N = grad of the terminal relaxed cost.
  Vector& p_N = ws.costates[p.N];
  p_N.setZero();
  p.cost.add_terminal_gradient(ws.states[p.N], p_N);
  add_terminal_state_penalty_gradient(p, ws.states[p.N], p_N);
  add_stage_obstacle_gradient(ws, p.N, ws.states[p.N], p_N);

  for (int k = p.N - 1; k >= 0; --k) {
    const auto u_k = u.segment(static_cast<Eigen::Index>(k) * n_u, n_u);
    p.dynamics.adjoint_step(ws.states[k], u_k, ws.costates[k + 1], ws.gx, ws.gu);
    p.cost.add_stage_gradient(ws.states[k], u_k, ws.gx, ws.gu);
    add_stage_state_penalty_gradient(p, ws, ws.states[k], u_k, ws.gx, ws.gu);
    add_stage_obstacle_gradient(ws, k, ws.states[k], ws.gx);
    ws.costates[k] = ws.gx;
    grad.segment(static_cast<Eigen::Index>(k) * n_u, n_u) = ws.gu;
  }
  return total;
}

CostBreakdown cost_breakdown(const ControlProblem& p, const Vector& u, RolloutWorkspace& ws) {
  check_input_length(p, u);
  rollout(p, u, ws);
  const int n_u = p.input_dim();
  CostBreakdown out;
  for (int k = 0; k < p.N; ++k) {
    const auto u_k = u.segment(static_cast<Eigen::Index>(k) * n_u, n_u);
    out.tracking += p.cost.stage(ws.states[k], u_k);
    out.state_penalty += stage_state_penalty(p, ws, ws.states[k], u_k);
    out.obstacle += stage_obstacle_penalty(ws, k, ws.states[k]);
  }
  out.tracking += p.cost.terminal(ws.states[p.N]);
  out.state_penalty += terminal_state_penalty(p, ws, ws.states[p.N]);
  out.obstacle += stage_obstacle_penalty(ws, p.N, ws.states[p.N]);
  return out;
}

CostFunction make_objective(const ControlProblem& problem, RolloutWorkspace& ws) {
  return [&problem, &ws](const Vector& u, Vector* grad) -> double {
    if (grad != nullptr) {
      return cost_and_gradient(problem, u, ws, *grad);
    }
    return cost(problem, u, ws);
  };
}

BoxProjector make_input_projector(const ControlProblem& problem) {
  const int n_u = problem.input_dim();
  Vector lb(problem.num_inputs());
  Vector ub(problem.num_inputs());
  for (int k = 0; k < problem.N; ++k) {
    lb.segment(static_cast<Eigen::Index>(k) * n_u, n_u) = problem.box.u_min;
    ub.segment(static_cast<Eigen::Index>(k) * n_u, n_u) = problem.box.u_max;
  }
  return BoxProjector(std::move(lb), std::move(ub));
}

}  // namespace nmpc
