#include "nmpc/problem.hpp"

#include <cmath>
#include <set>
#include <stdexcept>
#include <utility>

namespace nmpc {

QuadraticStageCost QuadraticStageCost::diagonal(const Vector& q, const Vector& r,
                                                const Vector& q_n, Vector x_ref,
                                                Vector u_ref) {
  QuadraticStageCost c;
  c.Q = q.asDiagonal();
  c.R = r.asDiagonal();
  c.Q_N = q_n.asDiagonal();
  c.x_ref = std::move(x_ref);
  c.u_ref = std::move(u_ref);
  return c;
}

double QuadraticStageCost::stage(const Vector& x, const Vector& u) const {
  const Vector dx = x - x_ref;
  const Vector du = u - u_ref;
  return dx.dot(Q * dx) + du.dot(R * du);
}

double QuadraticStageCost::terminal(const Vector& x) const {
  const Vector dx = x - x_ref;
  return dx.dot(Q_N * dx);
}

void QuadraticStageCost::add_stage_gradient(const Vector& x, const Vector& u,
                                            Vector& gx, Vector& gu) const {
  gx.noalias() += 2.0 * (Q * (x - x_ref));
  gu.noalias() += 2.0 * (R * (u - u_ref));
}

void QuadraticStageCost::add_terminal_gradient(const Vector& x, Vector& gx) const {
  gx.noalias() += 2.0 * (Q_N * (x - x_ref));
}

std::vector<int> ControlProblem::effective_slice() const {
  if (!position_slice.empty()) {
    return position_slice;
  }
  int n_d = 0;
  if (!obstacles.empty()) {
    n_d = obstacles.front().obstacle.dim();
  }
  std::vector<int> slice(n_d);
  for (int i = 0; i < n_d; ++i) {
    slice[i] = i;
  }
  return slice;
}

ControlProblem ControlProblem::with_initial_state(Vector x) const {
  ControlProblem copy = *this;
  copy.x0 = std::move(x);
  return copy;
}

namespace {

bool roughly_symmetric(const Matrix& m) {
  if (m.rows() != m.cols()) {
    return false;
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

void check_weight(const Matrix& m, Eigen::Index dim, const char* name,
                  std::vector<std::string>& out) {
  if (m.rows() != dim || m.cols() != dim) {
    out.push_back(std::string(name) + " has wrong dimensions");
    return;
  }
  if (!roughly_symmetric(m)) {
    out.push_back(std::string(name) + " is not symmetric");
  }
  const Matrix sym = 0.5 * (m + m.transpose());
  if (sym.diagonal().minCoeff() < 0.0) {
    out.push_back(std::string(name) + " has a negative diagonal entry after symmetrization");
  }
}

}  // namespace

std::vector<std::string> validate(const ControlProblem& p) {
  std::vector<std::string> violations;
  if (p.N < 1) {
    violations.push_back("horizon N must be at least 1");
  }
  if (!p.dynamics.step || !p.dynamics.adjoint_step) {
    violations.push_back("dynamics model is missing step or adjoint_step");
  }
  if (p.dynamics.n_x < 1 || p.dynamics.n_u < 1) {
    violations.push_back("dynamics dimensions must be positive");
  }
  const Eigen::Index n_x = p.dynamics.n_x;
  const Eigen::Index n_u = p.dynamics.n_u;

  check_weight(p.cost.Q, n_x, "Q", violations);
  check_weight(p.cost.R, n_u, "R", violations);
  check_weight(p.cost.Q_N, n_x, "Q_N", violations);
  if (p.cost.x_ref.size() != n_x) {
    violations.push_back("x_ref has wrong length");
  }
  if (p.cost.u_ref.size() != n_u) {
    violations.push_back("u_ref has wrong length");
  }

  if (p.box.u_min.size() != n_u || p.box.u_max.size() != n_u) {
    violations.push_back("input box has wrong length");
  } else {
    for (Eigen::Index i = 0; i < n_u; ++i) {
      if (p.box.u_min[i] > p.box.u_max[i]) {
        violations.push_back("box bounds crossed at input component " + std::to_string(i));
      }
    }
  }

  const std::vector<int> slice = p.effective_slice();
  std::set<int> seen;
  for (int idx : slice) {
    if (idx < 0 || idx >= n_x) {
      violations.push_back("position slice index " + std::to_string(idx) + " out of range");
    }
    if (!seen.insert(idx).second) {
      violations.push_back("duplicate slice index " + std::to_string(idx));
    }
  }
  for (const auto& ao : p.obstacles) {
    if (ao.obstacle.dim() != static_cast<int>(slice.size())) {
      violations.push_back("obstacle dimension does not match position slice length");
    }
    if (ao.first_stage < 0 || (ao.last_stage >= 0 && ao.last_stage < ao.first_stage)) {
      violations.push_back("obstacle activation window is empty or negative");
    }
  }

  if (p.state_penalty) {
    const auto& sp = *p.state_penalty;
    if (sp.n_c > 0 && (!sp.g || !sp.grad_g)) {
      violations.push_back("state penalty is missing g or grad_g");
    }
    if (sp.n_c > 0 && !(sp.beta > 0.0)) {
      violations.push_back("state penalty weight beta must be positive");
    }
    if (sp.n_c_terminal > 0 && (!sp.g_terminal || !sp.grad_g_terminal)) {
      violations.push_back("terminal state penalty is missing g_terminal or grad_g_terminal");
    }
    if (sp.n_c_terminal > 0 && !(sp.beta_terminal > 0.0)) {
      violations.push_back("terminal state penalty weight must be positive");
    }
  }

  if (p.x0.size() != 0 && p.x0.size() != n_x) {
    violations.push_back("x0 has wrong length");
  }
  return violations;
}

DynamicsModel make_trailer_model(double length) {
  if (!(length > 0.0)) {
    throw std::invalid_argument("trailer hitch offset must be positive");
  }
  const double L = length;
  DynamicsModel m;
  m.n_x = 3;
  m.n_u = 2;
  m.step = [L](const Vector& x, const Vector& u, Vector& out) {
    const double s = std::sin(x[2]);
    const double c = std::cos(x[2]);
    const double w = (u[1] * c - u[0] * s) / L;
    out.resize(3);
    out[0] = u[0] + L * s * w;
    out[1] = u[1] - L * c * w;
    out[2] = w;
  };
  m.adjoint_step = [L](const Vector& x, const Vector& u, const Vector& p, Vector& gx,
                       Vector& gu) {
    const double s = std::sin(x[2]);
    const double c = std::cos(x[2]);
    const double w = (u[1] * c - u[0] * s) / L;
    const double dw_dth = (-u[1] * s - u[0] * c) / L;
    // d f / d theta for the three components
    const double df0 = L * c * w + L * s * dw_dth;
    const double df1 = L * s * w - L * c * dw_dth;
    const double df2 = dw_dth;
    gx.resize(3);
    gx[0] = 0.0;
    gx[1] = 0.0;
    gx[2] = p[0] * df0 + p[1] * df1 + p[2] * df2;
    gu.resize(2);
    gu[0] = p[0] * (1.0 - s * s) + p[1] * (c * s) + p[2] * (-s / L);
    gu[1] = p[0] * (s * c) + p[1] * (1.0 - c * c) + p[2] * (c / L);
  };
  return m;
}

}  // namespace nmpc
