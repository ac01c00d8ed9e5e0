#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

#include "nmpc/box.hpp"
#include "nmpc/panoc.hpp"

namespace nmpc::detail {

/// Refresh forward/u_bar/pg_step/r/res_inf from (u, grad, gamma). Both
/// solvers go through this one function so that a zero-memory PANOC run and
/// the projected-gradient loop produce bit-identical iterates.
inline void refresh_projection(const BoxProjector& box, SolverState& s) {
  s.forward = s.u - s.gamma * s.grad;
  box.project(s.forward, s.u_bar);
  s.pg_step = s.u - s.u_bar;
  s.r = s.pg_step / s.gamma;
  s.res_inf = s.r.size() == 0 ? 0.0 : s.r.lpNorm<Eigen::Infinity>();
}

/// FBE from the already-computed projection pieces; the same closed form as
/// `fbe` with dist^2 = |forward - u_bar|^2.
inline double fbe_from_state(const SolverState& s) {
  const double dist2 = (s.forward - s.u_bar).squaredNorm();
  return s.cost - 0.5 * s.gamma * s.grad.squaredNorm() + dist2 / (2.0 * s.gamma);
}

/// Shared solver initialization: evaluate at u0, derive (L, gamma, sigma),
/// project and run the first backtracking pass.
inline void initialize_state(const CostFunction& f, const BoxProjector& box,
                             const Vector& u0, const PanocParams& params,
                             SolverState& s) {
  s.u = u0;
  s.cost = f(s.u, &s.grad);
  if (params.gamma0) {
    s.gamma = *params.gamma0;
    s.lipschitz = params.gamma_l_coefficient / s.gamma;
  } else {
    double l0 = params.lipschitz0
                    ? *params.lipschitz0
                    : lipschitz_estimate(f, u0, std::nullopt, params.lipschitz_floor);
    l0 = std::max(l0, params.lipschitz_floor);
    s.lipschitz = l0;
    s.gamma = params.gamma_l_coefficient / l0;
  }
  s.sigma = params.sigma0 ? *params.sigma0
                          : 0.25 * s.gamma * (1.0 - s.gamma * s.lipschitz);
  if (!(s.sigma > 0.0)) {
    throw std::invalid_argument("sigma must lie in (0, gamma/2 (1 - gamma L))");
  }
  refresh_projection(box, s);
  backtrack_gamma(f, box, s, params.max_backtracks);
}

}  // namespace nmpc::detail
