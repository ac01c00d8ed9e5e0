#include "nmpc/panoc.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "solver_detail.hpp"

namespace nmpc {

using detail::fbe_from_state;
using detail::refresh_projection;

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged:
      return "converged";
    case SolveStatus::MaxIterations:
      return "max-iterations";
    case SolveStatus::LineSearchExhausted:
      return "line-search-exhausted";
  }
  return "unknown";
}

std::vector<double> SolveReport::fbe_history() const {
  std::vector<double> h;
  h.reserve(trace.size());
  for (const auto& rec : trace) {
    h.push_back(rec.fbe);
  }
  return h;
}

double fbe(double gamma, const Vector& u, double cost_u, const Vector& grad_u,
           const BoxProjector& box) {
  if (!(gamma > 0.0)) {
    throw std::invalid_argument("fbe needs gamma > 0");
  }
  const Vector forward = u - gamma * grad_u;
  const double dist2 = box.dist_sq(forward);
  return cost_u - 0.5 * gamma * grad_u.squaredNorm() + dist2 / (2.0 * gamma);
}

Vector residual(double gamma, const Vector& u, const Vector& grad_u,
                const BoxProjector& box) {
  if (!(gamma > 0.0)) {
    throw std::invalid_argument("residual needs gamma > 0");
  }
  const Vector u_bar = box.project(Vector(u - gamma * grad_u));
  return Vector((u - u_bar) / gamma);
}

double lipschitz_estimate(const CostFunction& f, const Vector& u0,
                          const std::optional<Vector>& delta, double floor) {
  Vector du;
  if (delta) {
    du = *delta;
    if (du.size() != u0.size() || du.norm() == 0.0) {
      throw std::invalid_argument("lipschitz perturbation must be nonzero and match u0");
    }
  } else {
    du.resize(u0.size());
    for (Eigen::Index i = 0; i < u0.size(); ++i) {
      du[i] = std::max(1e-6, 1e-6 * std::abs(u0[i]));
    }
  }
  Vector g0(u0.size()), g1(u0.size());
  f(u0, &g0);
  f(Vector(u0 + du), &g1);
  const double l = (g1 - g0).norm() / du.norm();
  return std::max(l, floor);
}

int backtrack_gamma(const CostFunction& f, const BoxProjector& box, SolverState& s,
                    int cap) {
  int doublings = 0;
  for (;;) {
    const double cost_bar = f(s.u_bar, nullptr);
    const double rhs = s.cost - s.grad.dot(s.pg_step) +
                       0.5 * s.lipschitz * s.pg_step.squaredNorm();
    const bool violated = !(cost_bar <= rhs);  // NaN counts as violated
    if (!violated) {
      break;
    }
    if (doublings >= cap) {
      throw std::runtime_error(
          "Lipschitz backtracking exceeded its doubling cap; the cost appears "
          "non-smooth or non-finite near the iterate");
    }
    s.lipschitz *= 2.0;
    s.sigma *= 0.5;
    s.gamma *= 0.5;
    refresh_projection(box, s);
    ++doublings;
  }
  s.fbe = fbe_from_state(s);
  return doublings;
}

SolveReport panoc_solve(const CostFunction& f, const BoxProjector& box, const Vector& u0,
                        const PanocParams& params) {
  const auto t_start = std::chrono::steady_clock::now();
  if (!(params.tol > 0.0)) {
    throw std::invalid_argument("tolerance must be positive");
  }
  if (u0.size() != box.dim()) {
    throw std::invalid_argument("initial point does not match the box dimension");
  }
  if (!u0.allFinite()) {
    throw std::invalid_argument("initial point must be finite");
  }

  SolveReport report;
  long cost_evals = 0;
  long grad_evals = 0;
  const CostFunction counted = [&](const Vector& u, Vector* g) {
    ++cost_evals;
    if (g != nullptr) {
      ++grad_evals;
    }
    return f(u, g);
  };

  SolverState s;
  detail::initialize_state(counted, box, u0, params, s);

  LbfgsBuffer buffer(static_cast<int>(u0.size()), params.lbfgs_memory,
                     params.cautious_eps);

  // Quasi-Newton candidates far outside the feasible box are overshoots:
  // every cluster point lives in the box, and for stiff dynamics the cost
  // model degenerates out there. Cap the allowed excursion at a couple of
  // box widths; a fully unbounded box leaves the cap off.
  double widest_side = 0.0;
  bool any_bounded_side = false;
  for (Eigen::Index i = 0; i < box.dim(); ++i) {
    if (std::isfinite(box.lb[i]) && std::isfinite(box.ub[i])) {
      widest_side = std::max(widest_side, box.ub[i] - box.lb[i]);
      any_bounded_side = true;
    }
  }
  const double overrun_cap_sq =
      any_bounded_side ? std::pow(2.0 * (1.0 + widest_side), 2)
                       : std::numeric_limits<double>::infinity();

  // candidate scratch
  Vector cand_u, cand_grad, cand_forward, cand_ubar, cand_pg, cand_r;
  double prev_gamma = s.gamma;
  bool first_row = true;

  for (;;) {
    report.trace.push_back({s.fbe, s.gamma, s.sigma, s.r.squaredNorm(), s.res_inf,
                            0.0, !first_row && s.gamma != prev_gamma});
    prev_gamma = s.gamma;
    first_row = false;
    if (params.record_iterates) {
      report.iterate_history.push_back(s.u);
    }

    if (s.res_inf <= params.tol) {
      report.status = SolveStatus::Converged;
      break;
    }
    if (s.iter >= params.max_iter) {
      report.status = SolveStatus::MaxIterations;
      break;
    }

    const double rhs = s.fbe - s.sigma * s.r.squaredNorm();
    double tau = 1.0;
    bool accepted = false;
    double cand_cost = 0.0;
    double cand_fbe = 0.0;

    const bool pure_pg = buffer.empty();
    if (!pure_pg) {
      s.d = lbfgs_direction(buffer, s.r, s.gamma);
      for (int halving = 0; halving <= params.max_ls_halvings; ++halving) {
        cand_u = s.u - (1.0 - tau) * s.pg_step + tau * s.d;
        if (!cand_u.allFinite() || box.dist_sq(cand_u) > overrun_cap_sq) {
          tau *= 0.5;
          continue;
        }
        bool evaluated = true;
        try {
          cand_cost = counted(cand_u, &cand_grad);
        } catch (const std::exception&) {
          // the objective cannot be evaluated at an overshooting candidate;
          // treat it like an infinite merit value and shorten the step
          evaluated = false;
        }
        if (evaluated) {
          cand_forward = cand_u - s.gamma * cand_grad;
          box.project(cand_forward, cand_ubar);
          cand_pg = cand_u - cand_ubar;
          const double g2 = cand_grad.squaredNorm();
          const double dist2 = (cand_forward - cand_ubar).squaredNorm();
          cand_fbe = cand_cost - 0.5 * s.gamma * g2 + dist2 / (2.0 * s.gamma);
          // The envelope is only trustworthy while its correction terms stay
          // within the cost's floating-point scale; a quasi-Newton overshoot
          // into a region of exploding gradients can cancel two astronomical
          // terms into an arbitrary small number that would pass the test.
          const double correction = 0.5 * s.gamma * g2 + dist2 / (2.0 * s.gamma);
          const bool trustworthy = correction <= 1e12 * (1.0 + std::abs(cand_cost));
          if (trustworthy && std::isfinite(cand_fbe) && cand_fbe <= rhs) {
            accepted = true;
            break;
          }
        }
        tau *= 0.5;
      }
    }
    if (!accepted) {
      // tau = 0: the pure projected-gradient point. With empty memory this
      // is the whole update, which keeps mu = 0 runs identical to a plain
      // projected-gradient loop.
      tau = 0.0;
      cand_u = s.u_bar;
      cand_cost = counted(cand_u, &cand_grad);
      cand_forward = cand_u - s.gamma * cand_grad;
      box.project(cand_forward, cand_ubar);
      cand_pg = cand_u - cand_ubar;
      cand_fbe = cand_cost - 0.5 * s.gamma * cand_grad.squaredNorm() +
                 (cand_forward - cand_ubar).squaredNorm() / (2.0 * s.gamma);
      if (std::isfinite(cand_fbe) && cand_fbe <= rhs) {
        accepted = true;
      }
    }
    if (!accepted) {
      report.status = SolveStatus::LineSearchExhausted;
      break;
    }

    report.trace.back().tau = tau;
    s.tau_log.push_back(tau);

    cand_r = cand_pg / s.gamma;
    buffer.push(Vector(cand_u - s.u), Vector(cand_r - s.r));

    s.u.swap(cand_u);
    s.grad.swap(cand_grad);
    s.cost = cand_cost;
    s.forward.swap(cand_forward);
    s.u_bar.swap(cand_ubar);
    s.pg_step.swap(cand_pg);
    s.r.swap(cand_r);
    s.fbe = cand_fbe;
    s.res_inf = s.r.lpNorm<Eigen::Infinity>();
    ++s.iter;

    // Adapt gamma at the new iterate. When it shrinks, the stored residual
    // pairs describe a different operator, so the memory is flushed and the
    // envelope reference is recomputed before the next acceptance test
    // (backtrack_gamma refreshes fbe either way).
    const double gamma_before = s.gamma;
    backtrack_gamma(counted, box, s, params.max_backtracks);
    if (s.gamma != gamma_before) {
      buffer.clear();
    }
  }

  report.u_star = s.u_bar;
  report.residual_inf = s.res_inf;
  report.iterations = s.iter;
  report.cost = s.cost;
  report.n_cost_evals = cost_evals;
  report.n_grad_evals = grad_evals;
  const auto t_end = std::chrono::steady_clock::now();
  report.solve_time_ms =
      std::chrono::duration<double, std::milli>(t_end - t_start).count();
  return report;
}

}  // namespace nmpc
