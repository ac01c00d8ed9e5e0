#include "nmpc/projected_gradient.hpp"

#include <chrono>
#include <stdexcept>

#include "solver_detail.hpp"

namespace nmpc {

SolveReport projected_gradient_solve(const CostFunction& f, const BoxProjector& box,
                                     const Vector& u0, const PanocParams& params) {
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

  double prev_gamma = s.gamma;
  bool first_row = true;
  for (;;) {
    report.trace.push_back({s.fbe, s.gamma, s.sigma, s.r.squaredNorm(), s.res_inf, 0.0,
                            !first_row && s.gamma != prev_gamma});
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

    s.u = s.u_bar;
    s.cost = counted(s.u, &s.grad);
    detail::refresh_projection(box, s);
    ++s.iter;
    backtrack_gamma(counted, box, s, params.max_backtracks);
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
