#include <doctest.h>

#include <cmath>
#include <random>

#include "nmpc/shooting.hpp"
#include "support/test_helpers.hpp"

using namespace nmpc;
using nmpc::testing::fd_gradient;
using nmpc::testing::random_trailer_problem;
using nmpc::testing::random_vector;
using nmpc::testing::rel_err_inf;

namespace {

DynamicsModel zero_field() {
  DynamicsModel m;
  m.n_x = 3;
  m.n_u = 1;
  m.step = [](const Vector& x, const Vector&, Vector& out) { out = Vector::Zero(x.size()); };
  m.adjoint_step = [](const Vector& x, const Vector& u, const Vector&, Vector& gx, Vector& gu) {
    gx = Vector::Zero(x.size());
    gu = Vector::Zero(u.size());
  };
  return m;
}

DynamicsModel scalar_linear() {  // xdot = x
  DynamicsModel m;
  m.n_x = 1;
  m.n_u = 1;
  m.step = [](const Vector& x, const Vector&, Vector& out) { out = x; };
  m.adjoint_step = [](const Vector&, const Vector&, const Vector& p, Vector& gx, Vector& gu) {
    gx = p;
    gu = Vector::Zero(1);
  };
  return m;
}

DynamicsModel single_integrator() {  // discrete x+ = x + u
  DynamicsModel m;
  m.n_x = 1;
  m.n_u = 1;
  m.step = [](const Vector& x, const Vector& u, Vector& out) { out = x + u; };
  m.adjoint_step = [](const Vector&, const Vector&, const Vector& p, Vector& gx, Vector& gu) {
    gx = p;
    gu = p;
  };
  return m;
}

// Independent trailer right-hand side, written out from scratch so the
// library rollout has something to disagree with.
Vector trailer_rhs_reference(double L, const Vector& x, const Vector& u) {
  Vector f(3);
  const double theta_dot = (u[1] * std::cos(x[2]) - u[0] * std::sin(x[2])) / L;
  f[0] = u[0] + L * std::sin(x[2]) * theta_dot;
  f[1] = u[1] - L * std::cos(x[2]) * theta_dot;
  f[2] = theta_dot;
  return f;
}

Vector rk4_step_reference(double L, double dt, const Vector& x, const Vector& u) {
  const Vector k1 = trailer_rhs_reference(L, x, u);
  const Vector k2 = trailer_rhs_reference(L, x + 0.5 * dt * k1, u);
  const Vector k3 = trailer_rhs_reference(L, x + 0.5 * dt * k2, u);
  const Vector k4 = trailer_rhs_reference(L, x + dt * k3, u);
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

ControlProblem tiny_integrator_problem(int N) {
  ControlProblem p;
  p.N = N;
  p.dynamics = single_integrator();
  p.cost = QuadraticStageCost::diagonal(Vector::Zero(1), Vector::Zero(1),
                                        Vector::Constant(1, 1.0), Vector::Constant(1, 2.0),
                                        Vector::Zero(1));
  p.box = InputBox{Vector::Constant(1, -10.0), Vector::Constant(1, 10.0)};
  p.x0 = Vector::Zero(1);
  return p;
}

}  // namespace

TEST_SUITE("shooting") {

TEST_CASE("rk4 of the zero field is the identity") {
  const DynamicsModel d = discretize_rk4(zero_field(), 0.25);
  Vector out;
  const Vector x = (Vector(3) << 1.0, -2.0, 3.0).finished();
  d.step(x, Vector::Zero(1), out);
  CHECK(out == x);
}

TEST_CASE("rk4 on xdot = x reproduces the truncated exponential") {
  // one step of classical rk4 on a linear scalar field equals the
  // fourth-order Taylor polynomial of e^dt
  const double dt = 0.1;
  const double expected = 1.0 + dt + dt * dt / 2.0 + dt * dt * dt / 6.0 +
                          dt * dt * dt * dt / 24.0;
  const DynamicsModel d = discretize_rk4(scalar_linear(), dt);
  Vector out;
  d.step(Vector::Constant(1, 1.0), Vector::Zero(1), out);
  CHECK(out[0] == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("nonpositive step sizes are rejected") {
  CHECK_THROWS_AS(discretize_rk4(scalar_linear(), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(discretize_euler(scalar_linear(), -0.1), std::invalid_argument);
}

TEST_CASE("euler basics") {
  Vector out;
  const DynamicsModel id = discretize_euler(zero_field(), 0.3);
  const Vector x = (Vector(3) << 4.0, 5.0, 6.0).finished();
  id.step(x, Vector::Zero(1), out);
  CHECK(out == x);

  const DynamicsModel lin = discretize_euler(scalar_linear(), 0.1);
  lin.step(Vector::Constant(1, 1.0), Vector::Zero(1), out);
  CHECK(out[0] == doctest::Approx(1.1).epsilon(1e-15));

  // one Euler step of the trailer against the hand-written right-hand side
  const double L = 0.5, dt = 0.1;
  const DynamicsModel trailer = discretize_euler(make_trailer_model(L), dt);
  const Vector xt = (Vector(3) << 0.2, -0.1, 0.7).finished();
  const Vector ut = (Vector(2) << 0.4, -0.3).finished();
  trailer.step(xt, ut, out);
  const Vector expected = xt + dt * trailer_rhs_reference(L, xt, ut);
  CHECK((out - expected).norm() <= 1e-15);
}

TEST_CASE("discretized adjoints stay consistent with finite differences") {
  std::mt19937 rng(99);
  const DynamicsModel rk4 = discretize_rk4(make_trailer_model(0.5), 0.08);
  for (int t = 0; t < 30; ++t) {
    const Vector x = random_vector(rng, 3, -2.0, 2.0);
    const Vector u = random_vector(rng, 2, -1.0, 1.0);
    const Vector p = random_vector(rng, 3, -1.0, 1.0);
    CHECK(nmpc::testing::adjoint_fd_error(rk4, x, u, p) <= 1e-5);
  }
}

TEST_CASE("rollout of trivial systems") {
  RolloutWorkspace ws;

  // f(x, u) = x: the state never moves
  ControlProblem p;
  p.N = 1;
  p.dynamics = zero_field();
  p.dynamics.step = [](const Vector& x, const Vector&, Vector& out) { out = x; };
  p.cost = QuadraticStageCost::diagonal(Vector::Zero(3), Vector::Zero(1), Vector::Zero(3),
                                        Vector::Zero(3), Vector::Zero(1));
  p.box = InputBox{Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)};
  p.x0 = (Vector(3) << 1.0, 2.0, 3.0).finished();
  const auto& traj = rollout(p, Vector::Zero(1), ws);
  CHECK(traj[1] == p.x0);

  // single integrator prefix sums
  ControlProblem q = tiny_integrator_problem(3);
  const Vector u = (Vector(3) << 1.0, 2.0, 3.0).finished();
  const auto& t2 = rollout(q, u, ws);
  CHECK(t2[0][0] == 0.0);
  CHECK(t2[1][0] == 1.0);
  CHECK(t2[2][0] == 3.0);
  CHECK(t2[3][0] == 6.0);
}

TEST_CASE("rollout matches an independently coded integrator") {
  const double L = 0.5, dt = 0.1;
  ControlProblem p;
  p.N = 20;
  p.dynamics = discretize_rk4(make_trailer_model(L), dt);
  p.cost = QuadraticStageCost::diagonal(Vector::Constant(3, 0.1), Vector::Constant(2, 0.01),
                                        Vector::Constant(3, 0.1), Vector::Zero(3),
                                        Vector::Zero(2));
  p.box = InputBox{Vector::Constant(2, -0.8), Vector::Constant(2, 0.8)};
  p.x0 = (Vector(3) << -0.1, -0.2, 0.4).finished();

  std::mt19937 rng(3);
  const Vector u = random_vector(rng, p.num_inputs(), -0.8, 0.8);

  RolloutWorkspace ws;
  const auto& traj = rollout(p, u, ws);

  Vector x = p.x0;
  for (int k = 0; k < p.N; ++k) {
    x = rk4_step_reference(L, dt, x, u.segment(2 * k, 2));
    CHECK((traj[static_cast<std::size_t>(k) + 1] - x).norm() <= 1e-12);
  }
}

TEST_CASE("diverged rollout names the stage") {
  ControlProblem p = tiny_integrator_problem(4);
  p.dynamics.step = [](const Vector& x, const Vector& u, Vector& out) {
    out = x + u;
    if (out[0] > 2.5) {
      out[0] = std::numeric_limits<double>::infinity();
    }
  };
  const Vector u = Vector::Constant(4, 1.0);
  RolloutWorkspace ws;
  try {
    rollout(p, u, ws);
    FAIL("expected DivergedRolloutError");
  } catch (const DivergedRolloutError& e) {
    CHECK(e.stage() == 3);
    CHECK(std::string(e.what()).find("stage 3") != std::string::npos);
  }
}

TEST_CASE("input sequence length is checked") {
  ControlProblem p = tiny_integrator_problem(3);
  RolloutWorkspace ws;
  CHECK_THROWS_AS(rollout(p, Vector::Zero(2), ws), std::invalid_argument);
  CHECK_THROWS_AS(cost(p, Vector::Zero(7), ws), std::invalid_argument);
}

TEST_CASE("cost at the equilibrium reference is zero") {
  ControlProblem p;
  p.N = 5;
  p.dynamics = zero_field();
  p.dynamics.step = [](const Vector& x, const Vector&, Vector& out) { out = x; };
  p.dynamics.n_u = 1;
  p.cost = QuadraticStageCost::diagonal(Vector::Constant(3, 1.0), Vector::Constant(1, 1.0),
                                        Vector::Constant(3, 1.0),
                                        (Vector(3) << 1.0, 2.0, 3.0).finished(),
                                        Vector::Zero(1));
  p.box = InputBox{Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)};
  p.x0 = p.cost.x_ref;
  RolloutWorkspace ws;
  CHECK(cost(p, Vector::Zero(5), ws) == 0.0);
}

TEST_CASE("one-step quadratic cost and gradient") {
  ControlProblem p = tiny_integrator_problem(1);
  RolloutWorkspace ws;
  const Vector u = Vector::Constant(1, 1.0);
  // x1 = u0 = 1, terminal weight 1, reference 2: cost (1-2)^2 = 1
  CHECK(cost(p, u, ws) == doctest::Approx(1.0).epsilon(1e-15));
  Vector grad;
  cost_and_gradient(p, u, ws, grad);
  CHECK(grad[0] == doctest::Approx(-2.0).epsilon(1e-15));
}

TEST_CASE("constant cost has zero gradient") {
  ControlProblem p = tiny_integrator_problem(4);
  p.dynamics.step = [](const Vector& x, const Vector&, Vector& out) { out = x; };
  p.dynamics.adjoint_step = [](const Vector&, const Vector&, const Vector& pp, Vector& gx,
                               Vector& gu) {
    gx = pp;
    gu = Vector::Zero(1);
  };
  RolloutWorkspace ws;
  Vector grad;
  cost_and_gradient(p, Vector::Constant(4, 0.3), ws, grad);
  CHECK(grad.norm() == 0.0);
}

TEST_CASE("trailer cost matches an independent evaluation") {
  const double L = 0.5, dt = 0.1;
  ControlProblem p;
  p.N = 15;
  p.dynamics = discretize_rk4(make_trailer_model(L), dt);
  const Vector q = (Vector(3) << 0.1, 0.1, 0.1).finished();
  const Vector r = (Vector(2) << 0.01, 0.01).finished();
  const Vector x_ref = (Vector(3) << 1.0, 0.5, 0.0).finished();
  p.cost = QuadraticStageCost::diagonal(q, r, q, x_ref, Vector::Zero(2));
  p.box = InputBox{Vector::Constant(2, -0.8), Vector::Constant(2, 0.8)};
  p.position_slice = {0, 1};
  p.obstacles.push_back({Obstacle::ball((Vector(2) << 0.5, 0.25).finished(), 0.3, 2.0), 0, -1});
  p.x0 = (Vector(3) << -0.1, -0.2, 0.6283185307179586).finished();

  std::mt19937 rng(17);
  const Vector u = random_vector(rng, p.num_inputs(), -0.8, 0.8);
  RolloutWorkspace ws;
  const double got = cost(p, u, ws);

  // independent evaluation: reference integrator + direct formula
  const Obstacle& ball = p.obstacles.front().obstacle;
  double expected = 0.0;
  Vector x = p.x0;
  for (int k = 0; k < p.N; ++k) {
    const Vector uk = u.segment(2 * k, 2);
    expected += (x - x_ref).dot(q.asDiagonal() * (x - x_ref));
    expected += uk.dot(r.asDiagonal() * uk);
    expected += 2.0 * ball.eta() * violation(ball, Vector(x.head(2)));
    x = rk4_step_reference(L, dt, x, uk);
  }
  expected += (x - x_ref).dot(q.asDiagonal() * (x - x_ref));
  expected += 2.0 * ball.eta() * violation(ball, Vector(x.head(2)));

  CHECK(got == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("gradient matches finite differences on random trailer problems") {
  std::mt19937 rng(41);
  RolloutWorkspace ws;
  for (int trial = 0; trial < 25; ++trial) {
    nmpc::testing::RandomProblemOptions opts;
    opts.euler = trial % 2 == 1;
    opts.with_state_penalty = trial % 3 == 0;
    const ControlProblem p = random_trailer_problem(rng, opts);
    const Vector u = random_vector(rng, p.num_inputs(), -0.8, 0.8);

    Vector grad;
    const double c0 = cost_and_gradient(p, u, ws, grad);
    RolloutWorkspace ws2;
    const auto f = [&](const Vector& v) { return cost(p, v, ws2); };
    CHECK(rel_err_inf(grad, fd_gradient(f, u)) <= 1e-5);
    CHECK(c0 == cost(p, u, ws));  // bit-identical cost through both entry points
  }
}

TEST_CASE("cost decomposition adds up and penalties are nonnegative") {
  std::mt19937 rng(53);
  RolloutWorkspace ws;
  for (int trial = 0; trial < 10; ++trial) {
    nmpc::testing::RandomProblemOptions opts;
    opts.with_state_penalty = true;
    const ControlProblem p = random_trailer_problem(rng, opts);
    const Vector u = random_vector(rng, p.num_inputs(), -0.8, 0.8);
    const CostBreakdown parts = cost_breakdown(p, u, ws);
    CHECK(parts.obstacle >= 0.0);
    CHECK(parts.state_penalty >= 0.0);
    CHECK(parts.total() == doctest::Approx(cost(p, u, ws)).epsilon(1e-12));
  }
}

TEST_CASE("results are deterministic and workspace-neutral") {
  std::mt19937 rng(71);
  const ControlProblem p = random_trailer_problem(rng);
  const Vector u = random_vector(rng, p.num_inputs(), -0.8, 0.8);

  RolloutWorkspace fresh;
  Vector g1, g2;
  const double c1 = cost_and_gradient(p, u, fresh, g1);

  RolloutWorkspace dirty;
  const ControlProblem other = random_trailer_problem(rng);
  Vector gtmp;
  cost_and_gradient(other, Vector::Zero(other.num_inputs()), dirty, gtmp);
  const double c2 = cost_and_gradient(p, u, dirty, g2);

  CHECK(c1 == c2);
  CHECK(g1 == g2);

  // repeated evaluation is bitwise stable
  Vector g3;
  CHECK(cost_and_gradient(p, u, dirty, g3) == c1);
  CHECK(g3 == g1);
}

}  // TEST_SUITE
