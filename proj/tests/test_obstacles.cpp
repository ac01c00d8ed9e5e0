#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "nmpc/obstacles.hpp"
#include "support/test_helpers.hpp"

using namespace nmpc;
using nmpc::testing::fd_gradient;
using nmpc::testing::random_vector;
using nmpc::testing::rel_err_inf;

namespace {

Vector v2(double x, double y) { return (Vector(2) << x, y).finished(); }

// The parabola-lens region { y > x^2, y < 1 + x^2/2 } used by the shipped
// scenarios, built directly from closures.
Obstacle parabola_lens(double eta) {
  SmoothInequality lower{[](const Vector& z) { return z[1] - z[0] * z[0]; },
                         [](const Vector& z) { return v2(-2.0 * z[0], 1.0); }};
  SmoothInequality upper{[](const Vector& z) { return 1.0 + 0.5 * z[0] * z[0] - z[1]; },
                         [](const Vector& z) { return v2(z[0], -1.0); }};
  return Obstacle({lower, upper}, eta, 2);
}

// Bisect along the ray from an interior anchor until min_i h_i crosses zero.
Vector boundary_point(const Obstacle& o, const Vector& anchor, const Vector& dir) {
  const auto min_h = [&](const Vector& z) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& h : o.inequalities()) {
      m = std::min(m, h.eval(z));
    }
    return m;
  };
  REQUIRE(min_h(anchor) > 0.0);
  double lo = 0.0, hi = 1e-3;
  while (min_h(anchor + hi * dir) > 0.0) {
    hi *= 2.0;
    REQUIRE(hi < 1e6);
  }
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (min_h(anchor + mid * dir) > 0.0 ? lo : hi) = mid;
  }
  return anchor + hi * dir;
}

}  // namespace

TEST_SUITE("obstacles") {

TEST_CASE("violation of the unit disc") {
  const Obstacle disc = Obstacle::ball(Vector::Zero(2), 1.0, 1.0);
  CHECK(violation(disc, v2(0.0, 0.0)) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(violation(disc, v2(2.0, 0.0)) == 0.0);
  CHECK(violation(disc, v2(1.0, 0.0)) == 0.0);  // boundary
}

TEST_CASE("violation of the parabola lens") {
  const Obstacle lens = parabola_lens(1.0);
  // h1 = h2 = 1/2 at (0, 1/2), so psi = 1/2 * (1/2)^2 * (1/2)^2
  CHECK(violation(lens, v2(0.0, 0.5)) == doctest::Approx(0.03125).epsilon(1e-15));
  CHECK(violation(lens, v2(0.0, -0.5)) == 0.0);
  CHECK(violation(lens, v2(2.0, 2.0)) == 0.0);
}

TEST_CASE("violation gradient of the unit disc") {
  const Obstacle disc = Obstacle::ball(Vector::Zero(2), 1.0, 1.0);
  CHECK(violation_gradient(disc, v2(2.0, 0.0)).norm() == 0.0);
  CHECK(violation_gradient(disc, v2(1.0, 0.0)).norm() == 0.0);  // boundary: exactly zero
  const Vector g = violation_gradient(disc, v2(0.5, 0.0));
  CHECK(g[0] == doctest::Approx(-0.75).epsilon(1e-15));
  CHECK(g[1] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("violation gradient matches finite differences inside") {
  std::mt19937 rng(7);
  const Obstacle lens = parabola_lens(1.0);
  const auto psi = [&](const Vector& z) { return violation(lens, z); };
  int checked = 0;
  while (checked < 50) {
    const Vector z = v2(random_vector(rng, 1, -1.3, 1.3)[0], random_vector(rng, 1, -0.2, 1.8)[0]);
    if (violation(lens, z) <= 1e-8) {
      continue;  // keep away from the plus-function kink for the FD oracle
    }
    CHECK(rel_err_inf(violation_gradient(lens, z), fd_gradient(psi, z)) <= 1e-5);
    ++checked;
  }
}

TEST_CASE("violation rejects mismatched dimensions") {
  const Obstacle disc = Obstacle::ball(Vector::Zero(2), 1.0, 1.0);
  CHECK_THROWS_AS(violation(disc, Vector::Zero(3)), std::invalid_argument);
  CHECK_THROWS_AS(violation_gradient(disc, Vector::Zero(1)), std::invalid_argument);
}

TEST_CASE("obstacle construction guards") {
  CHECK_THROWS_AS(Obstacle({}, 1.0, 2), std::invalid_argument);
  CHECK_THROWS_AS(Obstacle::ball(Vector::Zero(2), 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(Obstacle::ball(Vector::Zero(2), -1.0, 1.0), std::invalid_argument);
}

TEST_CASE("penalty over obstacle lists") {
  const std::vector<Obstacle> none;
  CHECK(penalty(none, v2(0.0, 0.0)) == 0.0);

  const Obstacle disc = Obstacle::ball(Vector::Zero(2), 1.0, 1.0);
  CHECK(penalty({disc}, v2(0.0, 0.0)) == doctest::Approx(1.0).epsilon(1e-15));

  // two disjoint discs: only the one containing z contributes
  const Obstacle other = Obstacle::ball(v2(5.0, 0.0), 1.0, 3.0);
  const double both = penalty({disc, other}, v2(0.2, 0.1));
  CHECK(both == doctest::Approx(2.0 * violation(disc, v2(0.2, 0.1))).epsilon(1e-15));
}

TEST_CASE("penalty gradient basics") {
  const Obstacle disc = Obstacle::ball(Vector::Zero(2), 1.0, 2.5);
  CHECK(penalty_gradient({disc}, v2(3.0, 3.0)).norm() == 0.0);

  // single obstacle: exactly 2 eta times the violation gradient
  const Vector z = v2(0.3, -0.2);
  const Vector expected = 2.0 * 2.5 * violation_gradient(disc, z);
  const Vector got = penalty_gradient({disc}, z);
  CHECK((got - expected).norm() == 0.0);
}

TEST_CASE("penalty gradient matches finite differences in the lens") {
  std::mt19937 rng(11);
  const std::vector<Obstacle> obstacles = {parabola_lens(4.0)};
  const auto f = [&](const Vector& z) { return penalty(obstacles, z); };
  int checked = 0;
  while (checked < 50) {
    const Vector z = v2(random_vector(rng, 1, -1.3, 1.3)[0], random_vector(rng, 1, 0.0, 1.9)[0]);
    if (penalty(obstacles, z) <= 1e-8) {
      continue;
    }
    CHECK(rel_err_inf(penalty_gradient(obstacles, z), fd_gradient(f, z)) <= 1e-5);
    ++checked;
  }
}

TEST_CASE("support of psi is exactly the open region") {
  std::mt19937 rng(23);
  const Obstacle rect = Obstacle::rectangle(v2(0.5, -0.2), v2(0.4, 0.3), 1.0);
  for (int i = 0; i < 2000; ++i) {
    const Vector z = random_vector(rng, 2, -1.5, 1.5);
    const double psi = violation(rect, z);
    CHECK(psi >= 0.0);
    bool inside = true;
    for (const auto& h : rect.inequalities()) {
      inside = inside && h.eval(z) > 0.0;
    }
    CHECK((psi > 0.0) == inside);
  }
}

TEST_CASE("gradient vanishes on boundary approach") {
  // The gradient is identically zero on and outside the boundary; from the
  // inside it decays linearly, so its boundary limit is read off from two
  // samples near the crossing. The extrapolated limit must vanish.
  const std::vector<std::pair<Obstacle, Vector>> cases = {
      {Obstacle::ball(v2(0.3, -0.1), 0.35, 1.0), v2(0.3, -0.1)},
      {Obstacle::rectangle(v2(1.0, 0.4), v2(0.3, 0.25), 1.0), v2(1.0, 0.4)},
      {parabola_lens(1.0), v2(0.0, 0.5)},
  };
  const double d = 1e-4;
  for (const auto& [obstacle, anchor] : cases) {
    for (int k = 0; k < 100; ++k) {
      const double angle = 2.0 * std::numbers::pi * k / 100.0;
      const Vector dir = v2(std::cos(angle), std::sin(angle));
      const Vector zb = boundary_point(obstacle, anchor, dir);
      // exactly zero at the numerical boundary point and beyond
      CHECK(violation_gradient(obstacle, Vector(zb + 1e-9 * dir)).norm() == 0.0);
      const Vector g1 = violation_gradient(obstacle, Vector(zb - d * dir));
      const Vector g2 = violation_gradient(obstacle, Vector(zb - 0.5 * d * dir));
      CHECK((2.0 * g2 - g1).norm() <= 1e-6);  // linear-order limit at the boundary
      CHECK(g2.norm() <= g1.norm() + 1e-12);  // and the approach is monotone
    }
  }
}

TEST_CASE("penalty is invariant under reordering") {
  std::mt19937 rng(5);
  const Obstacle rect = Obstacle::rectangle(v2(0.0, 0.0), v2(0.5, 0.4), 1.5);
  std::vector<SmoothInequality> reversed(rect.inequalities().rbegin(),
                                         rect.inequalities().rend());
  const Obstacle rect_rev(reversed, 1.5, 2);
  const Obstacle disc = Obstacle::ball(v2(0.2, 0.1), 0.6, 0.7);

  for (int i = 0; i < 200; ++i) {
    const Vector z = random_vector(rng, 2, -1.0, 1.0);
    CHECK(violation(rect, z) == doctest::Approx(violation(rect_rev, z)).epsilon(1e-14));
    const double ab = penalty({disc, rect}, z);
    const double ba = penalty({rect, disc}, z);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-14));
  }
}

TEST_CASE("scaling eta scales penalty exactly") {
  std::mt19937 rng(6);
  const Obstacle base = Obstacle::ball(v2(0.0, 0.0), 1.0, 0.75);
  for (const double c : {2.0, 0.5, 4.0}) {  // powers of two: exact in floating point
    const Obstacle scaled = base.with_eta(c * 0.75);
    for (int i = 0; i < 100; ++i) {
      const Vector z = random_vector(rng, 2, -1.2, 1.2);
      CHECK(penalty({scaled}, z) == c * penalty({base}, z));
      CHECK((penalty_gradient({scaled}, z) - c * penalty_gradient({base}, z)).norm() == 0.0);
    }
  }
}

TEST_CASE("built-in margins enlarge the shapes") {
  const Obstacle tight = Obstacle::ball(Vector::Zero(2), 0.5, 1.0);
  const Obstacle fat = Obstacle::ball(Vector::Zero(2), 0.5, 1.0, 0.1);
  const Vector z = v2(0.55, 0.0);
  CHECK(violation(tight, z) == 0.0);
  CHECK(violation(fat, z) > 0.0);

  const Obstacle box_fat = Obstacle::rectangle(Vector::Zero(2), v2(0.3, 0.3), 1.0, 0.05);
  CHECK(violation(box_fat, v2(0.33, 0.0)) > 0.0);

  const Obstacle plane = Obstacle::half_space(v2(1.0, 0.0), 0.0, 1.0, 0.25);
  CHECK(violation(plane, v2(0.2, 0.0)) > 0.0);   // inside the pushed-out plane
  CHECK(violation(plane, v2(0.3, 0.0)) == 0.0);
}

}  // TEST_SUITE
