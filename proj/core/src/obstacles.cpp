#include "nmpc/obstacles.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace nmpc {

namespace {

void check_dim(const Obstacle& o, const Vector& z) {
  if (z.size() != o.dim()) {
    throw std::invalid_argument("obstacle/position dimension mismatch: z has " +
                                std::to_string(z.size()) + " entries, obstacle is " +
                                std::to_string(o.dim()) + "-dimensional");
  }
}

}  // namespace

Obstacle::Obstacle(std::vector<SmoothInequality> inequalities, double eta, int dim)
    : ineq_(std::move(inequalities)), eta_(eta), dim_(dim) {
  if (ineq_.empty()) {
    throw std::invalid_argument("obstacle needs at least one inequality");
  }
  if (!(eta > 0.0)) {
    throw std::invalid_argument("obstacle weight eta must be positive");
  }
  if (dim < 1) {
    throw std::invalid_argument("obstacle dimension must be positive");
  }
  for (const auto& h : ineq_) {
    if (!h.eval || !h.grad) {
      throw std::invalid_argument("obstacle inequality is missing eval or grad");
    }
  }
}

Obstacle Obstacle::half_space(const Vector& a, double b, double eta, double margin) {
  const double shift = b + margin * a.norm();
  SmoothInequality h{
      [a, shift](const Vector& z) { return shift - a.dot(z); },
      [a](const Vector& z) {
        (void)z;
        return Vector(-a);
      }};
  return Obstacle({h}, eta, static_cast<int>(a.size()));
}

Obstacle Obstacle::ball(const Vector& center, double radius, double eta, double margin) {
  const double r = radius + margin;
  if (!(r > 0.0)) {
    throw std::invalid_argument("ball obstacle needs a positive radius");
  }
  const double inv_r2 = 1.0 / (r * r);
  SmoothInequality h{
      [center, inv_r2](const Vector& z) {
        return 1.0 - (z - center).squaredNorm() * inv_r2;
      },
      [center, inv_r2](const Vector& z) {
        return Vector(-2.0 * inv_r2 * (z - center));
      }};
  return Obstacle({h}, eta, static_cast<int>(center.size()));
}

Obstacle Obstacle::ellipse(const Vector& center, const Vector& semi_axes, double eta,
                           double margin) {
  if (semi_axes.size() != center.size()) {
    throw std::invalid_argument("ellipse center/semi_axes size mismatch");
  }
  Vector inv_sq(semi_axes.size());
  for (Eigen::Index i = 0; i < semi_axes.size(); ++i) {
    const double s = semi_axes[i] + margin;
    if (!(s > 0.0)) {
      throw std::invalid_argument("ellipse semi-axes must be positive");
    }
    inv_sq[i] = 1.0 / (s * s);
  }
  SmoothInequality h{
      [center, inv_sq](const Vector& z) {
        double q = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
          const double d = z[i] - center[i];
          q += d * d * inv_sq[i];
        }
        return 1.0 - q;
      },
      [center, inv_sq](const Vector& z) {
        Vector g(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
          g[i] = -2.0 * inv_sq[i] * (z[i] - center[i]);
        }
        return g;
      }};
  return Obstacle({h}, eta, static_cast<int>(center.size()));
}

Obstacle Obstacle::rectangle(const Vector& center, const Vector& half_extent, double eta,
                             double margin) {
  if (half_extent.size() != center.size()) {
    throw std::invalid_argument("rectangle center/half_extent size mismatch");
  }
  const int n = static_cast<int>(center.size());
  std::vector<SmoothInequality> sides;
  sides.reserve(2 * n);
  for (int i = 0; i < n; ++i) {
    const double e = half_extent[i] + margin;
    if (!(e > 0.0)) {
      throw std::invalid_argument("rectangle half extents must be positive");
    }
    const double lo = center[i] - e;
    const double hi = center[i] + e;
    sides.push_back({[i, lo](const Vector& z) { return z[i] - lo; },
                     [i, n](const Vector& z) {
                       (void)z;
                       Vector g = Vector::Zero(n);
                       g[i] = 1.0;
                       return g;
                     }});
    sides.push_back({[i, hi](const Vector& z) { return hi - z[i]; },
                     [i, n](const Vector& z) {
                       (void)z;
                       Vector g = Vector::Zero(n);
                       g[i] = -1.0;
                       return g;
                     }});
  }
  return Obstacle(std::move(sides), eta, n);
}

Obstacle Obstacle::with_eta(double eta) const { return Obstacle(ineq_, eta, dim_); }

double violation(const Obstacle& obstacle, const Vector& z) {
  check_dim(obstacle, z);
  double prod = 1.0;
  for (const auto& h : obstacle.inequalities()) {
    const double hp = std::max(h.eval(z), 0.0);
    if (hp == 0.0) {
      return 0.0;
    }
    prod *= hp * hp;
  }
  return 0.5 * prod;
}

Vector violation_gradient(const Obstacle& obstacle, const Vector& z) {
  check_dim(obstacle, z);
  const int m = obstacle.size();
  Eigen::ArrayXd hplus(m);
  for (int i = 0; i < m; ++i) {
    hplus[i] = std::max(obstacle.inequalities()[i].eval(z), 0.0);
    if (hplus[i] == 0.0) {
      return Vector::Zero(z.size());
    }
  }
  Vector grad = Vector::Zero(z.size());
  for (int i = 0; i < m; ++i) {
    double w = hplus[i];
    for (int j = 0; j < m; ++j) {
      if (j != i) {
        w *= hplus[j] * hplus[j];
      }
    }
    grad += w * obstacle.inequalities()[i].grad(z);
  }
  return grad;
}

double penalty(std::span<const Obstacle* const> active, const Vector& z) {
  double sum = 0.0;
  for (const Obstacle* o : active) {
    sum += 2.0 * o->eta() * violation(*o, z);
  }
  return sum;
}

double penalty(const std::vector<Obstacle>& obstacles, const Vector& z) {
  double sum = 0.0;
  for (const Obstacle& o : obstacles) {
    sum += 2.0 * o.eta() * violation(o, z);
  }
  return sum;
}

Vector penalty_gradient(std::span<const Obstacle* const> active, const Vector& z) {
  Vector grad = Vector::Zero(z.size());
  for (const Obstacle* o : active) {
    grad += 2.0 * o->eta() * violation_gradient(*o, z);
  }
  return grad;
}

Vector penalty_gradient(const std::vector<Obstacle>& obstacles, const Vector& z) {
  Vector grad = Vector::Zero(z.size());
  for (const Obstacle& o : obstacles) {
    grad += 2.0 * o.eta() * violation_gradient(o, z);
  }
  return grad;
}

}  // namespace nmpc
