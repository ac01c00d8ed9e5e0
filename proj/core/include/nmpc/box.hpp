#pragma once

#include <Eigen/Core>

namespace nmpc {

using Vector = Eigen::VectorXd;

/// Component-wise box [lb, ub]; entries may be +-infinity. Projection is a
/// clamp, distance is measured to the clamped point.
struct BoxProjector {
  Vector lb;
  Vector ub;

  BoxProjector(Vector lb, Vector ub);
  static BoxProjector unbounded(int n);

  int dim() const { return static_cast<int>(lb.size()); }
  void project(const Vector& v, Vector& out) const;
  Vector project(const Vector& v) const;
  /// dist^2(v) = |v - project(v)|^2.
  double dist_sq(const Vector& v) const;
  bool contains(const Vector& v) const;
};

/// Component-wise clamp of v to the box; idempotent.
Vector project(const BoxProjector& box, const Vector& v);

}  // namespace nmpc
