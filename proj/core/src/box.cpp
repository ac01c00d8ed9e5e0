#include "nmpc/box.hpp"

#include <limits>
#include <stdexcept>
#include <utility>

namespace nmpc {

BoxProjector::BoxProjector(Vector lb_in, Vector ub_in)
    : lb(std::move(lb_in)), ub(std::move(ub_in)) {
  if (lb.size() != ub.size()) {
    throw std::invalid_argument("box bound vectors differ in length");
  }
  for (Eigen::Index i = 0; i < lb.size(); ++i) {
    if (lb[i] > ub[i]) {
      throw std::invalid_argument("box bounds crossed at component " + std::to_string(i));
    }
  }
}

BoxProjector BoxProjector::unbounded(int n) {
  const double inf = std::numeric_limits<double>::infinity();
  return BoxProjector(Vector::Constant(n, -inf), Vector::Constant(n, inf));
}

void BoxProjector::project(const Vector& v, Vector& out) const {
  if (v.size() != lb.size()) {
    throw std::invalid_argument("box/vector dimension mismatch");
  }
  out.resize(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    double x = v[i];
    if (x < lb[i]) {
      x = lb[i];
    }
    if (x > ub[i]) {
      x = ub[i];
    }
    out[i] = x;
  }
}

Vector BoxProjector::project(const Vector& v) const {
  Vector out;
  project(v, out);
  return out;
}

double BoxProjector::dist_sq(const Vector& v) const {
  double d2 = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    double gap = 0.0;
    if (v[i] < lb[i]) {
      gap = lb[i] - v[i];
    } else if (v[i] > ub[i]) {
      gap = v[i] - ub[i];
    }
    d2 += gap * gap;
  }
  return d2;
}

bool BoxProjector::contains(const Vector& v) const {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] < lb[i] || v[i] > ub[i]) {
      return false;
    }
  }
  return true;
}

Vector project(const BoxProjector& box, const Vector& v) { return box.project(v); }

}  // namespace nmpc
