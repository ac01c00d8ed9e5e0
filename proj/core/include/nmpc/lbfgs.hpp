#pragma once

#include <Eigen/Core>

#include <vector>

namespace nmpc {

using Vector = Eigen::VectorXd;

/// Circular memory of (s, y) pairs realizing the inverse quasi-Newton
/// operator H through the two-loop recursion, with the initial scaling
/// H0 = (s'y / y'y) I taken from the newest pair. Pairs are accepted only
/// when s'y > eps * |s| * |y| (cautious update), so the operator stays well
/// defined; by construction H applied to the newest y reproduces the newest
/// s (inverse secant condition).
class LbfgsBuffer {
 public:
  static constexpr double kCautiousEps = 1e-12;

  LbfgsBuffer() = default;
  LbfgsBuffer(int dim, int memory, double cautious_eps = kCautiousEps);

  /// Stores (s, y) unless the curvature test rejects it. Returns whether
  /// the pair was kept. With zero memory this is always a rejection.
  bool push(const Vector& s, const Vector& y);

  /// q <- H q. An empty buffer leaves q unchanged; callers provide their
  /// own fallback scaling in that case.
  void apply(Vector& q) const;

  void clear();
  bool empty() const { return count_ == 0; }
  int size() const { return count_; }
  int memory() const { return memory_; }
  int dim() const { return dim_; }

 private:
  struct Pair {
    Vector s;
    Vector y;
    double rho = 0.0;
  };

  // newest-first access: offset 0 is the most recently pushed pair
  const Pair& from_newest(int offset) const;

  std::vector<Pair> slots_;
  int dim_ = 0;
  int memory_ = 0;
  int count_ = 0;
  int head_ = 0;  // next slot to write
  double eps_ = kCautiousEps;
  mutable std::vector<double> alpha_;
};

/// Quasi-Newton direction d = -H r; with empty memory the pure projected
/// gradient direction -gamma * r.
Vector lbfgs_direction(const LbfgsBuffer& buffer, const Vector& r, double gamma);

}  // namespace nmpc
