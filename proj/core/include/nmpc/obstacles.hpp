#pragma once

#include <Eigen/Core>

#include <functional>
#include <span>
#include <vector>

namespace nmpc {

using Vector = Eigen::VectorXd;

/// One smooth scalar inequality h(z) > 0 from an obstacle description,
/// supplied as value and gradient callbacks over the position vector z.
struct SmoothInequality {
  std::function<double(const Vector&)> eval;
  std::function<Vector(const Vector&)> grad;
};

/// An open region O = { z : h_i(z) > 0, i = 1..m } that the position must
/// stay out of, plus the weight eta of its soft-constraint term. The region
/// may be nonconvex and is never projected onto; only the h_i and their
/// gradients are ever evaluated.
class Obstacle {
 public:
  /// Generic constructor from a system of inequalities. Requires m >= 1,
  /// eta > 0 and dim >= 1.
  Obstacle(std::vector<SmoothInequality> inequalities, double eta, int dim);

  /// O = { z : a'z < b + margin*|a| }. A positive margin pushes the plane
  /// outward by `margin` in Euclidean distance.
  static Obstacle half_space(const Vector& a, double b, double eta,
                             double margin = 0.0);

  /// O = { z : |z - c| < radius + margin }, encoded as
  /// h(z) = 1 - (z-c)'E(z-c) with E = I / (radius + margin)^2.
  static Obstacle ball(const Vector& center, double radius, double eta,
                       double margin = 0.0);

  /// Axis-aligned ellipsoid with the given semi-axes, each inflated by
  /// margin: h(z) = 1 - sum_i ((z_i - c_i) / (s_i + margin))^2.
  static Obstacle ellipse(const Vector& center, const Vector& semi_axes,
                          double eta, double margin = 0.0);

  /// Axis-aligned box around `center` with the given half extents (inflated
  /// by margin), described by 2*dim half-spaces.
  static Obstacle rectangle(const Vector& center, const Vector& half_extent,
                            double eta, double margin = 0.0);

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(ineq_.size()); }
  double eta() const { return eta_; }
  const std::vector<SmoothInequality>& inequalities() const { return ineq_; }

  /// Same region with the weight scaled to `eta`.
  Obstacle with_eta(double eta) const;

 private:
  std::vector<SmoothInequality> ineq_;
  double eta_;
  int dim_;
};

/// psi_O(z) = 1/2 prod_i [h_i(z)]_+^2.
/// Strictly positive iff z lies inside O, zero on the boundary and outside.
double violation(const Obstacle& obstacle, const Vector& z);

/// Gradient of psi_O, evaluated as
///   sum_i [h_i]_+ grad h_i(z) prod_{j != i} [h_j]_+^2,
/// which is the interior expression inside O and exactly zero elsewhere;
/// the plus-parts make it continuous across the boundary without a case
/// split. Products are accumulated one-excluded-at-a-time instead of
/// dividing by h_i, which would be singular at h_i = 0.
Vector violation_gradient(const Obstacle& obstacle, const Vector& z);

/// Soft-constraint term sum_j eta_j prod_i [h_ij(z)]_+^2 over the given
/// obstacles, i.e. sum_j 2 eta_j psi_j(z). Note the factor-of-two relation
/// to `violation`: the 1/2 is internal to psi only.
double penalty(std::span<const Obstacle* const> active, const Vector& z);
double penalty(const std::vector<Obstacle>& obstacles, const Vector& z);

/// Gradient of `penalty`; zero at any z outside all active obstacles.
Vector penalty_gradient(std::span<const Obstacle* const> active,
                        const Vector& z);
Vector penalty_gradient(const std::vector<Obstacle>& obstacles,
                        const Vector& z);

}  // namespace nmpc
