#pragma once

#include <Eigen/Core>

#include <functional>

namespace nmpc {

/// Smooth objective over the flat input vector. Returns the cost; when
/// `grad` is non-null it is filled with the gradient of the same length as
/// `u`. A null `grad` requests a cost-only evaluation.
using CostFunction =
    std::function<double(const Eigen::VectorXd& u, Eigen::VectorXd* grad)>;

}  // namespace nmpc
