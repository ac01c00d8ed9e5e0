#pragma once

#include "nmpc/box.hpp"
#include "nmpc/cost_function.hpp"
#include "nmpc/panoc.hpp"

namespace nmpc {

/// Plain projected-gradient iteration u+ = proj(u - gamma grad l(u)) with
/// the same adaptive Lipschitz backtracking, initialization and stopping
/// rules as the PANOC solver. Serves as the in-repo baseline for solver
/// comparisons; a PANOC run with zero L-BFGS memory reproduces its iterates
/// bit for bit. `lbfgs_memory` in the parameters is ignored.
SolveReport projected_gradient_solve(const CostFunction& f, const BoxProjector& box,
                                     const Vector& u0, const PanocParams& params = {});

}  // namespace nmpc
