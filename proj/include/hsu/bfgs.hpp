#pragma once

#include "hsu/types.hpp"

#include <functional>
#include <vector>

namespace hsu {

/// Returns the objective value at z and writes its gradient into `grad`.
using Objective = std::function<double(const Vector& z, Vector& grad)>;

struct BfgsOptions {
    /// Stop when ||z_{i+1} - z_i|| / max(||z_i||, 1e-12) falls below this.
    double relative_tolerance = 1e-3;
    /// Stop when the largest gradient component falls below this.
    double gradient_tolerance = 1e-12;
    int max_iterations = 200;
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    /// Objective evaluations allowed per line search.
    int max_line_search_trials = 30;
    /// Curvature pairs with u^T s at or below this are not used to update the inverse Hessian.
    double curvature_threshold = 1e-12;
};

struct BfgsResult {
    Vector z;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
    /// Set when a line search failed to find a Wolfe point; z is the last accepted iterate.
    bool line_search_failed = false;
    int skipped_updates = 0;
    /// Objective value after every accepted step, starting with the value at z0. Non-increasing
    /// up to 16 ulp once the predicted decrease is below the rounding level of f.
    std::vector<double> history;
};

/**
 * Quasi-Newton minimisation with the inverse-Hessian BFGS update, starting from
 * the identity, and a strong-Wolfe bracketing/zoom line search.
 */
BfgsResult bfgs_minimize(const Objective& objective, const Vector& z0, const BfgsOptions& options = {});

} // namespace hsu
