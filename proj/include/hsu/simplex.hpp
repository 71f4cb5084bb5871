#pragma once

#include "hsu/types.hpp"

namespace hsu {

/// Euclidean projection onto {a >= 0, sum(a) = 1} (sort-and-threshold).
Vector project_simplex(const Eigen::Ref<const Vector>& v);

struct FclsOptions {
    int max_iterations = 5000;
    double relative_tolerance = 1e-10;
    /// Re-solve the equality-constrained problem on the detected support and keep it
    /// when it satisfies the optimality conditions.
    bool polish = true;
};

/// argmin ||y - M a||^2 over the unit simplex, by projected gradient with step 1/||M^T M||_2.
Vector fcls(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Matrix>& m,
            const FclsOptions& options = {});

/// Per-pixel FCLS of a whole cube against one endmember matrix.
AbundanceMatrix fcls_unmix(const HyperCube& cube, const EndmemberMatrix& m, const FclsOptions& options = {});

} // namespace hsu
