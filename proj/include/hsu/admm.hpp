#pragma once

#include "hsu/types.hpp"

#include <vector>

namespace hsu {

/**
 * First-order spatial differences of per-material maps stored P x N, pixel
 * n = row * width + col. Forward differences; the last column (horizontal) or
 * last row (vertical) has zero gradient.
 */
Matrix horizontal_gradient(const Matrix& a, std::size_t height, std::size_t width);
Matrix vertical_gradient(const Matrix& a, std::size_t height, std::size_t width);
Matrix horizontal_gradient_adjoint(const Matrix& g, std::size_t height, std::size_t width);
Matrix vertical_gradient_adjoint(const Matrix& g, std::size_t height, std::size_t width);

struct SpatialGradients {
    Matrix horizontal;
    Matrix vertical;
};

SpatialGradients spatial_gradients(const Matrix& a, std::size_t height, std::size_t width);

/// sum over pixels of the Euclidean norm of each column.
double l21_norm(const Matrix& x);

struct AdmmConfig {
    double rho = 1.0;
    int max_iterations = 200;
    /// Residual norms are divided by sqrt(P * N) before comparison.
    double primal_tolerance = 1e-5;
    double dual_tolerance = 1e-5;
    double lambda_a = 0.01;
    double cg_tolerance = 1e-8;
    int cg_max_iterations = 2000;

    void validate() const;
};

struct AdmmResult {
    AbundanceMatrix abundances;
    int iterations = 0;
    bool converged = false;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    /// Augmented Lagrangian at the start of each iteration and after its (A, V) updates.
    std::vector<double> lagrangian_before;
    std::vector<double> lagrangian_after;
};

/**
 * Abundance step with pixel-dependent endmembers:
 *   min_A 1/2 sum_n ||y_n - M_n a_n||^2 + lambda_A (||H_h A||_{2,1} + ||H_v A||_{2,1}) + indicator(A on simplex)
 * solved by ADMM with splittings V1 = H_h A, V2 = H_v A, V3 = A. The returned
 * abundances are the simplex-projected block V3.
 */
AdmmResult solve_a_step(const HyperCube& cube, const EndmemberTensor& em, const AbundanceMatrix& a_init,
                        const AdmmConfig& config);

} // namespace hsu
