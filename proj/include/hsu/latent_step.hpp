#pragma once

#include "hsu/bfgs.hpp"
#include "hsu/generator.hpp"

#include <span>

namespace hsu {

using GeneratorSet = std::span<const LatentGenerator* const>;

/// [G_1(z_1), ..., G_P(z_P)] for the P x K code matrix `z`.
Matrix decode_endmembers(GeneratorSet models, const Eigen::Ref<const Matrix>& z);

/**
 * Per-pixel latent objective
 *   1/2 ||y - G(Z) a||^2 + lambda_z / 2 ||Z - Z0||_F^2
 * over the P x K code matrix. When `grad` is non-null it receives the gradient
 * flattened material-major (entry p*K + k).
 */
double latent_objective(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& a, GeneratorSet models,
                        const Eigen::Ref<const Matrix>& z, const Eigen::Ref<const Matrix>& z0, double lambda_z,
                        Vector* grad);

struct LatentStepResult {
    Matrix z;
    double value = 0.0;
    int iterations = 0;
    bool line_search_failed = false;
};

/// Minimises latent_objective with BFGS, warm-started at z_init.
LatentStepResult solve_z_step(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& a,
                              GeneratorSet models, const Eigen::Ref<const Matrix>& z_init,
                              const Eigen::Ref<const Matrix>& z0, double lambda_z, const BfgsOptions& options);

/// Row-major flattening of a P x K code matrix and its inverse.
Vector flatten_codes(const Eigen::Ref<const Matrix>& z);
Matrix unflatten_codes(const Vector& flat, std::size_t materials, std::size_t latent_dim);

} // namespace hsu
