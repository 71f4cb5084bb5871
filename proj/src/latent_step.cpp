#include "hsu/latent_step.hpp"

#include <string>

namespace hsu {

namespace {

void check_shapes(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& a, GeneratorSet models,
                  const Eigen::Ref<const Matrix>& z, const Eigen::Ref<const Matrix>& z0)
{
    const auto P = static_cast<Eigen::Index>(models.size());
    if (P == 0 || a.size() != P || z.rows() != P || z0.rows() != P || z.cols() != z0.cols()) {
        throw InvariantError("latent step: abundances, codes and models disagree on material count");
    }
    for (const auto* g : models) {
        if (static_cast<Eigen::Index>(g->bands()) != y.size() ||
            static_cast<Eigen::Index>(g->latent_dim()) != z.cols()) {
            throw InvariantError("latent step: generator shape does not match the pixel or codes");
        }
    }
}

} // namespace

Vector flatten_codes(const Eigen::Ref<const Matrix>& z)
{
    Vector flat(z.size());
    for (Eigen::Index p = 0; p < z.rows(); ++p) {
        flat.segment(p * z.cols(), z.cols()) = z.row(p).transpose();
    }
    return flat;
}

Matrix unflatten_codes(const Vector& flat, std::size_t materials, std::size_t latent_dim)
{
    const auto P = static_cast<Eigen::Index>(materials);
    const auto K = static_cast<Eigen::Index>(latent_dim);
    if (flat.size() != P * K) {
        throw InvariantError("flattened codes have the wrong length");
    }
    Matrix z(P, K);
    for (Eigen::Index p = 0; p < P; ++p) {
        z.row(p) = flat.segment(p * K, K).transpose();
    }
    return z;
}

Matrix decode_endmembers(GeneratorSet models, const Eigen::Ref<const Matrix>& z)
{
    if (models.empty() || static_cast<std::size_t>(z.rows()) != models.size()) {
        throw InvariantError("decode_endmembers: one code row per model required");
    }
    Matrix m(static_cast<Eigen::Index>(models.front()->bands()), z.rows());
    for (Eigen::Index p = 0; p < z.rows(); ++p) {
        m.col(p) = models[static_cast<std::size_t>(p)]->decode(z.row(p).transpose());
    }
    return m;
}

double latent_objective(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& a, GeneratorSet models,
                        const Eigen::Ref<const Matrix>& z, const Eigen::Ref<const Matrix>& z0, double lambda_z,
                        Vector* grad)
{
    check_shapes(y, a, models, z, z0);
    const Matrix m = decode_endmembers(models, z);
    const Vector residual = m * a - y;
    const double value = 0.5 * residual.squaredNorm() + 0.5 * lambda_z * (z - z0).squaredNorm();
    if (grad != nullptr) {
        const Eigen::Index K = z.cols();
        grad->resize(z.size());
        for (Eigen::Index p = 0; p < z.rows(); ++p) {
            const Vector zp = z.row(p).transpose();
            Vector gp = lambda_z * (zp - z0.row(p).transpose());
            if (a(p) != 0.0) {
                gp += a(p) * models[static_cast<std::size_t>(p)]->decode_input_grad(zp, residual);
            }
            grad->segment(p * K, K) = gp;
        }
    }
    return value;
}

LatentStepResult solve_z_step(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& a,
                              GeneratorSet models, const Eigen::Ref<const Matrix>& z_init,
                              const Eigen::Ref<const Matrix>& z0, double lambda_z, const BfgsOptions& options)
{
    check_shapes(y, a, models, z_init, z0);
    const auto P = static_cast<std::size_t>(z_init.rows());
    const auto K = static_cast<std::size_t>(z_init.cols());
    const Vector y_copy = y;
    const Vector a_copy = a;
    const Matrix z0_copy = z0;
    const Objective f = [&](const Vector& flat, Vector& g) {
        return latent_objective(y_copy, a_copy, models, unflatten_codes(flat, P, K), z0_copy, lambda_z, &g);
    };
    const auto res = bfgs_minimize(f, flatten_codes(z_init), options);
    return {unflatten_codes(res.z, P, K), res.value, res.iterations, res.line_search_failed};
}

} // namespace hsu
