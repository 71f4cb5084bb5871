#include "hsu/admm.hpp"

#include "hsu/simplex.hpp"

#include <cmath>
#include <sstream>

namespace hsu {

namespace {

void check_maps(const Matrix& a, std::size_t height, std::size_t width)
{
    if (static_cast<std::size_t>(a.cols()) != height * width) {
        throw InvariantError("spatial operator: map has " + std::to_string(a.cols()) + " pixels, expected " +
                             std::to_string(height * width));
    }
}

Eigen::Index pix(std::size_t row, std::size_t col, std::size_t width)
{
    return static_cast<Eigen::Index>(row * width + col);
}

Matrix group_soft_threshold(const Matrix& x, double tau)
{
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index n = 0; n < x.cols(); ++n) {
        const double norm = x.col(n).norm();
        out.col(n) = norm > tau ? ((1.0 - tau / norm) * x.col(n)).eval() : Vector::Zero(x.rows());
    }
    return out;
}

struct Operator {
    const EndmemberTensor& em;
    std::vector<Matrix> gram; // M_n^T M_n
    std::vector<Eigen::LLT<Matrix>> preconditioner;
    double rho;
    std::size_t height;
    std::size_t width;

    Matrix apply(const Matrix& a) const
    {
        Matrix out = rho * (horizontal_gradient_adjoint(horizontal_gradient(a, height, width), height, width) +
                            vertical_gradient_adjoint(vertical_gradient(a, height, width), height, width) + a);
        for (Eigen::Index n = 0; n < a.cols(); ++n) {
            out.col(n) += gram[static_cast<std::size_t>(n)] * a.col(n);
        }
        return out;
    }

    Matrix precondition(const Matrix& r) const
    {
        Matrix out(r.rows(), r.cols());
        for (Eigen::Index n = 0; n < r.cols(); ++n) {
            out.col(n) = preconditioner[static_cast<std::size_t>(n)].solve(r.col(n));
        }
        return out;
    }
};

// Preconditioned conjugate gradient on the P x N unknown, warm-started at x.
void conjugate_gradient(const Operator& op, const Matrix& rhs, Matrix& x, double tol, int max_iter)
{
    const double rhs_norm = std::max(rhs.norm(), 1e-300);
    Matrix r = rhs - op.apply(x);
    if (r.norm() <= tol * rhs_norm) {
        return;
    }
    Matrix z = op.precondition(r);
    Matrix p = z;
    double rz = (r.array() * z.array()).sum();
    for (int it = 0; it < max_iter; ++it) {
        const Matrix ap = op.apply(p);
        const double alpha = rz / (p.array() * ap.array()).sum();
        x += alpha * p;
        r -= alpha * ap;
        if (r.norm() <= tol * rhs_norm) {
            return;
        }
        z = op.precondition(r);
        const double rz_new = (r.array() * z.array()).sum();
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    std::ostringstream os;
    os << "conjugate gradient did not converge in " << max_iter << " iterations (relative residual "
       << r.norm() / rhs_norm << ", tolerance " << tol << ")";
    throw NumericalError(os.str());
}

} // namespace

Matrix horizontal_gradient(const Matrix& a, std::size_t height, std::size_t width)
{
    check_maps(a, height, width);
    Matrix g = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c + 1 < width; ++c) {
            g.col(pix(r, c, width)) = a.col(pix(r, c + 1, width)) - a.col(pix(r, c, width));
        }
    }
    return g;
}

Matrix vertical_gradient(const Matrix& a, std::size_t height, std::size_t width)
{
    check_maps(a, height, width);
    Matrix g = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t r = 0; r + 1 < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            g.col(pix(r, c, width)) = a.col(pix(r + 1, c, width)) - a.col(pix(r, c, width));
        }
    }
    return g;
}

Matrix horizontal_gradient_adjoint(const Matrix& g, std::size_t height, std::size_t width)
{
    check_maps(g, height, width);
    Matrix out = Matrix::Zero(g.rows(), g.cols());
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c + 1 < width; ++c) {
            out.col(pix(r, c + 1, width)) += g.col(pix(r, c, width));
            out.col(pix(r, c, width)) -= g.col(pix(r, c, width));
        }
    }
    return out;
}

Matrix vertical_gradient_adjoint(const Matrix& g, std::size_t height, std::size_t width)
{
    check_maps(g, height, width);
    Matrix out = Matrix::Zero(g.rows(), g.cols());
    for (std::size_t r = 0; r + 1 < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            out.col(pix(r + 1, c, width)) += g.col(pix(r, c, width));
            out.col(pix(r, c, width)) -= g.col(pix(r, c, width));
        }
    }
    return out;
}

SpatialGradients spatial_gradients(const Matrix& a, std::size_t height, std::size_t width)
{
    return {horizontal_gradient(a, height, width), vertical_gradient(a, height, width)};
}

double l21_norm(const Matrix& x)
{
    return x.colwise().norm().sum();
}

void AdmmConfig::validate() const
{
    if (!(rho > 0.0) || !(primal_tolerance > 0.0) || !(dual_tolerance > 0.0) || !(cg_tolerance > 0.0)) {
        throw InvariantError("ADMM penalty and tolerances must be positive");
    }
    if (!(lambda_a >= 0.0) || max_iterations < 1 || cg_max_iterations < 1) {
        throw InvariantError("ADMM needs lambda_A >= 0 and positive iteration limits");
    }
}

AdmmResult solve_a_step(const HyperCube& cube, const EndmemberTensor& em, const AbundanceMatrix& a_init,
                        const AdmmConfig& config)
{
    config.validate();
    const std::size_t height = cube.height();
    const std::size_t width = cube.width();
    const std::size_t N = cube.pixel_count();
    if (em.pixel_count() != N || em.bands() != cube.bands() || a_init.pixel_count() != N ||
        a_init.materials() != em.materials()) {
        throw InvariantError("solve_a_step: cube, endmember tensor and abundances disagree in shape");
    }
    const auto P = static_cast<Eigen::Index>(em.materials());
    const double rho = config.rho;
    const double tau = config.lambda_a / rho;
    const double scale = std::sqrt(static_cast<double>(P) * static_cast<double>(N));
    const auto y = cube.pixels();

    Operator op{em, {}, {}, rho, height, width};
    op.gram.reserve(N);
    op.preconditioner.reserve(N);
    Matrix mty(P, static_cast<Eigen::Index>(N));
    for (std::size_t n = 0; n < N; ++n) {
        const auto m = em.slice(n);
        op.gram.push_back(m.transpose() * m);
        const std::size_t r = n / width;
        const std::size_t c = n % width;
        const double degree = static_cast<double>((c > 0) + (c + 1 < width) + (r > 0) + (r + 1 < height));
        op.preconditioner.emplace_back(op.gram.back() + rho * (1.0 + degree) * Matrix::Identity(P, P));
        mty.col(static_cast<Eigen::Index>(n)) = m.transpose() * y.col(static_cast<Eigen::Index>(n));
    }

    const auto data_term = [&](const Matrix& a) {
        double s = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            s += (y.col(static_cast<Eigen::Index>(n)) - em.slice(n) * a.col(static_cast<Eigen::Index>(n)))
                     .squaredNorm();
        }
        return 0.5 * s;
    };

    Matrix a = a_init.matrix();
    Matrix v1 = horizontal_gradient(a, height, width);
    Matrix v2 = vertical_gradient(a, height, width);
    Matrix v3 = a;
    Matrix d1 = Matrix::Zero(P, static_cast<Eigen::Index>(N));
    Matrix d2 = d1;
    Matrix d3 = d1;

    const auto lagrangian = [&](const Matrix& a_, const Matrix& hh, const Matrix& hv) {
        return data_term(a_) + config.lambda_a * (l21_norm(v1) + l21_norm(v2)) +
               0.5 * rho *
                   ((hh - v1 + d1).squaredNorm() + (hv - v2 + d2).squaredNorm() + (a_ - v3 + d3).squaredNorm() -
                    d1.squaredNorm() - d2.squaredNorm() - d3.squaredNorm());
    };

    AdmmResult result;
    Matrix hh = horizontal_gradient(a, height, width);
    Matrix hv = vertical_gradient(a, height, width);
    for (int it = 0; it < config.max_iterations; ++it) {
        result.lagrangian_before.push_back(lagrangian(a, hh, hv));

        const Matrix rhs = mty + rho * (horizontal_gradient_adjoint(v1 - d1, height, width) +
                                        vertical_gradient_adjoint(v2 - d2, height, width) + (v3 - d3));
        conjugate_gradient(op, rhs, a, config.cg_tolerance, config.cg_max_iterations);
        hh = horizontal_gradient(a, height, width);
        hv = vertical_gradient(a, height, width);

        const Matrix v1_old = v1;
        const Matrix v2_old = v2;
        const Matrix v3_old = v3;
        v1 = group_soft_threshold(hh + d1, tau);
        v2 = group_soft_threshold(hv + d2, tau);
        const Matrix shifted = a + d3;
        for (Eigen::Index n = 0; n < shifted.cols(); ++n) {
            v3.col(n) = project_simplex(shifted.col(n));
        }
        result.lagrangian_after.push_back(lagrangian(a, hh, hv));

        const Matrix r1 = hh - v1;
        const Matrix r2 = hv - v2;
        const Matrix r3 = a - v3;
        d1 += r1;
        d2 += r2;
        d3 += r3;

        result.iterations = it + 1;
        result.primal_residual =
            std::sqrt(r1.squaredNorm() + r2.squaredNorm() + r3.squaredNorm()) / scale;
        result.dual_residual = rho *
                               (horizontal_gradient_adjoint(v1 - v1_old, height, width) +
                                vertical_gradient_adjoint(v2 - v2_old, height, width) + (v3 - v3_old))
                                   .norm() /
                               scale;
        if (result.primal_residual < config.primal_tolerance && result.dual_residual < config.dual_tolerance) {
            result.converged = true;
            break;
        }
    }
    result.abundances = AbundanceMatrix(v3);
    return result;
}

} // namespace hsu
