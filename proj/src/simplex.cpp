#include "hsu/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Eigenvalues>

namespace hsu {

Vector project_simplex(const Eigen::Ref<const Vector>& v)
{
    const Eigen::Index P = v.size();
    if (P == 0) {
        throw InvariantError("project_simplex: empty vector");
    }
    if (!v.allFinite()) {
        throw InvariantError("project_simplex: non-finite input");
    }
    std::vector<double> u(v.data(), v.data() + P);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (Eigen::Index j = 0; j < P; ++j) {
        cumulative += u[static_cast<std::size_t>(j)];
        const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (u[static_cast<std::size_t>(j)] - t > 0.0) {
            theta = t;
        }
    }
    Vector w = (v.array() - theta).cwiseMax(0.0).matrix();
    const double s = w.sum();
    if (s > 0.0) {
        w /= s;
    } else {
        // all mass rounded away; fall back to the largest coordinate
        Eigen::Index arg = 0;
        v.maxCoeff(&arg);
        w.setZero();
        w(arg) = 1.0;
    }
    return w;
}

namespace {

double quadratic_objective(const Matrix& q, const Vector& b, double yy, const Vector& a)
{
    return 0.5 * a.dot(q * a) - b.dot(a) + 0.5 * yy;
}

// Equality-constrained least squares on the support of `a`; false when the result is not optimal.
bool polish_on_support(const Matrix& q, const Vector& b, Vector& a)
{
    const Eigen::Index P = a.size();
    std::vector<Eigen::Index> support;
    for (Eigen::Index i = 0; i < P; ++i) {
        if (a(i) > 1e-12) {
            support.push_back(i);
        }
    }
    const auto S = static_cast<Eigen::Index>(support.size());
    if (S == 0) {
        return false;
    }
    Matrix kkt = Matrix::Zero(S + 1, S + 1);
    Vector rhs(S + 1);
    for (Eigen::Index i = 0; i < S; ++i) {
        for (Eigen::Index j = 0; j < S; ++j) {
            kkt(i, j) = q(support[i], support[j]);
        }
        kkt(i, S) = 1.0;
        kkt(S, i) = 1.0;
        rhs(i) = b(support[i]);
    }
    rhs(S) = 1.0;
    const Eigen::FullPivLU<Matrix> lu(kkt);
    if (!lu.isInvertible()) {
        return false;
    }
    const Vector sol = lu.solve(rhs);
    Vector candidate = Vector::Zero(P);
    for (Eigen::Index i = 0; i < S; ++i) {
        if (sol(i) < 0.0) {
            return false;
        }
        candidate(support[i]) = sol(i);
    }
    // Optimality of the inactive coordinates: gradient no smaller than on the support.
    const Vector grad = q * candidate - b;
    const double nu = sol(S);
    const double scale = std::max(1.0, grad.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < P; ++i) {
        if (candidate(i) == 0.0 && grad(i) + nu < -1e-10 * scale) {
            return false;
        }
    }
    candidate /= candidate.sum();
    a = candidate;
    return true;
}

} // namespace

Vector fcls(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Matrix>& m, const FclsOptions& options)
{
    if (y.size() != m.rows()) {
        throw InvariantError("fcls: spectrum length does not match endmember matrix");
    }
    if (!y.allFinite() || !m.allFinite()) {
        throw NumericalError("fcls: non-finite input");
    }
    const Eigen::Index P = m.cols();
    const Matrix q = m.transpose() * m;
    const Vector b = m.transpose() * y;
    const double yy = y.squaredNorm();
    const double lipschitz = Eigen::SelfAdjointEigenSolver<Matrix>(q, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();

    Vector a = Vector::Constant(P, 1.0 / static_cast<double>(P));
    if (lipschitz > 0.0) {
        const double step = 1.0 / lipschitz;
        double f = quadratic_objective(q, b, yy, a);
        for (int it = 0; it < options.max_iterations; ++it) {
            a = project_simplex(a - step * (q * a - b));
            const double f_new = quadratic_objective(q, b, yy, a);
            const double change = std::abs(f - f_new) / std::max(std::abs(f), 1e-300);
            f = f_new;
            if (change < options.relative_tolerance) {
                break;
            }
        }
    }
    if (options.polish) {
        Vector polished = a;
        if (polish_on_support(q, b, polished) &&
            quadratic_objective(q, b, yy, polished) <= quadratic_objective(q, b, yy, a) + 1e-14 * (1.0 + yy)) {
            a = polished;
        }
    }
    return a;
}

AbundanceMatrix fcls_unmix(const HyperCube& cube, const EndmemberMatrix& m, const FclsOptions& options)
{
    if (cube.bands() != m.bands()) {
        throw InvariantError("fcls_unmix: cube and endmembers disagree on band count");
    }
    const auto N = static_cast<Eigen::Index>(cube.pixel_count());
    Matrix a(static_cast<Eigen::Index>(m.materials()), N);
    const auto pixels = cube.pixels();
    for (Eigen::Index n = 0; n < N; ++n) {
        a.col(n) = fcls(pixels.col(n), m.matrix(), options);
    }
    return AbundanceMatrix(std::move(a));
}

} // namespace hsu
