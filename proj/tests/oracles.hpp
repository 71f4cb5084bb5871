#pragma once

#include "hsu/types.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <random>

namespace oracle {

using hsu::Matrix;
using hsu::Vector;

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) {
            m(r, c) = u(rng);
        }
    }
    return m;
}

inline Vector random_vector(Eigen::Index n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0)
{
    return random_matrix(n, 1, rng, lo, hi).col(0);
}

/// Uniform draw from the unit simplex (normalized exponentials).
inline Vector random_simplex_point(Eigen::Index p, std::mt19937_64& rng)
{
    std::exponential_distribution<double> e(1.0);
    Vector a(p);
    for (Eigen::Index i = 0; i < p; ++i) {
        a(i) = e(rng);
    }
    return a / a.sum();
}

/**
 * Minimises 1/2 x^T Q x - c^T x over the unit simplex by trying every support
 * set: on each support the equality-constrained KKT system is solved directly,
 * and the best feasible candidate wins. Exponential in the dimension; meant for
 * dimensions up to about 6.
 */
inline Vector simplex_qp_enumerate(const Matrix& q, const Vector& c)
{
    const auto p = q.rows();
    Vector best;
    double best_value = std::numeric_limits<double>::infinity();
    for (unsigned mask = 1; mask < (1u << p); ++mask) {
        std::vector<Eigen::Index> support;
        for (Eigen::Index i = 0; i < p; ++i) {
            if (mask & (1u << i)) {
                support.push_back(i);
            }
        }
        const auto s = static_cast<Eigen::Index>(support.size());
        Matrix kkt = Matrix::Zero(s + 1, s + 1);
        Vector rhs(s + 1);
        for (Eigen::Index i = 0; i < s; ++i) {
            for (Eigen::Index j = 0; j < s; ++j) {
                kkt(i, j) = q(support[i], support[j]);
            }
            kkt(i, s) = 1.0;
            kkt(s, i) = 1.0;
            rhs(i) = c(support[i]);
        }
        rhs(s) = 1.0;
        const Vector sol = kkt.fullPivLu().solve(rhs);
        if (!sol.allFinite() || (kkt * sol - rhs).norm() > 1e-9 * (1.0 + rhs.norm())) {
            continue;
        }
        Vector x = Vector::Zero(p);
        bool feasible = true;
        for (Eigen::Index i = 0; i < s; ++i) {
            if (sol(i) < -1e-12) {
                feasible = false;
                break;
            }
            x(support[i]) = std::max(sol(i), 0.0);
        }
        if (!feasible) {
            continue;
        }
        const double value = 0.5 * x.dot(q * x) - c.dot(x);
        if (value < best_value - 1e-15) {
            best_value = value;
            best = x;
        }
    }
    return best;
}

/// Closest simplex point to v.
inline Vector project_simplex_enumerate(const Vector& v)
{
    return simplex_qp_enumerate(Matrix::Identity(v.size(), v.size()), v);
}

/// argmin ||y - M a||^2 over the simplex.
inline Vector fcls_enumerate(const Vector& y, const Matrix& m)
{
    return simplex_qp_enumerate(m.transpose() * m, m.transpose() * y);
}

/// Central-difference gradient with step h.
inline Vector numeric_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-5)
{
    Vector g(x.size());
    Vector xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double orig = xp(i);
        xp(i) = orig + h;
        const double fp = f(xp);
        xp(i) = orig - h;
        const double fm = f(xp);
        xp(i) = orig;
        g(i) = (fp - fm) / (2.0 * h);
    }
    return g;
}

inline double relative_error(const Vector& a, const Vector& b)
{
    const double scale = std::max({a.norm(), b.norm(), 1e-8});
    return (a - b).norm() / scale;
}

} // namespace oracle
