#include "hsu/bfgs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace hsu {

namespace {

constexpr double kRoundingSlack = 16.0 * std::numeric_limits<double>::epsilon();

struct TrialPoint {
    double alpha = 0.0;
    double value = 0.0;
    double slope = 0.0; // directional derivative
    Vector z;
    Vector grad;
};

class LineSearch {
public:
    LineSearch(const Objective& f, const Vector& z, const Vector& p, double f0, double slope0,
               const BfgsOptions& opt)
        : f_(f), z_(z), p_(p), f0_(f0), slope0_(slope0), opt_(opt)
    {
    }

    std::optional<TrialPoint> run()
    {
        TrialPoint prev{0.0, f0_, slope0_, {}, {}};
        double alpha = 1.0;
        for (int i = 0; trials_ < opt_.max_line_search_trials; ++i) {
            TrialPoint cur = evaluate(alpha);
            if (!std::isfinite(cur.value)) {
                // stepped outside the domain; shrink
                alpha *= 0.5;
                continue;
            }
            if (!sufficient(cur) || (i > 0 && !flat(cur) && cur.value >= prev.value)) {
                return zoom(prev, cur);
            }
            if (std::abs(cur.slope) <= -opt_.wolfe_c2 * slope0_) {
                return cur;
            }
            if (cur.slope >= 0.0) {
                return zoom(cur, prev);
            }
            prev = std::move(cur);
            alpha *= 2.0;
        }
        return std::nullopt;
    }

private:
    // Predicted decrease below the rounding level of f, where value comparisons are noise.
    bool flat(const TrialPoint& t) const
    {
        return -t.alpha * slope0_ <= 1e-11 * std::abs(f0_);
    }

    // Armijo, or in the flat regime no increase beyond rounding noise (approximate Wolfe).
    bool sufficient(const TrialPoint& t) const
    {
        if (t.value <= f0_ + opt_.wolfe_c1 * t.alpha * slope0_) {
            return true;
        }
        return flat(t) && t.value <= f0_ + kRoundingSlack * std::abs(f0_);
    }

    TrialPoint evaluate(double alpha)
    {
        ++trials_;
        TrialPoint t;
        t.alpha = alpha;
        t.z = z_ + alpha * p_;
        t.grad.resize(z_.size());
        t.value = f_(t.z, t.grad);
        t.slope = t.grad.dot(p_);
        return t;
    }

    // Minimiser of the cubic matching values and slopes at both ends, if it lies inside.
    static std::optional<double> cubic_min(const TrialPoint& a, const TrialPoint& b)
    {
        const double d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.alpha - b.alpha);
        const double disc = d1 * d1 - a.slope * b.slope;
        if (disc < 0.0) {
            return std::nullopt;
        }
        const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
        const double denom = b.slope - a.slope + 2.0 * d2;
        if (denom == 0.0) {
            return std::nullopt;
        }
        const double x = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / denom;
        if (!std::isfinite(x)) {
            return std::nullopt;
        }
        return x;
    }

    std::optional<TrialPoint> zoom(TrialPoint lo, TrialPoint hi)
    {
        while (trials_ < opt_.max_line_search_trials) {
            const double left = std::min(lo.alpha, hi.alpha);
            const double right = std::max(lo.alpha, hi.alpha);
            const double width = right - left;
            if (width <= 1e-16 * std::max(1.0, right)) {
                break;
            }
            double alpha = 0.5 * (left + right);
            if (std::isfinite(hi.value)) {
                if (auto c = cubic_min(lo, hi); c && *c > left + 0.1 * width && *c < right - 0.1 * width) {
                    alpha = *c;
                }
            }
            TrialPoint cur = evaluate(alpha);
            if (!std::isfinite(cur.value) || !sufficient(cur) || (!flat(cur) && cur.value >= lo.value)) {
                hi = std::move(cur);
                continue;
            }
            if (std::abs(cur.slope) <= -opt_.wolfe_c2 * slope0_) {
                return cur;
            }
            if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) {
                hi = std::move(lo);
            }
            lo = std::move(cur);
        }
        return std::nullopt;
    }

    const Objective& f_;
    const Vector& z_;
    const Vector& p_;
    double f0_;
    double slope0_;
    const BfgsOptions& opt_;
    int trials_ = 0;
};

} // namespace

BfgsResult bfgs_minimize(const Objective& objective, const Vector& z0, const BfgsOptions& options)
{
    const Eigen::Index n = z0.size();
    BfgsResult result;
    result.z = z0;
    Vector grad(n);
    result.value = objective(result.z, grad);
    if (!std::isfinite(result.value) || !grad.allFinite()) {
        throw NumericalError("bfgs_minimize: objective is not finite at the starting point");
    }
    result.history.push_back(result.value);

    Matrix h = Matrix::Identity(n, n);
    for (int it = 0; it < options.max_iterations; ++it) {
        if (grad.cwiseAbs().maxCoeff() <= options.gradient_tolerance) {
            result.converged = true;
            break;
        }
        Vector p = -h * grad;
        double slope = grad.dot(p);
        if (!(slope < 0.0)) {
            h.setIdentity();
            p = -grad;
            slope = grad.dot(p);
        }
        LineSearch search(objective, result.z, p, result.value, slope, options);
        auto step = search.run();
        if (!step) {
            result.line_search_failed = true;
            break;
        }
        const Vector s = step->z - result.z;
        const Vector u = step->grad - grad;
        const double z_norm = std::max(result.z.norm(), 1e-12);

        result.z = std::move(step->z);
        result.value = step->value;
        grad = std::move(step->grad);
        result.history.push_back(result.value);
        result.iterations = it + 1;

        const double us = u.dot(s);
        if (us > options.curvature_threshold) {
            const double rho = 1.0 / us;
            const Vector hu = h * u;
            // H+ = (I - rho s u^T) H (I - rho u s^T) + rho s s^T
            h += (rho * rho * u.dot(hu) + rho) * (s * s.transpose()) - rho * (hu * s.transpose() + s * hu.transpose());
        } else {
            ++result.skipped_updates;
        }

        if (s.norm() / z_norm < options.relative_tolerance) {
            result.converged = true;
            break;
        }
    }
    return result;
}

} // namespace hsu
