#include "hsu/extraction.hpp"

#include "hsu/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

namespace hsu {

namespace {

// Leading `count` eigenvectors (descending eigenvalue) of a symmetric matrix.
Matrix leading_eigenvectors(const Matrix& sym, Eigen::Index count, Vector* values = nullptr)
{
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
    const Eigen::Index n = sym.rows();
    Matrix out(n, count);
    for (Eigen::Index i = 0; i < count; ++i) {
        out.col(i) = eig.eigenvectors().col(n - 1 - i);
    }
    if (values != nullptr) {
        *values = eig.eigenvalues().reverse();
    }
    return out;
}

Eigen::Index argmax_abs(const Vector& v)
{
    Eigen::Index best = 0;
    double best_value = -1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double a = std::abs(v(i));
        if (a > best_value) {
            best_value = a;
            best = i;
        }
    }
    return best;
}

} // namespace

VcaResult vca(const HyperCube& cube, std::size_t materials, std::uint64_t seed)
{
    const auto L = static_cast<Eigen::Index>(cube.bands());
    const auto N = static_cast<Eigen::Index>(cube.pixel_count());
    const auto P = static_cast<Eigen::Index>(materials);
    if (P < 1 || P > L) {
        throw InvariantError("vca: material count must lie in [1, bands]");
    }
    if (N < P) {
        throw InvariantError("vca: fewer pixels than materials");
    }
    const Matrix y = cube.pixels();
    const double inv_n = 1.0 / static_cast<double>(N);

    Vector corr_values;
    const Matrix corr = y * y.transpose() * inv_n;
    const Matrix u_corr = leading_eigenvectors(corr, P, &corr_values);
    if (!(corr_values(P - 1) > 1e-12 * corr_values(0))) {
        throw NumericalError("vca: data subspace has dimension below " + std::to_string(P));
    }

    VcaResult result;
    if (P == 1) {
        const Vector proj = u_corr.col(0).transpose() * y;
        const auto n = static_cast<std::size_t>(argmax_abs(proj));
        result.pixel_indices = {n};
        result.endmembers = EndmemberMatrix(y.col(static_cast<Eigen::Index>(n)));
        result.estimated_snr_db = std::numeric_limits<double>::infinity();
        return result;
    }

    const Vector mean = y.rowwise().mean();
    const Matrix centred = y.colwise() - mean;
    const Matrix u_centred = leading_eigenvectors(centred * centred.transpose() * inv_n, P);
    const Matrix x_centred = u_centred.transpose() * centred;

    const double power_y = y.squaredNorm() * inv_n;
    const double power_x = x_centred.squaredNorm() * inv_n + mean.squaredNorm();
    double snr = std::numeric_limits<double>::infinity();
    if (power_y - power_x > 0.0) {
        const double num = power_x - static_cast<double>(P) / static_cast<double>(L) * power_y;
        snr = num > 0.0 ? 10.0 * std::log10(num / (power_y - power_x)) : -std::numeric_limits<double>::infinity();
    }
    result.estimated_snr_db = snr;
    const double snr_threshold = 15.0 + 10.0 * std::log10(static_cast<double>(P));

    Matrix projected(P, N);
    if (snr < snr_threshold) {
        result.projective = true;
        const Matrix x = x_centred.topRows(P - 1);
        const double c = std::sqrt(x.colwise().squaredNorm().maxCoeff());
        projected.topRows(P - 1) = x;
        projected.row(P - 1).setConstant(c);
    } else {
        const Matrix x = u_corr.transpose() * y;
        const Vector u = x.rowwise().mean();
        const Eigen::RowVectorXd denom = u.transpose() * x;
        for (Eigen::Index n = 0; n < N; ++n) {
            projected.col(n) = x.col(n) / denom(n);
        }
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix vertices = Matrix::Zero(P, P);
    vertices(P - 1, 0) = 1.0;
    result.pixel_indices.resize(static_cast<std::size_t>(P));
    for (Eigen::Index i = 0; i < P; ++i) {
        Vector w(P);
        for (Eigen::Index k = 0; k < P; ++k) {
            w(k) = unit(rng);
        }
        const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(vertices);
        Vector f = w - vertices * cod.solve(w);
        const double fn = f.norm();
        if (fn > 0.0) {
            f /= fn;
        }
        const Vector v = (f.transpose() * projected).transpose();
        const Eigen::Index best = argmax_abs(v);
        result.pixel_indices[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
        vertices.col(i) = projected.col(best);
    }

    Matrix m(L, P);
    for (Eigen::Index i = 0; i < P; ++i) {
        m.col(i) = y.col(static_cast<Eigen::Index>(result.pixel_indices[static_cast<std::size_t>(i)]));
    }
    result.endmembers = EndmemberMatrix(std::move(m));
    return result;
}

std::vector<PurePixelSet> extract_pure_pixels(const HyperCube& cube, const EndmemberMatrix& m0, std::size_t count,
                                              const WarningSink& warn)
{
    if (cube.bands() != m0.bands()) {
        throw InvariantError("extract_pure_pixels: cube and references disagree on band count");
    }
    if (count == 0 || count > cube.pixel_count()) {
        throw InvariantError("extract_pure_pixels: count must lie in [1, N]");
    }
    const std::size_t N = cube.pixel_count();
    std::vector<std::size_t> valid;
    valid.reserve(N);
    for (std::size_t n = 0; n < N; ++n) {
        if (cube.pixel(n).squaredNorm() == 0.0) {
            if (warn) {
                warn("skipping zero-norm pixel " + std::to_string(n));
            }
            continue;
        }
        valid.push_back(n);
    }
    if (valid.size() < count) {
        throw InvariantError("extract_pure_pixels: only " + std::to_string(valid.size()) +
                             " valid pixels for a bundle of " + std::to_string(count));
    }

    std::vector<PurePixelSet> sets;
    std::vector<std::pair<double, std::size_t>> ranked(valid.size());
    for (std::size_t p = 0; p < m0.materials(); ++p) {
        const Vector ref = m0.column(p);
        for (std::size_t i = 0; i < valid.size(); ++i) {
            ranked[i] = {spectral_angle(cube.pixel(valid[i]), ref), valid[i]};
        }
        std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(count), ranked.end());
        PurePixelSet set;
        set.material = p;
        set.spectra.resize(static_cast<Eigen::Index>(cube.bands()), static_cast<Eigen::Index>(count));
        for (std::size_t j = 0; j < count; ++j) {
            set.pixel_indices.push_back(ranked[j].second);
            set.spectra.col(static_cast<Eigen::Index>(j)) = cube.pixel(ranked[j].second);
        }
        sets.push_back(std::move(set));
    }
    return sets;
}

LatentReference latent_reference(const std::vector<nn::VaeModel>& models, const EndmemberMatrix& m0)
{
    if (models.size() != m0.materials()) {
        throw InvariantError("latent_reference: need one model per reference signature");
    }
    const std::size_t K = models.front().latent_dim();
    Matrix z(static_cast<Eigen::Index>(models.size()), static_cast<Eigen::Index>(K));
    for (std::size_t p = 0; p < models.size(); ++p) {
        if (models[p].bands() != m0.bands()) {
            throw InvariantError("latent_reference: model " + std::to_string(p) + " expects " +
                                 std::to_string(models[p].bands()) + " bands, reference has " +
                                 std::to_string(m0.bands()));
        }
        if (models[p].latent_dim() != K) {
            throw InvariantError("latent_reference: models disagree on latent dimension");
        }
        z.row(static_cast<Eigen::Index>(p)) = models[p].encode_mean(m0.column(p)).transpose();
    }
    return LatentReference(std::move(z));
}

} // namespace hsu
