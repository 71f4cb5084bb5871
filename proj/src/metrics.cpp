#include "hsu/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

namespace hsu {

double spectral_angle(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b)
{
    if (a.size() != b.size()) {
        throw InvariantError("spectral_angle: length mismatch");
    }
    const double na = a.norm();
    const double nb = b.norm();
    if (!std::isfinite(na) || !std::isfinite(nb)) {
        throw InvariantError("spectral_angle: non-finite spectrum");
    }
    if (na == 0.0 || nb == 0.0) {
        throw InvariantError("spectral_angle: degenerate zero-norm spectrum");
    }
    // half-angle form; acos of a dot product loses half the digits near 0 and pi
    const Vector u = a / na;
    const Vector v = b / nb;
    return 2.0 * std::atan2((u - v).norm(), (u + v).norm());
}

double nrmse(const Eigen::Ref<const Matrix>& truth, const Eigen::Ref<const Matrix>& estimate)
{
    if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols()) {
        throw InvariantError("nrmse: shape mismatch");
    }
    const double denom = truth.squaredNorm();
    if (denom == 0.0) {
        throw InvariantError("nrmse: truth has zero norm");
    }
    return std::sqrt((truth - estimate).squaredNorm() / denom);
}

double nrmse(const EndmemberTensor& truth, const EndmemberTensor& estimate)
{
    if (truth.bands() != estimate.bands() || truth.materials() != estimate.materials() ||
        truth.pixel_count() != estimate.pixel_count()) {
        throw InvariantError("nrmse: endmember tensor shape mismatch");
    }
    const auto n = static_cast<Eigen::Index>(truth.data().size());
    return nrmse(ConstMatrixMap(truth.data().data(), n, 1), ConstMatrixMap(estimate.data().data(), n, 1));
}

double nrmse(const HyperCube& truth, const HyperCube& estimate)
{
    if (truth.height() != estimate.height() || truth.width() != estimate.width() ||
        truth.bands() != estimate.bands()) {
        throw InvariantError("nrmse: cube shape mismatch");
    }
    return nrmse(truth.pixels(), estimate.pixels());
}

double sam_metric(const EndmemberTensor& truth, const EndmemberTensor& estimate)
{
    if (truth.bands() != estimate.bands() || truth.materials() != estimate.materials() ||
        truth.pixel_count() != estimate.pixel_count()) {
        throw InvariantError("sam_metric: endmember tensor shape mismatch");
    }
    if (truth.pixel_count() == 0) {
        throw InvariantError("sam_metric: empty tensor");
    }
    double total = 0.0;
    for (std::size_t n = 0; n < truth.pixel_count(); ++n) {
        const auto t = truth.slice(n);
        const auto e = estimate.slice(n);
        for (Eigen::Index p = 0; p < t.cols(); ++p) {
            try {
                total += spectral_angle(t.col(p), e.col(p));
            } catch (const InvariantError&) {
                throw InvariantError("sam_metric: zero-norm signature at material " + std::to_string(p) +
                                     ", pixel " + std::to_string(n));
            }
        }
    }
    return total / static_cast<double>(truth.pixel_count());
}

HyperCube reconstruct_image(const EndmemberTensor& em, const AbundanceMatrix& a,
                            std::size_t height, std::size_t width)
{
    if (em.materials() != a.materials() || em.pixel_count() != a.pixel_count() ||
        height * width != em.pixel_count()) {
        throw InvariantError("reconstruct_image: dimension mismatch");
    }
    HyperCube out(height, width, em.bands());
    for (std::size_t n = 0; n < em.pixel_count(); ++n) {
        out.pixel(n) = em.slice(n) * a.matrix().col(static_cast<Eigen::Index>(n));
    }
    return out;
}


std::vector<std::size_t> match_materials(const Matrix& truth, const Matrix& estimate)
{
    if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols()) {
        throw InvariantError("match_materials: signature matrices differ in shape");
    }
    const auto P = static_cast<std::size_t>(truth.cols());
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    for (std::size_t t = 0; t < P; ++t) {
        for (std::size_t e = 0; e < P; ++e) {
            pairs.emplace_back(spectral_angle(truth.col(static_cast<Eigen::Index>(t)),
                                              estimate.col(static_cast<Eigen::Index>(e))),
                               t, e);
        }
    }
    std::sort(pairs.begin(), pairs.end());
    std::vector<std::size_t> perm(P, P);
    std::vector<bool> used(P, false);
    for (const auto& [angle, t, e] : pairs) {
        if (perm[t] == P && !used[e]) {
            perm[t] = e;
            used[e] = true;
        }
    }
    return perm;
}

AbundanceMatrix permute_materials(const AbundanceMatrix& a, const std::vector<std::size_t>& perm)
{
    Matrix out(a.matrix().rows(), a.matrix().cols());
    for (std::size_t p = 0; p < perm.size(); ++p) {
        out.row(static_cast<Eigen::Index>(p)) = a.matrix().row(static_cast<Eigen::Index>(perm[p]));
    }
    return AbundanceMatrix(std::move(out));
}

EndmemberTensor permute_materials(const EndmemberTensor& em, const std::vector<std::size_t>& perm)
{
    EndmemberTensor out(em.bands(), em.materials(), em.pixel_count());
    for (std::size_t n = 0; n < em.pixel_count(); ++n) {
        for (std::size_t p = 0; p < perm.size(); ++p) {
            out.slice(n).col(static_cast<Eigen::Index>(p)) = em.slice(n).col(static_cast<Eigen::Index>(perm[p]));
        }
    }
    return out;
}

EvaluationReport evaluate_unmixing(const AbundanceMatrix& true_a, const EndmemberTensor& true_em,
                                   const HyperCube& observed, const AbundanceMatrix& est_a,
                                   const EndmemberTensor& est_em)
{
    if (true_a.materials() != est_a.materials() || true_a.pixel_count() != est_a.pixel_count()) {
        throw InvariantError("evaluate: abundance matrices differ in shape");
    }
    EvaluationReport report;
    report.permutation = match_materials(true_em.mean_signatures(), est_em.mean_signatures());
    const auto a = permute_materials(est_a, report.permutation);
    const auto em = permute_materials(est_em, report.permutation);
    report.nrmse_a = nrmse(true_a.matrix(), a.matrix());
    report.nrmse_m = nrmse(true_em, em);
    report.sam_m = sam_metric(true_em, em);
    report.nrmse_y = nrmse(observed, reconstruct_image(em, a, observed.height(), observed.width()));
    return report;
}

} // namespace hsu
