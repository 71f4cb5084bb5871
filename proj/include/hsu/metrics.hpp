#pragma once

#include "hsu/types.hpp"

#include <vector>

namespace hsu {

/// Angle in radians between two spectra. Throws InvariantError on a zero-norm input.
double spectral_angle(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

/// sqrt(||truth - estimate||_F^2 / ||truth||_F^2).
double nrmse(const Eigen::Ref<const Matrix>& truth, const Eigen::Ref<const Matrix>& estimate);
double nrmse(const EndmemberTensor& truth, const EndmemberTensor& estimate);
double nrmse(const HyperCube& truth, const HyperCube& estimate);

/// Mean over pixels of the summed per-material spectral angles.
double sam_metric(const EndmemberTensor& truth, const EndmemberTensor& estimate);

/// Pixel n of the result is slice n of `em` times column n of `a`.
HyperCube reconstruct_image(const EndmemberTensor& em, const AbundanceMatrix& a,
                            std::size_t height, std::size_t width);

/**
 * Greedy one-to-one pairing of estimated to true signatures by smallest spectral
 * angle. Returns perm with perm[true_index] = estimated_index.
 */
std::vector<std::size_t> match_materials(const Matrix& truth, const Matrix& estimate);

struct EvaluationReport {
    double nrmse_a = 0.0;
    double nrmse_m = 0.0;
    double sam_m = 0.0;
    double nrmse_y = 0.0;
    std::vector<std::size_t> permutation;
};

/// Abundance, endmember and reconstruction errors after resolving the material order.
EvaluationReport evaluate_unmixing(const AbundanceMatrix& true_a, const EndmemberTensor& true_em,
                                   const HyperCube& observed, const AbundanceMatrix& est_a,
                                   const EndmemberTensor& est_em);

/// Reorders abundance rows / endmember columns so that entry p corresponds to true material p.
AbundanceMatrix permute_materials(const AbundanceMatrix& a, const std::vector<std::size_t>& perm);
EndmemberTensor permute_materials(const EndmemberTensor& em, const std::vector<std::size_t>& perm);

} // namespace hsu
