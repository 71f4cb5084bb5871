#pragma once

#include "hsu/types.hpp"
#include "hsu/vae.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace hsu {

struct VcaResult {
    EndmemberMatrix endmembers;
    /// Flat pixel index of each selected column.
    std::vector<std::size_t> pixel_indices;
    double estimated_snr_db = 0.0;
    /// True when the low-SNR (mean-removed, P-1 dimensional) projection was used.
    bool projective = false;
};

/**
 * Vertex component analysis: projects the data onto a P-dimensional signal
 * subspace, then repeatedly picks the pixel with the largest projection onto a
 * random direction orthogonal to the vertices found so far. Columns of the
 * result are observed pixels.
 */
VcaResult vca(const HyperCube& cube, std::size_t materials, std::uint64_t seed);

struct PurePixelSet {
    std::size_t material = 0;
    std::vector<std::size_t> pixel_indices;
    /// L x S_p, one selected spectrum per column.
    Matrix spectra;
};

using WarningSink = std::function<void(const std::string&)>;

/**
 * For each reference signature, the `count` pixels with the smallest spectral
 * angle to it (ties by ascending pixel index). Zero-norm pixels are skipped and
 * reported through `warn`.
 */
std::vector<PurePixelSet> extract_pure_pixels(const HyperCube& cube, const EndmemberMatrix& m0, std::size_t count,
                                              const WarningSink& warn = {});

/// Row p = encode_mean(models[p], column p of m0).
LatentReference latent_reference(const std::vector<nn::VaeModel>& models, const EndmemberMatrix& m0);

} // namespace hsu
