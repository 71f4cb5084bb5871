#pragma once

#include "hsu/types.hpp"

#include <cstdint>
#include <limits>
#include <string>

namespace hsu::synth {

struct NoiseSpec {
    /// +infinity disables noise.
    double snr_db = 30.0;
    std::uint64_t seed = 0;
};

enum class VariabilityKind {
    none,
    piecewise_linear, // DC1-style
    smooth_scaling,   // DC2-style
    geometry,         // DC3-style
};

std::string to_string(VariabilityKind kind);
VariabilityKind parse_variability(const std::string& name);

struct VariabilityModel {
    VariabilityKind kind = VariabilityKind::none;
    /// Amplitude alpha of the piecewise-linear factors, drawn in [1 - alpha, 1 + alpha].
    double piecewise_amplitude = 0.2;
    int piecewise_breakpoints = 4;
    /// Amplitude of the smooth spatial-spectral field; psi is clipped at smooth_floor.
    double smooth_amplitude = 0.15;
    double smooth_floor = 0.5;
    /// Direct and diffuse illumination weights and the maximum illumination angle.
    double direct_weight = 0.8;
    double diffuse_weight = 0.2;
    double max_angle = 3.14159265358979323846 / 6.0;

    void validate() const;
};

struct GroundTruth {
    AbundanceMatrix abundances;
    EndmemberTensor endmembers;
    EndmemberMatrix base_endmembers;
    std::size_t height = 0;
    std::size_t width = 0;
};

/// Smooth, mutually separated spectra in [0.05, 0.95]; requires bands >= 8 and 1 <= materials <= bands.
EndmemberMatrix gen_procedural_endmembers(std::size_t bands, std::size_t materials, std::uint64_t seed);

/// Spatially correlated abundance maps with injected near-pure regions.
AbundanceMatrix gen_abundance_maps(std::size_t height, std::size_t width, std::size_t materials,
                                   std::uint64_t seed);

/// Per-pixel endmembers M_n = Psi_n .* M_0.
EndmemberTensor apply_variability(const EndmemberMatrix& m0, const VariabilityModel& model,
                                  std::size_t height, std::size_t width, std::uint64_t seed);

struct SynthCube {
    HyperCube cube;
    /// Empirical SNR of the noise actually added (+inf when noise is disabled).
    double measured_snr_db = std::numeric_limits<double>::infinity();
};

SynthCube gen_cube(const GroundTruth& gt, const NoiseSpec& noise);

/// 10 log10(||signal||^2 / ||noise||^2).
double measure_snr_db(const HyperCube& noisy, const HyperCube& clean);

/// Noiseless LMM mixture y_n = M_n a_n.
HyperCube mix(const GroundTruth& gt);

} // namespace hsu::synth
