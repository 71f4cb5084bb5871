#pragma once

#include "hsu/admm.hpp"
#include "hsu/extraction.hpp"
#include "hsu/latent_step.hpp"
#include "hsu/synth.hpp"
#include "hsu/vae.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace hsu {

/// A failure inside one stage of the unmixing pipeline.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what);
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct UnmixConfig {
    std::size_t materials = 3;
    double lambda_a = 0.01;
    double lambda_z = 0.1;
    int max_outer_iterations = 10;
    double outer_rel_tol = 1e-3;
    std::size_t latent_dim = 2;
    /// Pure pixels per material; 0 selects default_pure_count(N).
    std::size_t pure_count = 0;
    std::uint64_t seed = 0;
    /// Latent step: stop on relative iterate change below z_tolerance.
    double z_tolerance = 1e-3;
    int z_max_iterations = 100;
    /// ADMM settings for the abundance step; its lambda_a is overridden by the field above.
    AdmmConfig admm;
    nn::TrainConfig train;
    /// Worker threads for the per-pixel latent step; 0 uses the hardware parallelism.
    unsigned threads = 0;
    /// Receives one progress line per outer iteration when non-null.
    std::ostream* log = nullptr;

    void validate() const;
};

/// 100 pixels per 4900 (rounded), at least 3.
std::size_t default_pure_count(std::size_t pixel_count);

/// Precomputed pieces that replace the corresponding pipeline stages.
struct UnmixInputs {
    std::optional<EndmemberMatrix> reference;
    std::optional<std::vector<nn::VaeModel>> models;
    /// Per-material training spectra (L x S_p) used instead of extracted bundles.
    std::optional<std::vector<Matrix>> library;
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct UnmixResult {
    AbundanceMatrix abundances;
    LatentTensor latents;
    EndmemberTensor endmembers;
    /// J after initialisation, then after every outer iteration.
    std::vector<double> objective_history;
    /// J after initialisation, then after every Z half-step and A half-step.
    std::vector<double> half_step_history;
    int iterations_run = 0;

    EndmemberMatrix reference;
    AbundanceMatrix initial_abundances;
    LatentReference latent_reference;
    std::vector<nn::VaeModel> models;
    std::vector<PurePixelSet> bundles;
    std::vector<std::vector<double>> training_loss;
    /// Cubes with reflectance above 1 are divided by this factor before processing.
    double reflectance_scale = 1.0;
    /// Wall-clock seconds per pipeline stage, in first-run order; repeated stages accumulate.
    std::vector<StageTiming> stage_seconds;
};

/**
 * J(A, Z) = 1/2 sum_n ||y_n - G(Z_n) a_n||^2
 *         + lambda_A (||H_h A||_{2,1} + ||H_v A||_{2,1})
 *         + lambda_Z / 2 sum_n ||Z_n - Z_0||_F^2
 * for simplex-feasible A. Infeasible A raises InvariantError naming the pixel.
 */
double objective(const HyperCube& cube, GeneratorSet models, const AbundanceMatrix& a, const LatentTensor& z,
                 const LatentReference& z0, double lambda_a, double lambda_z);

/// Decoded endmember tensor for every pixel's codes.
EndmemberTensor decode_tensor(GeneratorSet models, const LatentTensor& z);

/// Full pipeline: reference extraction, FCLS initialisation, bundle extraction,
/// per-material VAE training, then alternating latent/abundance minimisation.
UnmixResult run_deepgun(const HyperCube& cube, const UnmixConfig& config, const UnmixInputs& inputs = {});

/// Models to hand to the solvers as generators.
std::vector<const LatentGenerator*> as_generators(const std::vector<nn::VaeModel>& models);

struct SweepRow {
    std::size_t latent_dim = 0;
    double nrmse_a = 0.0;
};

/// Runs the pipeline once per latent dimension and scores abundances against ground truth.
std::vector<SweepRow> latent_dim_sweep(const HyperCube& cube, const synth::GroundTruth& gt,
                                       const UnmixConfig& config, const std::vector<std::size_t>& latent_dims);

} // namespace hsu
