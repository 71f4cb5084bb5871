#pragma once

#include "hsu/generator.hpp"
#include "hsu/mlp.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace hsu::nn {

/// 0.5 * sum_k (mu_k^2 + exp(logvar_k) - logvar_k - 1), i.e. KL(N(mu, diag(exp(logvar))) || N(0, I)).
double kl_gauss(const Eigen::Ref<const Vector>& mu, const Eigen::Ref<const Vector>& logvar);

struct TrainConfig {
    int epochs = 1000;
    double batch_fraction = 1.0 / 3.0;
    AdamConfig adam;
    /// Multiplies the squared-error term; 1 is a unit-variance Gaussian likelihood.
    double reconstruction_weight = 1000.0;
    /// Start the decoder output at the mean training spectrum.
    bool mean_output_bias = true;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Hidden-layer widths shared by encoder (in this order) and decoder (reversed).
struct HiddenSizes {
    std::size_t wide;   // ceil(1.2 L) + 5
    std::size_t middle; // max(ceil(L/4), K+2) + 3
    std::size_t narrow; // max(ceil(L/10), K+1)
};

HiddenSizes hidden_sizes(std::size_t bands, std::size_t latent_dim);

/**
 * Per-material generative endmember model.
 *
 * The encoder maps a spectrum to 2K values (K means, then K log-variances); the
 * decoder maps a K-dimensional code to an L-band spectrum through a sigmoid.
 */
class VaeModel final : public LatentGenerator {
public:
    VaeModel() = default;
    VaeModel(Mlp encoder, Mlp decoder);

    /// Freshly initialised network with the standard architecture.
    static VaeModel create(std::size_t bands, std::size_t latent_dim, std::uint64_t seed);

    std::size_t latent_dim() const override { return latent_dim_; }
    std::size_t bands() const override { return bands_; }

    const Mlp& encoder() const { return encoder_; }
    const Mlp& decoder() const { return decoder_; }
    Mlp& encoder() { return encoder_; }
    Mlp& decoder() { return decoder_; }

    /// Mean head of the encoder; no sampling.
    Vector encode_mean(const Vector& spectrum) const;
    Vector decode(const Vector& z) const override;
    Vector decode_input_grad(const Vector& z, const Vector& output_grad) const override;

    /// Throws InvariantError when the layer widths or activations differ from the standard architecture.
    void check_architecture() const;

private:
    Mlp encoder_;
    Mlp decoder_;
    std::size_t latent_dim_ = 0;
    std::size_t bands_ = 0;
};

struct TrainResult {
    VaeModel model;
    /// Mean per-sample loss (reconstruction + KL) of each epoch.
    std::vector<double> loss_history;
};

/**
 * Fits a VAE to `spectra` (L x S, values in [0, 1], S >= 3) by maximising the
 * single-sample ELBO with Adam. Parameters are rounded to float precision on
 * return so that a saved and reloaded model is identical to the in-memory one.
 */
TrainResult train_vae(const Matrix& spectra, const TrainConfig& config, std::size_t latent_dim);

// .vaem: "VAEM", u32 version=1, u32 K, u32 L, then encoder and decoder, each as
// u32 layer count + per layer (u32 in, u32 out, u8 activation, f32 weights
// row-major, f32 biases).
void save_vae(const std::filesystem::path& path, const VaeModel& model);
VaeModel load_vae(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_vae(const VaeModel& model);
VaeModel decode_vae(const std::vector<std::uint8_t>& bytes);

} // namespace hsu::nn
