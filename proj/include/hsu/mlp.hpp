#pragma once

#include "hsu/types.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace hsu::nn {

enum class Activation : std::uint8_t { relu = 0, sigmoid = 1, linear = 2 };

Activation activation_from_code(std::uint8_t code);

struct DenseLayer {
    Activation activation = Activation::linear;
    Matrix weights; // out x in
    Vector biases;  // out

    std::size_t inputs() const { return static_cast<std::size_t>(weights.cols()); }
    std::size_t outputs() const { return static_cast<std::size_t>(weights.rows()); }
};

/// Per-layer inputs and pre-activations recorded by a forward pass; columns are samples.
struct ForwardCache {
    std::vector<Matrix> inputs;
    std::vector<Matrix> preactivations;
};

struct MlpGradients {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    void set_zero_like(const class Mlp& mlp);
};

/**
 * Fully connected network: affine map followed by an element-wise activation
 * per layer. Inputs and outputs are batched column-wise.
 */
class Mlp {
public:
    Mlp() = default;
    explicit Mlp(std::vector<DenseLayer> layers);

    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& layers() { return layers_; }
    std::size_t input_dim() const { return layers_.front().inputs(); }
    std::size_t output_dim() const { return layers_.back().outputs(); }

    Matrix forward(const Matrix& input, ForwardCache* cache = nullptr) const;
    Vector forward(const Vector& input) const;

    /**
     * Reverse-mode pass. `output_grad` holds dLoss/dOutput for every sample of the
     * cached batch. Parameter gradients are summed over the batch into `grads`
     * (overwritten) when non-null; the return value is dLoss/dInput.
     * The ReLU derivative at exactly zero is taken as 0.
     */
    Matrix backward(const ForwardCache& cache, const Matrix& output_grad, MlpGradients* grads) const;

    /// Throws InvariantError if dimensions do not chain or a parameter is not finite.
    void validate() const;

    /// Rounds every parameter to the nearest 32-bit float.
    void round_to_float();

private:
    std::vector<DenseLayer> layers_;
};

/// Layer with Gaussian weights of the given standard deviation and zero biases.
DenseLayer make_layer(std::size_t in, std::size_t out, Activation act, double weight_std, std::mt19937_64& rng);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with bias-corrected first and second moment estimates.
class AdamOptimizer {
public:
    AdamOptimizer(const Mlp& shape, AdamConfig config);

    void step(Mlp& mlp, const MlpGradients& grads);
    std::size_t steps() const { return t_; }

private:
    AdamConfig config_;
    std::size_t t_ = 0;
    MlpGradients m_;
    MlpGradients v_;
};

} // namespace hsu::nn
