#pragma once

#include "hsu/types.hpp"

namespace hsu {

/// Differentiable map from a K-dimensional latent code to an L-band spectrum.
class LatentGenerator {
public:
    virtual ~LatentGenerator() = default;

    virtual std::size_t latent_dim() const = 0;
    virtual std::size_t bands() const = 0;

    virtual Vector decode(const Vector& z) const = 0;

    /// J(z)^T * output_grad, where J is the Jacobian of decode at z.
    virtual Vector decode_input_grad(const Vector& z, const Vector& output_grad) const = 0;
};

/// G(z) = W z + b; used where a closed-form inverse is needed.
class AffineGenerator final : public LatentGenerator {
public:
    AffineGenerator(Matrix weights, Vector offset) : w_(std::move(weights)), b_(std::move(offset)) {}

    std::size_t latent_dim() const override { return static_cast<std::size_t>(w_.cols()); }
    std::size_t bands() const override { return static_cast<std::size_t>(w_.rows()); }
    Vector decode(const Vector& z) const override { return w_ * z + b_; }
    Vector decode_input_grad(const Vector&, const Vector& g) const override { return w_.transpose() * g; }

    const Matrix& weights() const { return w_; }
    const Vector& offset() const { return b_; }

private:
    Matrix w_;
    Vector b_;
};

} // namespace hsu
