#include "hsu/mlp.hpp"

#include <cmath>
#include <string>

namespace hsu::nn {

namespace {

Matrix activate(Activation act, const Matrix& pre)
{
    switch (act) {
    case Activation::relu:
        return pre.cwiseMax(0.0);
    case Activation::sigmoid:
        return pre.unaryExpr([](double x) {
            // split keeps exp() from overflowing for large |x|
            if (x >= 0.0) {
                return 1.0 / (1.0 + std::exp(-x));
            }
            const double e = std::exp(x);
            return e / (1.0 + e);
        });
    case Activation::linear:
        return pre;
    }
    return pre;
}

// d activation / d pre-activation, multiplied into `grad`.
void apply_derivative(Activation act, const Matrix& pre, Matrix& grad)
{
    switch (act) {
    case Activation::relu:
        grad = grad.cwiseProduct(pre.unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; }));
        break;
    case Activation::sigmoid: {
        const Matrix s = activate(Activation::sigmoid, pre);
        grad = grad.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix()));
        break;
    }
    case Activation::linear:
        break;
    }
}

} // namespace

Activation activation_from_code(std::uint8_t code)
{
    if (code > 2) {
        throw InvariantError("unknown activation code " + std::to_string(code));
    }
    return static_cast<Activation>(code);
}

void MlpGradients::set_zero_like(const Mlp& mlp)
{
    weights.clear();
    biases.clear();
    for (const auto& layer : mlp.layers()) {
        weights.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
        biases.push_back(Vector::Zero(layer.biases.size()));
    }
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers))
{
    validate();
}

void Mlp::validate() const
{
    if (layers_.empty()) {
        throw InvariantError("network has no layers");
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& layer = layers_[i];
        if (layer.weights.rows() != layer.biases.size()) {
            throw InvariantError("layer " + std::to_string(i) + ": bias length does not match output size");
        }
        if (i > 0 && layer.inputs() != layers_[i - 1].outputs()) {
            throw InvariantError("layer " + std::to_string(i) + ": input size does not chain");
        }
        if (!layer.weights.allFinite() || !layer.biases.allFinite()) {
            throw InvariantError("layer " + std::to_string(i) + ": non-finite parameters");
        }
    }
}

Matrix Mlp::forward(const Matrix& input, ForwardCache* cache) const
{
    if (static_cast<std::size_t>(input.rows()) != input_dim()) {
        throw InvariantError("network input has " + std::to_string(input.rows()) + " rows, expected " +
                             std::to_string(input_dim()));
    }
    if (cache != nullptr) {
        cache->inputs.clear();
        cache->preactivations.clear();
    }
    Matrix x = input;
    for (const auto& layer : layers_) {
        Matrix pre = layer.weights * x;
        pre.colwise() += layer.biases;
        Matrix out = activate(layer.activation, pre);
        if (cache != nullptr) {
            cache->inputs.push_back(std::move(x));
            cache->preactivations.push_back(std::move(pre));
        }
        x = std::move(out);
    }
    return x;
}

Vector Mlp::forward(const Vector& input) const
{
    return forward(Matrix(input)).col(0);
}

Matrix Mlp::backward(const ForwardCache& cache, const Matrix& output_grad, MlpGradients* grads) const
{
    if (cache.inputs.size() != layers_.size()) {
        throw InvariantError("forward cache does not match the network");
    }
    if (static_cast<std::size_t>(output_grad.rows()) != output_dim() ||
        output_grad.cols() != cache.inputs.front().cols()) {
        throw InvariantError("output gradient shape does not match the cached batch");
    }
    if (grads != nullptr) {
        grads->weights.resize(layers_.size());
        grads->biases.resize(layers_.size());
    }
    Matrix g = output_grad;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        const auto& layer = layers_[i];
        apply_derivative(layer.activation, cache.preactivations[i], g);
        if (grads != nullptr) {
            grads->weights[i] = g * cache.inputs[i].transpose();
            grads->biases[i] = g.rowwise().sum();
        }
        g = layer.weights.transpose() * g;
    }
    return g;
}

void Mlp::round_to_float()
{
    const auto to_float = [](double v) { return static_cast<double>(static_cast<float>(v)); };
    for (auto& layer : layers_) {
        layer.weights = layer.weights.unaryExpr(to_float);
        layer.biases = layer.biases.unaryExpr(to_float);
    }
}

DenseLayer make_layer(std::size_t in, std::size_t out, Activation act, double weight_std, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal(0.0, weight_std);
    DenseLayer layer;
    layer.activation = act;
    layer.weights.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            layer.weights(r, c) = normal(rng);
        }
    }
    layer.biases = Vector::Zero(static_cast<Eigen::Index>(out));
    return layer;
}

AdamOptimizer::AdamOptimizer(const Mlp& shape, AdamConfig config) : config_(config)
{
    m_.set_zero_like(shape);
    v_.set_zero_like(shape);
}

void AdamOptimizer::step(Mlp& mlp, const MlpGradients& grads)
{
    ++t_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const double lr = config_.learning_rate;
    const double eps = config_.epsilon;
    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
        m = b1 * m + (1.0 - b1) * grad;
        v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
        param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    auto& layers = mlp.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        update(layers[i].weights, grads.weights[i], m_.weights[i], v_.weights[i]);
        update(layers[i].biases, grads.biases[i], m_.biases[i], v_.biases[i]);
    }
}

} // namespace hsu::nn
