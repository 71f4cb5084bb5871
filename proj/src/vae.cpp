#include "hsu/vae.hpp"

#include "hsu/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

namespace hsu::nn {

namespace {

std::size_t ceil_div(std::size_t a, std::size_t b)
{
    return (a + b - 1) / b;
}

Eigen::Index idx(std::size_t v)
{
    return static_cast<Eigen::Index>(v);
}

} // namespace

double kl_gauss(const Eigen::Ref<const Vector>& mu, const Eigen::Ref<const Vector>& logvar)
{
    if (mu.size() != logvar.size()) {
        throw InvariantError("kl_gauss: mean and log-variance lengths differ");
    }
    return 0.5 * (mu.array().square() + logvar.array().exp() - logvar.array() - 1.0).sum();
}

void TrainConfig::validate() const
{
    if (epochs < 1) {
        throw InvariantError("epochs must be at least 1");
    }
    if (!(batch_fraction > 0.0 && batch_fraction <= 1.0)) {
        throw InvariantError("batch fraction must lie in (0, 1]");
    }
    if (!(adam.learning_rate > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
        !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.epsilon > 0.0)) {
        throw InvariantError("invalid Adam settings");
    }
    if (!(reconstruction_weight > 0.0) || !std::isfinite(reconstruction_weight)) {
        throw InvariantError("reconstruction weight must be positive");
    }
}

HiddenSizes hidden_sizes(std::size_t bands, std::size_t latent_dim)
{
    const std::size_t wide = ceil_div(12 * bands, 10) + 5;
    const std::size_t middle = std::max(ceil_div(bands, 4), latent_dim + 2) + 3;
    const std::size_t narrow = std::max(ceil_div(bands, 10), latent_dim + 1);
    return {wide, middle, narrow};
}

VaeModel::VaeModel(Mlp encoder, Mlp decoder) : encoder_(std::move(encoder)), decoder_(std::move(decoder))
{
    latent_dim_ = decoder_.input_dim();
    bands_ = decoder_.output_dim();
    check_architecture();
}

VaeModel VaeModel::create(std::size_t bands, std::size_t latent_dim, std::uint64_t seed)
{
    if (bands == 0 || latent_dim == 0) {
        throw InvariantError("VAE needs positive band count and latent dimension");
    }
    const auto h = hidden_sizes(bands, latent_dim);
    std::mt19937_64 rng(seed);
    const auto he = [](std::size_t fan_in) { return std::sqrt(2.0 / static_cast<double>(fan_in)); };
    const auto glorot = [](std::size_t fan_in) { return std::sqrt(1.0 / static_cast<double>(fan_in)); };

    std::vector<DenseLayer> enc;
    enc.push_back(make_layer(bands, h.wide, Activation::relu, he(bands), rng));
    enc.push_back(make_layer(h.wide, h.middle, Activation::relu, he(h.wide), rng));
    enc.push_back(make_layer(h.middle, h.narrow, Activation::relu, he(h.middle), rng));
    enc.push_back(make_layer(h.narrow, 2 * latent_dim, Activation::linear, 0.1 * glorot(h.narrow), rng));

    std::vector<DenseLayer> dec;
    dec.push_back(make_layer(latent_dim, h.narrow, Activation::relu, he(latent_dim), rng));
    dec.push_back(make_layer(h.narrow, h.middle, Activation::relu, he(h.narrow), rng));
    dec.push_back(make_layer(h.middle, h.wide, Activation::relu, he(h.middle), rng));
    dec.push_back(make_layer(h.wide, bands, Activation::sigmoid, glorot(h.wide), rng));

    return VaeModel(Mlp(std::move(enc)), Mlp(std::move(dec)));
}

void VaeModel::check_architecture() const
{
    const auto K = latent_dim_;
    const auto L = bands_;
    const auto h = hidden_sizes(L, K);
    const std::array<std::size_t, 5> enc_dims = {L, h.wide, h.middle, h.narrow, 2 * K};
    const std::array<std::size_t, 5> dec_dims = {K, h.narrow, h.middle, h.wide, L};
    const auto check = [](const Mlp& mlp, const std::array<std::size_t, 5>& dims, Activation last,
                          const char* name) {
        const auto& layers = mlp.layers();
        if (layers.size() != 4) {
            throw InvariantError(std::string(name) + " must have 4 layers");
        }
        for (std::size_t i = 0; i < 4; ++i) {
            if (layers[i].inputs() != dims[i] || layers[i].outputs() != dims[i + 1]) {
                throw InvariantError(std::string(name) + " layer " + std::to_string(i) + " has the wrong width");
            }
            const auto expected = i < 3 ? Activation::relu : last;
            if (layers[i].activation != expected) {
                throw InvariantError(std::string(name) + " layer " + std::to_string(i) +
                                     " has the wrong activation");
            }
        }
    };
    check(encoder_, enc_dims, Activation::linear, "encoder");
    check(decoder_, dec_dims, Activation::sigmoid, "decoder");
}

Vector VaeModel::encode_mean(const Vector& spectrum) const
{
    if (static_cast<std::size_t>(spectrum.size()) != bands_) {
        throw InvariantError("encode_mean: spectrum has " + std::to_string(spectrum.size()) + " bands, expected " +
                             std::to_string(bands_));
    }
    return encoder_.forward(spectrum).head(idx(latent_dim_));
}

Vector VaeModel::decode(const Vector& z) const
{
    if (static_cast<std::size_t>(z.size()) != latent_dim_) {
        throw InvariantError("decode: latent code has the wrong length");
    }
    return decoder_.forward(z);
}

Vector VaeModel::decode_input_grad(const Vector& z, const Vector& output_grad) const
{
    if (static_cast<std::size_t>(z.size()) != latent_dim_ ||
        static_cast<std::size_t>(output_grad.size()) != bands_) {
        throw InvariantError("decode_input_grad: shape mismatch");
    }
    ForwardCache cache;
    decoder_.forward(Matrix(z), &cache);
    return decoder_.backward(cache, Matrix(output_grad), nullptr).col(0);
}

TrainResult train_vae(const Matrix& spectra, const TrainConfig& config, std::size_t latent_dim)
{
    config.validate();
    const auto S = static_cast<std::size_t>(spectra.cols());
    const auto L = static_cast<std::size_t>(spectra.rows());
    if (S < 3) {
        throw InvariantError("train_vae needs at least 3 training spectra, got " + std::to_string(S));
    }
    if (!spectra.allFinite() || spectra.minCoeff() < 0.0 || spectra.maxCoeff() > 1.0) {
        throw InvariantError("train_vae: training spectra must be finite and lie in [0, 1]");
    }
    const auto K = idx(latent_dim);

    TrainResult result{VaeModel::create(L, latent_dim, config.seed), {}};
    VaeModel& model = result.model;
    if (config.mean_output_bias) {
        const Vector mean = spectra.rowwise().mean().cwiseMax(1e-3).cwiseMin(1.0 - 1e-3);
        model.decoder().layers().back().biases = (mean.array() / (1.0 - mean.array())).log().matrix();
    }
    AdamOptimizer enc_opt(model.encoder(), config.adam);
    AdamOptimizer dec_opt(model.decoder(), config.adam);

    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t batch = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(static_cast<double>(S) * config.batch_fraction - 1e-12)));

    std::vector<std::size_t> order(S);
    std::iota(order.begin(), order.end(), std::size_t{0});
    ForwardCache enc_cache;
    ForwardCache dec_cache;
    MlpGradients enc_grads;
    MlpGradients dec_grads;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < S; start += batch) {
            const std::size_t B = std::min(batch, S - start);
            const auto Bi = idx(B);
            Matrix x(idx(L), Bi);
            for (std::size_t j = 0; j < B; ++j) {
                x.col(idx(j)) = spectra.col(idx(order[start + j]));
            }

            const Matrix enc_out = model.encoder().forward(x, &enc_cache);
            const Matrix mu = enc_out.topRows(K);
            const Matrix logvar = enc_out.bottomRows(K);
            const Matrix sigma = (0.5 * logvar.array()).exp().matrix();
            Matrix eps(K, Bi);
            for (Eigen::Index c = 0; c < Bi; ++c) {
                for (Eigen::Index r = 0; r < K; ++r) {
                    eps(r, c) = normal(rng);
                }
            }
            const Matrix z = mu + sigma.cwiseProduct(eps);
            const Matrix recon = model.decoder().forward(z, &dec_cache);

            const Matrix diff = recon - x;
            double loss = config.reconstruction_weight * diff.squaredNorm();
            for (Eigen::Index c = 0; c < Bi; ++c) {
                loss += kl_gauss(mu.col(c), logvar.col(c));
            }
            loss /= static_cast<double>(B);
            if (!std::isfinite(loss)) {
                throw NumericalError("VAE training loss became non-finite at epoch " + std::to_string(epoch + 1));
            }
            epoch_loss += loss * static_cast<double>(B);

            const double inv_b = 1.0 / static_cast<double>(B);
            const Matrix d_recon = 2.0 * config.reconstruction_weight * inv_b * diff;
            const Matrix d_z = model.decoder().backward(dec_cache, d_recon, &dec_grads);
            Matrix d_enc(2 * K, Bi);
            d_enc.topRows(K) = d_z + inv_b * mu;
            d_enc.bottomRows(K) = (d_z.cwiseProduct(eps).cwiseProduct(sigma) * 0.5 +
                                   inv_b * 0.5 * (logvar.array().exp() - 1.0).matrix());
            model.encoder().backward(enc_cache, d_enc, &enc_grads);

            dec_opt.step(model.decoder(), dec_grads);
            enc_opt.step(model.encoder(), enc_grads);
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(S));
    }
    model.encoder().round_to_float();
    model.decoder().round_to_float();
    model.encoder().validate();
    model.decoder().validate();
    return result;
}

namespace {

constexpr std::array<char, 4> kVaeMagic = {'V', 'A', 'E', 'M'};
constexpr std::uint32_t kVaeVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

void put_f32(std::vector<std::uint8_t>& out, double v)
{
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        }
        pos_ += 4;
        return v;
    }

    std::uint8_t u8()
    {
        need(1);
        return bytes_[pos_++];
    }

    double f32()
    {
        const std::size_t at = pos_;
        const float f = std::bit_cast<float>(u32());
        if (!std::isfinite(f)) {
            throw FormatError("non-finite parameter", at);
        }
        return f;
    }

    std::size_t pos() const { return pos_; }
    std::size_t size() const { return bytes_.size(); }

private:
    void need(std::size_t n) const
    {
        if (pos_ + n > bytes_.size()) {
            throw FormatError("truncated model file", bytes_.size());
        }
    }

    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

void encode_mlp(std::vector<std::uint8_t>& out, const Mlp& mlp)
{
    put_u32(out, static_cast<std::uint32_t>(mlp.layers().size()));
    for (const auto& layer : mlp.layers()) {
        put_u32(out, static_cast<std::uint32_t>(layer.inputs()));
        put_u32(out, static_cast<std::uint32_t>(layer.outputs()));
        out.push_back(static_cast<std::uint8_t>(layer.activation));
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                put_f32(out, layer.weights(r, c));
            }
        }
        for (Eigen::Index r = 0; r < layer.biases.size(); ++r) {
            put_f32(out, layer.biases(r));
        }
    }
}

Mlp decode_mlp(Reader& in)
{
    const std::size_t at = in.pos();
    const auto count = in.u32();
    if (count == 0 || count > 64) {
        throw FormatError("implausible layer count " + std::to_string(count), at);
    }
    std::vector<DenseLayer> layers;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::size_t layer_at = in.pos();
        const auto n_in = in.u32();
        const auto n_out = in.u32();
        const std::size_t act_at = in.pos();
        const auto code = in.u8();
        if (code > 2) {
            throw FormatError("unknown activation code " + std::to_string(code), act_at);
        }
        if (static_cast<std::uint64_t>(n_in) * n_out * 4 > in.size()) {
            throw FormatError("layer dimensions exceed file size", layer_at);
        }
        DenseLayer layer;
        layer.activation = activation_from_code(code);
        layer.weights.resize(n_out, n_in);
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                layer.weights(r, c) = in.f32();
            }
        }
        layer.biases.resize(n_out);
        for (Eigen::Index r = 0; r < layer.biases.size(); ++r) {
            layer.biases(r) = in.f32();
        }
        if (!layers.empty() && layers.back().outputs() != layer.inputs()) {
            throw FormatError("layer dimensions do not chain", layer_at);
        }
        layers.push_back(std::move(layer));
    }
    return Mlp(std::move(layers));
}

} // namespace

std::vector<std::uint8_t> encode_vae(const VaeModel& model)
{
    std::vector<std::uint8_t> out(kVaeMagic.begin(), kVaeMagic.end());
    put_u32(out, kVaeVersion);
    put_u32(out, static_cast<std::uint32_t>(model.latent_dim()));
    put_u32(out, static_cast<std::uint32_t>(model.bands()));
    encode_mlp(out, model.encoder());
    encode_mlp(out, model.decoder());
    return out;
}

VaeModel decode_vae(const std::vector<std::uint8_t>& bytes)
{
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kVaeMagic.data(), 4) != 0) {
        throw FormatError("bad model magic", 0);
    }
    Reader in(bytes);
    in.u32();
    if (const auto version = in.u32(); version != kVaeVersion) {
        throw FormatError("unsupported model version " + std::to_string(version), 4);
    }
    const std::size_t K = in.u32();
    const std::size_t L = in.u32();
    Mlp encoder = decode_mlp(in);
    Mlp decoder = decode_mlp(in);
    if (in.pos() != bytes.size()) {
        throw FormatError("trailing bytes after model", in.pos());
    }
    if (decoder.input_dim() != K || decoder.output_dim() != L || encoder.input_dim() != L ||
        encoder.output_dim() != 2 * K) {
        throw FormatError("network shapes disagree with header K=" + std::to_string(K) +
                              ", L=" + std::to_string(L),
                          12);
    }
    return VaeModel(std::move(encoder), std::move(decoder));
}

void save_vae(const std::filesystem::path& path, const VaeModel& model)
{
    const auto bytes = encode_vae(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

VaeModel load_vae(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return decode_vae(bytes);
}

} // namespace hsu::nn
