#include "oracles.hpp"

#include "hsu/mlp.hpp"
#include "hsu/vae.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace hsu;
using namespace hsu::nn;

namespace {

DenseLayer fixed_layer(Matrix w, Vector b, Activation act)
{
    DenseLayer layer;
    layer.weights = std::move(w);
    layer.biases = std::move(b);
    layer.activation = act;
    return layer;
}

Mlp random_mlp(std::size_t in, std::size_t hidden, std::size_t out, std::mt19937_64& rng)
{
    std::vector<DenseLayer> layers;
    layers.push_back(make_layer(in, hidden, Activation::relu, 0.7, rng));
    layers.push_back(make_layer(hidden, hidden, Activation::linear, 0.7, rng));
    layers.push_back(make_layer(hidden, out, Activation::sigmoid, 0.7, rng));
    for (auto& l : layers) {
        l.biases = oracle::random_vector(l.biases.size(), rng, -0.3, 0.3);
    }
    return Mlp(std::move(layers));
}

// flat views over all parameters, in layer order (weights column-major, then biases)
Vector flatten(const Mlp& mlp)
{
    std::vector<double> v;
    for (const auto& l : mlp.layers()) {
        v.insert(v.end(), l.weights.data(), l.weights.data() + l.weights.size());
        v.insert(v.end(), l.biases.data(), l.biases.data() + l.biases.size());
    }
    return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void unflatten(Mlp& mlp, const Vector& v)
{
    Eigen::Index at = 0;
    for (auto& l : mlp.layers()) {
        for (Eigen::Index i = 0; i < l.weights.size(); ++i) l.weights.data()[i] = v(at++);
        for (Eigen::Index i = 0; i < l.biases.size(); ++i) l.biases(i) = v(at++);
    }
}

Vector flatten(const MlpGradients& g)
{
    std::vector<double> v;
    for (std::size_t i = 0; i < g.weights.size(); ++i) {
        v.insert(v.end(), g.weights[i].data(), g.weights[i].data() + g.weights[i].size());
        v.insert(v.end(), g.biases[i].data(), g.biases[i].data() + g.biases[i].size());
    }
    return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix repeated(const Vector& x, int count)
{
    Matrix s(x.size(), count);
    s.colwise() = x;
    return s;
}

} // namespace

TEST_CASE("mlp forward examples")
{
    Mlp zero({fixed_layer(Matrix::Zero(4, 3), Vector::Zero(4), Activation::sigmoid)});
    CHECK(zero.forward(Vector(Vector::Constant(3, 2.0))) == Vector::Constant(4, 0.5));

    Mlp ident({fixed_layer(Matrix::Identity(3, 3), Vector::Zero(3), Activation::linear)});
    const Vector x{{0.3, -1.5, 7.0}};
    CHECK(ident.forward(x) == x);

    Mlp relu({fixed_layer(Matrix::Identity(2, 2), Vector::Zero(2), Activation::relu)});
    CHECK(relu.forward(Vector(Vector{{-1.0, 2.0}})) == Vector{{0.0, 2.0}});

    CHECK_THROWS(ident.forward(Vector(Vector::Zero(2))));
}

TEST_CASE("mlp backward on a linear layer is the outer product")
{
    std::mt19937_64 rng(3);
    Mlp lin({fixed_layer(oracle::random_matrix(3, 4, rng, -1, 1), oracle::random_vector(3, rng, -1, 1), Activation::linear)});
    const Vector x = oracle::random_vector(4, rng, -1, 1);
    const Vector target = oracle::random_vector(3, rng, -1, 1);

    ForwardCache cache;
    const Matrix out = lin.forward(Matrix(x), &cache);
    const Matrix residual = out - target;
    MlpGradients g;
    const Matrix dx = lin.backward(cache, residual, &g);
    CHECK((g.weights[0] - residual * x.transpose()).norm() < 1e-14);
    CHECK((g.biases[0] - Vector(residual)).norm() < 1e-14);
    CHECK((dx - lin.layers()[0].weights.transpose() * residual).norm() < 1e-14);

    MlpGradients zero;
    const Matrix dz = lin.backward(cache, Matrix::Zero(3, 1), &zero);
    CHECK(dz.norm() == 0.0);
    CHECK(flatten(zero).norm() == 0.0);
}

TEST_CASE("mlp backward matches finite differences")
{
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        std::mt19937_64 rng(seed);
        Mlp mlp = random_mlp(5, 6, 4, rng);
        const Matrix input = oracle::random_matrix(5, 3, rng, -1, 1);
        const Matrix weight = oracle::random_matrix(4, 3, rng, -1, 1);

        ForwardCache cache;
        mlp.forward(input, &cache);
        // skip points too close to a ReLU kink for central differences
        bool kink = false;
        for (const auto& pre : cache.preactivations) {
            kink = kink || pre.cwiseAbs().minCoeff() < 1e-3;
        }
        if (kink) continue;

        MlpGradients g;
        const Matrix dx = mlp.backward(cache, weight, &g);

        const auto loss_params = [&](const Vector& p) {
            Mlp m = mlp;
            unflatten(m, p);
            return (m.forward(input).array() * weight.array()).sum();
        };
        const Vector num_p = oracle::numeric_gradient(loss_params, flatten(mlp));
        CHECK(oracle::relative_error(flatten(g), num_p) < 1e-4);

        const auto loss_input = [&](const Vector& v) {
            const Matrix in = Eigen::Map<const Matrix>(v.data(), 5, 3);
            return (mlp.forward(in).array() * weight.array()).sum();
        };
        const Vector flat_in = Eigen::Map<const Vector>(input.data(), input.size());
        const Vector num_x = oracle::numeric_gradient(loss_input, flat_in);
        const Vector flat_dx = Eigen::Map<const Vector>(dx.data(), dx.size());
        CHECK(oracle::relative_error(flat_dx, num_x) < 1e-4);
    }
}

TEST_CASE("relu subgradient at zero is zero")
{
    Mlp relu({fixed_layer(Matrix::Identity(2, 2), Vector::Zero(2), Activation::relu)});
    ForwardCache cache;
    relu.forward(Matrix(Vector{{0.0, 1.0}}), &cache);
    const Matrix dx = relu.backward(cache, Matrix::Ones(2, 1), nullptr);
    CHECK(dx(0, 0) == 0.0);
    CHECK(dx(1, 0) == 1.0);
}

TEST_CASE("kl_gauss closed form")
{
    CHECK(kl_gauss(Vector::Zero(1), Vector::Zero(1)) == 0.0);
    CHECK(kl_gauss(Vector::Zero(4), Vector::Zero(4)) == 0.0);
    CHECK(kl_gauss(Vector::Ones(1), Vector::Zero(1)) == 0.5);
    const double l4 = std::log(4.0);
    CHECK(kl_gauss(Vector::Zero(1), Vector::Constant(1, l4)) == doctest::Approx(0.5 * (4.0 - l4 - 1.0)).epsilon(1e-15));
    CHECK(kl_gauss(Vector::Zero(1), Vector::Constant(1, l4)) == doctest::Approx(0.8069).epsilon(1e-4));

    std::mt19937_64 rng(9);
    for (int t = 0; t < 100; ++t) {
        CHECK(kl_gauss(oracle::random_vector(3, rng, -2, 2), oracle::random_vector(3, rng, -3, 3)) > 0.0);
    }
    CHECK_THROWS_AS(kl_gauss(Vector::Zero(2), Vector::Zero(3)), InvariantError);
}

TEST_CASE("vae architecture holds across sizes")
{
    for (std::size_t bands = 10; bands <= 512; bands += 37) {
        for (std::size_t k = 1; k <= 8; ++k) {
            const auto model = VaeModel::create(bands, k, bands * 8 + k);
            CHECK_NOTHROW(model.check_architecture());
            const auto h = hidden_sizes(bands, k);
            CHECK(h.wide == static_cast<std::size_t>(std::ceil(1.2 * static_cast<double>(bands))) + 5);
            CHECK(h.middle == std::max<std::size_t>((bands + 3) / 4, k + 2) + 3);
            CHECK(h.narrow == std::max<std::size_t>((bands + 9) / 10, k + 1));
            const auto& enc = model.encoder().layers();
            const auto& dec = model.decoder().layers();
            REQUIRE(enc.size() == 4);
            REQUIRE(dec.size() == 4);
            CHECK(enc.front().inputs() == bands);
            CHECK(enc.back().outputs() == 2 * k);
            CHECK(dec.front().inputs() == k);
            CHECK(dec.back().outputs() == bands);
            CHECK(dec.back().activation == Activation::sigmoid);
        }
    }
    CHECK_NOTHROW(VaeModel::create(512, 8, 1).check_architecture());
}

TEST_CASE("decode output is in the open unit interval")
{
    const auto model = VaeModel::create(30, 3, 4);
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) {
        const Vector z = oracle::random_vector(3, rng, -5, 5);
        const Vector y = model.decode(z);
        CHECK(y.size() == 30);
        CHECK(y.minCoeff() > 0.0);
        CHECK(y.maxCoeff() < 1.0);
        const Vector dz = oracle::random_vector(3, rng, -1, 1).normalized() * 1e-3;
        CHECK((model.decode(z + dz) - y).cwiseAbs().maxCoeff() < 0.5);
    }
    CHECK_THROWS(model.decode(Vector(Vector::Zero(2))));
    CHECK_THROWS(model.encode_mean(Vector(Vector::Zero(29))));
}

TEST_CASE("decode input gradient matches finite differences and is linear")
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto model = VaeModel::create(20, 3, seed);
        std::mt19937_64 rng(seed + 50);
        const Vector z = oracle::random_vector(3, rng, -1, 1);
        const Vector g1 = oracle::random_vector(20, rng, -1, 1);
        const Vector g2 = oracle::random_vector(20, rng, -1, 1);
        const Vector grad = model.decode_input_grad(z, g1);
        const Vector num = oracle::numeric_gradient([&](const Vector& v) { return model.decode(v).dot(g1); }, z);
        CHECK(oracle::relative_error(grad, num) < 1e-4);
        CHECK(model.decode_input_grad(z, Vector::Zero(20)).norm() == 0.0);
        const Vector combo = model.decode_input_grad(z, 2.0 * g1 - 0.5 * g2);
        CHECK((combo - (2.0 * grad - 0.5 * model.decode_input_grad(z, g2))).norm() < 1e-12);
    }
}

TEST_CASE("training on one repeated spectrum reconstructs it after 50 epochs")
{
    std::mt19937_64 rng(21);
    const Vector x = oracle::random_vector(40, rng, 0.1, 0.9);
    TrainConfig config;
    config.epochs = 50;
    config.seed = 5;
    const auto result = train_vae(repeated(x, 12), config, 2);
    CHECK(result.loss_history.size() == 50);
    const Vector rec = result.model.decode(result.model.encode_mean(x));
    CHECK((rec - x).cwiseAbs().maxCoeff() < 0.02);
    CHECK(result.loss_history.back() <= result.loss_history.front());
    CHECK(result.model.encode_mean(x) == result.model.encode_mean(x));
    CHECK(result.model.encode_mean(x).size() == 2);
}

TEST_CASE("training is deterministic given the seed")
{
    std::mt19937_64 rng(2);
    const Matrix data = oracle::random_matrix(25, 9, rng, 0.05, 0.95);
    TrainConfig config;
    config.epochs = 30;
    config.seed = 77;
    const auto a = train_vae(data, config, 2);
    const auto b = train_vae(data, config, 2);
    CHECK(encode_vae(a.model) == encode_vae(b.model));
    CHECK(a.loss_history == b.loss_history);
    config.seed = 78;
    CHECK(encode_vae(train_vae(data, config, 2).model) != encode_vae(a.model));
}

TEST_CASE("training rejects bad input")
{
    TrainConfig config;
    config.epochs = 2;
    CHECK_THROWS_AS(train_vae(Matrix::Constant(10, 2, 0.5), config, 2), InvariantError);
    CHECK_THROWS_AS(train_vae(Matrix::Constant(10, 5, 1.5), config, 2), InvariantError);
    config.epochs = 0;
    CHECK_THROWS_AS(train_vae(Matrix::Constant(10, 5, 0.5), config, 2), InvariantError);
    config.epochs = 2;
    config.batch_fraction = 0.0;
    CHECK_THROWS_AS(train_vae(Matrix::Constant(10, 5, 0.5), config, 2), InvariantError);
}

TEST_CASE("codes separate two clusters and the bundle is reconstructed")
{
    std::mt19937_64 rng(8);
    const Vector a = oracle::random_vector(30, rng, 0.1, 0.4);
    const Vector b = oracle::random_vector(30, rng, 0.5, 0.9);
    std::normal_distribution<double> noise(0.0, 0.01);
    Matrix data(30, 20);
    for (int s = 0; s < 20; ++s) {
        const Vector& c = s < 10 ? a : b;
        for (int l = 0; l < 30; ++l) data(l, s) = c(l) + noise(rng);
    }
    TrainConfig config;
    config.seed = 1;
    config.epochs = 300;
    const auto result = train_vae(data, config, 2);

    Matrix codes(2, 20);
    Matrix rec(30, 20);
    for (int s = 0; s < 20; ++s) {
        codes.col(s) = result.model.encode_mean(data.col(s));
        rec.col(s) = result.model.decode(codes.col(s));
    }
    const Vector ca = codes.leftCols(10).rowwise().mean();
    const Vector cb = codes.rightCols(10).rowwise().mean();
    double radius = 0.0;
    for (int s = 0; s < 20; ++s) radius += (codes.col(s) - (s < 10 ? ca : cb)).norm() / 20.0;
    CHECK((ca - cb).norm() > radius);
    CHECK((rec - data).norm() / data.norm() < 0.05);
}

TEST_CASE("vaem round trip")
{
    TrainConfig config;
    config.epochs = 5;
    std::mt19937_64 rng(6);
    const auto model = train_vae(oracle::random_matrix(16, 6, rng, 0.1, 0.9), config, 3).model;
    const auto bytes = encode_vae(model);
    CHECK(bytes[0] == 'V');
    CHECK(bytes[3] == 'M');
    const auto back = decode_vae(bytes);
    CHECK(encode_vae(back) == bytes);
    const Vector z = Vector::Constant(3, 0.2);
    CHECK(back.decode(z) == model.decode(z));

    const auto path = std::filesystem::temp_directory_path() / "hsu_test_model.vaem";
    save_vae(path, model);
    CHECK(encode_vae(load_vae(path)) == bytes);
    std::filesystem::remove(path);

    auto truncated = bytes;
    truncated.resize(bytes.size() - 3);
    CHECK_THROWS(decode_vae(truncated));
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS(decode_vae(bad));
}
