// Acceptance run: one PASS/FAIL line per criterion. Optional arguments select criteria by number.

#include "oracles.hpp"

#include "commands.hpp"

#include "hsu/admm.hpp"
#include "hsu/bfgs.hpp"
#include "hsu/deepgun.hpp"
#include "hsu/latent_step.hpp"
#include "hsu/metrics.hpp"
#include "hsu/mlp.hpp"
#include "hsu/simplex.hpp"
#include "hsu/synth.hpp"
#include "hsu/vae.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include <unistd.h>

using namespace hsu;
namespace fs = std::filesystem;

namespace {

// Outcome of one criterion: verdict plus the measured values behind it.
struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail << "[failed: " << what << "] ";
        }
    }
};

struct Criterion {
    int id;
    const char* title;
    double limit_seconds; // <= 0 means no runtime bound
    std::function<void(Verdict&)> body;
};

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

bool on_simplex(const Eigen::Ref<const Vector>& a)
{
    return a.minCoeff() >= -1e-12 && std::abs(a.sum() - 1.0) <= 1e-9;
}

// BFGS histories may rise by rounding noise once the predicted decrease is below the precision of f.
bool non_increasing(const std::vector<double>& h)
{
    for (std::size_t i = 1; i < h.size(); ++i) {
        if (h[i] > h[i - 1] + 16.0 * std::numeric_limits<double>::epsilon() * std::abs(h[i - 1])) {
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------

void metric_identities(Verdict& v)
{
    std::mt19937_64 rng(1);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        const Matrix x = oracle::random_matrix(7, 9, rng);
        worst = std::max(worst, nrmse(x, x));
        worst = std::max(worst, std::abs(nrmse(x, Matrix::Zero(7, 9)) - 1.0));

        EndmemberTensor em(6, 3, 4);
        for (double& e : em.data()) {
            e = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
        }
        worst = std::max(worst, sam_metric(em, em));

        const Vector a = oracle::random_vector(6, rng);
        Vector b = oracle::random_vector(6, rng);
        b -= b.dot(a) / a.squaredNorm() * a;
        worst = std::max(worst, std::abs(spectral_angle(a, b) - std::numbers::pi / 2.0));
    }
    v.detail << "max deviation " << worst;
    v.require(worst <= 1e-12, "identities exact to 1e-12");
}

void simplex_projection(Verdict& v)
{
    std::mt19937_64 rng(2);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const auto p = static_cast<Eigen::Index>(2 + t % 4);
        const Vector x = oracle::random_vector(p, rng, -2.0, 2.0);
        worst = std::max(worst, (project_simplex(x) - oracle::project_simplex_enumerate(x)).cwiseAbs().maxCoeff());
    }
    v.detail << "max deviation from enumeration " << worst;
    v.require(worst <= 1e-8, "within 1e-8");
}

void fcls_oracle(Verdict& v)
{
    std::mt19937_64 rng(3);
    double noiseless = 0.0;
    for (int t = 0; t < 100; ++t) {
        const Matrix m = oracle::random_matrix(20, 3, rng, 0.0, 1.0);
        const Vector a = oracle::random_simplex_point(3, rng);
        noiseless = std::max(noiseless, (fcls(m * a, m) - a).cwiseAbs().maxCoeff());
    }
    double noisy = 0.0;
    for (int t = 0; t < 20; ++t) {
        const Matrix m = oracle::random_matrix(20, 3, rng, 0.0, 1.0);
        const Vector y = m * oracle::random_simplex_point(3, rng) + 0.1 * oracle::random_vector(20, rng);
        noisy = std::max(noisy, (fcls(y, m) - oracle::fcls_enumerate(y, m)).cwiseAbs().maxCoeff());
    }
    v.detail << "noiseless max error " << noiseless << ", noisy max deviation " << noisy;
    v.require(noiseless <= 1e-6, "noiseless within 1e-6");
    v.require(noisy <= 1e-6, "noisy within 1e-6");
}

// Flattened parameters of an MLP, layer by layer, weights column-major then biases.
Vector mlp_params(const nn::Mlp& mlp)
{
    std::vector<double> out;
    for (const auto& l : mlp.layers()) {
        out.insert(out.end(), l.weights.data(), l.weights.data() + l.weights.size());
        out.insert(out.end(), l.biases.data(), l.biases.data() + l.biases.size());
    }
    return Eigen::Map<const Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

void set_mlp_params(nn::Mlp& mlp, const Vector& p)
{
    Eigen::Index k = 0;
    for (auto& l : mlp.layers()) {
        for (Eigen::Index i = 0; i < l.weights.size(); ++i) {
            l.weights.data()[i] = p(k++);
        }
        for (Eigen::Index i = 0; i < l.biases.size(); ++i) {
            l.biases(i) = p(k++);
        }
    }
}

bool near_relu_kink(const nn::Mlp& mlp, const Vector& x)
{
    nn::ForwardCache cache;
    mlp.forward(Matrix(x), &cache);
    for (std::size_t l = 0; l < mlp.layers().size(); ++l) {
        if (mlp.layers()[l].activation == nn::Activation::relu &&
            cache.preactivations[l].cwiseAbs().minCoeff() < 1e-3) {
            return true;
        }
    }
    return false;
}

void gradient_checks(Verdict& v)
{
    std::mt19937_64 rng(4);
    double mlp_worst = 0.0;
    int mlp_points = 0;
    while (mlp_points < 50) {
        std::vector<nn::DenseLayer> layers;
        layers.push_back(nn::make_layer(5, 8, nn::Activation::relu, 0.7, rng));
        layers.push_back(nn::make_layer(8, 6, nn::Activation::sigmoid, 0.7, rng));
        layers.push_back(nn::make_layer(6, 4, nn::Activation::linear, 0.7, rng));
        for (auto& l : layers) {
            l.biases = oracle::random_vector(l.biases.size(), rng, -0.5, 0.5);
        }
        nn::Mlp mlp(std::move(layers));
        const Vector x = oracle::random_vector(5, rng);
        const Vector target = oracle::random_vector(4, rng);
        if (near_relu_kink(mlp, x)) {
            continue;
        }
        ++mlp_points;

        nn::ForwardCache cache;
        const Matrix out = mlp.forward(Matrix(x), &cache);
        nn::MlpGradients grads;
        const Vector dx = mlp.backward(cache, out - target, &grads).col(0);
        std::vector<double> flat;
        for (std::size_t l = 0; l < grads.weights.size(); ++l) {
            flat.insert(flat.end(), grads.weights[l].data(), grads.weights[l].data() + grads.weights[l].size());
            flat.insert(flat.end(), grads.biases[l].data(), grads.biases[l].data() + grads.biases[l].size());
        }
        const Vector dp = Eigen::Map<const Vector>(flat.data(), static_cast<Eigen::Index>(flat.size()));

        const auto loss_x = [&](const Vector& xi) { return 0.5 * (mlp.forward(xi) - target).squaredNorm(); };
        nn::Mlp probe = mlp;
        const auto loss_p = [&](const Vector& p) {
            set_mlp_params(probe, p);
            return 0.5 * (probe.forward(x) - target).squaredNorm();
        };
        mlp_worst = std::max(mlp_worst, oracle::relative_error(dx, oracle::numeric_gradient(loss_x, x)));
        mlp_worst = std::max(mlp_worst, oracle::relative_error(dp, oracle::numeric_gradient(loss_p, mlp_params(mlp))));
    }

    double z_worst = 0.0;
    int z_points = 0;
    std::uint64_t seed = 0;
    while (z_points < 50) {
        ++seed;
        const auto m1 = nn::VaeModel::create(16, 2, seed);
        const auto m2 = nn::VaeModel::create(16, 2, seed + 1000);
        const auto m3 = nn::VaeModel::create(16, 2, seed + 2000);
        const std::vector<const LatentGenerator*> models{&m1, &m2, &m3};
        const Matrix z = oracle::random_matrix(3, 2, rng);
        if (near_relu_kink(m1.decoder(), z.row(0).transpose()) || near_relu_kink(m2.decoder(), z.row(1).transpose()) ||
            near_relu_kink(m3.decoder(), z.row(2).transpose())) {
            continue;
        }
        ++z_points;
        const Vector y = oracle::random_vector(16, rng, 0.0, 1.0);
        const Vector a = oracle::random_simplex_point(3, rng);
        const Matrix z0 = oracle::random_matrix(3, 2, rng);
        Vector grad;
        latent_objective(y, a, models, z, z0, 0.1, &grad);
        const auto f = [&](const Vector& flat) {
            return latent_objective(y, a, models, unflatten_codes(flat, 3, 2), z0, 0.1, nullptr);
        };
        z_worst = std::max(z_worst, oracle::relative_error(grad, oracle::numeric_gradient(f, flatten_codes(z))));
    }
    v.detail << "mlp max relative error " << mlp_worst << ", latent objective " << z_worst;
    v.require(mlp_worst < 1e-4, "mlp gradients");
    v.require(z_worst < 1e-4, "latent objective gradient");
}

void bfgs_checks(Verdict& v)
{
    std::mt19937_64 rng(5);
    const Matrix b = oracle::random_matrix(6, 6, rng);
    const Matrix q = b * b.transpose() + 0.5 * Matrix::Identity(6, 6);
    const Vector c = oracle::random_vector(6, rng);
    const Objective quad = [&](const Vector& z, Vector& g) {
        g = q * z - c;
        return 0.5 * z.dot(q * z) - c.dot(z);
    };
    BfgsOptions options;
    options.relative_tolerance = 1e-14;
    const auto rq = bfgs_minimize(quad, oracle::random_vector(6, rng), options);
    const double quad_err = (rq.z - q.ldlt().solve(c)).cwiseAbs().maxCoeff();

    const Objective rosen = [](const Vector& z, Vector& g) {
        const double a = 1.0 - z(0);
        const double d = z(1) - z(0) * z(0);
        g.resize(2);
        g(0) = -2.0 * a - 400.0 * z(0) * d;
        g(1) = 200.0 * d;
        return a * a + 100.0 * d * d;
    };
    options.max_iterations = 500;
    const auto rr = bfgs_minimize(rosen, Vector{{-1.2, 1.0}}, options);
    const double rosen_err = (rr.z - Vector{{1.0, 1.0}}).norm();

    v.detail << "quadratic error " << quad_err << " in " << rq.iterations << " iterations, rosenbrock error "
             << rosen_err;
    v.require(quad_err <= 1e-8, "quadratic within 1e-8");
    v.require(rq.iterations <= 50, "at most 50 iterations");
    v.require(rosen_err <= 1e-6, "rosenbrock within 1e-6");
    v.require(non_increasing(rq.history) && non_increasing(rr.history), "non-increasing objective");
}

void admm_checks(Verdict& v)
{
    synth::GroundTruth gt;
    gt.height = 4;
    gt.width = 4;
    gt.base_endmembers = synth::gen_procedural_endmembers(30, 3, 6);
    gt.abundances = synth::gen_abundance_maps(4, 4, 3, 7);
    synth::VariabilityModel vm;
    vm.kind = synth::VariabilityKind::piecewise_linear;
    gt.endmembers = synth::apply_variability(gt.base_endmembers, vm, 4, 4, 8);
    const HyperCube cube = synth::gen_cube(gt, {25.0, 9}).cube;
    const AbundanceMatrix init(Matrix::Constant(3, 16, 1.0 / 3.0));

    AdmmConfig config;
    config.lambda_a = 0.0;
    config.max_iterations = 5000;
    config.primal_tolerance = 1e-9;
    config.dual_tolerance = 1e-9;
    const auto r = solve_a_step(cube, gt.endmembers, init, config);
    double fcls_dev = 0.0;
    for (std::size_t n = 0; n < 16; ++n) {
        const Vector ref = fcls(cube.pixel(n), gt.endmembers.slice(n));
        fcls_dev = std::max(fcls_dev, (r.abundances.matrix().col(static_cast<Eigen::Index>(n)) - ref).cwiseAbs().maxCoeff());
    }

    double lagrangian_rise = -std::numeric_limits<double>::infinity();
    bool feasible = true;
    for (double lambda : {0.0, 0.01, 0.1, 1.0}) {
        AdmmConfig c;
        c.lambda_a = lambda;
        const auto s = solve_a_step(cube, gt.endmembers, init, c);
        for (std::size_t i = 0; i < s.lagrangian_after.size(); ++i) {
            lagrangian_rise = std::max(lagrangian_rise, s.lagrangian_after[i] - s.lagrangian_before[i]);
        }
        for (Eigen::Index n = 0; n < 16; ++n) {
            feasible = feasible && on_simplex(s.abundances.matrix().col(n));
        }
    }
    v.detail << "max deviation from fcls " << fcls_dev << ", max lagrangian rise " << lagrangian_rise;
    v.require(fcls_dev <= 1e-4, "matches fcls within 1e-4");
    v.require(lagrangian_rise <= 1e-8, "lagrangian non-increasing");
    v.require(feasible, "simplex-feasible output");
}

void spatial_operators(Verdict& v)
{
    std::mt19937_64 rng(10);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t h = 1 + rng() % 7;
        const std::size_t w = 1 + rng() % 7;
        const auto n = static_cast<Eigen::Index>(h * w);
        const Matrix a = oracle::random_matrix(3, n, rng);
        const Matrix g = oracle::random_matrix(3, n, rng);
        const auto dot = [](const Matrix& x, const Matrix& y) { return (x.array() * y.array()).sum(); };
        const double lh = dot(horizontal_gradient(a, h, w), g);
        const double rh = dot(a, horizontal_gradient_adjoint(g, h, w));
        const double lv = dot(vertical_gradient(a, h, w), g);
        const double rv = dot(a, vertical_gradient_adjoint(g, h, w));
        worst = std::max({worst, std::abs(lh - rh) / std::max(1.0, std::abs(lh)),
                          std::abs(lv - rv) / std::max(1.0, std::abs(lv))});
    }
    bool zero = true;
    for (double c : {0.0, 0.3, -2.5, 1e6}) {
        const Matrix a = Matrix::Constant(2, 35, c);
        const auto s = spatial_gradients(a, 5, 7);
        zero = zero && (s.horizontal.array() == 0.0).all() && (s.vertical.array() == 0.0).all();
    }
    v.detail << "max adjoint mismatch " << worst;
    v.require(worst <= 1e-10, "adjoint within 1e-10");
    v.require(zero, "constant maps give zero gradients");
}

void vae_checks(Verdict& v)
{
    const bool kl = nn::kl_gauss(Vector::Zero(3), Vector::Zero(3)) == 0.0 &&
                    nn::kl_gauss(Vector::Ones(1), Vector::Zero(1)) == 0.5;
    std::mt19937_64 rng(11);
    const Vector x = oracle::random_vector(50, rng, 0.1, 0.9);
    Matrix spectra(50, 12);
    spectra.colwise() = x;
    nn::TrainConfig config;
    config.epochs = 50;
    config.seed = 12;
    const auto first = nn::train_vae(spectra, config, 2);
    const auto second = nn::train_vae(spectra, config, 2);
    const double err = (first.model.decode(first.model.encode_mean(x)) - x).cwiseAbs().maxCoeff();
    const bool same = nn::encode_vae(first.model) == nn::encode_vae(second.model) &&
                      first.loss_history == second.loss_history;
    v.detail << "max per-band reconstruction error " << err;
    v.require(kl, "closed-form KL cases");
    v.require(err < 0.02, "reconstruction below 0.02");
    v.require(same, "bit-reproducible training");
}

// 20x20, L=50, P=3, 30 dB, piecewise-linear (DC1-style) variability.
struct Dc1Scene {
    synth::GroundTruth gt;
    HyperCube cube;
};

Dc1Scene dc1_scene(std::uint64_t s)
{
    Dc1Scene scene;
    scene.gt.height = 20;
    scene.gt.width = 20;
    scene.gt.base_endmembers = synth::gen_procedural_endmembers(50, 3, s);
    scene.gt.abundances = synth::gen_abundance_maps(20, 20, 3, s + 100);
    synth::VariabilityModel vm;
    vm.kind = synth::VariabilityKind::piecewise_linear;
    scene.gt.endmembers = synth::apply_variability(scene.gt.base_endmembers, vm, 20, 20, s + 200);
    scene.cube = synth::gen_cube(scene.gt, {30.0, s + 300}).cube;
    return scene;
}

UnmixConfig dc1_config(std::uint64_t s)
{
    UnmixConfig config;
    config.seed = s;
    config.lambda_a = 0.05;
    config.lambda_z = 0.1;
    return config;
}

void end_to_end(Verdict& v)
{
    std::vector<double> ours;
    std::vector<double> baseline;
    for (std::uint64_t s = 1; s <= 3; ++s) {
        const auto scene = dc1_scene(s);
        const auto r = run_deepgun(scene.cube, dc1_config(s));
        const auto fcls_em = EndmemberTensor::replicate(r.reference, scene.cube.pixel_count());
        baseline.push_back(evaluate_unmixing(scene.gt.abundances, scene.gt.endmembers, scene.cube,
                                             r.initial_abundances, fcls_em)
                               .nrmse_a);
        ours.push_back(
            evaluate_unmixing(scene.gt.abundances, scene.gt.endmembers, scene.cube, r.abundances, r.endmembers)
                .nrmse_a);
        v.detail << "seed " << s << ": " << ours.back() << " vs fcls " << baseline.back() << "; ";
    }
    const double ratio = median(ours) / median(baseline);
    v.detail << "median ratio " << ratio;
    v.require(ratio < 0.7, "median DeepGUn NRMSE_A below 0.7 x FCLS");
}

// Parses "iter=<i> J=<j> dA=<a> dZ=<z>" lines.
std::vector<double> logged_changes(const std::string& log)
{
    std::vector<double> out;
    std::istringstream in(log);
    std::string line;
    while (std::getline(in, line)) {
        const auto a = line.find("dA=");
        const auto z = line.find("dZ=");
        if (a != std::string::npos && z != std::string::npos) {
            out.push_back(std::max(std::stod(line.substr(a + 3)), std::stod(line.substr(z + 3))));
        }
    }
    return out;
}

void alternating_contract(Verdict& v)
{
    int cubes = 0;
    double worst_rise = -std::numeric_limits<double>::infinity();
    bool stops = true;
    for (std::uint64_t s = 1; s <= 4; ++s) {
        for (bool variability : {false, true}) {
            synth::GroundTruth gt;
            gt.height = 8;
            gt.width = 8;
            gt.base_endmembers = synth::gen_procedural_endmembers(24, 3, s);
            gt.abundances = synth::gen_abundance_maps(8, 8, 3, s + 10);
            synth::VariabilityModel vm;
            if (variability) vm.kind = synth::VariabilityKind::piecewise_linear;
            gt.endmembers = synth::apply_variability(gt.base_endmembers, vm, 8, 8, s + 20);
            const HyperCube cube = synth::gen_cube(gt, {variability ? 25.0 : 35.0, s + 30}).cube;

            UnmixConfig config;
            config.seed = s;
            config.train.epochs = 200;
            config.lambda_a = variability ? 0.05 : 0.01;
            std::ostringstream log;
            config.log = &log;
            const auto r = run_deepgun(cube, config);
            ++cubes;
            for (std::size_t i = 1; i < r.objective_history.size(); ++i) {
                worst_rise = std::max(worst_rise, r.objective_history[i] - r.objective_history[i - 1]);
            }
            const auto changes = logged_changes(log.str());
            const bool count_ok = r.iterations_run >= 1 && r.iterations_run <= 10 &&
                                  changes.size() == static_cast<std::size_t>(r.iterations_run);
            bool rule_ok = count_ok;
            for (std::size_t i = 0; rule_ok && i + 1 < changes.size(); ++i) {
                rule_ok = changes[i] >= config.outer_rel_tol;
            }
            if (rule_ok && r.iterations_run < 10) {
                rule_ok = changes.back() < config.outer_rel_tol;
            }
            stops = stops && rule_ok;
            v.detail << r.iterations_run << (r.iterations_run < 10 ? "r " : " ");
        }
    }
    v.detail << "iterations over " << cubes << " cubes (r = relative-change stop), max objective rise " << worst_rise;
    v.require(worst_rise <= 1e-6, "objective non-increasing within 1e-6");
    v.require(stops, "stops at 10 iterations or on the relative-change rule");
}

void latent_sweep(Verdict& v)
{
    std::vector<double> k2;
    std::vector<double> k8;
    for (std::uint64_t s = 1; s <= 3; ++s) {
        const auto scene = dc1_scene(s);
        const auto rows = latent_dim_sweep(scene.cube, scene.gt, dc1_config(s), {2, 8});
        k2.push_back(rows[0].nrmse_a);
        k8.push_back(rows[1].nrmse_a);
        v.detail << "seed " << s << ": K=2 " << rows[0].nrmse_a << ", K=8 " << rows[1].nrmse_a << "; ";
    }
    v.detail << "medians " << median(k2) << " vs " << median(k8);
    v.require(median(k2) <= median(k8), "median at K=2 not above K=8");
}

void replay_identity(Verdict& v)
{
    const fs::path dir = fs::temp_directory_path() / ("hsu_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    const auto p = [&](const std::string& name) { return (dir / name).string(); };
    std::ostringstream sink;
    const auto cli = [&](const std::vector<std::string>& args) { return cli::run_cli(args, sink, sink); };

    const std::vector<std::vector<std::string>> runs{
        {"synth", "--height", "8", "--width", "8", "--bands", "24", "--seed", "4", "--out-dir", p("synth")},
        {"extract", "--cube", p("synth/cube.hcube"), "--out-dir", p("extract")},
        {"train", "--bundles", p("extract/bundle_0.csv"), p("extract/bundle_1.csv"), p("extract/bundle_2.csv"),
         "--epochs", "100", "--m0-csv", p("extract/m0.csv"), "--out-dir", p("train")},
        {"unmix", "--cube", p("synth/cube.hcube"), "--epochs", "100", "--save-models", "--threads", "4", "--out-dir",
         p("unmix")},
        {"unmix", "--cube", p("synth/cube.hcube"), "--models", p("train/model_0.vaem"), p("train/model_1.vaem"),
         p("train/model_2.vaem"), "--m0-csv", p("extract/m0.csv"), "--out-dir", p("reuse")},
        {"eval", "--abundances", p("unmix/abundances.csv"), "--em-tensor", p("unmix/em_tensor.hcube"),
         "--truth-abundances", p("synth/abundances.csv"), "--truth-em-tensor", p("synth/em_tensor.hcube"), "--cube",
         p("synth/cube.hcube"), "--out-dir", p("eval")},
        {"render", "--abundances", p("unmix/abundances.csv"), "--height", "8", "--width", "8", "--colormap",
         "--out-dir", p("render")},
        {"sweep", "--cube", p("synth/cube.hcube"), "--truth-abundances", p("synth/abundances.csv"),
         "--truth-em-tensor", p("synth/em_tensor.hcube"), "--latent-dims", "1", "3", "--epochs", "50", "--max-iter",
         "2", "--out-dir", p("sweep")},
    };
    int replayed = 0;
    for (const auto& args : runs) {
        const std::string out_dir = args.back();
        if (cli(args) != cli::exit_ok) {
            v.require(false, args.front() + " run");
            continue;
        }
        // a different worker count must not change any byte
        const int code = cli({"replay", out_dir + "/manifest.txt", "--out-dir", out_dir + "_replay", "--threads", "1",
                              "--check"});
        v.require(code == cli::exit_ok, args.front() + " replay identical");
        ++replayed;
    }
    const std::string report = sink.str();
    const auto files = static_cast<long>(std::count(report.begin(), report.end(), '\n'));
    v.detail << replayed << " manifests replayed; " << (report.find("differs") == std::string::npos ? "no" : "some")
             << " differing files among " << files << " output lines";
    fs::remove_all(dir);
}

} // namespace

int main(int argc, char** argv)
{
    const std::vector<Criterion> criteria{
        {1, "metric identities", 1.0, metric_identities},
        {2, "simplex projection oracle", 5.0, simplex_projection},
        {3, "fcls oracle", 10.0, fcls_oracle},
        {4, "gradient checks", 10.0, gradient_checks},
        {5, "bfgs", 5.0, bfgs_checks},
        {6, "admm abundance step", 30.0, admm_checks},
        {7, "spatial operators", 0.0, spatial_operators},
        {8, "vae", 60.0, vae_checks},
        {9, "end-to-end dc1-style analogue", 600.0, end_to_end},
        {10, "alternating minimisation contract", 0.0, alternating_contract},
        {11, "latent dimension sweep", 1800.0, latent_sweep},
        {12, "manifest replay reproducibility", 0.0, replay_identity},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        selected.insert(std::atoi(argv[i]));
    }

    int failures = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && selected.count(c.id) == 0) {
            continue;
        }
        Verdict v;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.body(v);
        } catch (const std::exception& e) {
            v.require(false, std::string("exception: ") + e.what());
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.limit_seconds > 0.0) {
            v.require(seconds < c.limit_seconds, "runtime limit " + std::to_string(c.limit_seconds) + " s");
        }
        failures += v.pass ? 0 : 1;
        char time_text[32];
        std::snprintf(time_text, sizeof time_text, "%.2f s", seconds);
        std::cout << (v.pass ? "PASS" : "FAIL") << ' ' << c.id << ' ' << c.title << " (" << time_text
                  << "): " << v.detail.str() << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
