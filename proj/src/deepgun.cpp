#include "hsu/deepgun.hpp"

#include "hsu/metrics.hpp"
#include "hsu/parallel.hpp"
#include "hsu/simplex.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace hsu {

namespace {

constexpr double kRelchangeFloor = 1e-12;

// Adds the lifetime of the object to the named entry.
class StageClock {
public:
    StageClock(std::vector<StageTiming>& timings, const char* stage)
        : timings_(timings), stage_(stage), start_(std::chrono::steady_clock::now())
    {
    }
    StageClock(const StageClock&) = delete;
    StageClock& operator=(const StageClock&) = delete;
    ~StageClock()
    {
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
        auto it = std::find_if(timings_.begin(), timings_.end(), [&](const StageTiming& t) { return t.stage == stage_; });
        if (it == timings_.end()) {
            timings_.push_back({stage_, 0.0});
            it = timings_.end() - 1;
        }
        it->seconds += elapsed.count();
    }

private:
    std::vector<StageTiming>& timings_;
    const char* stage_;
    std::chrono::steady_clock::time_point start_;
};

template <class Fn>
auto run_stage(std::vector<StageTiming>& timings, const char* stage, Fn&& fn) -> decltype(fn())
{
    const StageClock clock(timings, stage);
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

double relchange(const double* cur, const double* prev, std::size_t n)
{
    const ConstVectorMap c(cur, static_cast<Eigen::Index>(n));
    const ConstVectorMap p(prev, static_cast<Eigen::Index>(n));
    return (c - p).norm() / std::max(p.norm(), kRelchangeFloor);
}

LatentTensor replicate_codes(const LatentReference& z0, std::size_t pixels)
{
    LatentTensor z(pixels, z0.materials(), z0.latent_dim());
    for (std::size_t n = 0; n < pixels; ++n) {
        z.slice(n) = z0.matrix();
    }
    return z;
}

} // namespace

StageError::StageError(std::string stage, const std::string& what)
    : std::runtime_error(stage + ": " + what), stage_(std::move(stage))
{
}

void UnmixConfig::validate() const
{
    if (materials < 1 || latent_dim < 1) {
        throw InvariantError("unmixing needs at least one material and a positive latent dimension");
    }
    if (!(lambda_a >= 0.0) || !(lambda_z >= 0.0) || !std::isfinite(lambda_a) || !std::isfinite(lambda_z)) {
        throw InvariantError("regularisation weights must be finite and non-negative");
    }
    if (max_outer_iterations < 1 || !(outer_rel_tol > 0.0) || !(z_tolerance > 0.0) || z_max_iterations < 1) {
        throw InvariantError("iteration limits and tolerances must be positive");
    }
    admm.validate();
    train.validate();
}

std::size_t default_pure_count(std::size_t pixel_count)
{
    return std::max<std::size_t>(3, (pixel_count * 100 + 2450) / 4900);
}

std::vector<const LatentGenerator*> as_generators(const std::vector<nn::VaeModel>& models)
{
    std::vector<const LatentGenerator*> out;
    out.reserve(models.size());
    for (const auto& m : models) {
        out.push_back(&m);
    }
    return out;
}

EndmemberTensor decode_tensor(GeneratorSet models, const LatentTensor& z)
{
    if (models.size() != z.materials()) {
        throw InvariantError("decode_tensor: one model per material required");
    }
    EndmemberTensor em(models.front()->bands(), models.size(), z.pixel_count());
    for (std::size_t n = 0; n < z.pixel_count(); ++n) {
        em.slice(n) = decode_endmembers(models, z.slice(n));
    }
    return em;
}

double objective(const HyperCube& cube, GeneratorSet models, const AbundanceMatrix& a, const LatentTensor& z,
                 const LatentReference& z0, double lambda_a, double lambda_z)
{
    const std::size_t N = cube.pixel_count();
    if (a.pixel_count() != N || z.pixel_count() != N || a.materials() != models.size() ||
        z.materials() != models.size() || z0.materials() != models.size() || z0.latent_dim() != z.latent_dim()) {
        throw InvariantError("objective: inputs disagree in shape");
    }
    AbundanceMatrix::validate(a.matrix());
    double data = 0.0;
    double latent = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
        const Matrix m = decode_endmembers(models, z.slice(n));
        data += (cube.pixel(n) - m * a.matrix().col(static_cast<Eigen::Index>(n))).squaredNorm();
        latent += (z.slice(n) - z0.matrix()).squaredNorm();
    }
    const auto grads = spatial_gradients(a.matrix(), cube.height(), cube.width());
    return 0.5 * data + lambda_a * (l21_norm(grads.horizontal) + l21_norm(grads.vertical)) + 0.5 * lambda_z * latent;
}

UnmixResult run_deepgun(const HyperCube& input_cube, const UnmixConfig& config, const UnmixInputs& inputs)
{
    config.validate();
    const std::size_t N = input_cube.pixel_count();
    const std::size_t P = config.materials;
    const std::size_t K = config.latent_dim;
    if (N == 0) {
        throw StageError("input", "empty cube");
    }

    UnmixResult result;
    const auto stage = [&](const char* name, auto&& fn) -> decltype(auto) {
        return run_stage(result.stage_seconds, name, fn);
    };
    const double peak = *std::max_element(input_cube.data().begin(), input_cube.data().end());
    result.reflectance_scale = peak > 1.0 ? peak : 1.0;
    HyperCube cube = input_cube;
    if (result.reflectance_scale != 1.0) {
        for (double& v : cube.data()) {
            v /= result.reflectance_scale;
        }
    }

    result.reference = stage("reference", [&] {
        if (inputs.reference) {
            if (inputs.reference->materials() != P || inputs.reference->bands() != cube.bands()) {
                throw InvariantError("supplied reference matrix has the wrong shape");
            }
            return EndmemberMatrix(inputs.reference->matrix() / result.reflectance_scale);
        }
        return vca(cube, P, config.seed).endmembers;
    });

    result.initial_abundances = stage("fcls", [&] { return fcls_unmix(cube, result.reference); });

    if (inputs.models) {
        result.models = stage("models", [&] {
            if (inputs.models->size() != P) {
                throw InvariantError("expected " + std::to_string(P) + " models");
            }
            for (const auto& m : *inputs.models) {
                if (m.bands() != cube.bands() || m.latent_dim() != K) {
                    throw InvariantError("supplied model shape does not match the cube and latent dimension");
                }
            }
            return *inputs.models;
        });
    } else {
        std::vector<Matrix> training;
        if (inputs.library) {
            training = stage("library", [&] {
                if (inputs.library->size() != P) {
                    throw InvariantError("library must hold one spectrum set per material");
                }
                std::vector<Matrix> out;
                for (const auto& s : *inputs.library) {
                    out.push_back(s / result.reflectance_scale);
                }
                return out;
            });
        } else {
            result.bundles = stage("extraction", [&] {
                const std::size_t count = config.pure_count > 0 ? config.pure_count : default_pure_count(N);
                return extract_pure_pixels(cube, result.reference, count);
            });
            for (const auto& b : result.bundles) {
                training.push_back(b.spectra);
            }
        }
        stage("training", [&] {
            for (std::size_t p = 0; p < P; ++p) {
                if (training[p].cols() < 3) {
                    throw InvariantError("degenerate bundle for material " + std::to_string(p) + ": " +
                                         std::to_string(training[p].cols()) + " spectra");
                }
                auto train = config.train;
                train.seed = config.train.seed + p;
                auto trained = nn::train_vae(training[p].cwiseMax(0.0).cwiseMin(1.0), train, K);
                result.models.push_back(std::move(trained.model));
                result.training_loss.push_back(std::move(trained.loss_history));
            }
        });
    }
    const auto generators = as_generators(result.models);
    const GeneratorSet models(generators);

    result.latent_reference = stage("latent-reference", [&] { return latent_reference(result.models, result.reference); });

    AdmmConfig admm = config.admm;
    admm.lambda_a = config.lambda_a;
    BfgsOptions bfgs;
    bfgs.relative_tolerance = config.z_tolerance;
    bfgs.max_iterations = config.z_max_iterations;

    AbundanceMatrix a = result.initial_abundances;
    LatentTensor z = replicate_codes(result.latent_reference, N);
    const auto eval_j = [&](const AbundanceMatrix& a_, const LatentTensor& z_) {
        return objective(cube, models, a_, z_, result.latent_reference, config.lambda_a, config.lambda_z);
    };
    double j = stage("objective", [&] { return eval_j(a, z); });
    result.objective_history.push_back(j);
    result.half_step_history.push_back(j);

    for (int it = 1; it <= config.max_outer_iterations; ++it) {
        LatentTensor z_next = z;
        stage("latent-step", [&] {
            parallel_for(N, config.threads, [&](std::size_t n) {
                try {
                    const auto an = a.matrix().col(static_cast<Eigen::Index>(n));
                    const auto res = solve_z_step(cube.pixel(n), an, models, z.slice(n),
                                                  result.latent_reference.matrix(), config.lambda_z, bfgs);
                    const double start = latent_objective(cube.pixel(n), an, models, z.slice(n),
                                                          result.latent_reference.matrix(), config.lambda_z, nullptr);
                    if (res.value <= start) {
                        z_next.slice(n) = res.z;
                    }
                } catch (const std::exception& e) {
                    throw NumericalError("pixel " + std::to_string(n) + ": " + e.what());
                }
            });
        });
        const double j_z = stage("objective", [&] { return eval_j(a, z_next); });
        result.half_step_history.push_back(j_z);

        const EndmemberTensor em = decode_tensor(models, z_next);
        AbundanceMatrix a_next =
            stage("abundance-step", [&] { return solve_a_step(cube, em, a, admm).abundances; });
        double j_a = stage("objective", [&] { return eval_j(a_next, z_next); });
        if (j_a > j_z) {
            // ADMM stopped short of improving on the warm start
            a_next = a;
            j_a = j_z;
        }
        result.half_step_history.push_back(j_a);
        result.objective_history.push_back(j_a);

        const double d_a = relchange(a_next.matrix().data(), a.matrix().data(), P * N);
        const double d_z = relchange(z_next.data().data(), z.data().data(), z.data().size());
        a = std::move(a_next);
        z = std::move(z_next);
        result.iterations_run = it;
        if (config.log != nullptr) {
            *config.log << "iter=" << it << " J=" << j_a << " dA=" << d_a << " dZ=" << d_z << '\n';
        }
        if (std::max(d_a, d_z) < config.outer_rel_tol) {
            break;
        }
    }

    result.abundances = std::move(a);
    result.latents = std::move(z);
    result.endmembers = decode_tensor(models, result.latents);
    if (result.reflectance_scale != 1.0) {
        for (double& v : result.endmembers.data()) {
            v *= result.reflectance_scale;
        }
    }
    return result;
}

std::vector<SweepRow> latent_dim_sweep(const HyperCube& cube, const synth::GroundTruth& gt,
                                       const UnmixConfig& config, const std::vector<std::size_t>& latent_dims)
{
    std::vector<SweepRow> rows;
    for (std::size_t k : latent_dims) {
        auto cfg = config;
        cfg.latent_dim = k;
        const auto res = run_deepgun(cube, cfg);
        const auto perm = match_materials(gt.endmembers.mean_signatures(), res.endmembers.mean_signatures());
        const auto a = permute_materials(res.abundances, perm);
        rows.push_back({k, nrmse(gt.abundances.matrix(), a.matrix())});
    }
    return rows;
}

} // namespace hsu
