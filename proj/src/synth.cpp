#include "hsu/synth.hpp"

#include "hsu/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace hsu::synth {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

std::vector<double> gaussian_kernel(double sigma)
{
    if (sigma <= 0.0) {
        return {1.0};
    }
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    }
    const double s = std::accumulate(k.begin(), k.end(), 0.0);
    for (double& v : k) {
        v /= s;
    }
    return k;
}

// Convolves `count` strided sequences of length `len` with a Gaussian, replicating the edges.
void smooth_axis(std::vector<double>& data, std::size_t len, std::size_t stride,
                 const std::vector<std::size_t>& starts, double sigma)
{
    const auto kernel = gaussian_kernel(sigma);
    const int radius = static_cast<int>(kernel.size() / 2);
    std::vector<double> line(len);
    for (std::size_t start : starts) {
        for (std::size_t i = 0; i < len; ++i) {
            line[i] = data[start + i * stride];
        }
        for (std::size_t i = 0; i < len; ++i) {
            double acc = 0.0;
            for (int j = -radius; j <= radius; ++j) {
                const auto src = std::clamp<long>(static_cast<long>(i) + j, 0, static_cast<long>(len) - 1);
                acc += kernel[j + radius] * line[static_cast<std::size_t>(src)];
            }
            data[start + i * stride] = acc;
        }
    }
}

// Field laid out as [row][col][channel]; smooths rows/cols with sigma_xy and channels with sigma_c.
void smooth_field(std::vector<double>& field, std::size_t height, std::size_t width, std::size_t channels,
                  double sigma_xy, double sigma_c)
{
    std::vector<std::size_t> starts;
    // along columns (horizontal)
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < channels; ++c) {
            starts.push_back(r * width * channels + c);
        }
    }
    smooth_axis(field, width, channels, starts, sigma_xy);
    starts.clear();
    for (std::size_t col = 0; col < width; ++col) {
        for (std::size_t c = 0; c < channels; ++c) {
            starts.push_back(col * channels + c);
        }
    }
    smooth_axis(field, height, width * channels, starts, sigma_xy);
    if (channels > 1 && sigma_c > 0.0) {
        starts.clear();
        for (std::size_t n = 0; n < height * width; ++n) {
            starts.push_back(n * channels);
        }
        smooth_axis(field, channels, 1, starts, sigma_c);
    }
}

std::vector<double> white_noise(std::size_t count, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(count);
    for (double& x : v) {
        x = normal(rng);
    }
    return v;
}

Vector procedural_spectrum(std::size_t bands, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> bump_count(3, 6);
    const int bumps = bump_count(rng);
    std::vector<double> centers(bumps), widths(bumps), amps(bumps);
    for (int j = 0; j < bumps; ++j) {
        centers[j] = unit(rng);
        widths[j] = 0.04 + 0.16 * unit(rng);
        amps[j] = 0.2 + 0.8 * unit(rng);
    }
    const double slope = -0.5 + unit(rng);
    Vector s(static_cast<Eigen::Index>(bands));
    for (std::size_t l = 0; l < bands; ++l) {
        const double x = static_cast<double>(l) / static_cast<double>(bands - 1);
        double v = slope * x;
        for (int j = 0; j < bumps; ++j) {
            const double d = (x - centers[j]) / widths[j];
            v += amps[j] * std::exp(-0.5 * d * d);
        }
        s(static_cast<Eigen::Index>(l)) = v;
    }
    const double lo = 0.05 + 0.2 * unit(rng);
    const double hi = 0.6 + 0.35 * unit(rng);
    const double smin = s.minCoeff();
    const double range = s.maxCoeff() - smin;
    if (range <= 0.0) {
        s.setConstant(0.5 * (lo + hi));
    } else {
        s = ((s.array() - smin) / range * (hi - lo) + lo).matrix();
    }
    return s.cwiseMax(0.05).cwiseMin(0.95);
}

std::size_t ceil_fraction(double fraction, std::size_t n)
{
    return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-12));
}

} // namespace

std::string to_string(VariabilityKind kind)
{
    switch (kind) {
    case VariabilityKind::none:
        return "none";
    case VariabilityKind::piecewise_linear:
        return "dc1";
    case VariabilityKind::smooth_scaling:
        return "dc2";
    case VariabilityKind::geometry:
        return "dc3";
    }
    return "unknown";
}

VariabilityKind parse_variability(const std::string& name)
{
    if (name == "none") {
        return VariabilityKind::none;
    }
    if (name == "dc1") {
        return VariabilityKind::piecewise_linear;
    }
    if (name == "dc2") {
        return VariabilityKind::smooth_scaling;
    }
    if (name == "dc3") {
        return VariabilityKind::geometry;
    }
    throw InvariantError("unknown variability model '" + name + "'");
}

void VariabilityModel::validate() const
{
    if (!(piecewise_amplitude >= 0.0 && piecewise_amplitude < 1.0)) {
        throw InvariantError("piecewise amplitude must lie in [0, 1)");
    }
    if (piecewise_breakpoints < 2) {
        throw InvariantError("piecewise model needs at least 2 breakpoints");
    }
    if (!(smooth_amplitude >= 0.0 && std::isfinite(smooth_amplitude))) {
        throw InvariantError("smooth amplitude must be finite and non-negative");
    }
    if (!(smooth_floor > 0.0 && smooth_floor <= 1.0)) {
        throw InvariantError("smooth floor must lie in (0, 1]");
    }
    if (!(direct_weight >= 0.0 && diffuse_weight > 0.0)) {
        throw InvariantError("geometry weights must be non-negative with a positive diffuse term");
    }
    if (!(max_angle >= 0.0 && max_angle < kPi / 2.0)) {
        throw InvariantError("maximum illumination angle must lie in [0, pi/2)");
    }
}

EndmemberMatrix gen_procedural_endmembers(std::size_t bands, std::size_t materials, std::uint64_t seed)
{
    if (bands < 8) {
        throw InvariantError("procedural endmembers need at least 8 bands");
    }
    if (materials < 1 || materials > bands) {
        throw InvariantError("material count must lie in [1, bands]");
    }
    constexpr int kMaxAttempts = 100;
    constexpr double kMinAngle = 0.1;
    auto rng = make_rng(seed, 0x454d);
    Matrix m(static_cast<Eigen::Index>(bands), static_cast<Eigen::Index>(materials));
    for (std::size_t p = 0; p < materials; ++p) {
        bool accepted = false;
        for (int attempt = 0; attempt < kMaxAttempts && !accepted; ++attempt) {
            const Vector s = procedural_spectrum(bands, rng);
            accepted = true;
            for (std::size_t q = 0; q < p; ++q) {
                if (spectral_angle(s, m.col(static_cast<Eigen::Index>(q))) < kMinAngle) {
                    accepted = false;
                    break;
                }
            }
            if (accepted) {
                m.col(static_cast<Eigen::Index>(p)) = s;
            }
        }
        if (!accepted) {
            throw NumericalError("could not generate " + std::to_string(materials) +
                                 " separated spectra after 100 attempts");
        }
    }
    return EndmemberMatrix(std::move(m));
}

AbundanceMatrix gen_abundance_maps(std::size_t height, std::size_t width, std::size_t materials,
                                   std::uint64_t seed)
{
    if (materials < 1 || height == 0 || width == 0) {
        throw InvariantError("abundance maps need positive dimensions and at least one material");
    }
    const std::size_t n_pixels = height * width;
    const auto P = static_cast<Eigen::Index>(materials);
    if (materials == 1) {
        return AbundanceMatrix(Matrix::Ones(1, static_cast<Eigen::Index>(n_pixels)));
    }
    const double sigma = static_cast<double>(std::min(height, width)) / 8.0;
    Matrix fields(P, static_cast<Eigen::Index>(n_pixels));
    for (Eigen::Index p = 0; p < P; ++p) {
        auto rng = make_rng(seed, 0x4142 + static_cast<std::uint64_t>(p));
        auto field = white_noise(n_pixels, rng);
        smooth_field(field, height, width, 1, sigma, 0.0);
        const double fmin = *std::min_element(field.begin(), field.end());
        for (std::size_t n = 0; n < n_pixels; ++n) {
            fields(p, static_cast<Eigen::Index>(n)) = field[n] - fmin;
        }
    }

    Matrix a(P, static_cast<Eigen::Index>(n_pixels));
    for (std::size_t n = 0; n < n_pixels; ++n) {
        const auto col = fields.col(static_cast<Eigen::Index>(n));
        const double s = col.sum();
        if (s > 0.0) {
            a.col(static_cast<Eigen::Index>(n)) = col / s;
        } else {
            a.col(static_cast<Eigen::Index>(n)).setConstant(1.0 / static_cast<double>(materials));
        }
    }

    // The field peaks of each material become pure pixels, first come first served.
    const std::size_t pure_count = ceil_fraction(0.02, n_pixels);
    std::vector<bool> claimed(n_pixels, false);
    std::vector<std::size_t> order(n_pixels);
    for (Eigen::Index p = 0; p < P; ++p) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
            return fields(p, static_cast<Eigen::Index>(i)) > fields(p, static_cast<Eigen::Index>(j));
        });
        std::size_t taken = 0;
        for (std::size_t n : order) {
            if (taken == pure_count) {
                break;
            }
            if (claimed[n]) {
                continue;
            }
            claimed[n] = true;
            a.col(static_cast<Eigen::Index>(n)).setZero();
            a(p, static_cast<Eigen::Index>(n)) = 1.0;
            ++taken;
        }
    }
    return AbundanceMatrix(std::move(a));
}

EndmemberTensor apply_variability(const EndmemberMatrix& m0, const VariabilityModel& model,
                                  std::size_t height, std::size_t width, std::uint64_t seed)
{
    model.validate();
    const std::size_t n_pixels = height * width;
    const std::size_t L = m0.bands();
    const std::size_t P = m0.materials();
    auto em = EndmemberTensor::replicate(m0, n_pixels);

    switch (model.kind) {
    case VariabilityKind::none:
        break;
    case VariabilityKind::piecewise_linear: {
        auto rng = make_rng(seed, 0x4443'31);
        std::uniform_real_distribution<double> position(0.0, static_cast<double>(L - 1));
        std::uniform_real_distribution<double> value(1.0 - model.piecewise_amplitude,
                                                     1.0 + model.piecewise_amplitude);
        const auto k = static_cast<std::size_t>(model.piecewise_breakpoints);
        std::vector<std::pair<double, double>> knots(k);
        for (std::size_t n = 0; n < n_pixels; ++n) {
            auto slice = em.slice(n);
            for (std::size_t p = 0; p < P; ++p) {
                for (auto& knot : knots) {
                    knot.first = position(rng);
                    knot.second = value(rng);
                }
                std::sort(knots.begin(), knots.end());
                std::size_t seg = 0;
                for (std::size_t l = 0; l < L; ++l) {
                    const double x = static_cast<double>(l);
                    double factor = 0.0;
                    if (x <= knots.front().first) {
                        factor = knots.front().second;
                    } else if (x >= knots.back().first) {
                        factor = knots.back().second;
                    } else {
                        while (knots[seg + 1].first < x) {
                            ++seg;
                        }
                        const auto [x0, y0] = knots[seg];
                        const auto [x1, y1] = knots[seg + 1];
                        const double t = x1 > x0 ? (x - x0) / (x1 - x0) : 0.0;
                        factor = y0 + t * (y1 - y0);
                    }
                    slice(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(p)) *= factor;
                }
            }
        }
        break;
    }
    case VariabilityKind::smooth_scaling: {
        const double image_size = static_cast<double>(std::min(height, width));
        for (std::size_t p = 0; p < P; ++p) {
            auto rng = make_rng(seed, 0x4443'32'00 + p);
            auto g = white_noise(n_pixels * L, rng);
            smooth_field(g, height, width, L, image_size / 6.0, static_cast<double>(L) / 10.0);
            const double mean = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
            double var = 0.0;
            for (double v : g) {
                var += (v - mean) * (v - mean);
            }
            const double sd = std::sqrt(var / static_cast<double>(g.size()));
            for (std::size_t n = 0; n < n_pixels; ++n) {
                auto slice = em.slice(n);
                for (std::size_t l = 0; l < L; ++l) {
                    const double z = sd > 0.0 ? (g[n * L + l] - mean) / sd : 0.0;
                    const double psi = std::max(model.smooth_floor, 1.0 + model.smooth_amplitude * z);
                    slice(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(p)) *= psi;
                }
            }
        }
        break;
    }
    case VariabilityKind::geometry: {
        auto rng = make_rng(seed, 0x4443'33);
        auto field = white_noise(n_pixels, rng);
        smooth_field(field, height, width, 1, static_cast<double>(std::min(height, width)) / 6.0, 0.0);
        const auto [lo, hi] = std::minmax_element(field.begin(), field.end());
        const double fmin = *lo;
        const double range = *hi - *lo;
        const double reference = model.direct_weight + model.diffuse_weight;
        for (std::size_t n = 0; n < n_pixels; ++n) {
            const double theta = range > 0.0 ? (field[n] - fmin) / range * model.max_angle : 0.0;
            const double psi = (model.direct_weight * std::cos(theta) + model.diffuse_weight) / reference;
            em.slice(n) *= psi;
        }
        break;
    }
    }
    return em;
}

HyperCube mix(const GroundTruth& gt)
{
    const std::size_t n_pixels = gt.height * gt.width;
    if (gt.endmembers.pixel_count() != n_pixels || gt.abundances.pixel_count() != n_pixels ||
        gt.endmembers.materials() != gt.abundances.materials()) {
        throw InvariantError("ground truth dimensions disagree");
    }
    HyperCube cube(gt.height, gt.width, gt.endmembers.bands());
    for (std::size_t n = 0; n < n_pixels; ++n) {
        cube.pixel(n) = gt.endmembers.slice(n) * gt.abundances.matrix().col(static_cast<Eigen::Index>(n));
    }
    return cube;
}

double measure_snr_db(const HyperCube& noisy, const HyperCube& clean)
{
    const double signal = clean.pixels().squaredNorm();
    const double noise = (noisy.pixels() - clean.pixels()).squaredNorm();
    if (noise == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(signal / noise);
}

SynthCube gen_cube(const GroundTruth& gt, const NoiseSpec& noise)
{
    if (std::isnan(noise.snr_db) || noise.snr_db == -std::numeric_limits<double>::infinity()) {
        throw InvariantError("snr_db must be finite or +inf");
    }
    SynthCube out{mix(gt), std::numeric_limits<double>::infinity()};
    if (std::isinf(noise.snr_db)) {
        return out;
    }
    auto rng = make_rng(noise.seed, 0x4e4f4953);
    auto e = white_noise(out.cube.data().size(), rng);
    ConstVectorMap ev(e.data(), static_cast<Eigen::Index>(e.size()));
    const double signal_energy = out.cube.pixels().squaredNorm();
    const double target_energy = signal_energy / std::pow(10.0, noise.snr_db / 10.0);
    const double scale = std::sqrt(target_energy / ev.squaredNorm());
    for (std::size_t i = 0; i < e.size(); ++i) {
        out.cube.data()[i] += scale * e[i];
    }
    out.measured_snr_db = measure_snr_db(out.cube, mix(gt));
    return out;
}

} // namespace hsu::synth
