#include "commands.hpp"

#include "manifest.hpp"
#include "render.hpp"

#include "hsu/deepgun.hpp"
#include "hsu/io.hpp"
#include "hsu/metrics.hpp"
#include "hsu/synth.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <type_traits>

namespace hsu::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestName = "manifest.txt";

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <class T>
struct is_vector : std::false_type {};
template <class T>
struct is_vector<std::vector<T>> : std::true_type {};

std::string to_text(const fs::path& p)
{
    return p.empty() ? std::string() : fs::absolute(p).lexically_normal().string();
}

std::string to_text(const std::string& s) { return s; }
std::string to_text(double v) { return format_double(v); }
std::string to_text(bool v) { return v ? "true" : "false"; }

template <class T>
    requires std::is_integral_v<T>
std::string to_text(T v)
{
    return std::to_string(v);
}

// Declares each field as a CLI option.
struct Binder {
    CLI::App* app;

    template <class T>
    void operator()(const char* name, T& field, const char* help) const
    {
        const std::string flag = std::string("--") + name;
        if constexpr (std::is_same_v<T, bool>) {
            app->add_flag(flag, field, help);
        } else {
            app->add_option(flag, field, help);
        }
    }
};

// Writes each field's resolved value into the manifest.
struct Recorder {
    Manifest* manifest;

    template <class T>
    void operator()(const char* name, const T& field, const char*) const
    {
        if constexpr (is_vector<T>::value) {
            for (const auto& v : field) {
                manifest->add(name, to_text(v));
            }
        } else {
            manifest->add(name, to_text(field));
        }
    }
};

struct Common {
    fs::path out_dir;
    unsigned threads = 0;

    template <class V>
    void visit(V&& v)
    {
        v("out-dir", out_dir, "Directory for output files and the manifest");
        v("threads", threads, "Worker threads (0 = available parallelism)");
    }
};

struct SynthParams : Common {
    std::size_t height = 20;
    std::size_t width = 20;
    std::size_t bands = 50;
    std::size_t materials = 3;
    std::string variability = "dc1";
    double snr_db = 30.0;
    std::uint64_t seed = 0;

    template <class V>
    void visit(V&& v)
    {
        v("height", height, "Image rows");
        v("width", width, "Image columns");
        v("bands", bands, "Spectral bands");
        v("materials", materials, "Number of endmembers");
        v("variability", variability, "Endmember variability: dc1, dc2, dc3 or none");
        v("snr-db", snr_db, "Signal-to-noise ratio in dB (inf for no noise)");
        v("seed", seed, "Random seed");
        Common::visit(v);
    }
};

struct ExtractParams : Common {
    fs::path cube;
    std::size_t materials = 3;
    std::size_t pure_count = 0;
    std::uint64_t seed = 0;
    fs::path m0_csv;

    template <class V>
    void visit(V&& v)
    {
        v("cube", cube, "Input .hcube");
        v("materials", materials, "Number of endmembers");
        v("pure-count", pure_count, "Pure pixels per material (0 = scale with image size)");
        v("seed", seed, "Seed for VCA");
        v("m0-csv", m0_csv, "Reference endmembers (L x P CSV) instead of VCA");
        Common::visit(v);
    }
};

struct TrainParams : Common {
    std::vector<fs::path> bundles;
    std::size_t latent_dim = 2;
    int epochs = nn::TrainConfig{}.epochs;
    std::uint64_t seed = 0;
    double scale = 1.0;
    fs::path m0_csv;

    template <class V>
    void visit(V&& v)
    {
        v("bundles", bundles, "One L x S CSV of training spectra per material");
        v("latent-dim", latent_dim, "Latent dimension K");
        v("epochs", epochs, "Training epochs");
        v("seed", seed, "Seed; material p uses seed + p");
        v("scale", scale, "Divide spectra by this factor first (reflectance_scale from extract)");
        v("m0-csv", m0_csv, "Reference endmembers; writes their codes to z0.csv");
        Common::visit(v);
    }
};

struct UnmixParams : Common {
    fs::path cube;
    std::size_t materials = 3;
    double lambda_a = UnmixConfig{}.lambda_a;
    double lambda_z = UnmixConfig{}.lambda_z;
    std::size_t latent_dim = UnmixConfig{}.latent_dim;
    std::size_t pure_count = 0;
    int max_iter = UnmixConfig{}.max_outer_iterations;
    int epochs = nn::TrainConfig{}.epochs;
    std::uint64_t seed = 0;
    fs::path m0_csv;
    std::vector<fs::path> library_csv;
    std::vector<fs::path> models;
    bool save_models = false;

    template <class V>
    void visit(V&& v)
    {
        v("cube", cube, "Input .hcube");
        v("materials", materials, "Number of endmembers");
        v("lambda-a", lambda_a, "Spatial regularisation weight");
        v("lambda-z", lambda_z, "Latent regularisation weight");
        v("latent-dim", latent_dim, "Latent dimension K");
        v("pure-count", pure_count, "Pure pixels per material (0 = scale with image size)");
        v("max-iter", max_iter, "Outer iterations");
        v("epochs", epochs, "VAE training epochs");
        v("seed", seed, "Seed for VCA and training");
        v("m0-csv", m0_csv, "Reference endmembers (L x P CSV) instead of VCA");
        v("library-csv", library_csv, "Training spectra per material instead of pure-pixel bundles");
        v("models", models, "Trained .vaem models, one per material");
        v("save-models", save_models, "Write the trained models to the output directory");
        Common::visit(v);
    }
};

struct EvalParams : Common {
    fs::path abundances;
    fs::path em_tensor;
    fs::path truth_abundances;
    fs::path truth_em_tensor;
    fs::path cube;

    template <class V>
    void visit(V&& v)
    {
        v("abundances", abundances, "Estimated abundances (P x N CSV)");
        v("em-tensor", em_tensor, "Estimated endmember tensor .hcube");
        v("truth-abundances", truth_abundances, "True abundances (P x N CSV)");
        v("truth-em-tensor", truth_em_tensor, "True endmember tensor .hcube");
        v("cube", cube, "Observed .hcube");
        Common::visit(v);
    }
};

struct RenderParams : Common {
    fs::path abundances;
    std::size_t height = 0;
    std::size_t width = 0;
    bool colormap = false;

    template <class V>
    void visit(V&& v)
    {
        v("abundances", abundances, "Abundances (P x N CSV)");
        v("height", height, "Image rows");
        v("width", width, "Image columns");
        v("colormap", colormap, "Also write blue-to-red PPM maps");
        Common::visit(v);
    }
};

struct SweepParams : Common {
    fs::path cube;
    fs::path truth_abundances;
    fs::path truth_em_tensor;
    std::vector<std::size_t> latent_dims{1, 2, 4, 8};
    std::size_t materials = 3;
    double lambda_a = UnmixConfig{}.lambda_a;
    double lambda_z = UnmixConfig{}.lambda_z;
    std::size_t pure_count = 0;
    int max_iter = UnmixConfig{}.max_outer_iterations;
    int epochs = nn::TrainConfig{}.epochs;
    std::uint64_t seed = 0;

    template <class V>
    void visit(V&& v)
    {
        v("cube", cube, "Input .hcube");
        v("truth-abundances", truth_abundances, "True abundances (P x N CSV)");
        v("truth-em-tensor", truth_em_tensor, "True endmember tensor .hcube");
        v("latent-dims", latent_dims, "Latent dimensions to run");
        v("materials", materials, "Number of endmembers");
        v("lambda-a", lambda_a, "Spatial regularisation weight");
        v("lambda-z", lambda_z, "Latent regularisation weight");
        v("pure-count", pure_count, "Pure pixels per material (0 = scale with image size)");
        v("max-iter", max_iter, "Outer iterations");
        v("epochs", epochs, "VAE training epochs");
        v("seed", seed, "Seed for VCA and training");
        Common::visit(v);
    }
};

struct ReplayParams {
    fs::path manifest;
    fs::path out_dir;
    bool check = false;
    unsigned threads = 0;
};

// Output directory plus the manifest being assembled for one run.
class Run {
public:
    Run(const std::string& command, const fs::path& out_dir) : dir_(out_dir), start_(std::chrono::steady_clock::now())
    {
        if (out_dir.empty()) {
            throw UsageError("--out-dir is required");
        }
        fs::create_directories(dir_);
        manifest_.add("command", command);
        manifest_.add("version", "1");
    }

    template <class P>
    void record(P& params)
    {
        params.visit(Recorder{&manifest_});
    }

    fs::path path(const std::string& name)
    {
        manifest_.add("output." + name, name);
        return dir_ / name;
    }

    void result(const std::string& key, const std::string& value) { manifest_.add("result." + key, value); }
    void timing(const std::string& stage, double seconds) { manifest_.add("timing." + stage, format_double(seconds)); }

    void finish()
    {
        const std::chrono::duration<double> total = std::chrono::steady_clock::now() - start_;
        timing("total", total.count());
        manifest_.save(dir_ / kManifestName);
    }

private:
    fs::path dir_;
    Manifest manifest_;
    std::chrono::steady_clock::time_point start_;
};

void require_file(const fs::path& path, const char* flag)
{
    if (path.empty()) {
        throw UsageError(std::string("--") + flag + " is required");
    }
    if (!fs::is_regular_file(path)) {
        throw UsageError(std::string("--") + flag + ": no such file " + path.string());
    }
}

HyperCube read_cube(const fs::path& path, const char* flag)
{
    require_file(path, flag);
    return load_cube(path);
}

Matrix read_csv(const fs::path& path, const char* flag)
{
    require_file(path, flag);
    return load_matrix_csv(path);
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes)
{
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
}

std::string indexed(const char* stem, std::size_t p, const char* ext)
{
    return std::string(stem) + "_" + std::to_string(p) + ext;
}

void require_positive(std::size_t value, const char* flag)
{
    if (value == 0) {
        throw UsageError(std::string("--") + flag + " must be positive");
    }
}

// Applies `key = value` lines to options that were not given on the command line.
void merge_config(CLI::App* sub, const fs::path& config)
{
    require_file(config, "config");
    const Manifest entries = Manifest::load(config);
    std::set<CLI::Option*> touched;
    for (const auto& [key, value] : entries.entries()) {
        if (key == "command" || key == "version" || key.find('.') != std::string::npos) {
            continue;
        }
        CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (opt == nullptr || key == "config") {
            throw UsageError("unknown key '" + key + "' in " + config.string());
        }
        if (opt->count() > 0 && touched.count(opt) == 0) {
            continue; // the command line wins
        }
        opt->add_result(value);
        touched.insert(opt);
    }
    for (CLI::Option* opt : touched) {
        opt->run_callback();
    }
}

UnmixConfig unmix_config(std::size_t materials, double lambda_a, double lambda_z, std::size_t pure_count,
                         int max_iter, int epochs, std::uint64_t seed, unsigned threads)
{
    UnmixConfig config;
    config.materials = materials;
    config.lambda_a = lambda_a;
    config.lambda_z = lambda_z;
    config.pure_count = pure_count;
    config.max_outer_iterations = max_iter;
    config.train.epochs = epochs;
    config.seed = seed;
    config.train.seed = seed;
    config.threads = threads;
    return config;
}

void check_pure_count(std::size_t pure_count, std::size_t pixels)
{
    if (pure_count > pixels) {
        throw UsageError("--pure-count " + std::to_string(pure_count) + " exceeds the " + std::to_string(pixels) +
                         " pixels of the cube");
    }
}

// ---------------------------------------------------------------------------

int cmd_synth(SynthParams& p, std::ostream& out)
{
    require_positive(p.height, "height");
    require_positive(p.width, "width");
    require_positive(p.materials, "materials");
    require_positive(p.bands, "bands");
    synth::VariabilityModel vm;
    try {
        vm.kind = synth::parse_variability(p.variability);
    } catch (const InvariantError& e) {
        throw UsageError(std::string("--variability: ") + e.what());
    }
    if (std::isnan(p.snr_db)) {
        throw UsageError("--snr-db must be a number or inf");
    }

    Run run("synth", p.out_dir);
    run.record(p);
    synth::GroundTruth gt;
    synth::SynthCube made;
    try {
        gt.height = p.height;
        gt.width = p.width;
        gt.base_endmembers = synth::gen_procedural_endmembers(p.bands, p.materials, p.seed);
        gt.abundances = synth::gen_abundance_maps(p.height, p.width, p.materials, p.seed + 1);
        gt.endmembers = synth::apply_variability(gt.base_endmembers, vm, p.height, p.width, p.seed + 2);
        made = synth::gen_cube(gt, {p.snr_db, p.seed + 3});
    } catch (const InvariantError& e) {
        throw UsageError(e.what());
    }

    save_cube(run.path("cube.hcube"), made.cube);
    save_matrix_csv(run.path("abundances.csv"), gt.abundances.matrix());
    save_matrix_csv(run.path("endmembers.csv"), gt.base_endmembers.matrix());
    save_cube(run.path("em_tensor.hcube"), endmember_tensor_to_cube(gt.endmembers, p.height, p.width));
    run.result("measured_snr_db", format_double(made.measured_snr_db));
    run.finish();
    out << "measured_snr_db = " << format_double(made.measured_snr_db) << '\n';
    return exit_ok;
}

int cmd_extract(ExtractParams& p, std::ostream& out)
{
    const HyperCube raw = read_cube(p.cube, "cube");
    require_positive(p.materials, "materials");
    check_pure_count(p.pure_count, raw.pixel_count());

    Run run("extract", p.out_dir);
    run.record(p);

    // same normalisation as the unmixing pipeline, so bundles match its own
    const double peak = *std::max_element(raw.data().begin(), raw.data().end());
    const double scale = peak > 1.0 ? peak : 1.0;
    HyperCube cube = raw;
    for (double& v : cube.data()) {
        v /= scale;
    }

    const auto t0 = std::chrono::steady_clock::now();
    Matrix m0_raw;
    EndmemberMatrix m0;
    if (!p.m0_csv.empty()) {
        m0_raw = read_csv(p.m0_csv, "m0-csv");
        if (static_cast<std::size_t>(m0_raw.rows()) != cube.bands() ||
            static_cast<std::size_t>(m0_raw.cols()) != p.materials) {
            throw UsageError(p.m0_csv.string() + " is not " + std::to_string(cube.bands()) + " x " +
                             std::to_string(p.materials));
        }
        m0 = EndmemberMatrix(m0_raw / scale);
    } else {
        const auto v = vca(cube, p.materials, p.seed);
        m0 = v.endmembers;
        m0_raw.resize(static_cast<Eigen::Index>(cube.bands()), static_cast<Eigen::Index>(p.materials));
        for (std::size_t j = 0; j < p.materials; ++j) {
            m0_raw.col(static_cast<Eigen::Index>(j)) = raw.pixel(v.pixel_indices[j]);
        }
    }
    const auto t1 = std::chrono::steady_clock::now();
    const std::size_t count = p.pure_count > 0 ? p.pure_count : default_pure_count(cube.pixel_count());
    const auto sets = extract_pure_pixels(cube, m0, count, [&](const std::string& w) { out << "warning: " << w << '\n'; });
    const auto t2 = std::chrono::steady_clock::now();

    save_matrix_csv(run.path("m0.csv"), m0_raw);
    Matrix indices(static_cast<Eigen::Index>(sets.size()), static_cast<Eigen::Index>(count));
    for (std::size_t q = 0; q < sets.size(); ++q) {
        Matrix spectra(static_cast<Eigen::Index>(raw.bands()), static_cast<Eigen::Index>(count));
        for (std::size_t s = 0; s < count; ++s) {
            spectra.col(static_cast<Eigen::Index>(s)) = raw.pixel(sets[q].pixel_indices[s]);
            indices(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(s)) =
                static_cast<double>(sets[q].pixel_indices[s]);
        }
        save_matrix_csv(run.path(indexed("bundle", q, ".csv")), spectra);
    }
    save_matrix_csv(run.path("bundle_indices.csv"), indices);
    run.result("reflectance_scale", format_double(scale));
    run.result("pure_count", std::to_string(count));
    run.timing("reference", std::chrono::duration<double>(t1 - t0).count());
    run.timing("extraction", std::chrono::duration<double>(t2 - t1).count());
    run.finish();
    return exit_ok;
}

int cmd_train(TrainParams& p, std::ostream&)
{
    if (p.bundles.empty()) {
        throw UsageError("--bundles needs one CSV per material");
    }
    require_positive(p.latent_dim, "latent-dim");
    if (p.epochs < 1) {
        throw UsageError("--epochs must be positive");
    }
    if (!(p.scale > 0.0) || !std::isfinite(p.scale)) {
        throw UsageError("--scale must be positive");
    }
    std::vector<Matrix> spectra;
    for (const auto& b : p.bundles) {
        spectra.push_back(read_csv(b, "bundles") / p.scale);
    }
    Matrix m0;
    if (!p.m0_csv.empty()) {
        m0 = read_csv(p.m0_csv, "m0-csv") / p.scale;
        if (static_cast<std::size_t>(m0.cols()) != spectra.size()) {
            throw UsageError(p.m0_csv.string() + " must have one column per bundle");
        }
    }

    Run run("train", p.out_dir);
    run.record(p);
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<nn::VaeModel> models;
    Matrix loss(p.epochs, static_cast<Eigen::Index>(spectra.size()));
    for (std::size_t q = 0; q < spectra.size(); ++q) {
        nn::TrainConfig config;
        config.epochs = p.epochs;
        config.seed = p.seed + q;
        auto trained = nn::train_vae(spectra[q].cwiseMax(0.0).cwiseMin(1.0), config, p.latent_dim);
        for (int e = 0; e < p.epochs; ++e) {
            loss(e, static_cast<Eigen::Index>(q)) = trained.loss_history[static_cast<std::size_t>(e)];
        }
        nn::save_vae(run.path(indexed("model", q, ".vaem")), trained.model);
        models.push_back(std::move(trained.model));
    }
    run.timing("training", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    save_matrix_csv(run.path("loss.csv"), loss);
    if (m0.size() > 0) {
        save_matrix_csv(run.path("z0.csv"), latent_reference(models, EndmemberMatrix(m0)).matrix());
    }
    run.finish();
    return exit_ok;
}

int cmd_unmix(UnmixParams& p, std::ostream& out, std::ostream& err)
{
    const HyperCube cube = read_cube(p.cube, "cube");
    require_positive(p.materials, "materials");
    require_positive(p.latent_dim, "latent-dim");
    check_pure_count(p.pure_count, cube.pixel_count());
    if (!p.models.empty() && !p.library_csv.empty()) {
        throw UsageError("--models and --library-csv are mutually exclusive");
    }

    UnmixConfig config = unmix_config(p.materials, p.lambda_a, p.lambda_z, p.pure_count, p.max_iter, p.epochs,
                                      p.seed, p.threads);
    config.latent_dim = p.latent_dim;
    config.log = &err;
    try {
        config.validate();
    } catch (const InvariantError& e) {
        throw UsageError(e.what());
    }

    UnmixInputs inputs;
    if (!p.m0_csv.empty()) {
        inputs.reference = EndmemberMatrix(read_csv(p.m0_csv, "m0-csv"));
    }
    if (!p.library_csv.empty()) {
        std::vector<Matrix> library;
        for (const auto& f : p.library_csv) {
            library.push_back(read_csv(f, "library-csv"));
        }
        inputs.library = std::move(library);
    }
    if (!p.models.empty()) {
        std::vector<nn::VaeModel> models;
        for (const auto& f : p.models) {
            require_file(f, "models");
            models.push_back(nn::load_vae(f));
        }
        inputs.models = std::move(models);
    }

    Run run("unmix", p.out_dir);
    run.record(p);
    const UnmixResult r = run_deepgun(cube, config, inputs);

    const std::size_t n_pix = cube.pixel_count();
    Matrix latents(static_cast<Eigen::Index>(n_pix), static_cast<Eigen::Index>(p.materials * p.latent_dim));
    for (std::size_t n = 0; n < n_pix; ++n) {
        latents.row(static_cast<Eigen::Index>(n)) = flatten_codes(r.latents.slice(n)).transpose();
    }
    Matrix history(static_cast<Eigen::Index>(r.objective_history.size()), 2);
    for (std::size_t i = 0; i < r.objective_history.size(); ++i) {
        history(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
        history(static_cast<Eigen::Index>(i), 1) = r.objective_history[i];
    }

    save_matrix_csv(run.path("abundances.csv"), r.abundances.matrix());
    save_matrix_csv(run.path("initial_abundances.csv"), r.initial_abundances.matrix());
    save_matrix_csv(run.path("latents.csv"), latents);
    save_matrix_csv(run.path("z0.csv"), r.latent_reference.matrix());
    save_matrix_csv(run.path("m0.csv"), r.reference.matrix() * r.reflectance_scale);
    save_matrix_csv(run.path("endmembers.csv"), r.endmembers.mean_signatures());
    save_cube(run.path("em_tensor.hcube"), endmember_tensor_to_cube(r.endmembers, cube.height(), cube.width()));
    save_matrix_csv(run.path("objective.csv"), history);
    if (p.save_models) {
        for (std::size_t q = 0; q < r.models.size(); ++q) {
            nn::save_vae(run.path(indexed("model", q, ".vaem")), r.models[q]);
        }
    }
    run.result("iterations", std::to_string(r.iterations_run));
    run.result("final_objective", format_double(r.objective_history.back()));
    run.result("reflectance_scale", format_double(r.reflectance_scale));
    for (const auto& t : r.stage_seconds) {
        run.timing(t.stage, t.seconds);
    }
    run.finish();
    out << "iterations = " << r.iterations_run << "\nfinal_objective = " << format_double(r.objective_history.back())
        << '\n';
    return exit_ok;
}

int cmd_eval(EvalParams& p, std::ostream& out)
{
    const Matrix est_a = read_csv(p.abundances, "abundances");
    const Matrix true_a = read_csv(p.truth_abundances, "truth-abundances");
    const HyperCube est_cube = read_cube(p.em_tensor, "em-tensor");
    const HyperCube true_cube = read_cube(p.truth_em_tensor, "truth-em-tensor");
    const HyperCube observed = read_cube(p.cube, "cube");

    const auto mismatch = [](const fs::path& a, const fs::path& b, const std::string& what) {
        return UsageError(a.string() + " and " + b.string() + " disagree on " + what);
    };
    if (est_a.rows() != true_a.rows()) {
        throw mismatch(p.abundances, p.truth_abundances, "the number of materials");
    }
    if (est_a.cols() != true_a.cols()) {
        throw mismatch(p.abundances, p.truth_abundances, "the number of pixels");
    }
    if (static_cast<std::size_t>(true_a.cols()) != observed.pixel_count()) {
        throw mismatch(p.truth_abundances, p.cube, "the number of pixels");
    }
    const auto materials = static_cast<std::size_t>(true_a.rows());
    for (const auto& [file, c] : {std::pair{p.em_tensor, &est_cube}, std::pair{p.truth_em_tensor, &true_cube}}) {
        if (c->pixel_count() != observed.pixel_count() || c->bands() != observed.bands() * materials) {
            throw mismatch(file, p.cube, "the endmember tensor shape");
        }
    }

    const auto report = evaluate_unmixing(AbundanceMatrix(true_a), endmember_tensor_from_cube(true_cube, materials),
                                          observed, AbundanceMatrix(est_a),
                                          endmember_tensor_from_cube(est_cube, materials));
    const std::string names = "nrmse_a,nrmse_m,sam_m,nrmse_y";
    const Matrix values{{report.nrmse_a, report.nrmse_m, report.sam_m, report.nrmse_y}};
    out << "nrmse_a = " << format_double(report.nrmse_a) << '\n'
        << "nrmse_m = " << format_double(report.nrmse_m) << '\n'
        << "sam_m = " << format_double(report.sam_m) << '\n'
        << "nrmse_y = " << format_double(report.nrmse_y) << '\n';
    if (!p.out_dir.empty()) {
        Run run("eval", p.out_dir);
        run.record(p);
        std::ofstream csv(run.path("metrics.csv"), std::ios::binary);
        csv << names << '\n' << format_matrix_csv(values);
        csv.close();
        run.finish();
    }
    return exit_ok;
}

int cmd_render(RenderParams& p, std::ostream&)
{
    const Matrix a = read_csv(p.abundances, "abundances");
    require_positive(p.height, "height");
    require_positive(p.width, "width");
    if (static_cast<std::size_t>(a.cols()) != p.height * p.width) {
        throw UsageError(p.abundances.string() + " has " + std::to_string(a.cols()) + " pixels, not " +
                         std::to_string(p.height) + "x" + std::to_string(p.width));
    }
    Run run("render", p.out_dir);
    run.record(p);
    for (Eigen::Index q = 0; q < a.rows(); ++q) {
        const Vector map = a.row(q).transpose();
        const auto idx = static_cast<std::size_t>(q);
        write_bytes(run.path(indexed("abundance", idx, ".pgm")), encode_pgm(map, p.height, p.width));
        if (p.colormap) {
            write_bytes(run.path(indexed("abundance", idx, ".ppm")), encode_ppm(map, p.height, p.width));
        }
    }
    run.finish();
    return exit_ok;
}

int cmd_sweep(SweepParams& p, std::ostream& out, std::ostream& err)
{
    const HyperCube cube = read_cube(p.cube, "cube");
    const Matrix true_a = read_csv(p.truth_abundances, "truth-abundances");
    const HyperCube true_em = read_cube(p.truth_em_tensor, "truth-em-tensor");
    check_pure_count(p.pure_count, cube.pixel_count());
    if (p.latent_dims.empty()) {
        throw UsageError("--latent-dims needs at least one value");
    }
    if (static_cast<std::size_t>(true_a.cols()) != cube.pixel_count() ||
        static_cast<std::size_t>(true_a.rows()) != p.materials ||
        true_em.pixel_count() != cube.pixel_count() || true_em.bands() != cube.bands() * p.materials) {
        throw UsageError("ground truth files do not match the cube and --materials");
    }
    synth::GroundTruth gt;
    gt.height = cube.height();
    gt.width = cube.width();
    gt.abundances = AbundanceMatrix(true_a);
    gt.endmembers = endmember_tensor_from_cube(true_em, p.materials);
    gt.base_endmembers = EndmemberMatrix(gt.endmembers.mean_signatures());

    UnmixConfig config =
        unmix_config(p.materials, p.lambda_a, p.lambda_z, p.pure_count, p.max_iter, p.epochs, p.seed, p.threads);
    config.log = &err;

    Run run("sweep", p.out_dir);
    run.record(p);
    const auto rows = latent_dim_sweep(cube, gt, config, p.latent_dims);
    Matrix table(static_cast<Eigen::Index>(rows.size()), 2);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        table(static_cast<Eigen::Index>(i), 0) = static_cast<double>(rows[i].latent_dim);
        table(static_cast<Eigen::Index>(i), 1) = rows[i].nrmse_a;
        out << "K = " << rows[i].latent_dim << " nrmse_a = " << format_double(rows[i].nrmse_a) << '\n';
    }
    save_matrix_csv(run.path("sweep.csv"), table);
    run.finish();
    return exit_ok;
}

bool same_bytes(const fs::path& a, const fs::path& b)
{
    std::ifstream fa(a, std::ios::binary);
    std::ifstream fb(b, std::ios::binary);
    if (!fa || !fb) {
        return false;
    }
    const std::vector<char> da((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::vector<char> db((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    return da == db;
}

int cmd_replay(const ReplayParams& p, std::ostream& out, std::ostream& err)
{
    require_file(p.manifest, "manifest");
    const Manifest m = Manifest::load(p.manifest);
    const auto command = m.get("command");
    if (!command || *command == "replay") {
        throw UsageError(p.manifest.string() + " does not name a command to replay");
    }
    const fs::path original = fs::absolute(p.manifest).parent_path();
    const fs::path target = p.out_dir.empty() ? original : fs::absolute(p.out_dir);
    if (p.check && fs::equivalent(original, target.empty() ? original : target)) {
        throw UsageError("--check needs an --out-dir different from the recorded run");
    }

    std::vector<std::string> args{*command};
    for (const auto& [key, value] : m.entries()) {
        if (key == "command" || key == "version" || key.find('.') != std::string::npos || value.empty()) {
            continue;
        }
        if (key == "out-dir") {
            args.push_back("--out-dir=" + target.string());
        } else if (key == "threads" && p.threads > 0) {
            args.push_back("--threads=" + std::to_string(p.threads));
        } else {
            args.push_back("--" + key + "=" + value);
        }
    }
    const int code = run_cli(args, out, err);
    if (code != exit_ok || !p.check) {
        return code;
    }
    bool identical = true;
    for (const auto& [key, value] : m.entries()) {
        if (key.rfind("output.", 0) != 0) {
            continue;
        }
        const bool same = same_bytes(original / value, target / value);
        identical = identical && same;
        out << (same ? "identical " : "differs ") << value << '\n';
    }
    return identical ? exit_ok : exit_failure;
}

template <class P>
CLI::App* add_command(CLI::App& app, const char* name, const char* help, P& params, fs::path& config)
{
    CLI::App* sub = app.add_subcommand(name, help);
    params.visit(Binder{sub});
    sub->add_option("--config", config, "key = value file supplying options not given as flags");
    return sub;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app("Hyperspectral unmixing with deep generative endmember models", "deepgun");
    app.require_subcommand(1);

    fs::path config;
    SynthParams synth_p;
    ExtractParams extract_p;
    TrainParams train_p;
    UnmixParams unmix_p;
    EvalParams eval_p;
    RenderParams render_p;
    SweepParams sweep_p;
    ReplayParams replay_p;

    auto* synth_c = add_command(app, "synth", "Generate a synthetic cube with ground truth", synth_p, config);
    auto* extract_c = add_command(app, "extract", "Reference endmembers and pure-pixel bundles", extract_p, config);
    auto* train_c = add_command(app, "train", "Train one generative model per bundle", train_p, config);
    auto* unmix_c = add_command(app, "unmix", "Run the full unmixing pipeline", unmix_p, config);
    auto* eval_c = add_command(app, "eval", "Score an estimate against ground truth", eval_p, config);
    auto* render_c = add_command(app, "render", "Write abundance maps as PGM/PPM images", render_p, config);
    auto* sweep_c = add_command(app, "sweep", "Abundance error as a function of the latent dimension", sweep_p, config);
    auto* replay_c = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
    replay_c->add_option("manifest", replay_p.manifest, "manifest.txt of an earlier run")->required();
    replay_c->add_option("--out-dir", replay_p.out_dir, "Write outputs here instead of the recorded directory");
    replay_c->add_flag("--check", replay_p.check, "Compare every recorded output byte for byte");
    replay_c->add_option("--threads", replay_p.threads, "Override the recorded worker count");

    std::vector<const char*> argv{"deepgun"};
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return exit_usage;
    }

    try {
        CLI::App* active = app.get_subcommands().front();
        if (!config.empty()) {
            merge_config(active, config);
        }
        if (active == synth_c) return cmd_synth(synth_p, out);
        if (active == extract_c) return cmd_extract(extract_p, out);
        if (active == train_c) return cmd_train(train_p, out);
        if (active == unmix_c) return cmd_unmix(unmix_p, out, err);
        if (active == eval_c) return cmd_eval(eval_p, out);
        if (active == render_c) return cmd_render(render_p, out);
        if (active == sweep_c) return cmd_sweep(sweep_p, out, err);
        return cmd_replay(replay_p, out, err);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return exit_usage;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return exit_usage;
    } catch (const FormatError& e) {
        err << "format error: " << e.what() << " (byte " << e.offset() << ")\n";
        return exit_usage;
    } catch (const ParseError& e) {
        err << "format error: " << e.what() << " (row " << e.row() << ", column " << e.column() << ")\n";
        return exit_usage;
    } catch (const StageError& e) {
        err << "error in stage " << e.stage() << ": " << e.what() << '\n';
        return exit_failure;
    } catch (const InvariantError& e) {
        err << "invalid input: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_failure;
    }
}

} // namespace hsu::cli
