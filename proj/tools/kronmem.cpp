// kronmem: command-line front end for the Kronecker-factored wavelet MEM
// source imaging pipeline. Subcommands cover the full loop: simulate
// synthetic sessions, estimate the reduced noise covariance, invert trials,
// evaluate against ground truth and aggregate report tables.

#include "kronmem/core.hpp"
#include "kronmem/cortex.hpp"
#include "kronmem/io.hpp"
#include "kronmem/mem.hpp"
#include "kronmem/reduction.hpp"
#include "kronmem/simstudy.hpp"
#include "kronmem/wavelet.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace kronmem;

namespace {

std::string path_str(const fs::path& dir, const std::string& name) {
    return (dir / name).string();
}

cortex::Mesh load_mesh(const std::string& spec) {
    const std::string prefix = "builtin:icosphere:";
    if (spec.rfind(prefix, 0) == 0)
        return cortex::make_icosphere(std::stoi(spec.substr(prefix.size())));
    return cortex::load_off(spec);
}

simstudy::TimeProfile load_profile(const std::string& spec, Index n_samples, double rate) {
    if (spec == "builtin:slowwave") return simstudy::slow_wave_profile(n_samples, rate);
    const Matrix m = io::read_csv_matrix(spec);
    simstudy::TimeProfile profile;
    profile.rate = rate;
    if (m.cols() == 1)
        profile.samples = m.col(0);
    else if (m.rows() == 1)
        profile.samples = m.row(0).transpose();
    else
        throw std::invalid_argument("profile CSV must be a single row or column: " + spec);
    if (!(profile.samples.norm() > 0.0))
        throw std::invalid_argument("profile has zero norm: " + spec);
    return profile;
}

struct SimulateArgs {
    std::string mesh = "builtin:icosphere:3";
    std::string leadfield = "synthetic";
    std::string profile = "builtin:slowwave";
    std::string sensor_positions;
    Index trials = 30;
    Index patch_min = 20;
    Index patch_max = 80;
    double snr_db = 6.020599913279624;
    std::uint64_t seed = 1;
    std::string out;
    Index sensors = 40;
    Index noise_recordings = 64;
    Index samples = 200;
    double rate = 50.0;
    double leadfield_sigma = 1.1;  ///< matches simstudy::StudyConfig
    double sensor_radius = 1.3;
    double ar = 0.7;
    double noise_length_scale = 1.0;
};

void cmd_simulate(const SimulateArgs& a) {
    if (a.trials < 1) throw std::invalid_argument("--trials must be >= 1");
    if (a.patch_min < 1 || a.patch_max < a.patch_min)
        throw std::invalid_argument("--patch-min/--patch-max out of order");
    fs::create_directories(a.out);
    const fs::path out(a.out);

    const cortex::Mesh mesh = load_mesh(a.mesh);
    const cortex::CortexGraph graph = cortex::CortexGraph::from_mesh(mesh);
    const Rng master(a.seed);

    Matrix sensors;
    Matrix leadfield;
    if (a.leadfield == "synthetic") {
        Rng sensor_rng = master.child(1);
        sensors = simstudy::random_sensor_positions(a.sensors, a.sensor_radius, sensor_rng);
        leadfield = simstudy::synthetic_leadfield(sensors, mesh.vertices, a.leadfield_sigma);
    } else {
        leadfield = io::read_matrix(a.leadfield);
        if (leadfield.cols() != graph.size())
            throw std::invalid_argument("lead field columns do not match the mesh vertex count");
        if (a.sensor_positions.empty())
            throw std::invalid_argument(
                "--sensor-positions is required with a lead-field file (the noise model needs "
                "sensor sites)");
        sensors = io::read_matrix(a.sensor_positions);
        if (sensors.rows() != leadfield.rows() || sensors.cols() != 3)
            throw std::invalid_argument("sensor positions must be one xyz row per lead-field row");
    }

    const simstudy::TimeProfile profile = load_profile(a.profile, a.samples, a.rate);
    const Index t0 = profile.samples.size();
    const KroneckerCovariance noise_model =
        simstudy::make_noise_model(t0, a.ar, sensors, a.noise_length_scale);

    std::vector<simstudy::SimulatedTrial> trials;
    trials.reserve(static_cast<std::size_t>(a.trials));
    const Index span = a.patch_max - a.patch_min + 1;
    for (Index i = 0; i < a.trials; ++i) {
        Rng trial_rng = master.child(1000 + static_cast<std::uint64_t>(i));
        const Index patch_size = a.patch_min + trial_rng.uniform_index(span);
        trials.push_back(simstudy::simulate_trial(graph, leadfield, profile, noise_model,
                                                  patch_size, a.snr_db, trial_rng));
    }

    // Noise recordings are scaled to the session-average level actually mixed
    // into the trials, so a covariance fitted on them matches the data.
    double session_scale = 1.0;
    if (std::isfinite(a.snr_db)) {
        double acc = 0.0;
        Index counted = 0;
        for (const auto& trial : trials)
            if (!trial.patch.empty()) {
                acc += trial.noise_scale;
                ++counted;
            }
        if (counted > 0) session_scale = acc / static_cast<double>(counted);
    }
    const Matrix zero_mean = Matrix::Zero(t0, sensors.rows());
    for (Index r = 0; r < a.noise_recordings; ++r) {
        Rng rec_rng = master.child(500000 + static_cast<std::uint64_t>(r));
        io::write_matrix(path_str(out, "noise_" + std::to_string(r) + ".kmm"),
                         session_scale * sample_matrix_normal(zero_mean, noise_model, rec_rng));
    }

    cortex::save_off(mesh, path_str(out, "mesh.off"));
    io::write_matrix(path_str(out, "sensors.kmm"), sensors);
    io::write_matrix(path_str(out, "leadfield.kmm"), leadfield);
    io::write_csv_matrix(path_str(out, "profile.csv"), profile.samples);
    for (Index i = 0; i < a.trials; ++i) {
        const auto& trial = trials[static_cast<std::size_t>(i)];
        const std::string tag = "trial_" + std::to_string(i);
        io::write_matrix(path_str(out, tag + "_Z.kmm"), trial.data);
        io::write_matrix(path_str(out, tag + "_truth.kmm"), trial.sources);
        io::write_index_list(path_str(out, tag + "_patch.txt"), trial.patch);
    }

    io::Manifest manifest;
    manifest["trials"] = std::to_string(a.trials);
    manifest["noise_recordings"] = std::to_string(a.noise_recordings);
    manifest["sensors"] = std::to_string(sensors.rows());
    manifest["vertices"] = std::to_string(graph.size());
    manifest["samples"] = std::to_string(t0);
    manifest["rate"] = io::format_double(profile.rate);
    manifest["seed"] = std::to_string(a.seed);
    manifest["snr_db"] = io::format_double(a.snr_db);
    manifest["patch_min"] = std::to_string(a.patch_min);
    manifest["patch_max"] = std::to_string(a.patch_max);
    manifest["mesh"] = a.mesh;
    manifest["leadfield"] = a.leadfield;
    manifest["profile"] = a.profile;
    manifest["noise_scale"] = io::format_double(session_scale);
    manifest["ar"] = io::format_double(a.ar);
    manifest["noise_length_scale"] = io::format_double(a.noise_length_scale);
    if (a.leadfield == "synthetic") {
        manifest["leadfield_sigma"] = io::format_double(a.leadfield_sigma);
        manifest["sensor_radius"] = io::format_double(a.sensor_radius);
    }
    io::write_manifest(path_str(out, "manifest.txt"), manifest);
}

struct EstimateNoiseArgs {
    std::string noise_trials;
    int wavelet_taps = 6;
    Index coeffs = 62;
    Index components = 15;
    std::string out;
};

void cmd_estimate_noise(const EstimateNoiseArgs& a) {
    const fs::path src(a.noise_trials);
    const io::Manifest manifest = io::read_manifest(path_str(src, "manifest.txt"));
    const Index trials = std::stoll(manifest.at("trials"));
    const Index recordings = std::stoll(manifest.at("noise_recordings"));
    if (recordings < 1) throw std::invalid_argument("the session has no noise recordings");

    std::vector<Matrix> noise;
    noise.reserve(static_cast<std::size_t>(recordings));
    for (Index r = 0; r < recordings; ++r)
        noise.push_back(io::read_matrix(path_str(src, "noise_" + std::to_string(r) + ".kmm")));

    // The reduction should concentrate on where the signal lives, so fit it
    // on the stimulus trials when the session has them; fall back to the
    // noise recordings for signal-free sessions.
    std::vector<Matrix> fit_set;
    std::string fitted_on;
    if (trials > 0) {
        fit_set.reserve(static_cast<std::size_t>(trials));
        for (Index i = 0; i < trials; ++i)
            fit_set.push_back(
                io::read_matrix(path_str(src, "trial_" + std::to_string(i) + "_Z.kmm")));
        fitted_on = "trials";
    } else {
        fit_set = noise;
        fitted_on = "noise_recordings";
    }

    wavelet::Config wcfg;
    wcfg.taps = a.wavelet_taps;
    const simstudy::ReductionBundle bundle =
        simstudy::fit_reduction(fit_set, wcfg, a.coeffs, a.components);
    const KroneckerCovariance cov = simstudy::estimate_noise_cov(noise, bundle);

    fs::create_directories(a.out);
    const fs::path out(a.out);
    io::write_index_list(path_str(out, "selection.txt"), bundle.selection.indices);
    io::write_matrix(path_str(out, "filter.kmm"), bundle.filter.components);
    io::write_csv_matrix(path_str(out, "inertia.csv"), bundle.filter.inertia);
    io::write_matrix(path_str(out, "noise_temporal.kmm"), cov.temporal().matrix());
    io::write_matrix(path_str(out, "noise_spatial.kmm"), cov.spatial().matrix());

    io::Manifest m;
    m["wavelet_taps"] = std::to_string(a.wavelet_taps);
    m["coeffs"] = std::to_string(a.coeffs);
    m["components"] = std::to_string(a.components);
    m["original_length"] = std::to_string(bundle.original_length);
    m["padded_length"] = std::to_string(bundle.selection.padded_length);
    m["selection_fitted_on"] = fitted_on;
    io::write_manifest(path_str(out, "manifest.txt"), m);
}

simstudy::ReductionBundle load_reduction(const fs::path& model_dir, const io::Manifest& m) {
    simstudy::ReductionBundle bundle;
    bundle.wavelet.taps = std::stoi(m.at("wavelet_taps"));
    bundle.wavelet.padded_length = std::stoll(m.at("padded_length"));
    bundle.original_length = std::stoll(m.at("original_length"));
    bundle.selection.indices = io::read_index_list(path_str(model_dir, "selection.txt"));
    bundle.selection.padded_length = bundle.wavelet.padded_length;
    bundle.filter.components = io::read_matrix(path_str(model_dir, "filter.kmm"));
    bundle.filter.inertia = io::read_csv_matrix(path_str(model_dir, "inertia.csv"));
    return bundle;
}

struct InvertArgs {
    std::string data;
    std::string model;
    std::string stage = "uGM";
    double alpha = 0.25;
    double rho = 0.3;
    Index parcels = 156;
    double grad_tol = 1e-8;
    std::string out;
    double gamma = 0.05;
    double snr_factor = 1.0;
    int max_iter = 500;
};

void cmd_invert(const InvertArgs& a) {
    const mem::Stage target = mem::parse_stage(a.stage);
    const fs::path data_dir(a.data);
    const fs::path model_dir(a.model);
    const io::Manifest data_manifest = io::read_manifest(path_str(data_dir, "manifest.txt"));
    const io::Manifest model_manifest = io::read_manifest(path_str(model_dir, "manifest.txt"));
    const Index trials = std::stoll(data_manifest.at("trials"));
    if (trials < 1) throw std::invalid_argument("the session has no trials to invert");

    const cortex::Mesh mesh = cortex::load_off(path_str(data_dir, "mesh.off"));
    const cortex::CortexGraph graph = cortex::CortexGraph::from_mesh(mesh);
    const Matrix leadfield = io::read_matrix(path_str(data_dir, "leadfield.kmm"));
    const cortex::Parcellation parc = cortex::parcellate(graph, static_cast<int>(a.parcels));

    const simstudy::ReductionBundle bundle = load_reduction(model_dir, model_manifest);
    if (bundle.original_length != std::stoll(data_manifest.at("samples")))
        throw std::invalid_argument("model and data disagree on the recording length");
    const KroneckerCovariance noise_cov = KroneckerCovariance::raw(
        SpdMatrix(io::read_matrix(path_str(model_dir, "noise_temporal.kmm"))),
        SpdMatrix(io::read_matrix(path_str(model_dir, "noise_spatial.kmm"))));

    const Matrix leadfield_reduced = reduction::reduce_leadfield(leadfield, bundle.filter);
    const mem::ModelOptions opts{a.alpha, a.rho, a.snr_factor};
    optimizer::Config opt;
    opt.grad_tol = a.grad_tol;
    opt.max_iter = a.max_iter;

    fs::create_directories(a.out);
    const fs::path out(a.out);
    std::string stages_written;
    for (Index i = 0; i < trials; ++i) {
        const Matrix z =
            io::read_matrix(path_str(data_dir, "trial_" + std::to_string(i) + "_Z.kmm"));
        const Matrix d = simstudy::reduce_recording(z, bundle);
        const mem::MemModel model =
            mem::build_model(leadfield_reduced, graph, parc, noise_cov, d, opts);
        const mem::InversionResult inv = mem::invert(model, d, target, a.gamma, opt);

        stages_written.clear();
        for (const auto& [stage, stage_result] : inv.stages) {
            const std::string name = mem::stage_name(stage);
            const Matrix rec =
                mem::reconstruct(stage_result.estimate.coefficients, bundle.time_reduction());
            const std::string tag = "trial_" + std::to_string(i) + "_" + name;
            io::write_matrix(path_str(out, tag + "_rec.kmm"), rec);
            io::write_matrix(path_str(out, tag + "_alpha.kmm"),
                             stage_result.estimate.alpha_post);
            if (!stages_written.empty()) stages_written += ',';
            stages_written += name;
        }
    }

    io::Manifest m;
    m["trials"] = std::to_string(trials);
    m["stage"] = a.stage;
    m["stages"] = stages_written;
    m["alpha"] = io::format_double(a.alpha);
    m["rho"] = io::format_double(a.rho);
    m["parcels"] = std::to_string(a.parcels);
    m["gamma"] = io::format_double(a.gamma);
    m["grad_tol"] = io::format_double(a.grad_tol);
    m["snr_factor"] = io::format_double(a.snr_factor);
    m["max_iter"] = std::to_string(a.max_iter);
    io::write_manifest(path_str(out, "manifest.txt"), m);
}

struct EvaluateArgs {
    std::string truth;
    std::string estimate;
    Index resamples = 20;
    std::string out;
    bool signed_kappa = false;
};

void cmd_evaluate(const EvaluateArgs& a) {
    const fs::path truth_dir(a.truth);
    const fs::path est_dir(a.estimate);
    const io::Manifest truth_manifest = io::read_manifest(path_str(truth_dir, "manifest.txt"));
    const io::Manifest est_manifest = io::read_manifest(path_str(est_dir, "manifest.txt"));
    const Index trials = std::stoll(truth_manifest.at("trials"));
    const std::uint64_t seed = std::stoull(truth_manifest.at("seed"));

    simstudy::TimeProfile profile;
    profile.rate = std::stod(truth_manifest.at("rate"));
    profile.samples = io::read_csv_matrix(path_str(truth_dir, "profile.csv")).col(0);

    std::vector<std::string> stages;
    {
        std::string list = est_manifest.at("stages");
        std::size_t pos = 0;
        while (pos <= list.size()) {
            const std::size_t comma = list.find(',', pos);
            const std::string item = list.substr(pos, comma - pos);
            if (!item.empty()) stages.push_back(item);
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    if (stages.empty()) throw std::invalid_argument("the estimate directory lists no stages");

    const Rng master(seed);
    std::vector<simstudy::MetricsRow> rows;
    for (Index i = 0; i < trials; ++i) {
        const std::string tag = "trial_" + std::to_string(i);
        const Matrix truth = io::read_matrix(path_str(truth_dir, tag + "_truth.kmm"));
        const std::vector<Index> patch =
            io::read_index_list(path_str(truth_dir, tag + "_patch.txt"));
        if (patch.empty())
            throw std::invalid_argument(tag + " has no active vertices to score against");
        std::vector<bool> labels(static_cast<std::size_t>(truth.cols()), false);
        for (Index k : patch) labels[static_cast<std::size_t>(k)] = true;

        for (const std::string& stage : stages) {
            const Matrix rec =
                io::read_matrix(path_str(est_dir, tag + "_" + stage + "_rec.kmm"));
            const Vector kappa = simstudy::kappa_scores(rec, profile, a.signed_kappa);
            const std::uint64_t stream =
                4000000 + static_cast<std::uint64_t>(i) * 8 +
                static_cast<std::uint64_t>(mem::parse_stage(stage));
            Rng eval_rng = master.child(stream);

            simstudy::MetricsRow row;
            row.stage = stage;
            row.source_trial = i;
            row.noise_rep = 0;
            row.iota = simstudy::iota_index(truth, rec);
            row.auc = simstudy::roc_auc(kappa, labels);
            row.auc_restricted = simstudy::restricted_auc(kappa, labels, eval_rng, a.resamples);
            rows.push_back(std::move(row));
        }
    }
    simstudy::write_metrics_csv(a.out, rows);
}

struct ReportArgs {
    std::vector<std::string> metrics;
    std::string out;
};

void cmd_report(const ReportArgs& a) {
    std::vector<simstudy::MetricsRow> rows;
    for (const std::string& path : a.metrics) {
        std::vector<simstudy::MetricsRow> part = simstudy::read_metrics_csv(path);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    simstudy::write_report_csv(a.out, simstudy::aggregate_report(rows));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kronecker-factored wavelet MEM source imaging pipeline"};
    app.require_subcommand(1);

    SimulateArgs sim;
    CLI::App* simulate = app.add_subcommand("simulate", "Generate a synthetic session");
    simulate->add_option("--mesh", sim.mesh, "OFF file or builtin:icosphere:N");
    simulate->add_option("--leadfield", sim.leadfield, "KMM1 file or 'synthetic'");
    simulate->add_option("--trials", sim.trials, "Number of stimulus trials");
    simulate->add_option("--patch-min", sim.patch_min, "Smallest active patch (vertices)");
    simulate->add_option("--patch-max", sim.patch_max, "Largest active patch (vertices)");
    simulate->add_option("--snr-db", sim.snr_db, "Amplitude SNR in dB; inf disables noise");
    simulate->add_option("--profile", sim.profile, "CSV time profile or builtin:slowwave");
    simulate->add_option("--seed", sim.seed, "Master seed");
    simulate->add_option("--out", sim.out, "Output directory")->required();
    simulate->add_option("--sensors", sim.sensors, "Synthetic sensor count");
    simulate->add_option("--noise-recordings", sim.noise_recordings,
                         "Signal-free recordings for covariance estimation");
    simulate->add_option("--samples", sim.samples, "Samples per trial (builtin profile)");
    simulate->add_option("--rate", sim.rate, "Sampling rate in Hz");
    simulate->add_option("--leadfield-sigma", sim.leadfield_sigma,
                         "Gaussian width of the synthetic lead field");
    simulate->add_option("--sensor-radius", sim.sensor_radius, "Synthetic sensor shell radius");
    simulate->add_option("--sensor-positions", sim.sensor_positions,
                         "KMM1 sensor sites (required with a lead-field file)");
    simulate->callback([&] { cmd_simulate(sim); });

    EstimateNoiseArgs en;
    CLI::App* estimate_noise =
        app.add_subcommand("estimate-noise", "Fit the reduction and the noise covariance");
    estimate_noise->add_option("--noise-trials", en.noise_trials, "Session directory")
        ->required();
    estimate_noise->add_option("--wavelet-taps", en.wavelet_taps, "Daubechies filter length");
    estimate_noise->add_option("--coeffs", en.coeffs, "Wavelet coefficients to keep");
    estimate_noise->add_option("--components", en.components, "Spatial PCA components to keep");
    estimate_noise->add_option("--out", en.out, "Output directory")->required();
    estimate_noise->callback([&] { cmd_estimate_noise(en); });

    InvertArgs inv;
    CLI::App* invert = app.add_subcommand("invert", "Invert every trial of a session");
    invert->add_option("--data", inv.data, "Session directory (simulate output)")->required();
    invert->add_option("--model", inv.model, "Model directory (estimate-noise output)")
        ->required();
    invert->add_option("--stage", inv.stage, "Target stage: G, GM or uGM");
    invert->add_option("--alpha", inv.alpha, "Prior activity probability");
    invert->add_option("--rho", inv.rho, "Spatial diffusion scale");
    invert->add_option("--parcels", inv.parcels, "Parcel count");
    invert->add_option("--grad-tol", inv.grad_tol, "Gradient tolerance of the ascent");
    invert->add_option("--out", inv.out, "Output directory")->required();
    invert->add_option("--gamma", inv.gamma, "Shrinkage of the estimated temporal covariance");
    invert->add_option("--snr-factor", inv.snr_factor, "Multiplier on the variance heuristic");
    invert->add_option("--max-iter", inv.max_iter, "Iteration cap of the ascent");
    invert->callback([&] { cmd_invert(inv); });

    EvaluateArgs ev;
    CLI::App* evaluate = app.add_subcommand("evaluate", "Score estimates against the truth");
    evaluate->add_option("--truth", ev.truth, "Session directory with ground truth")->required();
    evaluate->add_option("--estimate", ev.estimate, "Inversion output directory")->required();
    evaluate->add_option("--resamples", ev.resamples, "Subsamples for the restricted AUC");
    evaluate->add_option("--out", ev.out, "Metrics CSV path")->required();
    evaluate->add_flag("--signed-kappa", ev.signed_kappa, "Keep the sign of the correlation");
    evaluate->callback([&] { cmd_evaluate(ev); });

    ReportArgs rep;
    CLI::App* report = app.add_subcommand("report", "Aggregate metrics CSVs into a table");
    report->add_option("--metrics", rep.metrics, "Metrics CSV files")
        ->required()
        ->expected(-1);
    report->add_option("--out", rep.out, "Report CSV path")->required();
    report->callback([&] { cmd_report(rep); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
