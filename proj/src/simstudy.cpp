#include "kronmem/simstudy.hpp"

#include "kronmem/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace kronmem::simstudy {

TimeProfile slow_wave_profile(Index n_samples, double rate, double onset) {
    if (n_samples < 1) throw std::invalid_argument("slow_wave_profile: empty profile");
    if (!(rate > 0.0)) throw std::invalid_argument("slow_wave_profile: rate must be > 0");
    TimeProfile profile;
    profile.rate = rate;
    profile.samples.resize(n_samples);
    for (Index i = 0; i < n_samples; ++i) {
        const double t = static_cast<double>(i) / rate - onset;
        profile.samples[i] =
            t < 0.0 ? 0.0 : std::sin(2.0 * std::numbers::pi * t) * std::exp(-t / 0.8);
    }
    if (!(profile.samples.norm() > 0.0))
        throw std::invalid_argument("slow_wave_profile: profile is identically zero");
    return profile;
}

Matrix random_sensor_positions(Index count, double radius, Rng& rng) {
    if (count < 1) throw std::invalid_argument("random_sensor_positions: count must be >= 1");
    if (!(radius > 0.0)) throw std::invalid_argument("random_sensor_positions: radius must be > 0");
    Matrix sensors(count, 3);
    for (Index i = 0; i < count; ++i) {
        double norm = 0.0;
        Vector dir(3);
        do {
            for (Index c = 0; c < 3; ++c) dir[c] = rng.gaussian();
            norm = dir.norm();
        } while (norm < 1e-12);
        sensors.row(i) = (radius / norm) * dir.transpose();
    }
    return sensors;
}

Matrix synthetic_leadfield(const Matrix& sensors, const Matrix& vertices, double sigma) {
    if (sensors.cols() != 3 || vertices.cols() != 3)
        throw std::invalid_argument("synthetic_leadfield: positions must be n x 3");
    if (!(sigma > 0.0)) throw std::invalid_argument("synthetic_leadfield: sigma must be > 0");
    Matrix g(sensors.rows(), vertices.rows());
    const double denom = 2.0 * sigma * sigma;
    for (Index j = 0; j < sensors.rows(); ++j)
        for (Index k = 0; k < vertices.rows(); ++k)
            g(j, k) = std::exp(-(sensors.row(j) - vertices.row(k)).squaredNorm() / denom);
    return g;
}

KroneckerCovariance make_noise_model(Index n_samples, double ar, const Matrix& sensors,
                                     double length_scale) {
    if (n_samples < 1) throw std::invalid_argument("make_noise_model: need n_samples >= 1");
    if (!(std::abs(ar) < 1.0)) throw std::invalid_argument("make_noise_model: |ar| must be < 1");
    if (!(length_scale > 0.0))
        throw std::invalid_argument("make_noise_model: length_scale must be > 0");

    Matrix temporal(n_samples, n_samples);
    for (Index i = 0; i < n_samples; ++i)
        for (Index j = 0; j < n_samples; ++j)
            temporal(i, j) = std::pow(ar, std::abs(static_cast<double>(i - j)));

    Matrix spatial(sensors.rows(), sensors.rows());
    for (Index i = 0; i < sensors.rows(); ++i)
        for (Index j = 0; j < sensors.rows(); ++j)
            spatial(i, j) = std::exp(-(sensors.row(i) - sensors.row(j)).norm() / length_scale);

    return KroneckerCovariance::raw(SpdMatrix(temporal), SpdMatrix(spatial));
}

double noise_scale_for(const Matrix& signal, const Matrix& noise, double snr_db) {
    const double n = noise.norm();
    if (!(n > 0.0)) throw std::invalid_argument("scale_noise_to_snr: zero noise");
    const double s = signal.norm();
    if (!(s > 0.0)) throw std::invalid_argument("scale_noise_to_snr: zero signal");
    if (!std::isfinite(snr_db)) throw std::invalid_argument("scale_noise_to_snr: non-finite SNR");
    return s / (std::pow(10.0, snr_db / 20.0) * n);
}

Matrix scale_noise_to_snr(const Matrix& signal, const Matrix& noise, double snr_db) {
    return noise_scale_for(signal, noise, snr_db) * noise;
}

SimulatedTrial simulate_trial(const cortex::CortexGraph& graph, const Matrix& leadfield,
                              const TimeProfile& profile, const KroneckerCovariance& noise,
                              Index patch_size, double snr_db, Rng& rng) {
    if (leadfield.cols() != graph.size())
        throw std::invalid_argument("simulate_trial: leadfield columns must match the graph");
    if (noise.rows() != profile.samples.size() || noise.cols() != leadfield.rows())
        throw std::invalid_argument("simulate_trial: noise factors do not match the layout");

    SimulatedTrial trial;
    trial.snr_db = snr_db;
    trial.sources = Matrix::Zero(profile.samples.size(), leadfield.cols());
    if (patch_size > 0) {
        const Index seed = rng.uniform_index(graph.size());
        trial.patch = cortex::grow_patch(graph, seed, patch_size, rng);
        for (Index k : trial.patch) trial.sources.col(k) = profile.samples;
    }
    const Matrix clean = trial.sources * leadfield.transpose();

    if (std::isinf(snr_db) && snr_db > 0.0) {
        trial.data = clean;
        trial.noise_scale = 0.0;
        return trial;
    }
    const Matrix draw =
        sample_matrix_normal(Matrix::Zero(noise.rows(), noise.cols()), noise, rng);
    if (trial.patch.empty()) {
        trial.data = draw;
        trial.noise_scale = 1.0;
    } else {
        trial.noise_scale = noise_scale_for(clean, draw, snr_db);
        trial.data = clean + trial.noise_scale * draw;
    }
    return trial;
}

double iota_index(const Matrix& truth, const Matrix& estimate) {
    if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols())
        throw std::invalid_argument("iota_index: shape mismatch");
    const double nt = truth.norm();
    const double ne = estimate.norm();
    if (!(nt > 0.0) || !(ne > 0.0)) throw std::invalid_argument("iota_index: zero-norm input");
    return (truth.array() * estimate.array()).sum() / (nt * ne);
}

Vector kappa_scores(const Matrix& estimate, const TimeProfile& profile, bool signed_scores) {
    if (estimate.rows() != profile.samples.size())
        throw std::invalid_argument("kappa_scores: sample count mismatch");
    const double np = profile.samples.norm();
    if (!(np > 0.0)) throw std::invalid_argument("kappa_scores: zero profile");
    Vector scores(estimate.cols());
    for (Index k = 0; k < estimate.cols(); ++k) {
        const double nk = estimate.col(k).norm();
        if (nk == 0.0) {
            scores[k] = 0.0;
            continue;
        }
        const double corr = estimate.col(k).dot(profile.samples) / (nk * np);
        scores[k] = signed_scores ? corr : std::abs(corr);
    }
    return scores;
}

double roc_auc(const Vector& scores, const std::vector<bool>& labels) {
    const auto n = static_cast<std::size_t>(scores.size());
    if (labels.size() != n) throw std::invalid_argument("roc_auc: label count mismatch");
    std::size_t positives = 0;
    for (bool b : labels) positives += b ? 1 : 0;
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0)
        throw std::invalid_argument("roc_auc: need both classes");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[static_cast<Index>(a)] < scores[static_cast<Index>(b)];
    });

    // Midranks over tie groups, then the Mann-Whitney statistic.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[static_cast<Index>(order[j + 1])] ==
                                scores[static_cast<Index>(order[i])])
            ++j;
        const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t)
            if (labels[order[t]]) rank_sum_pos += midrank;
        i = j + 1;
    }
    const double m = static_cast<double>(positives);
    return (rank_sum_pos - 0.5 * m * (m + 1.0)) / (m * static_cast<double>(negatives));
}

double restricted_auc(const Vector& scores, const std::vector<bool>& labels, Rng& rng,
                      Index resamples) {
    if (resamples < 1) throw std::invalid_argument("restricted_auc: need resamples >= 1");
    std::vector<Index> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i)
        (labels[i] ? pos : neg).push_back(static_cast<Index>(i));
    if (pos.empty()) throw std::invalid_argument("restricted_auc: no positives");
    if (neg.size() < pos.size())
        throw std::invalid_argument("restricted_auc: fewer negatives than positives");
    if (neg.size() == pos.size()) return roc_auc(scores, labels);  // subsample is the full set

    const std::size_t m = pos.size();
    Vector sub_scores(static_cast<Index>(2 * m));
    std::vector<bool> sub_labels(2 * m, false);
    for (std::size_t i = 0; i < m; ++i) {
        sub_scores[static_cast<Index>(i)] = scores[pos[i]];
        sub_labels[i] = true;
    }

    double total = 0.0;
    for (Index r = 0; r < resamples; ++r) {
        // Partial Fisher-Yates: the first m entries become the subsample.
        for (std::size_t i = 0; i < m; ++i) {
            const auto j = static_cast<std::size_t>(
                rng.uniform_index(static_cast<Index>(neg.size() - i)));
            std::swap(neg[i], neg[i + j]);
        }
        for (std::size_t i = 0; i < m; ++i)
            sub_scores[static_cast<Index>(m + i)] = scores[neg[i]];
        total += roc_auc(sub_scores, sub_labels);
    }
    return total / static_cast<double>(resamples);
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_metrics_csv: cannot open " + path);
    out << "stage,source_trial,noise_rep,iota,auc,auc_restricted\n";
    for (const MetricsRow& r : rows) {
        out << r.stage << ',' << r.source_trial << ',' << r.noise_rep << ','
            << io::format_double(r.iota) << ',' << io::format_double(r.auc) << ','
            << io::format_double(r.auc_restricted) << '\n';
    }
    if (!out) throw std::runtime_error("write_metrics_csv: write failed for " + path);
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_metrics_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) ||
        line != "stage,source_trial,noise_rep,iota,auc,auc_restricted")
        throw std::runtime_error("read_metrics_csv: unexpected header in " + path);

    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string field;
        MetricsRow row;
        if (!std::getline(ls, row.stage, ',')) continue;
        std::getline(ls, field, ',');
        row.source_trial = std::stoll(field);
        std::getline(ls, field, ',');
        row.noise_rep = std::stoll(field);
        std::getline(ls, field, ',');
        row.iota = std::stod(field);
        std::getline(ls, field, ',');
        row.auc = std::stod(field);
        if (!std::getline(ls, field, ','))
            throw std::runtime_error("read_metrics_csv: short row in " + path);
        row.auc_restricted = std::stod(field);
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

ReportCell summarize(std::vector<double> values) {
    ReportCell cell;
    const auto n = static_cast<double>(values.size());
    cell.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    cell.median = values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
    if (values.size() > 1) {
        double acc = 0.0;
        for (double v : values) acc += (v - cell.mean) * (v - cell.mean);
        cell.stddev = std::sqrt(acc / (n - 1.0));
    }
    return cell;
}

}  // namespace

Report aggregate_report(const std::vector<MetricsRow>& rows) {
    if (rows.empty()) throw std::invalid_argument("aggregate_report: no rows");
    std::map<std::string, std::map<std::string, std::vector<double>>> grouped;
    for (const MetricsRow& r : rows) {
        grouped["iota"][r.stage].push_back(r.iota);
        grouped["auc"][r.stage].push_back(r.auc);
        grouped["auc_restricted"][r.stage].push_back(r.auc_restricted);
    }
    Report report;
    for (auto& [metric, stages] : grouped)
        for (auto& [stage, values] : stages) report[metric][stage] = summarize(std::move(values));
    return report;
}

void write_report_csv(const std::string& path, const Report& report) {
    if (report.empty()) throw std::invalid_argument("write_report_csv: empty report");

    std::vector<std::string> stages;
    for (const std::string& canonical : {"G", "GM", "uGM"})
        for (const auto& [metric, cells] : report)
            if (cells.count(canonical) && std::find(stages.begin(), stages.end(), canonical) ==
                                              stages.end())
                stages.push_back(canonical);
    for (const auto& [metric, cells] : report)
        for (const auto& [stage, cell] : cells)
            if (std::find(stages.begin(), stages.end(), stage) == stages.end())
                stages.push_back(stage);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_report_csv: cannot open " + path);
    out << "metric,statistic";
    for (const std::string& s : stages) out << ',' << s;
    out << '\n';

    std::vector<std::string> metrics;
    for (const std::string& canonical : {"iota", "auc", "auc_restricted"})
        if (report.count(canonical)) metrics.push_back(canonical);
    for (const auto& [metric, cells] : report)
        if (std::find(metrics.begin(), metrics.end(), metric) == metrics.end())
            metrics.push_back(metric);

    for (const std::string& metric : metrics) {
        const auto& cells = report.at(metric);
        const std::array<std::pair<const char*, double ReportCell::*>, 3> stats{
            {{"mean", &ReportCell::mean},
             {"median", &ReportCell::median},
             {"std", &ReportCell::stddev}}};
        for (const auto& [name, member] : stats) {
            out << metric << ',' << name;
            for (const std::string& stage : stages) {
                out << ',';
                const auto it = cells.find(stage);
                if (it != cells.end()) out << io::format_double(it->second.*member);
            }
            out << '\n';
        }
    }
    if (!out) throw std::runtime_error("write_report_csv: write failed for " + path);
}

mem::TimeReduction ReductionBundle::time_reduction() const {
    return mem::TimeReduction{wavelet, selection, original_length};
}

ReductionBundle fit_reduction(const std::vector<Matrix>& recordings, const wavelet::Config& wcfg,
                              Index n_coeffs, Index n_components) {
    if (recordings.empty()) throw std::invalid_argument("fit_reduction: no recordings");
    const Index t0 = recordings.front().rows();

    std::vector<Matrix> coeffs;
    coeffs.reserve(recordings.size());
    for (const Matrix& rec : recordings) {
        if (rec.rows() != t0)
            throw std::invalid_argument("fit_reduction: recordings differ in length");
        coeffs.push_back(wavelet::dwt_forward_cols(rec, wcfg));
    }

    ReductionBundle bundle;
    bundle.wavelet = wcfg;
    bundle.original_length = t0;
    bundle.selection =
        wavelet::select_coefficients(coeffs, wavelet::boundary_mask(t0, wcfg), n_coeffs);
    bundle.filter = reduction::fit_spatial_pca(recordings, n_components);
    return bundle;
}

Matrix reduce_recording(const Matrix& recording, const ReductionBundle& red) {
    if (recording.rows() != red.original_length)
        throw std::invalid_argument("reduce_recording: recording length mismatch");
    const Matrix coeffs = wavelet::dwt_forward_cols(recording, red.wavelet);
    return reduction::apply_filter(wavelet::extract_rows(coeffs, red.selection), red.filter);
}

KroneckerCovariance estimate_noise_cov(const std::vector<Matrix>& noise_recordings,
                                       const ReductionBundle& red) {
    if (noise_recordings.empty()) throw std::invalid_argument("estimate_noise_cov: no recordings");
    std::vector<Matrix> reduced;
    reduced.reserve(noise_recordings.size());
    for (const Matrix& rec : noise_recordings) reduced.push_back(reduce_recording(rec, red));
    return covariance::flip_flop(reduced).cov;
}

StudyResult run_study(const StudyConfig& cfg) {
    if (cfg.source_trials < 1 || cfg.noise_reps < 1)
        throw std::invalid_argument("run_study: need at least one trial and one repetition");
    if (cfg.patch_min < 1 || cfg.patch_max < cfg.patch_min)
        throw std::invalid_argument("run_study: bad patch size range");

    const cortex::Mesh mesh = cortex::make_icosphere(cfg.subdivisions);
    const cortex::CortexGraph graph = cortex::CortexGraph::from_mesh(mesh);
    const cortex::Parcellation parc = cortex::parcellate(graph, static_cast<int>(cfg.parcels));
    const TimeProfile profile = slow_wave_profile(cfg.n_samples, cfg.rate);

    const Rng master(cfg.seed);
    Rng sensor_rng = master.child(1);
    const Matrix sensors = random_sensor_positions(cfg.sensors, cfg.sensor_radius, sensor_rng);
    const Matrix g0 = synthetic_leadfield(sensors, mesh.vertices, cfg.leadfield_sigma);
    const KroneckerCovariance noise_model =
        make_noise_model(cfg.n_samples, cfg.ar, sensors, cfg.noise_length_scale);

    // Source configurations are shared across noise repetitions: one patch
    // per source trial, `noise_reps` fresh noise draws on top of it.
    struct SourceCase {
        std::vector<Index> patch;
        Matrix sources;
        Matrix clean;
    };
    std::vector<SourceCase> cases;
    cases.reserve(static_cast<std::size_t>(cfg.source_trials));
    const Index span = cfg.patch_max - cfg.patch_min + 1;
    for (Index s = 0; s < cfg.source_trials; ++s) {
        Rng trial_rng = master.child(1000 + static_cast<std::uint64_t>(s));
        const Index patch_size = cfg.patch_min + trial_rng.uniform_index(span);
        const Index seed_vertex = trial_rng.uniform_index(graph.size());
        SourceCase sc;
        sc.patch = cortex::grow_patch(graph, seed_vertex, patch_size, trial_rng);
        sc.sources = Matrix::Zero(cfg.n_samples, graph.size());
        for (Index k : sc.patch) sc.sources.col(k) = profile.samples;
        sc.clean = sc.sources * g0.transpose();
        cases.push_back(std::move(sc));
    }

    // Noise recordings carry the session-average noise scale so the estimated
    // covariance matches the level actually added to the trials. The expected
    // squared norm of a matrix-normal draw is the product of the factor
    // traces, which avoids spending draws on calibration.
    const double ratio = std::pow(10.0, cfg.snr_db / 20.0);
    const double expected_norm =
        std::sqrt(noise_model.temporal().trace() * noise_model.spatial().trace());
    double mean_scale = 0.0;
    for (const SourceCase& sc : cases) mean_scale += sc.clean.norm() / (ratio * expected_norm);
    mean_scale /= static_cast<double>(cfg.source_trials);

    const Matrix zero_mean = Matrix::Zero(cfg.n_samples, cfg.sensors);
    std::vector<Matrix> noise_recordings;
    noise_recordings.reserve(static_cast<std::size_t>(cfg.noise_recordings));
    for (Index i = 0; i < cfg.noise_recordings; ++i) {
        Rng rec_rng = master.child(500000 + static_cast<std::uint64_t>(i));
        noise_recordings.push_back(mean_scale *
                                   sample_matrix_normal(zero_mean, noise_model, rec_rng));
    }

    // All noisy recordings, laid out trial-major, double as the reduction
    // training set.
    std::vector<Matrix> trial_data;
    trial_data.reserve(static_cast<std::size_t>(cfg.source_trials * cfg.noise_reps));
    for (Index s = 0; s < cfg.source_trials; ++s) {
        const Rng trial_rng = master.child(1000 + static_cast<std::uint64_t>(s));
        for (Index r = 0; r < cfg.noise_reps; ++r) {
            Rng noise_rng = trial_rng.child(10 + static_cast<std::uint64_t>(r));
            const Matrix draw = sample_matrix_normal(zero_mean, noise_model, noise_rng);
            const double c =
                noise_scale_for(cases[static_cast<std::size_t>(s)].clean, draw, cfg.snr_db);
            trial_data.push_back(cases[static_cast<std::size_t>(s)].clean + c * draw);
        }
    }

    wavelet::Config wcfg;
    wcfg.taps = cfg.wavelet_taps;
    const ReductionBundle bundle =
        fit_reduction(trial_data, wcfg, cfg.n_coeffs, cfg.n_components);
    const KroneckerCovariance noise_cov = estimate_noise_cov(noise_recordings, bundle);
    const Matrix leadfield_reduced = reduction::reduce_leadfield(g0, bundle.filter);

    const mem::ModelOptions model_opts{cfg.alpha, cfg.rho, cfg.snr_factor};
    StudyResult result;
    result.n_pairs = cfg.source_trials * cfg.noise_reps;

    Index auc_wins = 0;
    Index iota_wins = 0;
    for (Index s = 0; s < cfg.source_trials; ++s) {
        const SourceCase& sc = cases[static_cast<std::size_t>(s)];
        std::vector<bool> labels(static_cast<std::size_t>(graph.size()), false);
        for (Index k : sc.patch) labels[static_cast<std::size_t>(k)] = true;

        double trial_auc_g = 0.0, trial_auc_gm = 0.0;
        double trial_iota_g = 0.0, trial_iota_gm = 0.0;
        for (Index r = 0; r < cfg.noise_reps; ++r) {
            const Matrix& z = trial_data[static_cast<std::size_t>(s * cfg.noise_reps + r)];
            const Matrix d = reduce_recording(z, bundle);
            const mem::MemModel model =
                mem::build_model(leadfield_reduced, graph, parc, noise_cov, d, model_opts);
            const mem::InversionResult inv =
                mem::invert(model, d, cfg.target, cfg.gamma, cfg.opt);

            double auc_g = 0.0, auc_gm = 0.0, iota_g = 0.0, iota_gm = 0.0;
            for (const auto& [stage, stage_result] : inv.stages) {
                const Matrix rec =
                    mem::reconstruct(stage_result.estimate.coefficients, bundle.time_reduction());
                const Vector kappa = kappa_scores(rec, profile);
                const std::uint64_t eval_stream =
                    2000000 + (static_cast<std::uint64_t>(s) * 64 + static_cast<std::uint64_t>(r)) * 8 +
                    static_cast<std::uint64_t>(stage);
                Rng eval_rng = master.child(eval_stream);

                MetricsRow row;
                row.stage = mem::stage_name(stage);
                row.source_trial = s;
                row.noise_rep = r;
                row.iota = iota_index(sc.sources, rec);
                row.auc = roc_auc(kappa, labels);
                row.auc_restricted = restricted_auc(kappa, labels, eval_rng, cfg.auc_resamples);
                result.rows.push_back(row);

                if (stage == mem::Stage::G) {
                    auc_g = row.auc;
                    iota_g = row.iota;
                } else if (stage == mem::Stage::GM) {
                    auc_gm = row.auc;
                    iota_gm = row.iota;
                }
            }
            result.mean_auc_g += auc_g;
            result.mean_auc_gm += auc_gm;
            result.mean_iota_g += iota_g;
            result.mean_iota_gm += iota_gm;
            trial_auc_g += auc_g;
            trial_auc_gm += auc_gm;
            trial_iota_g += iota_g;
            trial_iota_gm += iota_gm;
        }
        // Stage comparisons are made per source trial on the rep-averaged
        // metric, so they reflect the source configuration and not one
        // particular noise draw.
        if (trial_auc_gm > trial_auc_g) ++auc_wins;
        if (trial_iota_gm > trial_iota_g) ++iota_wins;
    }
    const auto pairs = static_cast<double>(result.n_pairs);
    const auto trials = static_cast<double>(cfg.source_trials);
    result.mean_auc_g /= pairs;
    result.mean_auc_gm /= pairs;
    result.mean_iota_g /= pairs;
    result.mean_iota_gm /= pairs;
    result.frac_auc_gm_beats_g = static_cast<double>(auc_wins) / trials;
    result.frac_iota_gm_beats_g = static_cast<double>(iota_wins) / trials;

    if (cfg.noiseless_pass) {
        result.noiseless_trials = cfg.source_trials;
        for (Index s = 0; s < cfg.source_trials; ++s) {
            const SourceCase& sc = cases[static_cast<std::size_t>(s)];
            const Matrix d = reduce_recording(sc.clean, bundle);
            const mem::MemModel model =
                mem::build_model(leadfield_reduced, graph, parc, noise_cov, d, model_opts);
            const mem::InversionResult inv =
                mem::invert(model, d, mem::Stage::GM, cfg.gamma, cfg.opt);
            const Vector& alpha_post = inv.stages.at(mem::Stage::GM).estimate.alpha_post;

            // Active parcel: the one holding most of the patch (lowest id on
            // ties); silent parcels hold none of it.
            std::vector<Index> overlap(parc.parcels.size(), 0);
            for (Index k : sc.patch) ++overlap[static_cast<std::size_t>(parc.labels[static_cast<std::size_t>(k)])];
            Index active = 0;
            for (std::size_t p = 1; p < overlap.size(); ++p)
                if (overlap[p] > overlap[static_cast<std::size_t>(active)])
                    active = static_cast<Index>(p);

            bool dominant = true;
            for (std::size_t p = 0; p < overlap.size(); ++p) {
                if (overlap[p] > 0) continue;
                if (alpha_post[static_cast<Index>(p)] >= alpha_post[active]) {
                    dominant = false;
                    break;
                }
            }
            if (dominant) ++result.noiseless_dominant;
        }
    }
    return result;
}

}  // namespace kronmem::simstudy
