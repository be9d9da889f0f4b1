// Acceptance suite: one line per criterion, PASS or FAIL, nonzero exit when
// anything fails. The first program argument must point at the kronmem CLI
// binary (used by the reproducibility criterion).

#include "kronmem/core.hpp"
#include "kronmem/cortex.hpp"
#include "kronmem/covariance.hpp"
#include "kronmem/mem.hpp"
#include "kronmem/optimizer.hpp"
#include "kronmem/simstudy.hpp"
#include "kronmem/wavelet.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace kronmem;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int criterion, bool ok, const std::string& what, const std::string& detail = "") {
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << criterion << ": " << what;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << std::endl;
    if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix random_matrix(Index rows, Index cols, Rng& rng) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
    return m;
}

SpdMatrix random_spd(Index dim, Rng& rng) {
    const Matrix a = random_matrix(dim, dim, rng);
    return SpdMatrix(a * a.transpose() + 0.5 * Matrix::Identity(dim, dim));
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// random instance within the documented bounds: L<=6, J<=4, K<=20, P<=3
mem::MemModel random_instance(Rng& rng, double alpha_low = 0.1, double alpha_high = 0.9) {
    const Index l = 2 + rng.uniform_index(5);
    const Index j = 2 + rng.uniform_index(3);
    const Index p = 1 + rng.uniform_index(3);
    mem::MemModel model{{},
                        {},
                        KroneckerCovariance::raw(random_spd(l, rng), random_spd(j, rng)),
                        {}};
    Index next = 0;
    for (Index q = 0; q < p; ++q) {
        const Index size = 1 + rng.uniform_index(20 / p);
        model.leadfield_blocks.push_back(random_matrix(j, size, rng));
        std::vector<Index> cols;
        for (Index k = 0; k < size; ++k) cols.push_back(next++);
        model.sources.push_back(cols);

        model.priors.push_back(mem::ParcelPrior{
            alpha_low + (alpha_high - alpha_low) * rng.uniform(), 0.5 + rng.uniform(),
            0.5 * random_matrix(l, size, rng), random_spd(l, rng), random_spd(size, rng)});
    }
    model.validate();
    return model;
}

// mixture log-partition from explicit kronecker matrices, written from the
// definition rather than via the library helpers
double dense_mixture(const Matrix& u, const mem::ParcelPrior& prior) {
    const Vector vu = vec(u);
    const double f0 = 0.5 * prior.variance * vu.squaredNorm();
    const Matrix big = kron(prior.temporal.matrix(), prior.spatial.matrix());
    const double f1 = vu.dot(vec(prior.omega)) + 0.5 * vu.dot(big * vu);
    if (prior.alpha <= 0.0) return f0;
    if (prior.alpha >= 1.0) return f1;
    const double m = std::max(f0, f1);
    return m + std::log((1.0 - prior.alpha) * std::exp(f0 - m) +
                        prior.alpha * std::exp(f1 - m));
}

double dense_free_energy(const mem::MemModel& model, const Matrix& data, const Matrix& lambda) {
    const Matrix noise_big =
        kron(model.noise.temporal().matrix(), model.noise.spatial().matrix());
    double value = vec(data).dot(vec(lambda)) -
                   0.5 * vec(lambda).dot(noise_big * vec(lambda));
    for (std::size_t p = 0; p < model.priors.size(); ++p)
        value -= dense_mixture(lambda * model.leadfield_blocks[p], model.priors[p]);
    return value;
}

bool close_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(1001);
    bool ok = true;
    std::string detail;
    for (int t = 0; t < 50 && ok; ++t) {
        const mem::MemModel model = random_instance(rng);
        const Index l = model.n_coeffs(), j = model.n_components();
        const Matrix data = random_matrix(l, j, rng);
        const Matrix lambda = 0.5 * random_matrix(l, j, rng);

        for (std::size_t p = 0; p < model.priors.size() && ok; ++p) {
            const Matrix u = lambda * model.leadfield_blocks[p];
            const mem::ParcelPrior& prior = model.priors[p];
            const Vector vu = vec(u);
            const double f0_oracle = 0.5 * prior.variance * vu.squaredNorm();
            const Matrix big = kron(prior.temporal.matrix(), prior.spatial.matrix());
            const double f1_oracle = vu.dot(vec(prior.omega)) + 0.5 * vu.dot(big * vu);
            if (!close_rel(mem::logpart_silent(u, prior.variance), f0_oracle, 1e-10) ||
                !close_rel(mem::logpart_active(u, prior), f1_oracle, 1e-10)) {
                ok = false;
                detail = "log-partition mismatch at instance " + std::to_string(t);
            }
        }
        if (ok && !close_rel(mem::free_energy(model, data, lambda),
                             dense_free_energy(model, data, lambda), 1e-10)) {
            ok = false;
            detail = "free energy mismatch at instance " + std::to_string(t);
        }
    }
    const double dt = seconds_since(t0);
    if (ok && dt >= 10.0) {
        ok = false;
        detail = "took " + std::to_string(dt) + " s";
    }
    report(1, ok, "free energy and log-partitions match explicit Kronecker oracles, 50 instances",
           ok ? "" : detail);
}

void criterion_2() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(1002);
    bool ok = true;
    std::string detail;
    double worst = 0.0;
    for (int t = 0; t < 20 && ok; ++t) {
        const mem::MemModel model = random_instance(rng);
        const Index l = model.n_coeffs(), j = model.n_components();
        const Matrix data = random_matrix(l, j, rng);
        const Matrix lambda = 0.3 * random_matrix(l, j, rng);

        Matrix grad;
        mem::free_energy(model, data, lambda, &grad);

        const double h = 1e-5;
        Matrix fd(l, j);
        for (Index r = 0; r < l; ++r)
            for (Index c = 0; c < j; ++c) {
                Matrix lp = lambda, lm = lambda;
                lp(r, c) += h;
                lm(r, c) -= h;
                fd(r, c) = (mem::free_energy(model, data, lp) -
                            mem::free_energy(model, data, lm)) /
                           (2.0 * h);
            }
        const double rel = (grad - fd).norm() / std::max(1.0, fd.norm());
        worst = std::max(worst, rel);
        if (rel > 1e-6) {
            ok = false;
            detail = "relative error " + std::to_string(rel) + " at instance " +
                     std::to_string(t);
        }
    }
    const double dt = seconds_since(t0);
    if (ok && dt >= 30.0) {
        ok = false;
        detail = "took " + std::to_string(dt) + " s";
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "worst relative error %.2e", worst);
    report(2, ok, "analytic gradient matches central differences on 20 instances",
           ok ? buf : detail);
}

void criterion_3() {
    Rng rng(1003);
    bool ok = true;
    std::string detail;
    double worst = -1e300;
    for (int t = 0; t < 10 && ok; ++t) {
        const mem::MemModel model = random_instance(rng);
        const Index l = model.n_coeffs(), j = model.n_components();
        const Matrix data = random_matrix(l, j, rng);
        for (int pair = 0; pair < 100 && ok; ++pair) {
            const Matrix a = 0.5 * random_matrix(l, j, rng);
            const Matrix b = 0.5 * random_matrix(l, j, rng);
            Matrix ga, gb;
            mem::free_energy(model, data, a, &ga);
            mem::free_energy(model, data, b, &gb);
            const double mono = ((ga - gb).array() * (a - b).array()).sum();
            worst = std::max(worst, mono);
            if (mono > 1e-10) {
                ok = false;
                detail = "monotonicity value " + std::to_string(mono);
            }
        }
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "max over pairs %.2e", worst);
    report(3, ok, "gradient monotonicity certifies concavity, 100 pairs per instance",
           ok ? buf : detail);
}

void criterion_4() {
    Rng rng(1004);
    bool ok = true;
    std::string detail;
    double worst = 0.0;
    for (int t = 0; t < 10 && ok; ++t) {
        const mem::MemModel model = random_instance(rng);
        const Index l = model.n_coeffs(), j = model.n_components();
        const Matrix data = random_matrix(l, j, rng);

        // ascend the mixture dual from the all-silent reference point
        Matrix lambda =
            mem::solve_gaussian_reference(mem::with_stage_g_priors(model), data);
        Vector x = vec(lambda);
        optimizer::Config cfg;
        cfg.grad_tol = 1e-10;
        cfg.max_iter = 2000;
        const auto objective = [&](const Vector& v, Vector& grad) {
            Matrix g;
            const double value = mem::free_energy(model, data, unvec(v, l, j), &g);
            grad = vec(g);
            return value;
        };
        optimizer::maximize(objective, x, cfg);
        lambda = unvec(x, l, j);

        const mem::PosteriorMean post = mem::posterior_mean(model, lambda);
        Matrix wg = Matrix::Zero(l, j);
        for (std::size_t p = 0; p < model.priors.size(); ++p) {
            const auto& cols = model.sources[p];
            Matrix w(l, static_cast<Index>(cols.size()));
            for (std::size_t m = 0; m < cols.size(); ++m)
                w.col(static_cast<Index>(m)) = post.coefficients.col(cols[m]);
            wg += w * model.leadfield_blocks[p].transpose();
        }
        const Matrix noise_term =
            kron_apply(model.noise.temporal(), model.noise.spatial(), lambda);
        const double rel = (data - wg - noise_term).norm() / data.norm();
        worst = std::max(worst, rel);
        if (rel > 1e-6) {
            ok = false;
            detail = "residual " + std::to_string(rel) + " of ||D||";
        }
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "worst residual %.2e of ||D||", worst);
    report(4, ok, "stationarity D = W G^T + S_t Lambda S_s holds after optimization",
           ok ? buf : detail);
}

void criterion_5() {
    Rng rng(1005);
    bool ok = true;
    std::string detail;
    double worst = 0.0;
    for (int t = 0; t < 10 && ok; ++t) {
        const mem::MemModel model = random_instance(rng, 0.0, 0.0);  // all-Gaussian
        const Index l = model.n_coeffs(), j = model.n_components();
        const Matrix data = random_matrix(l, j, rng);

        const Matrix closed = mem::solve_gaussian_reference(model, data);

        Vector x = Vector::Zero(l * j);
        optimizer::Config cfg;
        cfg.grad_tol = 1e-12;
        cfg.max_iter = 5000;
        const auto objective = [&](const Vector& v, Vector& grad) {
            Matrix g;
            const double value = mem::free_energy(model, data, unvec(v, l, j), &g);
            grad = vec(g);
            return value;
        };
        optimizer::maximize(objective, x, cfg);

        const double rel = (unvec(x, l, j) - closed).norm() / closed.norm();
        worst = std::max(worst, rel);
        if (rel > 1e-6) {
            ok = false;
            detail = "relative gap " + std::to_string(rel) + " at instance " + std::to_string(t);
        }
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "worst relative gap %.2e", worst);
    report(5, ok, "closed form agrees with the iterative optimizer on 10 Gaussian instances",
           ok ? buf : detail);
}

void criterion_6() {
    Rng rng(1006);
    const Index l = 8, j = 6, n = 500;
    const KroneckerCovariance truth =
        KroneckerCovariance::normalized(random_spd(l, rng), random_spd(j, rng));
    std::vector<Matrix> samples;
    samples.reserve(n);
    const Matrix mean = Matrix::Zero(l, j);
    for (Index i = 0; i < n; ++i) samples.push_back(sample_matrix_normal(mean, truth, rng));

    const covariance::FlipFlopResult res = covariance::flip_flop(samples);

    bool monotone = true;
    double worst_drop = 0.0;
    for (std::size_t i = 1; i < res.loglik_half_steps.size(); ++i) {
        const double drop = res.loglik_half_steps[i - 1] - res.loglik_half_steps[i];
        worst_drop = std::max(worst_drop, drop);
        if (drop > 1e-8 * (1.0 + std::abs(res.loglik_half_steps[i - 1]))) monotone = false;
    }

    const double t_err = (res.cov.temporal().matrix() - truth.temporal().matrix()).norm() /
                         truth.temporal().matrix().norm();
    const double s_err = (res.cov.spatial().matrix() - truth.spatial().matrix()).norm() /
                         truth.spatial().matrix().norm();
    const bool recovered = t_err < 0.05 && s_err < 0.05;

    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "factor errors %.3f / %.3f, worst log-likelihood drop %.2e", t_err, s_err,
                  worst_drop);
    report(6, monotone && recovered,
           "flip-flop log-likelihood is monotone and recovers the factors within 5%", buf);
}

void criterion_7() {
    Rng rng(1007);
    bool ok = true;
    std::string detail;
    for (int taps : {2, 6, 12}) {
        wavelet::Config cfg;
        cfg.taps = taps;
        for (int t = 0; t < 100 && ok; ++t) {
            const Index lengths[3] = {64, 200, 256};
            const Index len = lengths[t % 3];
            Vector x(len);
            for (Index i = 0; i < len; ++i) x(i) = rng.gaussian();

            const Vector c = wavelet::dwt_forward(x, cfg);
            if (std::abs(c.norm() - x.norm()) > 1e-10 * std::max(1.0, x.norm())) {
                ok = false;
                detail = "Parseval violated at taps " + std::to_string(taps);
                break;
            }
            const Vector back = wavelet::dwt_inverse(c, cfg);
            if ((back.head(len) - x).norm() > 1e-10 * std::max(1.0, x.norm())) {
                ok = false;
                detail = "reconstruction off at taps " + std::to_string(taps);
                break;
            }
        }
        if (!ok) break;

        // constant signal: every detail coefficient vanishes (no padding)
        const Vector constant = Vector::Constant(64, 2.0);
        const Vector c = wavelet::dwt_forward(constant, cfg);
        if (c.tail(63).cwiseAbs().maxCoeff() >= 1e-12) {
            ok = false;
            detail = "constant-signal details at taps " + std::to_string(taps);
            break;
        }
    }
    report(7, ok, "wavelet reconstruction, Parseval and constant-signal checks, taps {2,6,12}",
           detail);
}

void criterion_8() {
    bool ok = true;
    std::string detail;

    const cortex::Mesh mesh = cortex::make_icosphere(2);
    const cortex::CortexGraph graph = cortex::CortexGraph::from_mesh(mesh);
    const cortex::Parcellation parc = cortex::parcellate(graph, 12);
    double worst = 0.0;
    for (const auto& members : parc.parcels) {
        const SpdMatrix cov = cortex::parcel_covariance(graph, members, 0.3);
        for (Index i = 0; i < cov.dim(); ++i)
            worst = std::max(worst, std::abs(cov.matrix().row(i).sum() - 1.0));
    }
    if (worst > 1e-10) {
        ok = false;
        detail = "row sum deviation " + std::to_string(worst);
    }

    const cortex::CortexGraph pair = cortex::CortexGraph::from_edges(2, {{0, 1}});
    const SpdMatrix two = cortex::parcel_covariance(pair, {0, 1}, 0.3);
    const double diag = (1.0 + std::exp(-0.6)) / 2.0;
    const double off = (1.0 - std::exp(-0.6)) / 2.0;
    if (std::abs(two.matrix()(0, 0) - diag) > 1e-10 ||
        std::abs(two.matrix()(1, 0) - off) > 1e-10) {
        ok = false;
        detail = "2-vertex closed form mismatch";
    }

    char buf[64];
    std::snprintf(buf, sizeof(buf), "worst row-sum deviation %.2e", worst);
    report(8, ok, "diffusion kernel rows sum to one and match the 2-vertex closed form",
           ok ? buf : detail);
}

void criterion_9() {
    bool ok = true;
    std::string detail;

    Vector scores(4);
    scores << 0.9, 0.8, 0.3, 0.1;
    if (simstudy::roc_auc(scores, {true, false, true, false}) != 0.75) {
        ok = false;
        detail = "AUC example not exactly 0.75";
    }

    // iota on exactly representable norms
    Matrix truth(2, 2);
    truth << 3.0, 4.0, 0.0, 0.0;
    Matrix orth(2, 2);
    orth << 0.0, 0.0, 6.0, 8.0;
    if (simstudy::iota_index(truth, truth) != 1.0 ||
        simstudy::iota_index(truth, -truth) != -1.0 ||
        simstudy::iota_index(truth, orth) != 0.0) {
        ok = false;
        detail = "iota trivial cases not exact";
    }

    simstudy::TimeProfile profile;
    profile.samples.resize(4);
    profile.samples << 1.0, 2.0, 2.0, 4.0;
    Matrix est(4, 3);
    est.col(0) = 2.0 * profile.samples;
    est.col(1) = -profile.samples;
    est.col(2).setZero();
    const Vector kappa = simstudy::kappa_scores(est, profile);
    const Vector signed_kappa = simstudy::kappa_scores(est, profile, true);
    if (kappa(0) != 1.0 || kappa(1) != 1.0 || kappa(2) != 0.0 || signed_kappa(1) != -1.0) {
        ok = false;
        detail = "kappa trivial cases not exact";
    }

    report(9, ok, "metric unit checks are exact", detail);
}

void criterion_10() {
    const auto t0 = std::chrono::steady_clock::now();
    simstudy::StudyConfig cfg;  // defaults are the acceptance setup
    const simstudy::StudyResult res = simstudy::run_study(cfg);
    const double dt = seconds_since(t0);

    const bool means_ordered =
        res.mean_auc_gm > res.mean_auc_g && res.mean_iota_gm > res.mean_iota_g;
    const bool fractions = res.frac_auc_gm_beats_g >= 0.8 && res.frac_iota_gm_beats_g >= 0.8;
    const bool auc_level = res.mean_auc_gm >= 0.75;
    const double dominant_share =
        res.noiseless_trials > 0
            ? static_cast<double>(res.noiseless_dominant) / res.noiseless_trials
            : 0.0;
    const bool noiseless = dominant_share >= 0.95;
    const bool in_time = dt < 900.0;

    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "mean AUC G %.3f GM %.3f, mean iota G %.3f GM %.3f, GM beats G on %.0f%% "
                  "(AUC) / %.0f%% (iota) of source trials, noiseless dominance %zd/%zd, %.0f s",
                  res.mean_auc_g, res.mean_auc_gm, res.mean_iota_g, res.mean_iota_gm,
                  100.0 * res.frac_auc_gm_beats_g, 100.0 * res.frac_iota_gm_beats_g,
                  static_cast<std::ptrdiff_t>(res.noiseless_dominant),
                  static_cast<std::ptrdiff_t>(res.noiseless_trials), dt);
    report(10, means_ordered && fractions && auc_level && noiseless && in_time,
           "desk-scale study: GM improves on G, AUC(GM) >= 0.75, noiseless activity dominance",
           buf);
}

int run_cli(const std::string& cli, const std::string& args) {
    const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

bool same_bytes(const fs::path& a, const fs::path& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    if (!fa || !fb) return false;
    std::ostringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    return sa.str() == sb.str();
}

void criterion_11(const std::string& cli) {
    bool ok = true;
    std::string detail;
    const fs::path root = fs::temp_directory_path() / "kronmem_acceptance_repro";
    fs::remove_all(root);
    fs::create_directories(root);

    for (int run = 0; run < 2 && ok; ++run) {
        const fs::path dir = root / ("run" + std::to_string(run));
        const std::string sim = dir / "sim", model = dir / "model", inv = dir / "inv";
        const std::string metrics = (dir / "metrics.csv").string();
        if (run_cli(cli, "simulate --mesh builtin:icosphere:2 --trials 4 --patch-min 10 "
                         "--patch-max 30 --snr-db 6.0206 --sensors 16 --noise-recordings 24 "
                         "--samples 64 --seed 777 --out " + sim) != 0 ||
            run_cli(cli, "estimate-noise --noise-trials " + sim +
                         " --wavelet-taps 6 --coeffs 16 --components 6 --out " + model) != 0 ||
            run_cli(cli, "invert --data " + sim + " --model " + model +
                         " --stage uGM --alpha 0.25 --rho 0.3 --parcels 12 --grad-tol 1e-8 "
                         "--out " + inv) != 0 ||
            run_cli(cli, "evaluate --truth " + sim + " --estimate " + inv +
                         " --resamples 7 --out " + metrics) != 0) {
            ok = false;
            detail = "pipeline run " + std::to_string(run) + " failed";
        }
    }
    if (ok && !same_bytes(root / "run0" / "metrics.csv", root / "run1" / "metrics.csv")) {
        ok = false;
        detail = "metrics.csv differs between identically seeded runs";
    }
    fs::remove_all(root);
    report(11, ok, "two CLI pipeline runs with one master seed give bit-identical metrics.csv",
           detail);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <path-to-kronmem-cli>" << std::endl;
        return 2;
    }
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    criterion_11(argv[1]);

    if (failures == 0) {
        std::cout << "all criteria passed" << std::endl;
        return 0;
    }
    std::cout << failures << " criteria failed" << std::endl;
    return 1;
}
