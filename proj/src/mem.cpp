#include "kronmem/mem.hpp"

#include "kronmem/covariance.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kronmem::mem {

namespace {

/// Gradient of the mixture log-partition at U, which is also the posterior
/// mean of the parcel intensity given the dual point.
Matrix component_mean(const Matrix& u, const ParcelPrior& prior, double a_post) {
    Matrix w = (1.0 - a_post) * prior.variance * u;
    if (a_post > 0.0)
        w.noalias() += a_post * (prior.omega + kron_apply(prior.temporal, prior.spatial, u));
    return w;
}

}  // namespace

Index MemModel::n_sources() const {
    Index k = 0;
    for (const auto& s : sources) k += static_cast<Index>(s.size());
    return k;
}

void MemModel::validate() const {
    if (priors.empty()) throw std::invalid_argument("MemModel: no parcels");
    if (leadfield_blocks.size() != priors.size() || sources.size() != priors.size())
        throw std::invalid_argument("MemModel: per-parcel containers differ in length");
    const Index l = n_coeffs();
    const Index j = n_components();
    const Index k = n_sources();
    std::vector<bool> seen(static_cast<std::size_t>(k), false);
    for (std::size_t p = 0; p < priors.size(); ++p) {
        const auto members = static_cast<Index>(sources[p].size());
        if (members < 1) throw std::invalid_argument("MemModel: empty parcel");
        if (leadfield_blocks[p].rows() != j || leadfield_blocks[p].cols() != members)
            throw std::invalid_argument("MemModel: leadfield block shape mismatch");
        if (!leadfield_blocks[p].allFinite())
            throw std::invalid_argument("MemModel: leadfield block has non-finite entries");
        const ParcelPrior& prior = priors[p];
        if (!(prior.alpha >= 0.0 && prior.alpha <= 1.0))
            throw std::invalid_argument("MemModel: alpha outside [0, 1]");
        if (!(prior.variance > 0.0)) throw std::invalid_argument("MemModel: variance must be > 0");
        if (prior.omega.rows() != l || prior.omega.cols() != members)
            throw std::invalid_argument("MemModel: omega shape mismatch");
        if (prior.temporal.dim() != l || prior.spatial.dim() != members)
            throw std::invalid_argument("MemModel: prior covariance shape mismatch");
        for (Index s : sources[p]) {
            if (s < 0 || s >= k || seen[static_cast<std::size_t>(s)])
                throw std::invalid_argument("MemModel: source indices must partition the columns");
            seen[static_cast<std::size_t>(s)] = true;
        }
    }
}

double logpart_silent(const Matrix& u, double variance) {
    if (!(variance > 0.0)) throw std::invalid_argument("logpart_silent: variance must be > 0");
    return 0.5 * variance * u.squaredNorm();
}

double logpart_active(const Matrix& u, const ParcelPrior& prior) {
    return (u.array() * prior.omega.array()).sum() +
           0.5 * trace_quad(u, prior.temporal, prior.spatial);
}

double mixture_logpart(const Matrix& u, const ParcelPrior& prior) {
    const double a = prior.alpha;
    if (a <= 0.0) return logpart_silent(u, prior.variance);
    if (a >= 1.0) return logpart_active(u, prior);
    const double f0 = logpart_silent(u, prior.variance);
    const double f1 = logpart_active(u, prior);
    const double m = std::max(f0, f1);
    return m + std::log((1.0 - a) * std::exp(f0 - m) + a * std::exp(f1 - m));
}

double posterior_activity(const Matrix& u, const ParcelPrior& prior) {
    const double a = prior.alpha;
    if (a <= 0.0) return 0.0;
    if (a >= 1.0) return 1.0;
    const double t = logpart_active(u, prior) - logpart_silent(u, prior.variance) +
                     std::log(a / (1.0 - a));
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

double free_energy(const MemModel& model, const Matrix& data, const Matrix& lambda,
                   Matrix* gradient) {
    const Index l = model.n_coeffs();
    const Index j = model.n_components();
    if (data.rows() != l || data.cols() != j)
        throw std::invalid_argument("free_energy: data shape does not match the model");
    if (lambda.rows() != l || lambda.cols() != j)
        throw std::invalid_argument("free_energy: lambda shape does not match the model");

    const Matrix noise_term = kron_apply(model.noise.temporal(), model.noise.spatial(), lambda);
    double value = (data.array() * lambda.array()).sum() -
                   0.5 * (lambda.array() * noise_term.array()).sum();
    if (gradient) *gradient = data - noise_term;

    for (std::size_t p = 0; p < model.priors.size(); ++p) {
        const Matrix u = lambda * model.leadfield_blocks[p];
        value -= mixture_logpart(u, model.priors[p]);
        if (gradient) {
            const double a_post = posterior_activity(u, model.priors[p]);
            gradient->noalias() -= component_mean(u, model.priors[p], a_post) *
                                   model.leadfield_blocks[p].transpose();
        }
    }
    return value;
}

PosteriorMean posterior_mean(const MemModel& model, const Matrix& lambda) {
    PosteriorMean out;
    out.coefficients = Matrix::Zero(model.n_coeffs(), model.n_sources());
    out.alpha_post = Vector::Zero(model.n_parcels());
    for (std::size_t p = 0; p < model.priors.size(); ++p) {
        const Matrix u = lambda * model.leadfield_blocks[p];
        const double a_post = posterior_activity(u, model.priors[p]);
        const Matrix w = component_mean(u, model.priors[p], a_post);
        out.alpha_post[static_cast<Index>(p)] = a_post;
        const auto& cols = model.sources[p];
        for (std::size_t i = 0; i < cols.size(); ++i)
            out.coefficients.col(cols[i]) = w.col(static_cast<Index>(i));
    }
    return out;
}

MemModel with_stage_g_priors(const MemModel& model) {
    MemModel out = model;
    for (ParcelPrior& prior : out.priors) prior.alpha = 0.0;
    return out;
}

Matrix solve_gaussian_reference(const MemModel& model, const Matrix& data) {
    const Index l = model.n_coeffs();
    const Index j = model.n_components();
    if (data.rows() != l || data.cols() != j)
        throw std::invalid_argument("solve_gaussian_reference: data shape mismatch");

    Matrix m = Matrix::Zero(j, j);
    for (std::size_t p = 0; p < model.priors.size(); ++p)
        m.noalias() += model.priors[p].variance * model.leadfield_blocks[p] *
                       model.leadfield_blocks[p].transpose();

    Eigen::SelfAdjointEigenSolver<Matrix> es(model.noise.temporal().matrix());
    if (es.info() != Eigen::Success)
        throw std::runtime_error("solve_gaussian_reference: eigendecomposition failed");
    const Matrix rhs = es.eigenvectors().transpose() * data;
    const Matrix& ss = model.noise.spatial().matrix();

    Matrix rotated(l, j);
    for (Index i = 0; i < l; ++i) {
        Eigen::LLT<Matrix> llt(es.eigenvalues()[i] * ss + m);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("solve_gaussian_reference: row system not positive definite");
        rotated.row(i) = llt.solve(rhs.row(i).transpose()).transpose();
    }
    return es.eigenvectors() * rotated;
}

double default_source_variance(const Matrix& data, const KroneckerCovariance& noise,
                               const Matrix& leadfield, double snr_factor) {
    if (!(snr_factor > 0.0))
        throw std::invalid_argument("default_source_variance: snr_factor must be > 0");
    if (data.rows() != noise.rows() || data.cols() != noise.cols())
        throw std::invalid_argument("default_source_variance: data / noise shape mismatch");
    if (leadfield.rows() != data.cols())
        throw std::invalid_argument("default_source_variance: leadfield row count mismatch");
    const double g2 = leadfield.squaredNorm();
    const double d2 = data.squaredNorm();
    if (!(g2 > 0.0)) throw std::invalid_argument("default_source_variance: zero leadfield");
    if (!(d2 > 0.0)) throw std::invalid_argument("default_source_variance: zero data");
    const double noise_scale = noise.temporal().trace() / static_cast<double>(data.rows());
    return snr_factor * d2 / (static_cast<double>(data.cols()) * noise_scale * g2);
}

MemModel build_model(const Matrix& leadfield, const cortex::CortexGraph& graph,
                     const cortex::Parcellation& parcellation, const KroneckerCovariance& noise,
                     const Matrix& data, const ModelOptions& opts) {
    if (leadfield.cols() != graph.size())
        throw std::invalid_argument("build_model: leadfield columns must match the graph");
    if (static_cast<Index>(parcellation.labels.size()) != graph.size())
        throw std::invalid_argument("build_model: parcellation does not cover the graph");
    if (leadfield.rows() != noise.cols())
        throw std::invalid_argument("build_model: leadfield rows must match the noise spatial dim");
    if (!(opts.alpha >= 0.0 && opts.alpha <= 1.0))
        throw std::invalid_argument("build_model: alpha outside [0, 1]");

    const double v = default_source_variance(data, noise, leadfield, opts.snr_factor);
    const Index l = noise.rows();

    std::vector<Matrix> blocks;
    std::vector<std::vector<Index>> sources;
    std::vector<ParcelPrior> priors;
    blocks.reserve(parcellation.parcels.size());
    for (const auto& members : parcellation.parcels) {
        if (members.empty()) throw std::invalid_argument("build_model: empty parcel");
        Matrix block(leadfield.rows(), static_cast<Index>(members.size()));
        for (std::size_t i = 0; i < members.size(); ++i)
            block.col(static_cast<Index>(i)) = leadfield.col(members[i]);
        ParcelPrior prior{opts.alpha, v, Matrix::Zero(l, block.cols()),
                          SpdMatrix::scaled_identity(l, v),
                          cortex::parcel_covariance(graph, members, opts.rho)};
        blocks.push_back(std::move(block));
        sources.push_back(members);
        priors.push_back(std::move(prior));
    }

    MemModel model{std::move(blocks), std::move(sources), noise, std::move(priors)};
    model.validate();
    return model;
}

MemModel estimate_parameters(const MemModel& model, const Matrix& w_prelim, double gamma) {
    if (w_prelim.rows() != model.n_coeffs() || w_prelim.cols() != model.n_sources())
        throw std::invalid_argument("estimate_parameters: estimate shape mismatch");

    const Index l = model.n_coeffs();
    MemModel out = model;
    for (std::size_t p = 0; p < out.priors.size(); ++p) {
        const auto& cols = out.sources[p];
        Matrix block(l, static_cast<Index>(cols.size()));
        for (std::size_t i = 0; i < cols.size(); ++i)
            block.col(static_cast<Index>(i)) = w_prelim.col(cols[i]);

        Matrix second = block * block.transpose() / static_cast<double>(block.cols());
        // A tiny ridge keeps the factorization alive when the preliminary
        // estimate is rank deficient (or all zero).
        const double tr = second.trace();
        const double floor = 1e-12 * (tr > 0.0 ? tr / static_cast<double>(l) : 1.0);
        second.diagonal().array() += floor;

        out.priors[p].omega = std::move(block);
        out.priors[p].temporal = covariance::regularize_spd(second, gamma);
    }
    return out;
}

Stage parse_stage(const std::string& name) {
    if (name == "G") return Stage::G;
    if (name == "GM") return Stage::GM;
    if (name == "uGM") return Stage::uGM;
    throw std::invalid_argument("unknown stage '" + name + "' (expected G, GM or uGM)");
}

std::string stage_name(Stage stage) {
    switch (stage) {
        case Stage::G: return "G";
        case Stage::GM: return "GM";
        case Stage::uGM: return "uGM";
    }
    throw std::logic_error("stage_name: bad enum value");
}

const SourceEstimate& InversionResult::at(Stage stage) const {
    const auto it = stages.find(stage);
    if (it == stages.end())
        throw std::out_of_range("InversionResult: stage " + stage_name(stage) + " was not run");
    return it->second.estimate;
}

InversionResult invert(const MemModel& model, const Matrix& data, Stage target, double gamma,
                       const optimizer::Config& opt) {
    model.validate();
    InversionResult result;

    // Gaussian reference: closed form, also the warm start for everything.
    const MemModel model_g = with_stage_g_priors(model);
    Matrix lambda = solve_gaussian_reference(model_g, data);
    {
        PosteriorMean pm = posterior_mean(model_g, lambda);
        SourceEstimate est{std::move(pm.coefficients), std::move(pm.alpha_post), lambda, Matrix()};
        result.stages.emplace(Stage::G, StageResult{std::move(est), optimizer::Report{}});
    }
    if (target == Stage::G) return result;

    auto ascend = [&](const MemModel& m, Stage tag) {
        Vector x = vec(lambda);
        const auto objective = [&](const Vector& flat, Vector& grad) {
            Matrix g;
            const double value = free_energy(m, data, unvec(flat, data.rows(), data.cols()), &g);
            grad = vec(g);
            return value;
        };
        optimizer::Report report = optimizer::maximize(objective, x, opt);
        lambda = unvec(x, data.rows(), data.cols());
        PosteriorMean pm = posterior_mean(m, lambda);
        SourceEstimate est{std::move(pm.coefficients), std::move(pm.alpha_post), lambda, Matrix()};
        result.stages.emplace(tag, StageResult{std::move(est), std::move(report)});
    };

    const MemModel model_gm =
        estimate_parameters(model, result.at(Stage::G).coefficients, gamma);
    ascend(model_gm, Stage::GM);
    if (target == Stage::GM) return result;

    const MemModel model_ugm =
        estimate_parameters(model, result.at(Stage::GM).coefficients, gamma);
    ascend(model_ugm, Stage::uGM);
    return result;
}

Matrix reconstruct(const Matrix& coefficients, const TimeReduction& reduction) {
    if (reduction.original_length < 1 ||
        reduction.original_length > reduction.selection.padded_length)
        throw std::invalid_argument("reconstruct: bad original length");
    const Matrix padded = wavelet::embed_rows(coefficients, reduction.selection);
    wavelet::Config cfg = reduction.wavelet;
    cfg.padded_length = reduction.selection.padded_length;
    const Matrix full = wavelet::dwt_inverse_cols(padded, cfg);
    return full.topRows(reduction.original_length);
}

}  // namespace kronmem::mem
