#pragma once

#include "kronmem/core.hpp"
#include "kronmem/cortex.hpp"
#include "kronmem/optimizer.hpp"
#include "kronmem/wavelet.hpp"

#include <map>
#include <string>
#include <vector>

namespace kronmem::mem {

/// Per-parcel source prior: a two-component mixture of a low-variance
/// "silent" Gaussian and an "active" Gaussian with mean omega and separable
/// time/space covariance.
struct ParcelPrior {
    double alpha = 0.25;   ///< prior probability of the active component
    double variance = 1.0; ///< silent-component variance v_p
    Matrix omega;          ///< coeffs x members, active mean
    SpdMatrix temporal;    ///< coeffs x coeffs, active temporal covariance
    SpdMatrix spatial;     ///< members x members, active spatial covariance
};

/// Inverse problem in the reduced space: data (coeffs x components) equals
/// intensity (coeffs x sources) times leadfield^T plus matrix-normal noise.
struct MemModel {
    std::vector<Matrix> leadfield_blocks;    ///< components x members, per parcel
    std::vector<std::vector<Index>> sources; ///< original source column per member
    KroneckerCovariance noise;               ///< coeffs x coeffs and components x components
    std::vector<ParcelPrior> priors;

    Index n_parcels() const { return static_cast<Index>(priors.size()); }
    Index n_coeffs() const { return noise.temporal().dim(); }
    Index n_components() const { return noise.spatial().dim(); }
    Index n_sources() const;
    /// Check internal shape consistency; throws on the first violation.
    void validate() const;
};

/// Log-partition of the silent component: (v/2) Tr(U^T U).
double logpart_silent(const Matrix& u, double variance);

/// Log-partition of the active component:
/// Tr(U^T omega) + (1/2) Tr(U^T Sigma_t U Sigma_s).
double logpart_active(const Matrix& u, const ParcelPrior& prior);

/// Mixture log-partition, log-sum-exp of the two components weighted by
/// (1 - alpha, alpha); exact at alpha = 0 and alpha = 1.
double mixture_logpart(const Matrix& u, const ParcelPrior& prior);

/// Posterior probability that the parcel is active given U = Lambda G_p:
/// logistic(F_active - F_silent + logit(alpha)).
double posterior_activity(const Matrix& u, const ParcelPrior& prior);

/// Concave dual objective
///   Tr(D^T Lambda) - (1/2) Tr(Lambda^T S_t Lambda S_s)
///   - sum_p F_p(Lambda G_p),
/// zero at Lambda = 0. When `gradient` is non-null it receives the ascent
/// direction D - S_t Lambda S_s - sum_p W_p G_p^T.
double free_energy(const MemModel& model, const Matrix& data, const Matrix& lambda,
                   Matrix* gradient = nullptr);

struct PosteriorMean {
    Matrix coefficients;  ///< coeffs x sources, original column order
    Vector alpha_post;    ///< per-parcel posterior activity
};

/// Posterior source mean at a dual point:
/// W_p = a_p (omega_p + S_t U_p S_s) + (1 - a_p) v_p U_p with U_p = Lambda G_p.
PosteriorMean posterior_mean(const MemModel& model, const Matrix& lambda);

/// Copy of the model with every parcel forced silent (alpha = 0), which turns
/// the prior into the plain Gaussian of variance v_p.
MemModel with_stage_g_priors(const MemModel& model);

/// Exact dual optimum of the all-silent model. Diagonalizing the temporal
/// noise factor splits the stationarity condition into one small SPD system
/// per coefficient row.
Matrix solve_gaussian_reference(const MemModel& model, const Matrix& data);

/// Data-driven scale for the silent variance:
/// snr_factor * ||D||_F^2 / (J * (Tr S_t / L) * ||G||_F^2).
double default_source_variance(const Matrix& data, const KroneckerCovariance& noise,
                               const Matrix& leadfield, double snr_factor = 1.0);

struct ModelOptions {
    double alpha = 0.25;      ///< prior activity probability for every parcel
    double rho = 0.3;         ///< diffusion scale of the parcel spatial kernels
    double snr_factor = 1.0;  ///< multiplier on the silent-variance heuristic
};

/// Assemble the model for one recording: leadfield columns are grouped by
/// parcel, spatial kernels come from the parcel subgraphs, the silent
/// variance from the data scale. Active means start at zero and temporal
/// covariances at v_p I until estimate_parameters replaces them.
MemModel build_model(const Matrix& leadfield, const cortex::CortexGraph& graph,
                     const cortex::Parcellation& parcellation, const KroneckerCovariance& noise,
                     const Matrix& data, const ModelOptions& opts = {});

/// Refresh the active-component parameters from a preliminary estimate:
/// omega_p becomes the parcel block, the temporal covariance the shrunk
/// uncentered second moment of that block. Weights, variances and spatial
/// kernels are kept.
MemModel estimate_parameters(const MemModel& model, const Matrix& w_prelim, double gamma = 0.05);

enum class Stage { G, GM, uGM };

Stage parse_stage(const std::string& name);
std::string stage_name(Stage stage);

struct SourceEstimate {
    Matrix coefficients;  ///< coeffs x sources posterior mean
    Vector alpha_post;    ///< per-parcel posterior activity
    Matrix lambda;        ///< dual optimum
    Matrix time_courses;  ///< samples x sources; empty until reconstructed
};

struct StageResult {
    SourceEstimate estimate;
    optimizer::Report report;  ///< default-constructed for the closed-form stage
};

struct InversionResult {
    std::map<Stage, StageResult> stages;
    const SourceEstimate& at(Stage stage) const;
};

/// Run the staged pipeline up to `target`: the Gaussian reference first, then
/// one or two rounds of parameter re-estimation plus dual ascent, each warm
/// started from the previous dual optimum. Every computed stage is returned.
InversionResult invert(const MemModel& model, const Matrix& data, Stage target,
                       double gamma = 0.05, const optimizer::Config& opt = {});

/// Wavelet-side bookkeeping needed to map reduced coefficients back to time.
struct TimeReduction {
    wavelet::Config wavelet;
    wavelet::CoefficientSelection selection;
    Index original_length = 0;
};

/// Reduced coefficients -> padded layout -> inverse transform -> first
/// original_length samples.
Matrix reconstruct(const Matrix& coefficients, const TimeReduction& reduction);

}  // namespace kronmem::mem
