#include "kronmem/covariance.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace kronmem::covariance {

namespace {

void check_samples(const std::vector<Matrix>& samples) {
    if (samples.empty()) throw std::invalid_argument("flip_flop: no samples");
    const Index rows = samples.front().rows();
    const Index cols = samples.front().cols();
    if (rows < 1 || cols < 1) throw std::invalid_argument("flip_flop: empty sample matrix");
    for (const Matrix& n : samples) {
        if (n.rows() != rows || n.cols() != cols)
            throw std::invalid_argument("flip_flop: samples differ in shape");
        if (!n.allFinite()) throw std::invalid_argument("flip_flop: sample has non-finite entries");
    }
}

}  // namespace

FlipFlopResult flip_flop(const std::vector<Matrix>& samples, const FlipFlopOptions& opts) {
    check_samples(samples);
    const Index L = samples.front().rows();
    const Index J = samples.front().cols();
    const auto n = static_cast<Index>(samples.size());
    // Identifiability needs more scalar observations than parameters in each
    // factor; below these bounds the likelihood is unbounded.
    if (n * J <= L || n * L <= J)
        throw std::invalid_argument("flip_flop: too few samples for the factor sizes");

    Matrix temporal = Matrix::Identity(L, L);
    Matrix spatial = Matrix::Identity(J, J);

    bool converged = false;
    int sweeps = 0;
    std::vector<double> loglik;
    loglik.reserve(static_cast<std::size_t>(2 * opts.max_iter));

    auto record = [&](const Matrix& t, const Matrix& s) {
        loglik.push_back(loglik_kron(samples, SpdMatrix(t), SpdMatrix(s)));
    };

    for (int sweep = 1; sweep <= opts.max_iter; ++sweep) {
        const Matrix prev_t = temporal;
        const Matrix prev_s = spatial;

        // Temporal half-step holding the spatial factor fixed.
        Eigen::LLT<Matrix> llt_s(spatial);
        if (llt_s.info() != Eigen::Success)
            throw std::runtime_error("flip_flop: spatial factor lost positive definiteness");
        Matrix acc_t = Matrix::Zero(L, L);
        for (const Matrix& ni : samples) acc_t += ni * llt_s.solve(ni.transpose());
        temporal = acc_t / static_cast<double>(n * J);
        temporal = 0.5 * (temporal + temporal.transpose().eval());
        record(temporal, spatial);

        // Spatial half-step holding the temporal factor fixed.
        Eigen::LLT<Matrix> llt_t(temporal);
        if (llt_t.info() != Eigen::Success)
            throw std::runtime_error("flip_flop: temporal factor lost positive definiteness");
        Matrix acc_s = Matrix::Zero(J, J);
        for (const Matrix& ni : samples) acc_s += ni.transpose() * llt_t.solve(ni);
        spatial = acc_s / static_cast<double>(n * L);
        spatial = 0.5 * (spatial + spatial.transpose().eval());
        record(temporal, spatial);

        // Fix the scale ambiguity of the Kronecker product: trace(T) = L.
        const double c = static_cast<double>(L) / temporal.trace();
        temporal *= c;
        spatial /= c;

        sweeps = sweep;
        const double dt = (temporal - prev_t).norm() / std::max(prev_t.norm(), 1e-300);
        const double ds = (spatial - prev_s).norm() / std::max(prev_s.norm(), 1e-300);
        if (dt < opts.tol && ds < opts.tol) {
            converged = true;
            break;
        }
    }

    return FlipFlopResult{
        KroneckerCovariance::normalized(SpdMatrix(temporal), SpdMatrix(spatial)),
        converged, sweeps, std::move(loglik)};
}

double loglik_kron(const std::vector<Matrix>& samples, const SpdMatrix& temporal,
                   const SpdMatrix& spatial) {
    check_samples(samples);
    const Index L = temporal.dim();
    const Index J = spatial.dim();
    if (samples.front().rows() != L || samples.front().cols() != J)
        throw std::invalid_argument("loglik_kron: sample shape does not match the factors");
    const auto n = static_cast<double>(samples.size());

    double quad = 0.0;
    for (const Matrix& ni : samples) {
        // Tr(T^-1 N S^-1 N^T) via two triangular solves.
        const Matrix t_inv_n = temporal.solve(ni);
        const Matrix s_inv_nt = spatial.solve(ni.transpose());
        quad += (t_inv_n.transpose() * s_inv_nt.transpose()).trace();
    }

    const double ld = static_cast<double>(J) * temporal.log_det() +
                      static_cast<double>(L) * spatial.log_det();
    return -0.5 * n * ld - 0.5 * quad -
           0.5 * n * static_cast<double>(L * J) * std::log(2.0 * std::numbers::pi);
}

SpdMatrix regularize_spd(const Matrix& s, double gamma) {
    if (s.rows() != s.cols()) throw std::invalid_argument("regularize_spd: matrix is not square");
    if (!(gamma >= 0.0 && gamma <= 1.0))
        throw std::invalid_argument("regularize_spd: gamma must lie in [0, 1]");
    const double mean_diag = s.trace() / static_cast<double>(s.rows());
    Matrix out = (1.0 - gamma) * s;
    out.diagonal().array() += gamma * mean_diag;
    return SpdMatrix(out);
}

}  // namespace kronmem::covariance
