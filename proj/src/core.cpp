#include "kronmem/core.hpp"

#include <cmath>

namespace kronmem {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

Index Rng::uniform_index(Index bound) {
    if (bound <= 0) throw std::invalid_argument("Rng::uniform_index: bound must be positive");
    const std::uint64_t b = static_cast<std::uint64_t>(bound);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % b;
    std::uint64_t v;
    do {
        v = engine_();
    } while (v >= limit);
    return static_cast<Index>(v % b);
}

Rng Rng::child(std::uint64_t stream) const {
    return Rng(splitmix64(splitmix64(seed_) ^ splitmix64(stream)));
}

SpdMatrix::SpdMatrix(Matrix m) {
    if (m.rows() != m.cols() || m.rows() == 0)
        throw std::invalid_argument("SpdMatrix: matrix must be square and non-empty");
    if (!m.allFinite()) throw std::invalid_argument("SpdMatrix: non-finite entries");
    const double scale = m.cwiseAbs().maxCoeff();
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * scale)
        throw std::invalid_argument("SpdMatrix: matrix is not symmetric to 1e-12 relative");
    m_ = 0.5 * (m + m.transpose());
    llt_.compute(m_);
    if (llt_.info() != Eigen::Success)
        throw std::invalid_argument("SpdMatrix: matrix is not positive definite");
}

SpdMatrix SpdMatrix::identity(Index dim) {
    return SpdMatrix(Matrix::Identity(dim, dim));
}

SpdMatrix SpdMatrix::scaled_identity(Index dim, double value) {
    if (value <= 0.0) throw std::invalid_argument("SpdMatrix: scale must be positive");
    return SpdMatrix(value * Matrix::Identity(dim, dim));
}

double SpdMatrix::log_det() const {
    return 2.0 * Matrix(llt_.matrixL()).diagonal().array().log().sum();
}

SpdMatrix SpdMatrix::scaled(double factor) const {
    if (factor <= 0.0) throw std::invalid_argument("SpdMatrix::scaled: factor must be positive");
    return SpdMatrix(factor * m_);
}

KroneckerCovariance::KroneckerCovariance(SpdMatrix temporal, SpdMatrix spatial, Normalization tag)
    : temporal_(std::move(temporal)), spatial_(std::move(spatial)), normalization_(tag) {}

KroneckerCovariance KroneckerCovariance::normalized(const SpdMatrix& temporal,
                                                    const SpdMatrix& spatial) {
    const double c = static_cast<double>(temporal.dim()) / temporal.trace();
    return KroneckerCovariance(temporal.scaled(c), spatial.scaled(1.0 / c),
                               Normalization::TemporalTrace);
}

KroneckerCovariance KroneckerCovariance::raw(SpdMatrix temporal, SpdMatrix spatial) {
    return KroneckerCovariance(std::move(temporal), std::move(spatial), Normalization::None);
}

Vector vec(const Matrix& m) {
    Vector out(m.size());
    for (Index r = 0; r < m.rows(); ++r) out.segment(r * m.cols(), m.cols()) = m.row(r);
    return out;
}

Matrix unvec(const Vector& v, Index rows, Index cols) {
    if (v.size() != rows * cols) throw std::invalid_argument("unvec: size mismatch");
    Matrix out(rows, cols);
    for (Index r = 0; r < rows; ++r) out.row(r) = v.segment(r * cols, cols);
    return out;
}

Matrix kron_apply(const SpdMatrix& a, const SpdMatrix& b, const Matrix& m) {
    if (m.rows() != a.dim() || m.cols() != b.dim())
        throw std::invalid_argument("kron_apply: dimension mismatch");
    return a.matrix() * m * b.matrix().transpose();
}

double trace_quad(const Matrix& u, const SpdMatrix& a, const SpdMatrix& b) {
    if (u.rows() != a.dim() || u.cols() != b.dim())
        throw std::invalid_argument("trace_quad: dimension mismatch");
    // Tr(U^T A U B) = <A U, U B> for symmetric A, B.
    return (a.matrix() * u).cwiseProduct(u * b.matrix()).sum();
}

SpdMatrix matrix_exp(const Matrix& s) {
    if (s.rows() != s.cols()) throw std::invalid_argument("matrix_exp: matrix must be square");
    const double scale = std::max(s.cwiseAbs().maxCoeff(), 1e-300);
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1.0))
        throw std::invalid_argument("matrix_exp: matrix must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (s + s.transpose()));
    if (eig.info() != Eigen::Success) throw std::runtime_error("matrix_exp: eigensolver failed");
    const Matrix e = eig.eigenvectors() * eig.eigenvalues().array().exp().matrix().asDiagonal() *
                     eig.eigenvectors().transpose();
    return SpdMatrix(0.5 * (e + e.transpose()));
}

Matrix sample_matrix_normal_from(const Matrix& mean, const KroneckerCovariance& cov,
                                 const Matrix& z) {
    if (mean.rows() != cov.rows() || mean.cols() != cov.cols() || z.rows() != mean.rows() ||
        z.cols() != mean.cols())
        throw std::invalid_argument("sample_matrix_normal: dimension mismatch");
    return mean + cov.temporal().cholesky_lower() * z * cov.spatial().cholesky_lower().transpose();
}

Matrix sample_matrix_normal(const Matrix& mean, const KroneckerCovariance& cov, Rng& rng) {
    Matrix z(mean.rows(), mean.cols());
    for (Index r = 0; r < z.rows(); ++r)
        for (Index c = 0; c < z.cols(); ++c) z(r, c) = rng.gaussian();
    return sample_matrix_normal_from(mean, cov, z);
}

}  // namespace kronmem
