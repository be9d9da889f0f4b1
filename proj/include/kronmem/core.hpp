#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace kronmem {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Deterministic random generator. Every source of randomness in the library
/// is an explicitly passed Rng; there is no hidden global state. Uniform and
/// Gaussian variates are produced from the raw 64-bit stream with fixed
/// arithmetic, so identical seeds give bit-identical sequences on any
/// platform with IEEE doubles.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t next_u64() { return engine_(); }

    /// Uniform draw in [0, 1).
    double uniform();
    /// Standard normal draw (Box-Muller, cached spare).
    double gaussian();
    /// Uniform integer in {0, ..., bound-1}; bound must be positive.
    Index uniform_index(Index bound);

    /// Derived generator for an independent sub-stream. Children with
    /// distinct stream ids are decorrelated and reproducible.
    Rng child(std::uint64_t stream) const;

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (Index i = static_cast<Index>(items.size()) - 1; i > 0; --i) {
            std::swap(items[static_cast<std::size_t>(i)],
                      items[static_cast<std::size_t>(uniform_index(i + 1))]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Symmetric positive-definite matrix. Construction validates symmetry to
/// 1e-12 relative and positive definiteness via Cholesky factorization;
/// violations are hard errors. The factor is kept so solves and log
/// determinants reuse it.
class SpdMatrix {
public:
    explicit SpdMatrix(Matrix m);

    static SpdMatrix identity(Index dim);
    static SpdMatrix scaled_identity(Index dim, double value);

    const Matrix& matrix() const { return m_; }
    Index dim() const { return m_.rows(); }
    double trace() const { return m_.trace(); }

    /// Lower Cholesky factor C with C * C^T = M.
    Matrix cholesky_lower() const { return llt_.matrixL(); }
    /// Solves M * X = rhs.
    Matrix solve(const Matrix& rhs) const { return llt_.solve(rhs); }
    double log_det() const;

    /// Rescaled copy; factor must be positive.
    SpdMatrix scaled(double factor) const;

private:
    Matrix m_;
    Eigen::LLT<Matrix> llt_;
};

/// Kronecker-factored covariance temporal (x) spatial. The factorization has
/// a scale ambiguity (c*T, S/c); the default convention fixes the
/// representative with trace(temporal) == temporal dimension.
class KroneckerCovariance {
public:
    enum class Normalization { TemporalTrace, None };

    /// Canonical representative: rescales so trace(temporal) == L.
    static KroneckerCovariance normalized(const SpdMatrix& temporal, const SpdMatrix& spatial);
    /// Keeps the factor scales exactly as given.
    static KroneckerCovariance raw(SpdMatrix temporal, SpdMatrix spatial);

    const SpdMatrix& temporal() const { return temporal_; }
    const SpdMatrix& spatial() const { return spatial_; }
    Normalization normalization() const { return normalization_; }

    Index rows() const { return temporal_.dim(); }
    Index cols() const { return spatial_.dim(); }

private:
    KroneckerCovariance(SpdMatrix temporal, SpdMatrix spatial, Normalization tag);

    SpdMatrix temporal_;
    SpdMatrix spatial_;
    Normalization normalization_;
};

/// Row-stacking vectorization: entry (l, j) of M lands at position l*cols + j.
/// This is vec(M^T) in the column-stacking sense and is the one convention
/// used throughout the library.
Vector vec(const Matrix& m);

/// Inverse of vec.
Matrix unvec(const Vector& v, Index rows, Index cols);

/// Applies the Kronecker operator (A (x) B) to vec(M) without materializing
/// it: returns A * M * B^T. A is L x L, B is J x J, M is L x J.
Matrix kron_apply(const SpdMatrix& a, const SpdMatrix& b, const Matrix& m);

/// Tr(U^T A U B); nonnegative for SPD A, B. Equals the Kronecker quadratic
/// form vec(U)^T (A (x) B) vec(U) under the row-stacking convention.
double trace_quad(const Matrix& u, const SpdMatrix& a, const SpdMatrix& b);

/// Matrix exponential of a symmetric matrix via eigendecomposition.
SpdMatrix matrix_exp(const Matrix& s);

/// Draw from the matrix normal law with the given mean and Kronecker
/// covariance: mean + Ct * Z * Cs^T with Z i.i.d. standard normal.
Matrix sample_matrix_normal(const Matrix& mean, const KroneckerCovariance& cov, Rng& rng);

/// Same construction with the standard-normal matrix supplied by the caller
/// (test hook; also the building block of the rng overload).
Matrix sample_matrix_normal_from(const Matrix& mean, const KroneckerCovariance& cov,
                                 const Matrix& z);

}  // namespace kronmem
