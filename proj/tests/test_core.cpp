#include "kronmem/core.hpp"

#include <doctest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

using namespace kronmem;

namespace {

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

// Kronecker product with the row-stacking convention used throughout:
// vec(A X B^T) = (A (x) B) vec(X) where vec concatenates the rows of X.
Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

}  // namespace

TEST_SUITE("core") {

TEST_CASE("rng is deterministic and child streams are independent of call order") {
    Rng a(123);
    Rng b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    const Rng master(7);
    Rng c1 = master.child(1);
    Rng c2 = master.child(2);
    const double first_of_c2 = c2.uniform();
    Rng c2_again = master.child(2);
    CHECK(c2_again.uniform() == first_of_c2);
    CHECK(c1.next_u64() != master.child(2).next_u64());
}

TEST_CASE("uniform stays in [0,1) and has a sane mean") {
    Rng rng(99);
    double sum = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(sum / 20000.0 == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("gaussian has roughly standard moments") {
    Rng rng(11);
    double sum = 0.0, sumsq = 0.0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
        const double g = rng.gaussian();
        sum += g;
        sumsq += g * g;
    }
    CHECK(sum / n == doctest::Approx(0.0).epsilon(0.05));
    CHECK(sumsq / n == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("uniform_index covers the whole range and nothing else") {
    Rng rng(5);
    std::set<Index> seen;
    for (int i = 0; i < 2000; ++i) {
        const Index k = rng.uniform_index(7);
        REQUIRE(k >= 0);
        REQUIRE(k < 7);
        seen.insert(k);
    }
    CHECK(seen.size() == 7);
    CHECK_THROWS(rng.uniform_index(0));
}

TEST_CASE("shuffle produces a permutation and is reproducible") {
    std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    Rng rng(42);
    rng.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});

    std::vector<int> w{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    Rng rng2(42);
    rng2.shuffle(w);
    CHECK(v == w);
}

TEST_CASE("spd matrix factors, solves and log-dets agree with dense oracles") {
    Rng rng(314);
    const SpdMatrix s = random_spd(5, rng);

    const Matrix l = s.cholesky_lower();
    CHECK((l * l.transpose() - s.matrix()).cwiseAbs().maxCoeff() < 1e-12);

    const Matrix rhs = random_matrix(5, 3, rng);
    const Matrix x = s.solve(rhs);
    CHECK((s.matrix() * x - rhs).cwiseAbs().maxCoeff() < 1e-10);

    Eigen::SelfAdjointEigenSolver<Matrix> eig(s.matrix());
    const double log_det_oracle = eig.eigenvalues().array().log().sum();
    CHECK(s.log_det() == doctest::Approx(log_det_oracle).epsilon(1e-12));

    CHECK(s.trace() == doctest::Approx(s.matrix().trace()));
    CHECK(s.dim() == 5);
}

TEST_CASE("spd construction rejects junk") {
    Matrix asym(2, 2);
    asym << 1.0, 0.5, -0.5, 1.0;
    CHECK_THROWS(SpdMatrix(asym));
    Matrix indef(2, 2);
    indef << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS(SpdMatrix(indef));
    CHECK_THROWS(SpdMatrix(Matrix::Zero(2, 3)));
}

TEST_CASE("identity and scaled helpers") {
    const SpdMatrix id = SpdMatrix::identity(4);
    CHECK((id.matrix() - Matrix::Identity(4, 4)).norm() == 0.0);
    const SpdMatrix sc = SpdMatrix::scaled_identity(3, 2.5);
    CHECK(sc.trace() == doctest::Approx(7.5));
    const SpdMatrix twice = id.scaled(2.0);
    CHECK(twice.trace() == doctest::Approx(8.0));
    CHECK_THROWS(id.scaled(-1.0));
}

TEST_CASE("vec stacks rows and unvec inverts it") {
    Matrix m(2, 3);
    m << 1, 2, 3, 4, 5, 6;
    const Vector v = vec(m);
    REQUIRE(v.size() == 6);
    for (int i = 0; i < 6; ++i) CHECK(v(i) == i + 1);
    CHECK((unvec(v, 2, 3) - m).norm() == 0.0);
    CHECK_THROWS(unvec(v, 4, 2));
}

TEST_CASE("kron_apply matches the explicit kronecker product") {
    Rng rng(21);
    const SpdMatrix a = random_spd(4, rng);
    const SpdMatrix b = random_spd(2, rng);
    const Matrix x = random_matrix(4, 2, rng);
    const Matrix direct = kron_apply(a, b, x);
    const Vector via_kron = kron(a.matrix(), b.matrix()) * vec(x);
    CHECK((vec(direct) - via_kron).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("trace_quad matches the vectorized quadratic form") {
    Rng rng(22);
    const Matrix u = random_matrix(4, 3, rng);
    const SpdMatrix a = random_spd(4, rng);
    const SpdMatrix b = random_spd(3, rng);
    const double direct = trace_quad(u, a, b);
    const double oracle = vec(u).dot(kron(a.matrix(), b.matrix()) * vec(u));
    CHECK(direct == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("matrix_exp agrees with the pade implementation") {
    Rng rng(23);
    const Matrix a = random_matrix(5, 5, rng);
    const Matrix sym = 0.5 * (a + a.transpose());
    const SpdMatrix e = matrix_exp(sym);
    const Matrix oracle = sym.exp();
    CHECK((e.matrix() - oracle).cwiseAbs().maxCoeff() < 1e-10 * oracle.cwiseAbs().maxCoeff());
    CHECK_THROWS(matrix_exp(random_matrix(3, 3, rng) + Matrix::Constant(3, 3, 10.0)));
}

TEST_CASE("kronecker covariance keeps its factors and normalization") {
    Rng rng(24);
    const SpdMatrix t = random_spd(4, rng);
    const SpdMatrix s = random_spd(3, rng);

    const KroneckerCovariance raw = KroneckerCovariance::raw(t, s);
    CHECK(raw.normalization() == KroneckerCovariance::Normalization::None);
    CHECK((raw.temporal().matrix() - t.matrix()).norm() == 0.0);
    CHECK(raw.rows() == 4);
    CHECK(raw.cols() == 3);

    const KroneckerCovariance norm = KroneckerCovariance::normalized(t, s);
    CHECK(norm.normalization() == KroneckerCovariance::Normalization::TemporalTrace);
    CHECK(norm.temporal().trace() == doctest::Approx(4.0).epsilon(1e-12));
    // the represented product is unchanged by the renormalization
    const Matrix prod_raw = kron(t.matrix(), s.matrix());
    const Matrix prod_norm =
        kron(norm.temporal().matrix(), norm.spatial().matrix());
    CHECK((prod_raw - prod_norm).cwiseAbs().maxCoeff() < 1e-10 * prod_raw.cwiseAbs().maxCoeff());
}

TEST_CASE("matrix normal samples have the requested second moments") {
    Rng rng(25);
    Matrix tfac(2, 2);
    tfac << 2.0, 0.6, 0.6, 1.0;
    Matrix sfac(2, 2);
    sfac << 1.0, -0.3, -0.3, 0.5;
    const KroneckerCovariance cov =
        KroneckerCovariance::raw(SpdMatrix(tfac), SpdMatrix(sfac));
    const Matrix mean = Matrix::Constant(2, 2, 3.0);

    const int n = 20000;
    Matrix second = Matrix::Zero(4, 4);
    Matrix mean_acc = Matrix::Zero(2, 2);
    for (int i = 0; i < n; ++i) {
        const Matrix x = sample_matrix_normal(mean, cov, rng) - mean;
        const Vector v = vec(x);
        second += v * v.transpose();
        mean_acc += x;
    }
    second /= n;
    const Matrix target = kron(tfac, sfac);
    CHECK((second - target).cwiseAbs().maxCoeff() < 0.08);
    CHECK((mean_acc / n).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("sample_matrix_normal_from is a deterministic function of the draw") {
    Rng rng(26);
    const SpdMatrix t = random_spd(3, rng);
    const SpdMatrix s = random_spd(2, rng);
    const KroneckerCovariance cov = KroneckerCovariance::raw(t, s);
    const Matrix z = random_matrix(3, 2, rng);
    const Matrix mean = Matrix::Zero(3, 2);
    const Matrix x1 = sample_matrix_normal_from(mean, cov, z);
    const Matrix x2 = sample_matrix_normal_from(mean, cov, z);
    CHECK((x1 - x2).norm() == 0.0);
    // z = 0 must land exactly on the mean
    CHECK(sample_matrix_normal_from(mean, cov, Matrix::Zero(3, 2)).norm() == 0.0);
    CHECK_THROWS(sample_matrix_normal_from(mean, cov, Matrix::Zero(2, 2)));
}

}  // TEST_SUITE
