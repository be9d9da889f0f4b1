#include "kronmem/core.hpp"
#include "kronmem/reduction.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace kronmem;

namespace {

Matrix random_matrix(Index rows, Index cols, Rng& rng) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
    return m;
}

}  // namespace

TEST_SUITE("reduction") {

TEST_CASE("components are orthonormal and ordered by explained variance") {
    Rng rng(81);
    std::vector<Matrix> trials;
    for (int t = 0; t < 6; ++t) trials.push_back(random_matrix(50, 8, rng));

    const reduction::SpatialFilter f = reduction::fit_spatial_pca(trials, 5);
    REQUIRE(f.components.rows() == 8);
    REQUIRE(f.components.cols() == 5);
    REQUIRE(f.inertia.size() == 5);

    const Matrix gram = f.components.transpose() * f.components;
    CHECK((gram - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-12);

    for (Index i = 1; i < 5; ++i) CHECK(f.inertia(i) <= f.inertia(i - 1) + 1e-15);
    CHECK(f.inertia.sum() <= 1.0 + 1e-12);
    CHECK(f.inertia.minCoeff() >= 0.0);
}

TEST_CASE("pca matches a two-channel oracle") {
    // channels perfectly correlated with weights (3, 4): the single component
    // must be (3,4)/5 and carry all the variance
    Rng rng(82);
    Matrix trial(100, 2);
    for (Index i = 0; i < 100; ++i) {
        const double s = rng.gaussian();
        trial(i, 0) = 3.0 * s;
        trial(i, 1) = 4.0 * s;
    }
    const reduction::SpatialFilter f = reduction::fit_spatial_pca({trial}, 1);
    CHECK(f.components(0, 0) == doctest::Approx(0.6).epsilon(1e-10));
    CHECK(f.components(1, 0) == doctest::Approx(0.8).epsilon(1e-10));
    CHECK(f.inertia(0) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("pca agrees with a dense eigendecomposition of the pooled covariance") {
    Rng rng(83);
    std::vector<Matrix> trials;
    for (int t = 0; t < 3; ++t) trials.push_back(random_matrix(40, 6, rng));

    // oracle: pool rows, remove the global mean, eigendecompose
    Matrix pooled(120, 6);
    for (int t = 0; t < 3; ++t) pooled.middleRows(40 * t, 40) = trials[t];
    const Vector mean = pooled.colwise().mean();
    const Matrix centered = pooled.rowwise() - mean.transpose();
    const Matrix cov = centered.transpose() * centered / 120.0;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    REQUIRE(eig.info() == Eigen::Success);

    const reduction::SpatialFilter f = reduction::fit_spatial_pca(trials, 3);
    const double total = eig.eigenvalues().sum();
    for (Index k = 0; k < 3; ++k) {
        const Vector expected = eig.eigenvectors().col(5 - k);
        const Vector got = f.components.col(k);
        // same axis up to sign
        CHECK(std::abs(std::abs(expected.dot(got)) - 1.0) < 1e-10);
        CHECK(f.inertia(k) == doctest::Approx(eig.eigenvalues()(5 - k) / total).epsilon(1e-10));
    }
}

TEST_CASE("component signs make the largest-magnitude entry positive") {
    Rng rng(84);
    std::vector<Matrix> trials{random_matrix(60, 5, rng), random_matrix(60, 5, rng)};
    const reduction::SpatialFilter f = reduction::fit_spatial_pca(trials, 4);
    for (Index k = 0; k < 4; ++k) {
        Index peak = 0;
        f.components.col(k).cwiseAbs().maxCoeff(&peak);
        CHECK(f.components(peak, k) > 0.0);
    }
}

TEST_CASE("apply_filter is plain right multiplication by the components") {
    Rng rng(85);
    std::vector<Matrix> trials{random_matrix(30, 6, rng)};
    const reduction::SpatialFilter f = reduction::fit_spatial_pca(trials, 4);
    const Matrix rec = random_matrix(12, 6, rng);
    const Matrix reduced = reduction::apply_filter(rec, f);
    CHECK((reduced - rec * f.components).cwiseAbs().maxCoeff() < 1e-14);
    CHECK_THROWS(reduction::apply_filter(random_matrix(12, 5, rng), f));
}

TEST_CASE("reduce_leadfield projects the sensor dimension") {
    Rng rng(86);
    std::vector<Matrix> trials{random_matrix(30, 6, rng)};
    const reduction::SpatialFilter f = reduction::fit_spatial_pca(trials, 3);
    const Matrix g = random_matrix(6, 20, rng);
    const Matrix gr = reduction::reduce_leadfield(g, f);
    REQUIRE(gr.rows() == 3);
    REQUIRE(gr.cols() == 20);
    CHECK((gr - f.components.transpose() * g).cwiseAbs().maxCoeff() < 1e-14);
    CHECK_THROWS(reduction::reduce_leadfield(random_matrix(5, 20, rng), f));
}

TEST_CASE("low-rank data is captured exactly by enough components") {
    Rng rng(87);
    // rank-two channel structure
    Matrix basis(6, 2);
    basis << 1, 0, 0, 1, 1, 1, -1, 2, 0.5, -0.5, 2, 0;
    std::vector<Matrix> trials;
    for (int t = 0; t < 4; ++t) trials.push_back(random_matrix(25, 2, rng) * basis.transpose());
    const reduction::SpatialFilter f = reduction::fit_spatial_pca(trials, 2);
    CHECK(f.inertia.sum() == doctest::Approx(1.0).epsilon(1e-10));
    // projecting onto the components and back loses nothing
    const Matrix rec = random_matrix(10, 2, rng) * basis.transpose();
    const Matrix round = reduction::apply_filter(rec, f) * f.components.transpose();
    CHECK((round - rec).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("degenerate inputs are rejected") {
    Rng rng(88);
    CHECK_THROWS(reduction::fit_spatial_pca({}, 2));
    CHECK_THROWS(reduction::fit_spatial_pca({random_matrix(10, 3, rng)}, 4));
    CHECK_THROWS(reduction::fit_spatial_pca({random_matrix(10, 3, rng)}, 0));
    CHECK_THROWS(reduction::fit_spatial_pca({Matrix::Zero(10, 3)}, 2));
}

}  // TEST_SUITE
