#include "kronmem/reduction.hpp"

#include <Eigen/Eigenvalues>

#include <stdexcept>

namespace kronmem::reduction {

SpatialFilter fit_spatial_pca(const std::vector<Matrix>& trials, Index n_components) {
    if (trials.empty()) throw std::invalid_argument("fit_spatial_pca: no trials");
    const Index sensors = trials.front().cols();
    if (n_components < 1 || n_components > sensors)
        throw std::invalid_argument("fit_spatial_pca: component count out of range");

    Index total_rows = 0;
    Vector mean = Vector::Zero(sensors);
    for (const Matrix& t : trials) {
        if (t.cols() != sensors)
            throw std::invalid_argument("fit_spatial_pca: trials differ in sensor count");
        if (!t.allFinite())
            throw std::invalid_argument("fit_spatial_pca: trial has non-finite entries");
        total_rows += t.rows();
        mean += t.colwise().sum().transpose();
    }
    if (total_rows < 2) throw std::invalid_argument("fit_spatial_pca: too few samples");
    mean /= static_cast<double>(total_rows);

    Matrix cov = Matrix::Zero(sensors, sensors);
    for (const Matrix& t : trials) {
        const Matrix centered = t.rowwise() - mean.transpose();
        cov.noalias() += centered.transpose() * centered;
    }
    cov /= static_cast<double>(total_rows);

    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("fit_spatial_pca: eigendecomposition failed");
    const double total = es.eigenvalues().sum();
    if (!(total > 0.0)) throw std::invalid_argument("fit_spatial_pca: data has no variance");

    // Eigen returns eigenvalues ascending; take from the back.
    SpatialFilter filter;
    filter.components.resize(sensors, n_components);
    filter.inertia.resize(n_components);
    for (Index c = 0; c < n_components; ++c) {
        const Index src = sensors - 1 - c;
        Vector v = es.eigenvectors().col(src);
        Index peak = 0;
        v.cwiseAbs().maxCoeff(&peak);
        if (v[peak] < 0.0) v = -v;
        filter.components.col(c) = v;
        filter.inertia[c] = es.eigenvalues()[src] / total;
    }
    return filter;
}

Matrix apply_filter(const Matrix& recording, const SpatialFilter& filter) {
    if (recording.cols() != filter.components.rows())
        throw std::invalid_argument("apply_filter: sensor count mismatch");
    return recording * filter.components;
}

Matrix reduce_leadfield(const Matrix& leadfield, const SpatialFilter& filter) {
    if (leadfield.rows() != filter.components.rows())
        throw std::invalid_argument("reduce_leadfield: sensor count mismatch");
    return filter.components.transpose() * leadfield;
}

}  // namespace kronmem::reduction
