#pragma once

#include "kronmem/core.hpp"

#include <vector>

namespace kronmem::reduction {

/// Orthonormal spatial projection fitted by PCA on pooled recordings.
struct SpatialFilter {
    Matrix components;  ///< sensors x kept components, columns orthonormal
    Vector inertia;     ///< fraction of total variance captured per component
};

/// Fit the filter on time-by-sensor trials pooled along the time axis.
/// The pooled mean is removed for the covariance estimate only; columns are
/// the leading eigenvectors, each flipped so its largest-magnitude entry is
/// positive (first such entry on ties).
SpatialFilter fit_spatial_pca(const std::vector<Matrix>& trials, Index n_components);

/// Project a time-by-sensor recording onto the kept components.
Matrix apply_filter(const Matrix& recording, const SpatialFilter& filter);

/// Project a sensors-by-sources lead field onto the kept components.
Matrix reduce_leadfield(const Matrix& leadfield, const SpatialFilter& filter);

}  // namespace kronmem::reduction
