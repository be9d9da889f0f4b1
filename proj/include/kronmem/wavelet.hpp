#pragma once

#include "kronmem/core.hpp"

#include <vector>

namespace kronmem::wavelet {

/// Periodized orthonormal Daubechies transform along the time axis.
struct Config {
    int taps = 6;             ///< filter length, even; 2 gives the Haar pair
    int levels = 0;           ///< decomposition depth; 0 means as deep as the length allows
    Index padded_length = 0;  ///< power of two; 0 means next power of two >= the signal
};

/// Low-pass analysis filter, minimum-phase convention, sum h = sqrt(2).
/// Generated by spectral factorization, not table lookup, and checked for
/// double-shift orthonormality before returning.
Vector daubechies_filter(int taps);

Index padded_length_for(Index input_length, const Config& cfg);
int levels_for(const Config& cfg, Index padded_length);

/// Transform of one signal; inputs shorter than the padded length are
/// zero-extended. Coefficient layout, coarse to fine:
/// [approx | detail_depth | detail_{depth-1} | ... | detail_1].
Vector dwt_forward(const Vector& x, const Config& cfg);

/// Exact inverse of dwt_forward; returns the padded-length signal.
Vector dwt_inverse(const Vector& coeffs, const Config& cfg);

/// Column-wise variants for time-by-channel matrices.
Matrix dwt_forward_cols(const Matrix& x, const Config& cfg);
Matrix dwt_inverse_cols(const Matrix& coeffs, const Config& cfg);

/// mask[i] is true when coefficient i draws on any sample outside the real
/// recording [0, original_length), either by reaching into the zero padding
/// or by wrapping around the periodic block.
std::vector<bool> boundary_mask(Index original_length, const Config& cfg);

/// Retained coefficient positions in the padded layout, stored ascending.
struct CoefficientSelection {
    std::vector<Index> indices;
    Index padded_length = 0;
};

/// Rank unmasked positions by mean squared coefficient over trials and
/// channels, keep the top `count`, ties broken toward the lower index.
CoefficientSelection select_coefficients(const std::vector<Matrix>& coeff_trials,
                                         const std::vector<bool>& mask, Index count);

/// Keep only the selected rows of a padded coefficient matrix.
Matrix extract_rows(const Matrix& coeffs, const CoefficientSelection& sel);

/// Scatter reduced rows back into a zero padded-layout matrix.
Matrix embed_rows(const Matrix& reduced, const CoefficientSelection& sel);

}  // namespace kronmem::wavelet
