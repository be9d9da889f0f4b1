#pragma once

#include "kronmem/core.hpp"

#include <vector>

namespace kronmem::covariance {

struct FlipFlopOptions {
    double tol = 1e-8;
    int max_iter = 100;
};

struct FlipFlopResult {
    KroneckerCovariance cov;   ///< normalized so trace(temporal) == L
    bool converged = false;
    int sweeps = 0;
    /// Matrix-normal log-likelihood after every half-step (temporal update,
    /// then spatial update), for monotonicity checks.
    std::vector<double> loglik_half_steps;
};

/// Maximum-likelihood Kronecker covariance estimation by the flip-flop
/// iteration. Samples must be centered by the caller. Starts from
/// spatial = I and alternates
///   T <- (1/(nJ)) sum_i N_i S^-1 N_i^T
///   S <- (1/(nL)) sum_i N_i^T T^-1 N_i
/// renormalizing to trace(T) = L after each sweep. Stops when the relative
/// Frobenius change of both factors drops below tol; hitting max_iter
/// returns the last iterate with converged = false.
FlipFlopResult flip_flop(const std::vector<Matrix>& samples, const FlipFlopOptions& opts = {});

/// Matrix-normal log-density summed over the samples, including the
/// -n*L*J/2 * log(2*pi) constant:
///   -(n/2) [J logdet T + L logdet S] - (1/2) sum_i Tr(T^-1 N_i S^-1 N_i^T)
///   - (nLJ/2) log(2 pi)
double loglik_kron(const std::vector<Matrix>& samples, const SpdMatrix& temporal,
                   const SpdMatrix& spatial);

/// Shrinkage toward the scaled identity: (1-gamma) S + gamma (Tr(S)/dim) I.
SpdMatrix regularize_spd(const Matrix& s, double gamma);

}  // namespace kronmem::covariance
