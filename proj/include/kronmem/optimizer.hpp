#pragma once

#include "kronmem/core.hpp"

#include <functional>
#include <vector>

namespace kronmem::optimizer {

struct Config {
    double grad_tol = 1e-8;  ///< stop when ||grad|| <= grad_tol * (1 + |f|)
    int max_iter = 500;
    int memory = 10;         ///< stored (s, y) pairs
    double c1 = 1e-4;        ///< sufficient-increase constant
    double c2 = 0.9;         ///< curvature constant, c1 < c2 < 1
};

struct Report {
    bool converged = false;
    int iterations = 0;
    double value = 0.0;
    double grad_norm = 0.0;
    /// Objective after the initial point and every accepted step; for a
    /// concave objective this sequence never decreases.
    std::vector<double> trace;
};

/// Evaluate the objective at x and fill grad (same length as x).
using Objective = std::function<double(const Vector& x, Vector& grad)>;

/// Limited-memory BFGS ascent with a strong Wolfe line search. x is updated
/// in place; non-finite objective or gradient values abort with an exception,
/// while a stalled line search returns the best iterate with
/// converged = false.
Report maximize(const Objective& f, Vector& x, const Config& cfg = {});

}  // namespace kronmem::optimizer
