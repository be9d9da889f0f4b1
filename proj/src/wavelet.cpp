#include "kronmem/wavelet.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace kronmem::wavelet {

namespace {

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r *= static_cast<double>(n - k + i) / static_cast<double>(i);
    return r;
}

std::complex<double> horner(const std::vector<double>& poly, std::complex<double> z) {
    std::complex<double> v = 0.0;
    for (auto it = poly.rbegin(); it != poly.rend(); ++it) v = v * z + *it;
    return v;
}

std::vector<std::complex<double>> polynomial_roots(const std::vector<double>& poly) {
    const int deg = static_cast<int>(poly.size()) - 1;
    Matrix companion = Matrix::Zero(deg, deg);
    for (int i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
    for (int i = 0; i < deg; ++i) companion(i, deg - 1) = -poly[static_cast<std::size_t>(i)] / poly.back();
    Eigen::EigenSolver<Matrix> es(companion, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("daubechies_filter: root finding failed");

    // Derivative for a few Newton polishing steps; companion eigenvalues of
    // high-degree polynomials drift in the last digits otherwise.
    std::vector<double> deriv(static_cast<std::size_t>(deg));
    for (int i = 1; i <= deg; ++i)
        deriv[static_cast<std::size_t>(i - 1)] = static_cast<double>(i) * poly[static_cast<std::size_t>(i)];

    std::vector<std::complex<double>> roots;
    roots.reserve(static_cast<std::size_t>(deg));
    for (int i = 0; i < deg; ++i) {
        std::complex<double> r = es.eigenvalues()(i);
        for (int it = 0; it < 8; ++it) {
            const std::complex<double> d = horner(deriv, r);
            if (std::abs(d) == 0.0) break;
            const std::complex<double> step = horner(poly, r) / d;
            r -= step;
            if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(r))) break;
        }
        roots.push_back(r);
    }
    return roots;
}

void poly_mul_inplace(std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    a = std::move(out);
}

void verify_filter(const Vector& h) {
    const int q = static_cast<int>(h.size());
    if (std::abs(h.sum() - std::numbers::sqrt2) > 1e-10)
        throw std::runtime_error("daubechies_filter: coefficient sum is off");
    for (int k = 0; 2 * k < q; ++k) {
        double acc = 0.0;
        for (int n = 0; n + 2 * k < q; ++n) acc += h[n] * h[n + 2 * k];
        const double want = (k == 0) ? 1.0 : 0.0;
        if (std::abs(acc - want) > 1e-10)
            throw std::runtime_error("daubechies_filter: double-shift orthonormality is off");
    }
}

struct Plan {
    Index padded = 0;
    int depth = 0;
    Vector h;
    Vector g;
};

Plan make_plan(Index input_length, const Config& cfg) {
    Plan plan;
    plan.padded = padded_length_for(input_length, cfg);
    plan.depth = levels_for(cfg, plan.padded);
    plan.h = daubechies_filter(cfg.taps);
    plan.g.resize(cfg.taps);
    for (int n = 0; n < cfg.taps; ++n)
        plan.g[n] = ((n % 2 == 0) ? 1.0 : -1.0) * plan.h[cfg.taps - 1 - n];
    return plan;
}

void analysis_step(Vector& buf, Index len, const Plan& plan, Vector& scratch) {
    const Index half = len / 2;
    const int q = static_cast<int>(plan.h.size());
    for (Index k = 0; k < half; ++k) {
        double a = 0.0, d = 0.0;
        for (int n = 0; n < q; ++n) {
            const double x = buf[(2 * k + n) % len];
            a += plan.h[n] * x;
            d += plan.g[n] * x;
        }
        scratch[k] = a;
        scratch[half + k] = d;
    }
    buf.head(len) = scratch.head(len);
}

void synthesis_step(Vector& buf, Index len, const Plan& plan, Vector& scratch) {
    const Index half = len / 2;
    const int q = static_cast<int>(plan.h.size());
    scratch.head(len).setZero();
    for (Index k = 0; k < half; ++k) {
        const double a = buf[k];
        const double d = buf[half + k];
        for (int n = 0; n < q; ++n)
            scratch[(2 * k + n) % len] += plan.h[n] * a + plan.g[n] * d;
    }
    buf.head(len) = scratch.head(len);
}

}  // namespace

Vector daubechies_filter(int taps) {
    if (taps < 2 || taps % 2 != 0)
        throw std::invalid_argument("daubechies_filter: taps must be even and >= 2");
    const int p = taps / 2;

    Vector h(taps);
    if (p == 1) {
        h[0] = h[1] = 1.0 / std::numbers::sqrt2;
        verify_filter(h);
        return h;
    }

    // Roots of Q(z) = z^(p-1) P(y(z)) with P(y) = sum_k C(p-1+k,k) y^k and
    // y(z) = -(z-1)^2 / (4z). Q is palindromic, so the roots come in (r, 1/r)
    // pairs with none on the unit circle; the minimum-phase factor keeps the
    // inside ones.
    std::vector<double> q(static_cast<std::size_t>(2 * p - 1), 0.0);
    for (int k = 0; k < p; ++k) {
        const double c = binomial(p - 1 + k, k) * ((k % 2 == 0) ? 1.0 : -1.0) / std::pow(4.0, k);
        // times (z-1)^(2k) z^(p-1-k)
        for (int j = 0; j <= 2 * k; ++j) {
            const double term = binomial(2 * k, j) * (((2 * k - j) % 2 == 0) ? 1.0 : -1.0);
            q[static_cast<std::size_t>(p - 1 - k + j)] += c * term;
        }
    }

    std::vector<std::complex<double>> inside;
    for (const auto& r : polynomial_roots(q))
        if (std::abs(r) < 1.0) inside.push_back(r);
    if (static_cast<int>(inside.size()) != p - 1)
        throw std::runtime_error("daubechies_filter: unexpected root configuration");

    // m0(z) = ((1+z)/2)^p * L(z)/L(1) assembled from real factors: conjugate
    // pairs become quadratics so rounding never leaks into imaginary parts.
    std::vector<double> m0(static_cast<std::size_t>(p + 1));
    for (int j = 0; j <= p; ++j) m0[static_cast<std::size_t>(j)] = binomial(p, j) / std::pow(2.0, p);

    std::vector<std::complex<double>> pending = inside;
    while (!pending.empty()) {
        const std::complex<double> r = pending.back();
        pending.pop_back();
        if (std::abs(r.imag()) < 1e-12) {
            const double rr = r.real();
            std::vector<double> lin{-rr, 1.0};
            for (double& c : lin) c /= (1.0 - rr);
            poly_mul_inplace(m0, lin);
        } else {
            auto mate = std::find_if(pending.begin(), pending.end(), [&](const auto& s) {
                return std::abs(s - std::conj(r)) < 1e-8 * std::max(1.0, std::abs(r));
            });
            if (mate == pending.end())
                throw std::runtime_error("daubechies_filter: complex root without conjugate mate");
            pending.erase(mate);
            const double b = -2.0 * r.real();
            const double c = std::norm(r);
            std::vector<double> quad{c, b, 1.0};
            for (double& v : quad) v /= (1.0 + b + c);
            poly_mul_inplace(m0, quad);
        }
    }
    if (static_cast<int>(m0.size()) != taps)
        throw std::runtime_error("daubechies_filter: assembled length mismatch");

    // The factorization builds the maximum-phase ordering; reverse to match
    // the classical minimum-phase tables (taps=4 starts at 0.4829629...).
    for (int n = 0; n < taps; ++n) h[n] = std::numbers::sqrt2 * m0[static_cast<std::size_t>(taps - 1 - n)];
    verify_filter(h);
    return h;
}

Index padded_length_for(Index input_length, const Config& cfg) {
    if (input_length < 1) throw std::invalid_argument("wavelet: empty signal");
    if (cfg.padded_length > 0) {
        const Index n = cfg.padded_length;
        if ((n & (n - 1)) != 0)
            throw std::invalid_argument("wavelet: padded_length must be a power of two");
        if (n < input_length)
            throw std::invalid_argument("wavelet: padded_length shorter than the signal");
        return n;
    }
    Index n = 1;
    while (n < input_length) n *= 2;
    return n;
}

int levels_for(const Config& cfg, Index padded_length) {
    int max_depth = 0;
    for (Index n = padded_length; n > 1 && n % 2 == 0; n /= 2) ++max_depth;
    if (cfg.levels == 0) return max_depth;
    if (cfg.levels < 0 || cfg.levels > max_depth)
        throw std::invalid_argument("wavelet: levels exceed what the padded length allows");
    return cfg.levels;
}

Vector dwt_forward(const Vector& x, const Config& cfg) {
    const Plan plan = make_plan(x.size(), cfg);
    Vector buf = Vector::Zero(plan.padded);
    buf.head(x.size()) = x;
    Vector scratch(plan.padded);
    Index len = plan.padded;
    for (int level = 0; level < plan.depth; ++level, len /= 2) analysis_step(buf, len, plan, scratch);
    return buf;
}

Vector dwt_inverse(const Vector& coeffs, const Config& cfg) {
    const Plan plan = make_plan(coeffs.size(), cfg);
    if (coeffs.size() != plan.padded)
        throw std::invalid_argument("dwt_inverse: coefficient length is not the padded length");
    Vector buf = coeffs;
    Vector scratch(plan.padded);
    Index len = plan.padded >> (plan.depth - 1);
    if (plan.depth == 0) return buf;
    for (int level = 0; level < plan.depth; ++level, len *= 2) synthesis_step(buf, len, plan, scratch);
    return buf;
}

Matrix dwt_forward_cols(const Matrix& x, const Config& cfg) {
    const Index padded = padded_length_for(x.rows(), cfg);
    Matrix out(padded, x.cols());
    for (Index j = 0; j < x.cols(); ++j) out.col(j) = dwt_forward(x.col(j), cfg);
    return out;
}

Matrix dwt_inverse_cols(const Matrix& coeffs, const Config& cfg) {
    Matrix out(coeffs.rows(), coeffs.cols());
    for (Index j = 0; j < coeffs.cols(); ++j) out.col(j) = dwt_inverse(coeffs.col(j), cfg);
    return out;
}

std::vector<bool> boundary_mask(Index original_length, const Config& cfg) {
    const Index padded = padded_length_for(std::max<Index>(original_length, 1), cfg);
    const int depth = levels_for(cfg, padded);
    const Index reach = static_cast<Index>(cfg.taps - 1);
    std::vector<bool> mask(static_cast<std::size_t>(padded), false);

    // A depth-j coefficient at position k mixes the samples
    // [2^j k, 2^j k + (2^j - 1)(taps - 1)] before periodization; it is clean
    // only when that whole interval stays inside the recording.
    auto contaminated = [&](int j, Index k) {
        const Index scale = Index{1} << j;
        return scale * k + (scale - 1) * reach >= original_length;
    };

    if (depth == 0) {
        for (Index i = 0; i < padded; ++i)
            mask[static_cast<std::size_t>(i)] = i >= original_length;
        return mask;
    }

    const Index approx_len = padded >> depth;
    for (Index k = 0; k < approx_len; ++k)
        mask[static_cast<std::size_t>(k)] = contaminated(depth, k);
    for (int j = depth; j >= 1; --j) {
        const Index offset = padded >> j;
        for (Index k = 0; k < offset; ++k)
            mask[static_cast<std::size_t>(offset + k)] = contaminated(j, k);
    }
    return mask;
}

CoefficientSelection select_coefficients(const std::vector<Matrix>& coeff_trials,
                                         const std::vector<bool>& mask, Index count) {
    if (coeff_trials.empty()) throw std::invalid_argument("select_coefficients: no trials");
    const Index n = coeff_trials.front().rows();
    const Index j = coeff_trials.front().cols();
    if (static_cast<Index>(mask.size()) != n)
        throw std::invalid_argument("select_coefficients: mask length mismatch");
    for (const Matrix& c : coeff_trials)
        if (c.rows() != n || c.cols() != j)
            throw std::invalid_argument("select_coefficients: trials differ in shape");

    Vector energy = Vector::Zero(n);
    for (const Matrix& c : coeff_trials) energy += c.array().square().rowwise().sum().matrix();
    energy /= static_cast<double>(coeff_trials.size() * static_cast<std::size_t>(j));

    std::vector<Index> candidates;
    for (Index i = 0; i < n; ++i)
        if (!mask[static_cast<std::size_t>(i)]) candidates.push_back(i);
    if (count < 1 || count > static_cast<Index>(candidates.size()))
        throw std::invalid_argument("select_coefficients: count exceeds the unmasked positions");

    std::stable_sort(candidates.begin(), candidates.end(), [&](Index a, Index b) {
        if (energy[a] != energy[b]) return energy[a] > energy[b];
        return a < b;
    });
    candidates.resize(static_cast<std::size_t>(count));
    std::sort(candidates.begin(), candidates.end());

    CoefficientSelection sel;
    sel.indices = std::move(candidates);
    sel.padded_length = n;
    return sel;
}

Matrix extract_rows(const Matrix& coeffs, const CoefficientSelection& sel) {
    if (coeffs.rows() != sel.padded_length)
        throw std::invalid_argument("extract_rows: row count is not the padded length");
    Matrix out(static_cast<Index>(sel.indices.size()), coeffs.cols());
    for (Index i = 0; i < out.rows(); ++i) out.row(i) = coeffs.row(sel.indices[static_cast<std::size_t>(i)]);
    return out;
}

Matrix embed_rows(const Matrix& reduced, const CoefficientSelection& sel) {
    if (reduced.rows() != static_cast<Index>(sel.indices.size()))
        throw std::invalid_argument("embed_rows: row count is not the selection size");
    Matrix out = Matrix::Zero(sel.padded_length, reduced.cols());
    for (Index i = 0; i < reduced.rows(); ++i) out.row(sel.indices[static_cast<std::size_t>(i)]) = reduced.row(i);
    return out;
}

}  // namespace kronmem::wavelet
