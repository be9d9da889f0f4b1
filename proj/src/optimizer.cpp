#include "kronmem/optimizer.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace kronmem::optimizer {

namespace {

// Everything below minimizes g = -f; the public interface flips signs at the
// boundary so callers think in ascent terms.

struct Eval {
    double value = 0.0;
    Vector grad;
};

class Problem {
public:
    Problem(const Objective& f, Index dim) : f_(f), dim_(dim) {}

    Eval operator()(const Vector& x) const {
        Eval e;
        e.grad.resize(dim_);
        const double fx = f_(x, e.grad);
        if (e.grad.size() != dim_)
            throw std::invalid_argument("maximize: objective resized the gradient");
        if (!std::isfinite(fx) || !e.grad.allFinite())
            throw std::runtime_error("maximize: objective returned non-finite values");
        e.value = -fx;
        e.grad = -e.grad;
        return e;
    }

private:
    const Objective& f_;
    Index dim_;
};

struct LinePoint {
    double a = 0.0;
    Eval eval;
    double slope = 0.0;  // directional derivative at a
};

/// Strong Wolfe search on phi(a) = g(x + a d); returns the accepted point or
/// a zero step when no acceptable one was found.
LinePoint wolfe_search(const Problem& g, const Vector& x, const Vector& d, const Eval& at_zero,
                       const Config& cfg) {
    const double phi0 = at_zero.value;
    const double slope0 = at_zero.grad.dot(d);
    if (!(slope0 < 0.0)) return {};  // not a descent direction for g

    // Near a minimizer the true decrease per step falls below what doubles can
    // resolve in the value while slopes are still accurate, so the sufficient
    // decrease test alone would stall the iteration. A curvature-satisfying
    // point whose value sits within rounding of phi(0) is accepted instead.
    const double noise = 1e-15 * (1.0 + std::abs(phi0));
    auto flat_ok = [&](const LinePoint& p) {
        return p.a > 0.0 && p.eval.value <= phi0 + noise &&
               std::abs(p.slope) <= -cfg.c2 * slope0;
    };

    auto probe = [&](double a) {
        LinePoint p;
        p.a = a;
        p.eval = g(x + a * d);
        p.slope = p.eval.grad.dot(d);
        return p;
    };

    auto zoom = [&](LinePoint lo, LinePoint hi) -> LinePoint {
        for (int it = 0; it < 40; ++it) {
            // Quadratic interpolation off the lo endpoint, safeguarded toward
            // bisection when it lands outside the middle of the bracket.
            double a = lo.a - 0.5 * lo.slope * (hi.a - lo.a) * (hi.a - lo.a) /
                                  (hi.eval.value - lo.eval.value - lo.slope * (hi.a - lo.a));
            const double width = std::abs(hi.a - lo.a);
            const double lo_end = std::min(lo.a, hi.a) + 0.1 * width;
            const double hi_end = std::max(lo.a, hi.a) - 0.1 * width;
            if (!std::isfinite(a) || a < lo_end || a > hi_end) a = 0.5 * (lo.a + hi.a);

            LinePoint p = probe(a);
            if (p.eval.value > phi0 + cfg.c1 * a * slope0 || p.eval.value >= lo.eval.value) {
                if (flat_ok(p)) return p;
                hi = p;
            } else {
                if (std::abs(p.slope) <= -cfg.c2 * slope0) return p;
                if (p.slope * (hi.a - lo.a) >= 0.0) hi = lo;
                lo = p;
            }
            if (std::abs(hi.a - lo.a) < 1e-16 * std::max(1.0, std::abs(lo.a))) break;
        }
        return lo.eval.value < phi0 || flat_ok(lo) ? lo : LinePoint{};
    };

    LinePoint prev;
    prev.a = 0.0;
    prev.eval = at_zero;
    prev.slope = slope0;
    double a = 1.0;
    for (int it = 0; it < 25; ++it) {
        LinePoint p = probe(a);
        if (p.eval.value > phi0 + cfg.c1 * a * slope0 ||
            (it > 0 && p.eval.value >= prev.eval.value)) {
            if (flat_ok(p)) return p;
            return zoom(prev, p);
        }
        if (std::abs(p.slope) <= -cfg.c2 * slope0) return p;
        if (p.slope >= 0.0) return zoom(p, prev);
        prev = p;
        a *= 2.0;
    }
    return prev.a > 0.0 && prev.eval.value < phi0 ? prev : LinePoint{};
}

}  // namespace

Report maximize(const Objective& f, Vector& x, const Config& cfg) {
    if (x.size() == 0) throw std::invalid_argument("maximize: empty start point");
    if (cfg.memory < 1 || cfg.max_iter < 0 || !(cfg.c1 > 0.0 && cfg.c1 < cfg.c2 && cfg.c2 < 1.0))
        throw std::invalid_argument("maximize: bad configuration");

    const Problem g(f, x.size());
    Eval cur = g(x);

    Report report;
    report.trace.push_back(-cur.value);

    std::deque<Vector> s_hist, y_hist;
    std::deque<double> rho_hist;

    auto done = [&](double gnorm, double value) {
        return gnorm <= cfg.grad_tol * (1.0 + std::abs(value));
    };

    for (int iter = 0; iter < cfg.max_iter; ++iter) {
        const double gnorm = cur.grad.norm();
        if (done(gnorm, cur.value)) {
            report.converged = true;
            break;
        }

        // Two-loop recursion for the L-BFGS direction.
        Vector q = cur.grad;
        std::vector<double> alpha(s_hist.size());
        for (std::size_t i = s_hist.size(); i-- > 0;) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(q);
            q -= alpha[i] * y_hist[i];
        }
        if (!s_hist.empty()) {
            const Vector& s = s_hist.back();
            const Vector& y = y_hist.back();
            q *= s.dot(y) / y.squaredNorm();
        }
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(q);
            q += (alpha[i] - beta) * s_hist[i];
        }
        Vector d = -q;
        if (!(cur.grad.dot(d) < 0.0)) {
            // The memory produced a non-descent direction; fall back to
            // steepest descent and forget the history.
            d = -cur.grad;
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        const LinePoint step = wolfe_search(g, x, d, cur, cfg);
        if (step.a == 0.0) break;  // line search stalled: keep the best iterate

        const Vector s = step.a * d;
        const Vector y = step.eval.grad - cur.grad;
        x += s;
        cur = step.eval;
        ++report.iterations;
        report.trace.push_back(-cur.value);

        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            s_hist.push_back(s);
            y_hist.push_back(y);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > cfg.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
    }

    if (!report.converged) report.converged = done(cur.grad.norm(), cur.value);
    report.value = -cur.value;
    report.grad_norm = cur.grad.norm();
    return report;
}

}  // namespace kronmem::optimizer
