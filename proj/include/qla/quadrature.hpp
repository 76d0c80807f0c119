#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "qla/real.hpp"

namespace qla {

// Gauss-Legendre rule on [-1,1]. Nodes are computed at construction by
// Newton iteration on P_n, so the rule is available at any precision tier
// without tabulated constants.
template <Scalar R>
class GaussLegendre {
public:
    explicit GaussLegendre(int n) : nodes_(n), weights_(n) {
        using std::cos;
        for (int k = 0; k < n; ++k) {
            // Chebyshev-like initial guess, then Newton. Quadratic
            // convergence reaches the tier's epsilon in a handful of steps.
            R x = R(cos(M_PI * (4.0 * (k + 1) - 1.0) / (4.0 * n + 2.0)));
            for (int it = 0; it < 60; ++it) {
                auto [p, dp] = legendre(n, x);
                R dx = p / dp;
                x -= dx;
                using std::fabs;
                if (fabs(dx) <= machine_eps<R>() * 4) break;
            }
            auto [p, dp] = legendre(n, x);
            (void)p;
            nodes_[k] = x;
            weights_[k] = R(2) / ((R(1) - x * x) * dp * dp);
        }
    }

    // Integral of f over [a,b] by the fixed rule.
    template <class F>
    R apply(F &&f, const R &a, const R &b) const {
        R half = (b - a) / 2;
        R mid = (a + b) / 2;
        R sum = 0;
        for (std::size_t k = 0; k < nodes_.size(); ++k)
            sum += weights_[k] * f(mid + half * nodes_[k]);
        return sum * half;
    }

private:
    static std::pair<R, R> legendre(int n, const R &x) {
        R p0 = 1, p1 = x;
        for (int j = 2; j <= n; ++j) {
            R p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
            p0 = p1;
            p1 = p2;
        }
        R dp = n * (x * p1 - p0) / (x * x - 1);
        return {p1, dp};
    }

    std::vector<R> nodes_, weights_;
};

template <Scalar R>
const GaussLegendre<R> &gauss_rule() {
    static const GaussLegendre<R> rule(25);
    return rule;
}

namespace detail {

template <Scalar R, class F>
R integrate_panel(F &f, const R &a, const R &b, const R &whole, const R &rel_tol,
                  const R &abs_tol, int depth) {
    const auto &rule = gauss_rule<R>();
    R mid = (a + b) / 2;
    R left = rule.apply(f, a, mid);
    R right = rule.apply(f, mid, b);
    R refined = left + right;
    using std::fabs;
    R err = fabs(refined - whole);
    if (depth <= 0 || err <= rel_tol * fabs(refined) + abs_tol) return refined;
    R half_abs = abs_tol / 2;
    return integrate_panel(f, a, mid, left, rel_tol, half_abs, depth - 1) +
           integrate_panel(f, mid, b, right, rel_tol, half_abs, depth - 1);
}

}  // namespace detail

// Adaptive bisection built on the fixed rule. Suited to smooth, sign-stable
// integrands; sharply peaked ones should be pre-split at the known peak
// (see the Pareto count integrals in kernel.hpp).
template <Scalar R, class F>
R integrate(F &&f, R a, R b, R rel_tol, R abs_tol = R(0), int max_depth = 48) {
    const auto &rule = gauss_rule<R>();
    R whole = rule.apply(f, a, b);
    using std::fabs;
    R floor = abs_tol + rel_tol * fabs(whole) * machine_eps<R>();
    return detail::integrate_panel(f, a, b, whole, rel_tol, floor, max_depth);
}

}  // namespace qla
