#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "qla/distributions.hpp"
#include "qla/errors.hpp"
#include "qla/quadrature.hpp"
#include "qla/real.hpp"

namespace qla {

namespace detail {

// ln j! table, built incrementally; exact enough at any tier.
template <Scalar R>
std::vector<R> log_factorials(int n) {
    using std::log;
    std::vector<R> lf(n + 1);
    lf[0] = 0;
    for (int j = 1; j <= n; ++j) lf[j] = lf[j - 1] + log(R(j));
    return lf;
}

// Pareto count integral in log space:
//   a_j = alpha * int_{-inf}^{0} exp(h(v)) dv,
//   h(v) = j (L - v) - x e^{-v} + alpha v - ln j!,  x = lambda x_m, L = ln x.
// h peaks at v* = ln(x / (j - alpha)) (clamped to <= 0) with curvature
// -(j - alpha), so the integrand is a bump of width ~ 1/sqrt(j). Segments
// march outward from the peak until their contribution is negligible.
template <Scalar R>
R pareto_count(int j, const R &lambda, const R &alpha, const R &xm, const R &lnfact_j,
               const R &rel_tol) {
    using std::exp;
    using std::log;
    using std::sqrt;
    const R x = lambda * xm;
    const R lnx = log(x);
    auto integrand = [&](R v) -> R {
        R h = R(j) * (lnx - v) - x * exp(-v) + alpha * v - lnfact_j;
        return exp(h);
    };
    R peak = 0;
    if (R(j) - alpha > 0) peak = std::min(R(0), lnx - log(R(j) - alpha));
    R sigma = 1 / sqrt(std::max(R(j) - alpha, R(1)));
    R step = std::max(R(6) * sigma, R(1) / 2);

    // Center segment first to establish the scale.
    R lo = peak - step, hi = std::min(R(0), peak + step);
    R total = integrate<R>(integrand, lo, hi, rel_tol / 4);
    // March right toward v = 0.
    R a = hi;
    while (a < 0) {
        R b = std::min(R(0), a + step);
        R seg = integrate<R>(integrand, a, b, rel_tol / 4, rel_tol * total / 64);
        total += seg;
        if (seg <= rel_tol * total / 8 && b < 0) break;
        a = b;
    }
    // March left into the rapidly vanishing tail (the x e^{-v} term).
    R b = lo;
    for (int k = 0; k < 400; ++k) {
        R aa = b - step;
        R seg = integrate<R>(integrand, aa, b, rel_tol / 4, rel_tol * total / 64);
        total += seg;
        if (seg <= rel_tol * total / 8) break;
        b = aa;
    }
    return alpha * total;
}

}  // namespace detail

// Probabilities that j Poisson(lambda) arrivals occur during one holding
// time drawn from dist: x_j = int (lambda t)^j e^{-lambda t} / j! dF(t).
// Throws TruncationError when the mass missing beyond n_max exceeds
// deficit_bound; heavy-tailed callers pass a slack bound since their
// sequences decay only polynomially.
template <Scalar R>
std::vector<R> arrival_counts(const DistributionSpec<R> &dist, R lambda, int n_max,
                              R deficit_bound = R(1e-12)) {
    if (!(lambda > 0)) throw InvalidConfig("arrival rate must be > 0");
    if (n_max < 1) throw InvalidConfig("n_max must be >= 1");
    std::vector<R> x(n_max + 1, R(0));
    std::visit(
        [&](const auto &f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, Exponential<R>>) {
                R q = lambda / (lambda + f.rate);
                x[0] = f.rate / (lambda + f.rate);
                for (int j = 1; j <= n_max; ++j) x[j] = x[j - 1] * q;
            } else if constexpr (std::is_same_v<T, Erlang<R>>) {
                using std::pow;
                R q = lambda / (lambda + f.rate);
                x[0] = pow(f.rate / (lambda + f.rate), R(f.shape));
                for (int j = 1; j <= n_max; ++j)
                    x[j] = x[j - 1] * R(j - 1 + f.shape) / R(j) * q;
            } else if constexpr (std::is_same_v<T, Deterministic<R>>) {
                using std::exp;
                R ld = lambda * f.value;
                x[0] = exp(-ld);
                for (int j = 1; j <= n_max; ++j) x[j] = x[j - 1] * ld / R(j);
            } else if constexpr (std::is_same_v<T, HyperExponential<R>>) {
                for (std::size_t i = 0; i < f.weights.size(); ++i) {
                    R q = lambda / (lambda + f.rates[i]);
                    R term = f.weights[i] * f.rates[i] / (lambda + f.rates[i]);
                    for (int j = 0; j <= n_max; ++j) {
                        x[j] += term;
                        term *= q;
                    }
                }
            } else if constexpr (std::is_same_v<T, Pareto<R>>) {
                auto lf = detail::log_factorials<R>(n_max);
                for (int j = 0; j <= n_max; ++j)
                    x[j] = detail::pareto_count(j, lambda, f.alpha, f.scale, lf[j], R(1e-12));
            } else {
                x[0] = 1;
            }
        },
        dist.family());
    R sum = 0;
    for (const R &v : x) sum += v;
    R deficit = 1 - sum;
    if (deficit > deficit_bound)
        throw TruncationError("count sequence deficit exceeds bound: n_max too small");
    return x;
}

// b_j = sum_{i=1}^{j+1} nu_i a_{j-i+1} / (1 - nu_0), j = 0..n_max-1.
template <Scalar R>
std::vector<R> boundary_counts(const std::vector<R> &a, const std::vector<R> &nu) {
    if (a.size() != nu.size() || a.size() < 2)
        throw InvalidConfig("boundary_counts: sequences must share n_max >= 1");
    if (!(nu[0] < 1))
        throw DegenerateVacation("nu_0 = 1: substitute b := a for the zero-vacation queue");
    const std::size_t n = a.size() - 1;
    std::vector<R> b(n, R(0));
    R denom = 1 - nu[0];
    for (std::size_t j = 0; j < n; ++j) {
        R s = 0;
        for (std::size_t i = 1; i <= j + 1; ++i) s += nu[i] * a[j - i + 1];
        b[j] = s / denom;
    }
    return b;
}

// The per-service (a), per-vacation (nu) and boundary (b) sequences that
// populate both transition matrices. a and nu carry indices 0..n_max,
// b carries 0..n_max-1.
template <Scalar R>
struct CountKernel {
    R lambda;
    std::vector<R> a, nu, b;
    int n_max = 0;
    R a_deficit = 0, nu_deficit = 0;

    R truncation_mass() const { return std::max(a_deficit, nu_deficit); }
};

// Composite builder. The matrix and recursion consumers only require the
// coefficients they index, not mass completeness at n_max, so no truncation
// bound is applied here by default.
template <Scalar R>
CountKernel<R> build_count_kernel(const DistributionSpec<R> &service,
                                  const DistributionSpec<R> &vacation, R lambda, int n_max,
                                  R deficit_bound = R(1)) {
    CountKernel<R> k;
    k.lambda = lambda;
    k.n_max = n_max;
    k.a = arrival_counts(service, lambda, n_max, deficit_bound);
    if (vacation.is_zero()) {
        // Degenerate vacation: the boundary row is the plain service row.
        k.nu.assign(n_max + 1, R(0));
        k.nu[0] = 1;
        k.b = k.a;
        k.b.resize(n_max);
    } else {
        k.nu = arrival_counts(vacation, lambda, n_max, deficit_bound);
        k.b = boundary_counts(k.a, k.nu);
    }
    R asum = 0, nsum = 0;
    for (const R &v : k.a) asum += v;
    for (const R &v : k.nu) nsum += v;
    k.a_deficit = 1 - asum;
    k.nu_deficit = 1 - nsum;
    if (!(k.a[0] > 0)) throw PrecisionLoss("a_0 must be positive for the forward recursion");
    return k;
}

}  // namespace qla
