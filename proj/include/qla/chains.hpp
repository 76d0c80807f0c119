#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "qla/distributions.hpp"
#include "qla/errors.hpp"
#include "qla/kernel.hpp"
#include "qla/real.hpp"

namespace qla {

// Arrival rate + service/vacation laws; the vacation may be the zero law,
// which degenerates the model to the plain M/G/1/N queue.
template <Scalar R>
struct QueueModel {
    R lambda;
    DistributionSpec<R> service;
    DistributionSpec<R> vacation;

    QueueModel(R lam, DistributionSpec<R> s, DistributionSpec<R> v)
        : lambda(lam), service(std::move(s)), vacation(std::move(v)) {
        if (!(lambda > 0)) throw InvalidConfig("arrival rate must be > 0");
        if (service.is_zero()) throw InvalidConfig("service law must have positive mean");
    }

    R rho() const { return lambda * service.mean(); }
    bool zero_vacation() const { return vacation.is_zero(); }
    // nu_0 = probability of no arrival during one vacation.
    R nu0() const { return zero_vacation() ? R(1) : vacation.laplace(lambda); }
};

template <Scalar R>
using Matrix = std::vector<std::vector<R>>;

// Invariant vector of P(N) (probability-normalized) or a prefix
// pi_0..pi_n of the infinite-chain invariant measure. For rho < 1 the
// infinite measure is probability-normalized through the closed form for
// pi_0; for rho >= 1 it is anchored at pi_0 = 1 (the measure is unique only
// up to scale).
template <Scalar R>
struct InvariantSolution {
    enum class Kind { finite, infinite_prefix };
    enum class Normalization { probability, pi0_anchored };

    Kind kind;
    Normalization norm;
    std::vector<R> values;

    // S_pi(n) = sum_{j<n} pi_j.
    R partial_sum(int n) const {
        if (n <= 0) return R(0);
        return cum_[std::min<std::size_t>(n, cum_.size()) - 1];
    }
    // Tail sum from index n; exact via normalization (probability kind only).
    R tail_sum(int n) const { return 1 - partial_sum(n); }

    void finalize() {
        cum_.resize(values.size());
        R acc = 0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            acc += values[i];
            cum_[i] = acc;
        }
    }

private:
    std::vector<R> cum_;
};

// The embedded N x N transition matrix, rows exactly as displayed for the
// departure-epoch chain: boundary row of b's, then shifted service rows of
// a's, last column completing each row to 1.
template <Scalar R>
Matrix<R> build_embedded_matrix(const QueueModel<R> &model, int N, const CountKernel<R> &kernel) {
    (void)model;
    if (N < 2) throw InvalidConfig("embedded matrix requires N >= 2");
    if (kernel.n_max < N - 1) throw KernelTooShort("kernel must cover indices to N-1");
    Matrix<R> P(N, std::vector<R>(N, R(0)));
    auto fill_row = [&](int i, const std::vector<R> &seq, int offset) {
        // offset = first column that receives seq[0]
        R sum = 0;
        for (int jj = 0; jj + offset < N - 1; ++jj) {
            P[i][jj + offset] = seq[jj];
            sum += seq[jj];
        }
        R last = 1 - sum;
        if (last < 0) {
            if (last < R(-1e-9)) throw PrecisionLoss("row complement negative beyond tolerance");
            last = 0;
        }
        P[i][N - 1] = last;
    };
    fill_row(0, kernel.b, 0);
    for (int i = 1; i < N; ++i) fill_row(i, kernel.a, i - 1);
    return P;
}

// GTH elimination: no subtraction of like-sized quantities anywhere, so each
// component of the invariant vector comes out with small relative error even
// when the vector spans hundreds of orders of magnitude.
template <Scalar R>
InvariantSolution<R> invariant_vector_finite(Matrix<R> P) {
    const int n = static_cast<int>(P.size());
    InvariantSolution<R> sol;
    sol.kind = InvariantSolution<R>::Kind::finite;
    sol.norm = InvariantSolution<R>::Normalization::probability;
    if (n == 1) {
        sol.values = {R(1)};
        sol.finalize();
        return sol;
    }
    for (int k = n - 1; k >= 1; --k) {
        R s = 0;
        for (int j = 0; j < k; ++j) s += P[k][j];
        for (int i = 0; i < k; ++i) P[i][k] /= s;
        for (int i = 0; i < k; ++i) {
            const R pik = P[i][k];
            if (pik == 0) continue;
            for (int j = 0; j < k; ++j) P[i][j] += pik * P[k][j];
        }
    }
    std::vector<R> pi(n, R(0));
    pi[0] = 1;
    for (int k = 1; k < n; ++k) {
        R s = 0;
        for (int i = 0; i < k; ++i) s += pi[i] * P[i][k];
        pi[k] = s;
    }
    R total = 0;
    for (const R &v : pi) total += v;
    for (R &v : pi) v /= total;
    sol.values = std::move(pi);
    sol.finalize();
    return sol;
}

struct RecursionOptions {
    double negativity_tolerance = -1;  // < 0: pick a tier default
};

// pi_0..pi_n of the infinite chain by the forward recursion
//   pi_{j+1} = (pi_j - pi_0 b_j - sum_{k=1}^{j} pi_k a_{j+1-k}) / a_0.
// Subtractive cancellation sinks decaying measures into the rounding noise
// floor once pi_n approaches the working epsilon; run a high precision tier
// for n beyond ~30 in the subcritical light-tailed regimes. A negative pi_j
// is the signature of that floor: the measure itself is strictly positive,
// so the double tier treats any negative as PrecisionLoss while the
// high-precision tiers tolerate |pi_j| down to 1e-30.
template <Scalar R>
InvariantSolution<R> invariant_measure_infinite(const QueueModel<R> &model,
                                                const CountKernel<R> &kernel, int n,
                                                RecursionOptions opts = {}) {
    if (n > kernel.n_max) throw KernelTooShort("recursion needs kernel coefficients to index n");
    R neg_tol = opts.negativity_tolerance >= 0
                    ? R(opts.negativity_tolerance)
                    : (digits10_v<R> > 20 ? R(1e-30) : R(0));
    InvariantSolution<R> sol;
    sol.kind = InvariantSolution<R>::Kind::infinite_prefix;
    const R rho = model.rho();
    std::vector<R> pi(n + 1, R(0));
    if (rho < 1) {
        sol.norm = InvariantSolution<R>::Normalization::probability;
        if (model.zero_vacation()) {
            pi[0] = 1 - rho;
        } else {
            pi[0] = (1 - rho) * (1 - model.nu0()) / (model.lambda * model.vacation.mean());
        }
    } else {
        sol.norm = InvariantSolution<R>::Normalization::pi0_anchored;
        pi[0] = 1;
    }
    const std::vector<R> &a = kernel.a;
    const std::vector<R> &b = kernel.b;
    for (int j = 0; j < n; ++j) {
        R s = pi[j] - pi[0] * b[j];
        for (int k = 1; k <= j; ++k) s -= pi[k] * a[j + 1 - k];
        R next = s / a[0];
        if (next < -neg_tol)
            throw PrecisionLoss("invariant recursion went negative: raise the precision tier");
        pi[j + 1] = next;
    }
    sol.values = std::move(pi);
    sol.finalize();
    return sol;
}

// Loss probability from the finite invariant vector. The vacation formula is
// replaced by the plain-queue one when V = 0 (the general form is 0/0 there).
template <Scalar R>
R loss_probability_exact(const QueueModel<R> &model, const InvariantSolution<R> &finite_sol) {
    const R pi0N = finite_sol.values.at(0);
    if (model.zero_vacation()) return 1 - 1 / (pi0N + model.rho());
    const R nu0 = model.nu0();
    const R ev = model.vacation.mean();
    const R es = model.service.mean();
    return 1 - (1 - nu0) / model.lambda / (ev * pi0N + es * (1 - nu0));
}

// Loss probability at capacity N evaluated from the infinite measure via the
// partial sums; algebraically identical to the finite route but free of the
// cancellation between pi_0(N) and its limit, which matters once the loss is
// far below the working epsilon.
template <Scalar R>
R loss_from_measure(const QueueModel<R> &model, const InvariantSolution<R> &prefix, int N) {
    const R rho = model.rho();
    const R s = prefix.partial_sum(N);
    if (rho < 1) {
        const R sbar = 1 - s;
        return (1 - rho) * sbar / ((1 - rho) + rho * s);
    }
    const R offset = 1 - 1 / rho;
    const R pi0 = prefix.values.at(0);
    if (model.zero_vacation()) return offset + pi0 / (rho * (pi0 + rho * s));
    const R ev = model.vacation.mean();
    const R es = model.service.mean();
    const R nu0 = model.nu0();
    return offset + ev * pi0 / (rho * (ev * pi0 + es * (1 - nu0) * s));
}

// Time-stationary queue length probabilities pi*_0..pi*_N; the last entry is
// the loss probability itself (PASTA).
template <Scalar R>
std::vector<R> time_stationary_distribution(const QueueModel<R> &model,
                                            const InvariantSolution<R> &finite_sol) {
    const std::size_t N = finite_sol.values.size();
    std::vector<R> star(N + 1, R(0));
    R c;
    if (model.zero_vacation()) {
        c = 1 / (finite_sol.values[0] + model.rho());
    } else {
        const R nu0 = model.nu0();
        c = (1 - nu0) / model.lambda /
            (model.vacation.mean() * finite_sol.values[0] + model.service.mean() * (1 - nu0));
    }
    for (std::size_t j = 0; j < N; ++j) star[j] = finite_sol.values[j] * c;
    star[N] = 1 - c;  // = P_loss(N)
    return star;
}

template <Scalar R>
struct TvDistance {
    R distance;     // sum_{j<=N} |pi*_j(N) - pi_j| + tail of pi beyond N
    R tail_beyond;  // invariant-measure mass beyond the computed prefix
};

// Total-variation style distance between the time-stationary law of the
// finite queue and the infinite-queue invariant distribution. Stable queues
// only. The finite-queue vector is obtained through the proportionality
// identity pi_i(N) = pi_i / S_pi(N).
template <Scalar R>
TvDistance<R> tv_distance(const QueueModel<R> &model, const InvariantSolution<R> &prefix, int N,
                          int n_tail) {
    if (!(model.rho() < 1)) throw DomainError("tv_distance requires rho < 1");
    if (static_cast<int>(prefix.values.size()) < N + n_tail + 1)
        throw KernelTooShort("prefix must reach N + n_tail");
    using std::fabs;
    const R spiN = prefix.partial_sum(N);
    const R ploss = loss_from_measure(model, prefix, N);
    R c;  // pi*_j(N) = c * pi_j(N) for j < N
    if (model.zero_vacation()) {
        c = 1 / (prefix.values[0] / spiN + model.rho());
    } else {
        const R nu0 = model.nu0();
        c = (1 - nu0) / model.lambda /
            (model.vacation.mean() * prefix.values[0] / spiN +
             model.service.mean() * (1 - nu0));
    }
    R dist = 0;
    for (int j = 0; j < N; ++j) dist += fabs(prefix.values[j] / spiN * c - prefix.values[j]);
    dist += fabs(ploss - prefix.values[N]);
    dist += prefix.tail_sum(N + 1);
    return {dist, prefix.tail_sum(N + n_tail + 1)};
}

// Residual ||pi P - pi||_inf, used to certify solver output.
template <Scalar R>
R invariant_residual(const Matrix<R> &P, const std::vector<R> &pi) {
    using std::fabs;
    const int n = static_cast<int>(P.size());
    R worst = 0;
    for (int j = 0; j < n; ++j) {
        R s = 0;
        for (int i = 0; i < n; ++i) s += pi[i] * P[i][j];
        worst = std::max(worst, fabs(s - pi[j]));
    }
    return worst;
}

// Loss probability of the GI/M/1/N queue through the dual M/G/1/(N+1) queue:
// the dual has Poisson arrivals at the service rate mu and service law equal
// to the interarrival law; the loss equals the dual's boundary invariant
// probability at capacity N+1.
template <Scalar R>
R gim1_exact_loss(const DistributionSpec<R> &interarrival, R mu, int N) {
    QueueModel<R> dual(mu, interarrival, DistributionSpec<R>::zero());
    auto kernel = build_count_kernel(dual.service, dual.vacation, mu, N + 1);
    auto P = build_embedded_matrix(dual, N + 1, kernel);
    auto sol = invariant_vector_finite(std::move(P));
    return sol.values[0];
}

}  // namespace qla
