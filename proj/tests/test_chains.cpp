#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "qla/chains.hpp"

using namespace qla;
using Dist = DistributionSpec<double>;
using Dist50 = DistributionSpec<real50>;
using Model = QueueModel<double>;
using Model50 = QueueModel<real50>;

namespace {

Model mm1v() {  // lambda=1, S=Exp(2), V=Exp(4): rho = 1/2
    return Model(1.0, Dist::exponential(2.0), Dist::exponential(4.0));
}

Model50 mm1v50() {
    return Model50(real50(1), Dist50::exponential(real50(2)), Dist50::exponential(real50(4)));
}

double birth_death_loss(double rho, int N) {
    return (1 - rho) * std::pow(rho, N) / (1 - std::pow(rho, N + 1));
}

}  // namespace

TEST_CASE("embedded matrix layout") {
    auto model = mm1v();
    auto kernel = build_count_kernel(model.service, model.vacation, model.lambda, 10);

    SUBCASE("smallest case N=2") {
        auto P = build_embedded_matrix(model, 2, kernel);
        CHECK(P[0][0] == doctest::Approx(kernel.b[0]));
        CHECK(P[0][1] == doctest::Approx(1 - kernel.b[0]));
        CHECK(P[1][0] == doctest::Approx(kernel.a[0]));
        CHECK(P[1][1] == doctest::Approx(1 - kernel.a[0]));
    }

    SUBCASE("interior rows shift and complement, N=3") {
        auto P = build_embedded_matrix(model, 3, kernel);
        CHECK(P[1][0] == doctest::Approx(2.0 / 3).epsilon(1e-14));
        CHECK(P[1][1] == doctest::Approx(2.0 / 9).epsilon(1e-14));
        CHECK(P[1][2] == doctest::Approx(1.0 / 9).epsilon(1e-14));
        CHECK(P[2][0] == 0.0);
        CHECK(P[2][1] == doctest::Approx(2.0 / 3).epsilon(1e-14));
    }

    SUBCASE("rows sum to one") {
        auto P = build_embedded_matrix(model, 8, kernel);
        for (const auto &row : P) {
            double s = std::accumulate(row.begin(), row.end(), 0.0);
            CHECK(std::fabs(s - 1.0) <= 1e-14);
            for (double v : row) CHECK(v >= 0.0);
        }
    }

    SUBCASE("zero vacation turns the boundary row into the service row") {
        Model plain(1.0, Dist::exponential(2.0), Dist::zero());
        auto k0 = build_count_kernel(plain.service, plain.vacation, plain.lambda, 10);
        auto P = build_embedded_matrix(plain, 5, k0);
        for (int j = 0; j < 5; ++j) CHECK(P[0][j] == doctest::Approx(P[1][j]).epsilon(1e-15));
    }

    SUBCASE("guards") {
        CHECK_THROWS_AS(build_embedded_matrix(model, 1, kernel), qla::InvalidConfig);
        CHECK_THROWS_AS(build_embedded_matrix(model, 30, kernel), qla::KernelTooShort);
    }
}

TEST_CASE("GTH on a symmetric two-state chain") {
    Matrix<double> P = {{0.5, 0.5}, {0.5, 0.5}};
    auto sol = invariant_vector_finite(P);
    CHECK(sol.values[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(sol.values[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("GTH is permutation invariant") {
    auto model = mm1v();
    auto kernel = build_count_kernel(model.service, model.vacation, model.lambda, 12);
    auto P = build_embedded_matrix(model, 6, kernel);
    auto base = invariant_vector_finite(P);

    std::vector<int> perm = {3, 0, 5, 1, 4, 2};
    Matrix<double> Q(6, std::vector<double>(6));
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) Q[perm[i]][perm[j]] = P[i][j];
    auto permuted = invariant_vector_finite(Q);
    for (int i = 0; i < 6; ++i)
        CHECK(permuted.values[perm[i]] == doctest::Approx(base.values[i]).epsilon(1e-13));
}

TEST_CASE("GTH residual is tiny") {
    auto model = mm1v();
    auto kernel = build_count_kernel(model.service, model.vacation, model.lambda, 80);
    auto P = build_embedded_matrix(model, 40, kernel);
    auto sol = invariant_vector_finite(P);
    CHECK(invariant_residual(P, sol.values) <= 1e-12);
}

TEST_CASE("birth-death oracle for the zero-vacation M/M/1/N queue") {
    Model plain(0.5, Dist::exponential(1.0), Dist::zero());
    auto kernel = build_count_kernel(plain.service, plain.vacation, plain.lambda, 90);
    for (int N : {2, 5, 10, 20, 30}) {
        auto sol = invariant_vector_finite(build_embedded_matrix(plain, N, kernel));
        double loss = loss_probability_exact(plain, sol);
        CHECK(loss == doctest::Approx(birth_death_loss(0.5, N)).epsilon(1e-10));
    }
}

TEST_CASE("infinite measure satisfies its defining recursion") {
    auto model = mm1v50();
    auto kernel = build_count_kernel(model.service, model.vacation, model.lambda, 40);
    auto sol = invariant_measure_infinite(model, kernel, 40);
    // residual of pi_j = pi_0 b_j + sum_{k=1}^{j+1} pi_k a_{j+1-k}
    for (int j = 0; j + 1 <= 40; ++j) {
        real50 rhs = sol.values[0] * kernel.b[j];
        for (int k = 1; k <= j + 1; ++k) rhs += sol.values[k] * kernel.a[j + 1 - k];
        double rel = static_cast<double>((rhs - sol.values[j]) / sol.values[j]);
        CHECK(std::fabs(rel) < 1e-40);
    }
}

TEST_CASE("embedded M/M/1 measure is geometric (zero vacation)") {
    Model50 plain(real50("0.5"), Dist50::exponential(real50(1)), Dist50::zero());
    auto kernel = build_count_kernel(plain.service, plain.vacation, plain.lambda, 35);
    auto sol = invariant_measure_infinite(plain, kernel, 35);
    for (int j = 0; j < 30; ++j) {
        double ratio = static_cast<double>(sol.values[j + 1] / sol.values[j]);
        CHECK(ratio == doctest::Approx(0.5).epsilon(1e-12));
    }
    CHECK(static_cast<double>(sol.values[0]) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("proportionality links the finite vector and the infinite measure") {
    // one instance per traffic regime; GTH vs high-precision recursion
    std::vector<Model50> models = {
        mm1v50(),
        Model50(real50(1), Dist50::deterministic(real50(1)), Dist50::exponential(real50(1))),
        Model50(real50(2), Dist50::exponential(real50(1)), Dist50::exponential(real50(1)))};
    for (const auto &model : models) {
        const int N = 25;
        auto kernel = build_count_kernel(model.service, model.vacation, model.lambda, N + 50);
        auto fin = invariant_vector_finite(build_embedded_matrix(model, N, kernel));
        auto inf = invariant_measure_infinite(model, kernel, N + 1);
        real50 spi = inf.partial_sum(N);
        for (int i = 0; i < N; ++i) {
            double rel = static_cast<double>(fin.values[i] * spi / inf.values[i] - 1);
            CHECK(std::fabs(rel) < 1e-9);
        }
        // the two loss routes agree
        double le = static_cast<double>(loss_probability_exact(model, fin));
        double lm = static_cast<double>(loss_from_measure(model, inf, N));
        CHECK(le == doctest::Approx(lm).epsilon(1e-10));
    }
}

TEST_CASE("recursion detects catastrophic cancellation in double") {
    auto model = mm1v();
    auto kernel = build_count_kernel(model.service, model.vacation, model.lambda, 120);
    // pi_n ~ 2^-n sinks below the double noise floor well before n = 120 and
    // the computed values start oscillating in sign there
    CHECK_THROWS_AS(invariant_measure_infinite(model, kernel, 120), qla::PrecisionLoss);
    // shallow prefixes stay well above the floor
    CHECK_NOTHROW(invariant_measure_infinite(model, kernel, 30));
    // an explicit slack tolerance disables the guard
    qla::RecursionOptions slack;
    slack.negativity_tolerance = 1.0;
    CHECK_NOTHROW(invariant_measure_infinite(model, kernel, 120, slack));
}

TEST_CASE("supercritical measure grows at the reciprocal root rate") {
    Model50 model(real50(2), Dist50::exponential(real50(1)), Dist50::exponential(real50(1)));
    auto kernel = build_count_kernel(model.service, model.vacation, model.lambda, 45);
    auto sol = invariant_measure_infinite(model, kernel, 45);
    CHECK(sol.norm == InvariantSolution<real50>::Normalization::pi0_anchored);
    CHECK(sol.values[0] == real50(1));
    // log pi_n / n -> ln 2 (z_2 = 1/2)
    double slope = static_cast<double>(log(sol.values[40] / sol.values[20])) / 20.0;
    CHECK(slope == doctest::Approx(std::log(2.0)).epsilon(1e-2));
}

TEST_CASE("probability normalization closed form for pi_0") {
    auto model = mm1v50();
    auto kernel = build_count_kernel(model.service, model.vacation, model.lambda, 10);
    auto sol = invariant_measure_infinite(model, kernel, 10);
    // (1-rho)(1-nu_0) / (lambda E[V]) = 0.5 * 0.2 / 0.25
    CHECK(static_cast<double>(sol.values[0]) == doctest::Approx(0.4).epsilon(1e-14));
}

TEST_CASE("loss probability values and limits") {
    SUBCASE("M/M/1/10 closed form") {
        Model plain(0.5, Dist::exponential(1.0), Dist::zero());
        auto kernel = build_count_kernel(plain.service, plain.vacation, plain.lambda, 70);
        auto sol = invariant_vector_finite(build_embedded_matrix(plain, 10, kernel));
        CHECK(loss_probability_exact(plain, sol) ==
              doctest::Approx(4.885197850512946e-4).epsilon(1e-10));
    }
    SUBCASE("supercritical loss tends to 1 - 1/rho") {
        Model50 model(real50(2), Dist50::exponential(real50(1)), Dist50::exponential(real50(1)));
        auto kernel = build_count_kernel(model.service, model.vacation, model.lambda, 70);
        auto sol = invariant_measure_infinite(model, kernel, 61);
        double loss = static_cast<double>(loss_from_measure(model, sol, 60));
        CHECK(std::fabs(loss - 0.5) < 1e-3);
    }
}

TEST_CASE("Stolz ratio limits of the loss against the measure sums") {
    SUBCASE("stable: P_loss(N) / tail_sum(N) converges to 1 - rho monotonically") {
        auto model = mm1v50();
        auto kernel = build_count_kernel(model.service, model.vacation, model.lambda, 130);
        auto sol = invariant_measure_infinite(model, kernel, 70);
        double prev_gap = 1e9;
        double ratio = 0;
        for (int N = 10; N <= 60; N += 10) {
            real50 loss = loss_from_measure(model, sol, N);
            ratio = static_cast<double>(loss / sol.tail_sum(N));
            double gap = std::fabs(ratio - 0.5);
            CHECK(gap < prev_gap);
            prev_gap = gap;
        }
        CHECK(std::fabs(ratio / 0.5 - 1) < 1e-3);
    }
    SUBCASE("unstable: S_pi(N) (P_loss(N) - 1 + 1/rho) -> E[V] pi_0 / (rho E[S] (1-nu_0))") {
        Model50 model(real50(2), Dist50::exponential(real50(1)), Dist50::exponential(real50(1)));
        auto kernel = build_count_kernel(model.service, model.vacation, model.lambda, 130);
        auto sol = invariant_measure_infinite(model, kernel, 70);
        real50 target = model.vacation.mean() * sol.values[0] /
                        (model.rho() * model.service.mean() * (1 - model.nu0()));
        double prev_gap = 1e9;
        double ratio = 0;
        for (int N = 10; N <= 60; N += 10) {
            real50 v = sol.partial_sum(N) * (loss_from_measure(model, sol, N) - real50("0.5"));
            ratio = static_cast<double>(v / target);
            double gap = std::fabs(ratio - 1);
            CHECK(gap < prev_gap);
            prev_gap = gap;
        }
        CHECK(std::fabs(ratio - 1) < 1e-3);
    }
}

TEST_CASE("generating function identity of the invariant measure") {
    auto model = mm1v50();
    auto kernel = build_count_kernel(model.service, model.vacation, model.lambda, 130);
    auto sol = invariant_measure_infinite(model, kernel, 130);
    for (double zd : {0.2, 0.5, 0.8}) {
        real50 z(zd);
        real50 piz = 0, zn = 1;
        for (int j = 0; j <= 130; ++j) {
            piz += sol.values[j] * zn;
            zn *= z;
        }
        real50 sstar = model.service.transform_z(model.lambda, z);
        real50 vstar = model.vacation.transform_z(model.lambda, z);
        real50 lhs = piz * (z - sstar);
        real50 rhs = sol.values[0] * (vstar - 1) * sstar / (1 - model.nu0());
        CHECK(static_cast<double>(lhs - rhs) == doctest::Approx(0.0).epsilon(1e-8));
        CHECK(std::fabs(static_cast<double>(lhs / rhs - 1)) < 1e-8);
    }
}

TEST_CASE("time-stationary distribution") {
    SUBCASE("components sum to one and end at the loss probability") {
        auto model = mm1v();
        auto kernel = build_count_kernel(model.service, model.vacation, model.lambda, 40);
        auto sol = invariant_vector_finite(build_embedded_matrix(model, 12, kernel));
        auto star = time_stationary_distribution(model, sol);
        CHECK(star.size() == 13);
        double sum = std::accumulate(star.begin(), star.end(), 0.0);
        CHECK(std::fabs(sum - 1.0) <= 1e-10);
        CHECK(star[12] == doctest::Approx(loss_probability_exact(model, sol)).epsilon(1e-13));
    }
    SUBCASE("birth-death closed form for M/M/1/5") {
        Model plain(0.5, Dist::exponential(1.0), Dist::zero());
        auto kernel = build_count_kernel(plain.service, plain.vacation, plain.lambda, 60);
        auto sol = invariant_vector_finite(build_embedded_matrix(plain, 5, kernel));
        auto star = time_stationary_distribution(plain, sol);
        double rho = 0.5;
        for (int j = 0; j <= 5; ++j) {
            double expect = std::pow(rho, j) * (1 - rho) / (1 - std::pow(rho, 6));
            CHECK(star[j] == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("total variation distance to the infinite-queue law") {
    auto model = mm1v50();
    auto kernel = build_count_kernel(model.service, model.vacation, model.lambda, 120);
    auto sol = invariant_measure_infinite(model, kernel, 110);

    SUBCASE("nonnegative and decreasing to zero") {
        double prev = 1e9;
        for (int N : {5, 10, 20, 40}) {
            auto tv = tv_distance(model, sol, N, 60);
            double d = static_cast<double>(tv.distance);
            CHECK(d >= 0.0);
            CHECK(d < prev);
            prev = d;
        }
        CHECK(prev < 1e-10);
    }

    SUBCASE("decay order matches the measure tail order") {
        double lo = 1e300, hi = 0;
        for (int N : {5, 10, 15, 20, 25, 30, 40}) {
            auto tv = tv_distance(model, sol, N, 60);
            double ratio = static_cast<double>(tv.distance / sol.tail_sum(N));
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
        }
        CHECK(lo > 0.0);
        CHECK(hi / lo < 10.0);
    }

    SUBCASE("N=1 definition unrolled") {
        auto tv = tv_distance(model, sol, 1, 60);
        // pi_0(1) = 1, so pi*_0(1) = c and pi*_1(1) = P_loss(1)
        real50 nu0 = model.nu0();
        real50 c = (1 - nu0) / model.lambda /
                   (model.vacation.mean() * 1 + model.service.mean() * (1 - nu0));
        real50 manual = fabs(c - sol.values[0]) + fabs((1 - c) - sol.values[1]) + sol.tail_sum(2);
        CHECK(static_cast<double>(tv.distance - manual) == doctest::Approx(0.0).epsilon(1e-14));
    }

    SUBCASE("reported remainder is the mass beyond the computed prefix") {
        auto tv = tv_distance(model, sol, 10, 40);
        CHECK(static_cast<double>(tv.tail_beyond - sol.tail_sum(51)) ==
              doctest::Approx(0.0).epsilon(1e-30));
    }

    SUBCASE("requires a stable queue") {
        Model50 model2(real50(2), Dist50::exponential(real50(1)), Dist50::exponential(real50(1)));
        auto k2 = build_count_kernel(model2.service, model2.vacation, model2.lambda, 40);
        auto s2 = invariant_measure_infinite(model2, k2, 30);
        CHECK_THROWS_AS(tv_distance(model2, s2, 10, 10), qla::DomainError);
    }
}

TEST_CASE("GI/M/1 exact loss equals the birth-death value for Poisson arrivals") {
    // A = Exp(0.5), mu = 1: the queue is M/M/1/N with rho = 0.5
    auto arr = Dist::exponential(0.5);
    for (int N : {2, 5, 10, 20}) {
        double loss = gim1_exact_loss(arr, 1.0, N);
        CHECK(loss == doctest::Approx(birth_death_loss(0.5, N)).epsilon(1e-9));
    }
}

TEST_CASE("model validation") {
    CHECK_THROWS_AS(Model(0.0, Dist::exponential(1.0), Dist::zero()), qla::InvalidConfig);
    CHECK_THROWS_AS(Model(1.0, Dist::zero(), Dist::zero()), qla::InvalidConfig);
    CHECK(mm1v().rho() == doctest::Approx(0.5));
    CHECK(mm1v().nu0() == doctest::Approx(0.8).epsilon(1e-15));
}
