#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "qla/errors.hpp"
#include "qla/quadrature.hpp"
#include "qla/real.hpp"

namespace qla {

// Service / vacation / interarrival time laws. Each family carries exact
// closed forms for moments, tails and Laplace transforms where they exist;
// Pareto transforms fall back to adaptive quadrature on the bounded domain
// obtained from the substitution u = x_m / x.
template <Scalar R>
struct Exponential {
    R rate;  // E[X] = 1/rate
};

template <Scalar R>
struct Erlang {
    int shape;  // density rate^shape x^{shape-1} e^{-rate x} / (shape-1)!
    R rate;
};

template <Scalar R>
struct Deterministic {
    R value;
};

template <Scalar R>
struct HyperExponential {
    std::vector<R> weights;  // positive, sum to 1
    std::vector<R> rates;
};

template <Scalar R>
struct Pareto {
    R alpha;  // tail index, > 1 so the mean exists
    R scale;  // x_m; complementary cdf (x_m/x)^alpha for x >= x_m
};

struct Zero {};  // point mass at 0; recovers the plain M/G/1/N queue as V

// Location/shape of the leftmost singularity of F*(lambda - lambda z) in the
// z-plane. Pole-like families expose F* ~ coefficient / (location - z)^order
// near the singularity; heavy-tailed families report location 1 together
// with the regular-variation pair (alpha, L0) of the tail x^{-alpha} L0.
template <Scalar R>
struct SingularityDescriptor {
    enum class Kind { pole_like, entire, regularly_varying };
    Kind kind;
    R location;     // +inf when entire
    R order = 0;    // theta, pole_like only
    R coefficient = 0;
    struct RegVar {
        R alpha;
        R l0;
    };
    std::optional<RegVar> regular_variation;
};

template <Scalar R>
class DistributionSpec {
public:
    using Family =
        std::variant<Exponential<R>, Erlang<R>, Deterministic<R>, HyperExponential<R>, Pareto<R>, Zero>;

    static DistributionSpec exponential(R rate) {
        require(rate > 0, "exponential rate must be > 0");
        return DistributionSpec(Exponential<R>{rate});
    }
    static DistributionSpec erlang(int shape, R rate) {
        require(shape >= 1, "erlang shape must be >= 1");
        require(rate > 0, "erlang rate must be > 0");
        return DistributionSpec(Erlang<R>{shape, rate});
    }
    static DistributionSpec deterministic(R value) {
        require(value >= 0, "deterministic value must be >= 0");
        return DistributionSpec(Deterministic<R>{value});
    }
    static DistributionSpec hyper_exponential(std::vector<R> weights, std::vector<R> rates) {
        require(!weights.empty() && weights.size() == rates.size(),
                "hyperexponential needs matching nonempty weights and rates");
        R wsum = 0;
        for (const R &w : weights) {
            require(w > 0, "hyperexponential weights must be > 0");
            wsum += w;
        }
        for (const R &p : rates) require(p > 0, "hyperexponential rates must be > 0");
        using std::fabs;
        require(fabs(wsum - 1) <= R(1e-9), "hyperexponential weights must sum to 1");
        for (R &w : weights) w /= wsum;
        return DistributionSpec(HyperExponential<R>{std::move(weights), std::move(rates)});
    }
    static DistributionSpec pareto(R alpha, R scale) {
        require(alpha > 1, "pareto tail index must be > 1 so the mean exists");
        require(scale > 0, "pareto scale must be > 0");
        return DistributionSpec(Pareto<R>{alpha, scale});
    }
    static DistributionSpec zero() { return DistributionSpec(Zero{}); }

    const Family &family() const { return fam_; }

    // Point mass at zero, either the Zero family or Deterministic(0).
    bool is_zero() const {
        if (std::holds_alternative<Zero>(fam_)) return true;
        if (auto *d = std::get_if<Deterministic<R>>(&fam_)) return d->value == 0;
        return false;
    }

    std::string family_name() const {
        return std::visit(
            [](const auto &f) -> std::string {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, Exponential<R>>) return "exponential";
                else if constexpr (std::is_same_v<T, Erlang<R>>) return "erlang";
                else if constexpr (std::is_same_v<T, Deterministic<R>>) return "deterministic";
                else if constexpr (std::is_same_v<T, HyperExponential<R>>) return "hyperexponential";
                else if constexpr (std::is_same_v<T, Pareto<R>>) return "pareto";
                else return "zero";
            },
            fam_);
    }

    R mean() const {
        return std::visit(
            [](const auto &f) -> R {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, Exponential<R>>) return R(1) / f.rate;
                else if constexpr (std::is_same_v<T, Erlang<R>>) return R(f.shape) / f.rate;
                else if constexpr (std::is_same_v<T, Deterministic<R>>) return f.value;
                else if constexpr (std::is_same_v<T, HyperExponential<R>>) {
                    R m = 0;
                    for (std::size_t i = 0; i < f.weights.size(); ++i) m += f.weights[i] / f.rates[i];
                    return m;
                } else if constexpr (std::is_same_v<T, Pareto<R>>)
                    return f.alpha * f.scale / (f.alpha - 1);
                else return R(0);
            },
            fam_);
    }

    // Second moment; +inf for Pareto with alpha <= 2.
    R second_moment() const {
        return std::visit(
            [](const auto &f) -> R {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, Exponential<R>>) return R(2) / (f.rate * f.rate);
                else if constexpr (std::is_same_v<T, Erlang<R>>)
                    return R(f.shape) * (f.shape + 1) / (f.rate * f.rate);
                else if constexpr (std::is_same_v<T, Deterministic<R>>) return f.value * f.value;
                else if constexpr (std::is_same_v<T, HyperExponential<R>>) {
                    R m = 0;
                    for (std::size_t i = 0; i < f.weights.size(); ++i)
                        m += 2 * f.weights[i] / (f.rates[i] * f.rates[i]);
                    return m;
                } else if constexpr (std::is_same_v<T, Pareto<R>>) {
                    if (f.alpha <= 2) return infinity<R>();
                    return f.alpha * f.scale * f.scale / (f.alpha - 2);
                } else return R(0);
            },
            fam_);
    }

    // Complementary distribution function P[X > x], x >= 0.
    R tail(R x) const {
        using std::exp;
        using std::pow;
        return std::visit(
            [&](const auto &f) -> R {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, Exponential<R>>) return exp(-f.rate * x);
                else if constexpr (std::is_same_v<T, Erlang<R>>) {
                    R term = exp(-f.rate * x);
                    R sum = term;
                    for (int k = 1; k < f.shape; ++k) {
                        term *= f.rate * x / k;
                        sum += term;
                    }
                    return sum;
                } else if constexpr (std::is_same_v<T, Deterministic<R>>)
                    return x < f.value ? R(1) : R(0);
                else if constexpr (std::is_same_v<T, HyperExponential<R>>) {
                    R s = 0;
                    for (std::size_t i = 0; i < f.weights.size(); ++i)
                        s += f.weights[i] * exp(-f.rates[i] * x);
                    return s;
                } else if constexpr (std::is_same_v<T, Pareto<R>>)
                    return x < f.scale ? R(1) : pow(f.scale / x, f.alpha);
                else return R(0);
            },
            fam_);
    }

    // Largest s with E[e^{sX}] finite; the transform at t converges for
    // t > -abscissa (and at t = -abscissa only in heavy-tailed cases).
    R abscissa() const {
        return std::visit(
            [](const auto &f) -> R {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, Exponential<R>>) return f.rate;
                else if constexpr (std::is_same_v<T, Erlang<R>>) return f.rate;
                else if constexpr (std::is_same_v<T, HyperExponential<R>>) {
                    R m = f.rates[0];
                    for (const R &p : f.rates) m = std::min(m, p);
                    return m;
                } else if constexpr (std::is_same_v<T, Pareto<R>>) return R(0);
                else return infinity<R>();
            },
            fam_);
    }

    // Laplace transform E[e^{-tX}]. Throws DomainError where divergent
    // (t <= -abscissa for pole families, t < 0 for Pareto).
    R laplace(R t) const {
        using std::exp;
        using std::pow;
        return std::visit(
            [&](const auto &f) -> R {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, Exponential<R>>) {
                    check_convergent(t);
                    return f.rate / (f.rate + t);
                } else if constexpr (std::is_same_v<T, Erlang<R>>) {
                    check_convergent(t);
                    return pow(f.rate / (f.rate + t), f.shape);
                } else if constexpr (std::is_same_v<T, Deterministic<R>>)
                    return exp(-t * f.value);
                else if constexpr (std::is_same_v<T, HyperExponential<R>>) {
                    check_convergent(t);
                    R s = 0;
                    for (std::size_t i = 0; i < f.weights.size(); ++i)
                        s += f.weights[i] * f.rates[i] / (f.rates[i] + t);
                    return s;
                } else if constexpr (std::is_same_v<T, Pareto<R>>) {
                    if (t < 0) throw DomainError("pareto transform divergent for t < 0");
                    if (t == 0) return R(1);
                    // int_{x_m}^inf e^{-tx} alpha x_m^a x^{-a-1} dx, u = x_m/x
                    R txm = t * f.scale;
                    R a = f.alpha;
                    auto g = [&](R u) { return pow(u, a - 1) * exp(-txm / u); };
                    return a * integrate<R>(g, R(0), R(1), R(1e-12), R(0));
                } else return R(1);
            },
            fam_);
    }

    // {F*}'(lambda - lambda z) = int lambda t e^{-(lambda-lambda z)t} f(t) dt.
    R transform_d1(R lambda, R z) const {
        using std::exp;
        using std::pow;
        R t = lambda * (1 - z);
        return std::visit(
            [&](const auto &f) -> R {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, Exponential<R>>) {
                    check_convergent(t);
                    R d = f.rate + t;
                    return lambda * f.rate / (d * d);
                } else if constexpr (std::is_same_v<T, Erlang<R>>) {
                    check_convergent(t);
                    return lambda * f.shape * pow(f.rate, R(f.shape)) /
                           pow(f.rate + t, R(f.shape + 1));
                } else if constexpr (std::is_same_v<T, Deterministic<R>>)
                    return lambda * f.value * exp(-t * f.value);
                else if constexpr (std::is_same_v<T, HyperExponential<R>>) {
                    check_convergent(t);
                    R s = 0;
                    for (std::size_t i = 0; i < f.weights.size(); ++i) {
                        R d = f.rates[i] + t;
                        s += f.weights[i] * lambda * f.rates[i] / (d * d);
                    }
                    return s;
                } else if constexpr (std::is_same_v<T, Pareto<R>>) {
                    if (t < 0) throw DomainError("pareto transform divergent for t < 0");
                    if (t == 0) return lambda * f.alpha * f.scale / (f.alpha - 1);
                    R txm = t * f.scale;
                    R a = f.alpha;
                    R lxm = lambda * f.scale;
                    auto g = [&](R u) { return lxm * pow(u, a - 2) * exp(-txm / u); };
                    return a * integrate<R>(g, R(0), R(1), R(1e-12), R(0));
                } else return R(0);
            },
            fam_);
    }

    // {F*}''(lambda - lambda z) = int (lambda t)^2 e^{-(lambda-lambda z)t} f(t) dt.
    R transform_d2(R lambda, R z) const {
        using std::exp;
        using std::pow;
        R t = lambda * (1 - z);
        return std::visit(
            [&](const auto &f) -> R {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, Exponential<R>>) {
                    check_convergent(t);
                    R d = f.rate + t;
                    return 2 * lambda * lambda * f.rate / (d * d * d);
                } else if constexpr (std::is_same_v<T, Erlang<R>>) {
                    check_convergent(t);
                    return lambda * lambda * f.shape * (f.shape + 1) * pow(f.rate, R(f.shape)) /
                           pow(f.rate + t, R(f.shape + 2));
                } else if constexpr (std::is_same_v<T, Deterministic<R>>) {
                    R ld = lambda * f.value;
                    return ld * ld * exp(-t * f.value);
                } else if constexpr (std::is_same_v<T, HyperExponential<R>>) {
                    check_convergent(t);
                    R s = 0;
                    for (std::size_t i = 0; i < f.weights.size(); ++i) {
                        R d = f.rates[i] + t;
                        s += f.weights[i] * 2 * lambda * lambda * f.rates[i] / (d * d * d);
                    }
                    return s;
                } else if constexpr (std::is_same_v<T, Pareto<R>>) {
                    if (t < 0) throw DomainError("pareto transform divergent for t < 0");
                    if (t == 0) {
                        if (f.alpha <= 2)
                            throw DomainError("pareto second transform moment divergent at z = 1");
                        return lambda * lambda * f.alpha * f.scale * f.scale / (f.alpha - 2);
                    }
                    R txm = t * f.scale;
                    R a = f.alpha;
                    R lxm = lambda * f.scale;
                    auto g = [&](R u) { return lxm * lxm * pow(u, a - 3) * exp(-txm / u); };
                    return a * integrate<R>(g, R(0), R(1), R(1e-12), R(0));
                } else return R(0);
            },
            fam_);
    }

    // F*(lambda - lambda z) as a function of z.
    R transform_z(R lambda, R z) const { return laplace(lambda * (1 - z)); }

    // One variate by inverse-CDF style transforms of uniform draws; only the
    // rng state is mutated.
    double sample(std::mt19937_64 &rng) const {
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        return std::visit(
            [&](const auto &f) -> double {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, Exponential<R>>)
                    return -std::log(1.0 - uni(rng)) / static_cast<double>(f.rate);
                else if constexpr (std::is_same_v<T, Erlang<R>>) {
                    double acc = 0.0;
                    for (int i = 0; i < f.shape; ++i) acc += std::log(1.0 - uni(rng));
                    return -acc / static_cast<double>(f.rate);
                } else if constexpr (std::is_same_v<T, Deterministic<R>>)
                    return static_cast<double>(f.value);
                else if constexpr (std::is_same_v<T, HyperExponential<R>>) {
                    double u = uni(rng);
                    double acc = 0.0;
                    std::size_t pick = f.weights.size() - 1;
                    for (std::size_t i = 0; i < f.weights.size(); ++i) {
                        acc += static_cast<double>(f.weights[i]);
                        if (u <= acc) {
                            pick = i;
                            break;
                        }
                    }
                    return -std::log(1.0 - uni(rng)) / static_cast<double>(f.rates[pick]);
                } else if constexpr (std::is_same_v<T, Pareto<R>>)
                    return static_cast<double>(f.scale) *
                           std::pow(1.0 - uni(rng), -1.0 / static_cast<double>(f.alpha));
                else return 0.0;
            },
            fam_);
    }

    // Descriptor of F*(lambda - lambda z); the per-family shape is asserted,
    // not derived symbolically.
    SingularityDescriptor<R> singularity(R lambda) const {
        using std::pow;
        using Desc = SingularityDescriptor<R>;
        return std::visit(
            [&](const auto &f) -> Desc {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, Exponential<R>>) {
                    return Desc{Desc::Kind::pole_like, 1 + f.rate / lambda, R(1), f.rate / lambda, {}};
                } else if constexpr (std::is_same_v<T, Erlang<R>>) {
                    return Desc{Desc::Kind::pole_like, 1 + f.rate / lambda, R(f.shape),
                                pow(f.rate / lambda, R(f.shape)),
                                {}};
                } else if constexpr (std::is_same_v<T, Deterministic<R>>) {
                    return Desc{Desc::Kind::entire, infinity<R>(), R(0), R(0), {}};
                } else if constexpr (std::is_same_v<T, HyperExponential<R>>) {
                    R pmin = f.rates[0];
                    for (const R &p : f.rates) pmin = std::min(pmin, p);
                    R coeff = 0;  // residue contributions of all slowest phases
                    using std::fabs;
                    for (std::size_t i = 0; i < f.rates.size(); ++i)
                        if (fabs(f.rates[i] - pmin) <= R(1e-12) * pmin)
                            coeff += f.weights[i] * f.rates[i] / lambda;
                    return Desc{Desc::Kind::pole_like, 1 + pmin / lambda, R(1), coeff, {}};
                } else if constexpr (std::is_same_v<T, Pareto<R>>) {
                    Desc d{Desc::Kind::regularly_varying, R(1), R(0), R(0), {}};
                    d.regular_variation = {f.alpha, pow(f.scale, f.alpha)};
                    return d;
                } else {
                    return Desc{Desc::Kind::entire, infinity<R>(), R(0), R(0), {}};
                }
            },
            fam_);
    }

    // Density tail s(x) ~ c x^{-theta}; only Pareto carries one (theta =
    // alpha + 1, c = alpha x_m^alpha), used by the critical-regime analysis.
    struct DensityTail {
        R c;
        R theta;
    };
    std::optional<DensityTail> density_tail() const {
        if (auto *p = std::get_if<Pareto<R>>(&fam_)) {
            using std::pow;
            return DensityTail{p->alpha * pow(p->scale, p->alpha), p->alpha + 1};
        }
        return std::nullopt;
    }

private:
    explicit DistributionSpec(Family f) : fam_(std::move(f)) {}

    static void require(bool cond, const char *msg) {
        if (!cond) throw InvalidConfig(msg);
    }

    void check_convergent(const R &t) const {
        // 1e-12 safety margin at the abscissa boundary.
        R s = abscissa();
        if (is_finite(s) && t <= -s + R(1e-12) * std::max(R(1), s))
            throw DomainError("laplace transform divergent: t at or beyond -abscissa");
    }

    Family fam_;
};

}  // namespace qla
