#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "qla/chains.hpp"
#include "qla/distributions.hpp"
#include "qla/errors.hpp"
#include "qla/real.hpp"

namespace qla {

// Decay regimes of the loss probability as the capacity grows.
enum class Regime {
    subcrit_nongeom,     // rho<1, vacation transform singularity dominates
    subcrit_geom,        // rho<1, fixed point z1 of z = S*(lambda-lambda z)
    subcrit_heavy_both,  // rho<1, service and vacation tails comparable
    subcrit_heavy_s,     // rho<1, service tail dominates
    subcrit_heavy_v,     // rho<1, vacation tail dominates
    crit_finite_var,     // rho=1, E[S^2] < inf
    crit_power,          // rho=1, density tail exponent in (2,3)
    crit_log,            // rho=1, density tail exponent exactly 3
    supercrit            // rho>1
};

inline const char *regime_name(Regime r) {
    switch (r) {
        case Regime::subcrit_nongeom: return "SUBCRIT_NONGEOM";
        case Regime::subcrit_geom: return "SUBCRIT_GEOM";
        case Regime::subcrit_heavy_both: return "SUBCRIT_HEAVY_BOTH";
        case Regime::subcrit_heavy_s: return "SUBCRIT_HEAVY_S";
        case Regime::subcrit_heavy_v: return "SUBCRIT_HEAVY_V";
        case Regime::crit_finite_var: return "CRIT_FINITE_VAR";
        case Regime::crit_power: return "CRIT_POWER";
        case Regime::crit_log: return "CRIT_LOG";
        case Regime::supercrit: return "SUPERCRIT";
    }
    return "?";
}

// Closed-form decay estimate: evaluate(N) approximates P_loss(N) (including
// the offset 1 - 1/rho in the supercritical case). `rate` is the geometric
// base in the paper's own convention: bases above 1 (z1, r, eta2) decay as
// rate^-N, bases below 1 (z2, eta1) decay as rate^N; evaluate() normalizes
// the two so the correction factor per step is always min(rate, 1/rate).
template <Scalar R>
struct AsymptoticEstimate {
    Regime regime;
    R offset = 0;
    R rate = 1;
    R poly_order = 0;
    R constant = 0;
    R slowly_varying = 1;  // constant L0 multiplying the polynomial regimes
    bool log_factor = false;
    std::optional<R> alt_constant;  // alternate closed form where two exist
    std::string note;

    R evaluate(int N) const {
        using std::log;
        using std::pow;
        R q = rate > 1 ? 1 / rate : rate;
        R v = constant * slowly_varying * pow(R(N), poly_order) * pow(q, R(N));
        if (log_factor) v *= log(R(N));
        return offset + v;
    }
};

namespace detail {

// F*(lambda - lambda z) treated as +inf at/beyond the abscissa: a transform
// that diverges at its singular point dominates any finite comparison.
template <Scalar R>
R transform_or_inf(const DistributionSpec<R> &dist, R lambda, R z) {
    R s = dist.abscissa();
    if (is_finite(s)) {
        R t = lambda * (1 - z);
        if (t <= -s + R(1e-12) * std::max(R(1), s)) return infinity<R>();
    }
    return dist.transform_z(lambda, z);
}

template <Scalar R>
R singular_location(const DistributionSpec<R> &dist, R lambda) {
    auto d = dist.singularity(lambda);
    return d.kind == SingularityDescriptor<R>::Kind::entire ? infinity<R>() : d.location;
}

// Safeguarded secant/bisection for g(z) = z - S*(lambda - lambda z) on a
// bracket with g(lo) and g(hi) of opposite signs.
template <Scalar R, class G>
R solve_bracketed(G &&g, R lo, R hi, R glo, R ghi) {
    using std::fabs;
    const R tol = R(1e-13);
    R best = lo, gbest = glo;
    if (fabs(ghi) < fabs(glo)) {
        best = hi;
        gbest = ghi;
    }
    for (int it = 0; it < 500 && (hi - lo > tol || fabs(gbest) > tol); ++it) {
        R mid;
        // secant proposal, bisection fallback
        if (ghi != glo) {
            mid = lo - glo * (hi - lo) / (ghi - glo);
            if (!(mid > lo && mid < hi)) mid = (lo + hi) / 2;
        } else {
            mid = (lo + hi) / 2;
        }
        // force progress when the secant step stagnates at an endpoint
        R w = hi - lo;
        if (mid - lo < w / 64) mid = lo + w / 2;
        if (hi - mid < w / 64) mid = hi - w / 2;
        R gm = g(mid);
        if (fabs(gm) < fabs(gbest)) {
            best = mid;
            gbest = gm;
        }
        if (gm == 0) return mid;
        if ((gm > 0) == (glo > 0)) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
            ghi = gm;
        }
        if (hi - lo <= machine_eps<R>() * 4 * std::max(R(1), fabs(hi))) break;
    }
    return best;
}

}  // namespace detail

// Root z1 of z = S*(lambda - lambda z) on (1, R_S*). Exists in the
// subcritical case when the transform beats the identity at the right end of
// the interval; divergence at the singular point counts as beating it.
template <Scalar R>
R solve_fixed_point_sub(const QueueModel<R> &model) {
    using std::fabs;
    if (!(model.rho() < 1)) throw NoRootError("subcritical fixed point needs rho < 1");
    const R lambda = model.lambda;
    auto g = [&](R z) { return z - model.service.transform_z(lambda, z); };
    R rs = detail::singular_location(model.service, lambda);
    R lo = 1 + R(1e-9);
    R glo = g(lo);
    if (!(glo > 0)) throw NoRootError("no sign change just above z = 1");
    R hi, ghi;
    if (is_finite(rs)) {
        hi = rs - R(1e-9) * std::max(R(1), rs);
        R val = detail::transform_or_inf(model.service, lambda, hi);
        if (!is_finite(val) || val > hi) {
            ghi = is_finite(val) ? hi - val : -infinity<R>();
        } else {
            throw NoRootError("transform stays below the identity on (1, R_S*)");
        }
        if (!is_finite(ghi)) {
            // walk back from the singularity until the transform is finite
            R shrink = (hi - lo) / 2;
            while (shrink > R(1e-14)) {
                R cand = hi - shrink;
                R gc = g(cand);
                if (gc < 0) {
                    hi = cand;
                    ghi = gc;
                    break;
                }
                lo = cand;
                glo = gc;
                shrink /= 2;
            }
            if (!is_finite(ghi)) throw NoRootError("could not bracket the fixed point below R_S*");
        }
    } else {
        // entire transform: expand until it dominates
        hi = 2;
        ghi = g(hi);
        int guard = 0;
        while (ghi > 0 && guard++ < 2000) {
            lo = hi;
            glo = ghi;
            hi *= 2;
            ghi = g(hi);
        }
        if (ghi > 0) throw NoRootError("transform never overtakes the identity");
    }
    return detail::solve_bracketed(g, lo, hi, glo, ghi);
}

// Root z2 of z = S*(lambda - lambda z) on (0, 1); exists whenever rho > 1.
template <Scalar R>
R solve_fixed_point_super(const QueueModel<R> &model) {
    if (!(model.rho() > 1)) throw NoRootError("supercritical fixed point needs rho > 1");
    const R lambda = model.lambda;
    auto g = [&](R z) { return z - model.service.transform_z(lambda, z); };
    R lo = R(1e-12), hi = 1 - R(1e-9);
    R glo = g(lo), ghi = g(hi);
    if (!(glo < 0 && ghi > 0)) throw NoRootError("supercritical bracket failed");
    return detail::solve_bracketed(g, lo, hi, glo, ghi);
}

// Regime decision tree. Unclassifiable configurations are reported, not
// guessed at.
template <Scalar R>
Regime classify(const QueueModel<R> &model) {
    using std::fabs;
    const R rho = model.rho();
    const R crit_tol = R(1e-12);
    if (rho > 1 + crit_tol) return Regime::supercrit;
    if (fabs(rho - 1) <= crit_tol) {
        if (is_finite(model.service.second_moment())) return Regime::crit_finite_var;
        auto dt = model.service.density_tail();
        if (!dt)
            throw UnclassifiableError(
                "rho = 1 with infinite E[S^2] needs a power-law service density");
        if (fabs(dt->theta - 3) <= crit_tol) return Regime::crit_log;
        if (dt->theta > 2 && dt->theta < 3) return Regime::crit_power;
        throw UnclassifiableError("rho = 1 density exponent outside (2,3]");
    }
    // rho < 1
    auto ds = model.service.singularity(model.lambda);
    auto dv = model.vacation.singularity(model.lambda);
    using Kind = typename SingularityDescriptor<R>::Kind;
    const bool s_heavy = ds.kind == Kind::regularly_varying;
    const bool v_heavy = dv.kind == Kind::regularly_varying;
    if (s_heavy || v_heavy) {
        if (s_heavy && v_heavy) {
            R as = ds.regular_variation->alpha, av = dv.regular_variation->alpha;
            if (fabs(as - av) <= R(1e-12) * std::max(R(1), as)) return Regime::subcrit_heavy_both;
            return as < av ? Regime::subcrit_heavy_s : Regime::subcrit_heavy_v;
        }
        return s_heavy ? Regime::subcrit_heavy_s : Regime::subcrit_heavy_v;
    }
    const R rs = detail::singular_location(model.service, model.lambda);
    const R rv = detail::singular_location(model.vacation, model.lambda);
    const R r = std::min(rs, rv);
    if (!is_finite(r)) {
        // both transforms entire; the divergence-dominates rule applies
        try {
            (void)solve_fixed_point_sub(model);
            return Regime::subcrit_geom;
        } catch (const NoRootError &) {
            throw UnclassifiableError("entire transforms without a usable fixed point");
        }
    }
    if (r == rs) {
        R sat = detail::transform_or_inf(model.service, model.lambda, r);
        if (!is_finite(sat) || sat > r) return Regime::subcrit_geom;
    }
    if (r == rv) {
        R sat = detail::transform_or_inf(model.service, model.lambda, r);
        if (is_finite(sat) && sat < r) return Regime::subcrit_nongeom;
    }
    throw UnclassifiableError("neither light-tailed subcritical condition holds");
}

namespace detail {

template <Scalar R>
AsymptoticEstimate<R> critical_estimate(const DistributionSpec<R> &service, R lambda,
                                        Regime regime) {
    using std::tgamma;
    AsymptoticEstimate<R> est;
    est.regime = regime;
    if (regime == Regime::crit_finite_var) {
        est.constant = lambda * lambda * service.second_moment() / 2;
        est.poly_order = -1;
        return est;
    }
    auto dt = service.density_tail();
    const R c = dt->c, theta = dt->theta;
    if (regime == Regime::crit_log) {
        est.constant = c * lambda * lambda / 2;
        est.poly_order = -1;
        est.log_factor = true;
        return est;
    }
    using std::pow;
    est.constant = c * pow(lambda, theta - 1) * tgamma(theta - 1) * tgamma(4 - theta) /
                   ((1 - theta) * (2 - theta) * (3 - theta));
    est.poly_order = -(theta - 2);
    return est;
}

}  // namespace detail

template <Scalar R>
AsymptoticEstimate<R> standard_mg1_loss(const QueueModel<R> &model);

// Closed-form decay estimate of P_loss(N) for the vacation queue, matching
// the classified regime.
template <Scalar R>
AsymptoticEstimate<R> asymptotic_loss(const QueueModel<R> &model) {
    if (model.zero_vacation()) return standard_mg1_loss(model);
    using std::pow;
    using std::tgamma;
    const R lambda = model.lambda;
    const R rho = model.rho();
    const R es = model.service.mean();
    const R ev = model.vacation.mean();
    Regime regime = classify(model);
    AsymptoticEstimate<R> est;
    est.regime = regime;
    switch (regime) {
        case Regime::supercrit: {
            const R z2 = solve_fixed_point_super(model);
            const R sd = model.service.transform_d1(lambda, z2);
            const R vt = model.vacation.transform_z(lambda, z2);
            est.offset = 1 - 1 / rho;
            est.rate = z2;
            est.constant = (1 - z2) * (1 - sd) * ev / (z2 * rho * es * (1 - vt));
            return est;
        }
        case Regime::subcrit_geom: {
            const R z1 = solve_fixed_point_sub(model);
            const R sd = model.service.transform_d1(lambda, z1);
            const R vt = model.vacation.transform_z(lambda, z1);
            est.rate = z1;
            est.constant =
                z1 * (1 - rho) * (1 - rho) * (1 - vt) / (lambda * ev * (z1 - 1) * (1 - sd));
            return est;
        }
        case Regime::subcrit_nongeom: {
            auto dv = model.vacation.singularity(lambda);
            const R r = dv.location, theta = dv.order, c = dv.coefficient;
            const R sat = model.service.transform_z(lambda, r);
            est.rate = r;
            est.poly_order = theta - 1;
            est.constant = c * (1 - rho) * (1 - rho) * sat /
                           (pow(r, theta - 1) * tgamma(theta) * lambda * ev * (r - 1) * (r - sat));
            return est;
        }
        case Regime::subcrit_heavy_s: {
            auto rv = *model.service.singularity(lambda).regular_variation;
            est.poly_order = -(rv.alpha - 1);
            est.constant = pow(lambda, rv.alpha) / (rv.alpha - 1);
            est.slowly_varying = rv.l0;
            return est;
        }
        case Regime::subcrit_heavy_v: {
            auto rv = *model.vacation.singularity(lambda).regular_variation;
            est.poly_order = -(rv.alpha - 1);
            est.constant = (1 - rho) * pow(lambda, rv.alpha - 1) / ((rv.alpha - 1) * ev);
            est.slowly_varying = rv.l0;
            return est;
        }
        case Regime::subcrit_heavy_both: {
            auto rvs = *model.service.singularity(lambda).regular_variation;
            auto rvv = *model.vacation.singularity(lambda).regular_variation;
            const R alpha = rvs.alpha;
            const R c = rvv.l0 / rvs.l0;  // tail-ratio limit V/S from the descriptors
            est.poly_order = -(alpha - 1);
            est.constant =
                ((1 - rho) / ev + rho / (c * es)) * pow(lambda, alpha - 1) / (alpha - 1);
            est.slowly_varying = rvv.l0;
            return est;
        }
        case Regime::crit_finite_var:
        case Regime::crit_power:
        case Regime::crit_log:
            return detail::critical_estimate(model.service, lambda, regime);
    }
    throw UnclassifiableError("unreachable regime");
}

// The plain M/G/1/N specialization (V = 0).
template <Scalar R>
AsymptoticEstimate<R> standard_mg1_loss(const QueueModel<R> &model) {
    if (!model.zero_vacation())
        throw InvalidConfig("standard_mg1_loss expects the zero vacation law");
    using std::pow;
    const R lambda = model.lambda;
    const R rho = model.rho();
    Regime regime = classify(model);
    AsymptoticEstimate<R> est;
    est.regime = regime;
    switch (regime) {
        case Regime::subcrit_heavy_s: {
            auto rv = *model.service.singularity(lambda).regular_variation;
            est.poly_order = -(rv.alpha - 1);
            est.constant = pow(lambda, rv.alpha) / (rv.alpha - 1);
            est.slowly_varying = rv.l0;
            return est;
        }
        case Regime::subcrit_geom: {
            const R s1 = solve_fixed_point_sub(model);
            const R sd = model.service.transform_d1(lambda, s1);
            est.rate = s1;
            est.constant = s1 * (1 - rho) * (1 - rho) / (sd - 1);
            return est;
        }
        case Regime::crit_finite_var:
        case Regime::crit_power:
        case Regime::crit_log:
            return detail::critical_estimate(model.service, lambda, regime);
        case Regime::supercrit: {
            const R s2 = solve_fixed_point_super(model);
            const R sd = model.service.transform_d1(lambda, s2);
            est.offset = 1 - 1 / rho;
            est.rate = s2;
            est.constant = (1 - sd) / (s2 * rho * rho);
            return est;
        }
        default:
            throw UnclassifiableError("regime not reachable for the plain M/G/1/N queue");
    }
}

// GI/M/1/N estimate via the dual M/G/1 queue (Poisson rate mu, service law
// equal to the interarrival law, traffic 1/rho_tilde). In the overloaded
// light-tailed case two closed forms for the limit constant circulate; exact
// sweeps match the derivative form, which is returned as `constant` with the
// value form kept in `alt_constant`.
template <Scalar R>
AsymptoticEstimate<R> gim1_loss(const DistributionSpec<R> &interarrival, R mu) {
    using std::fabs;
    using std::pow;
    if (!(mu > 0)) throw InvalidConfig("service rate must be > 0");
    QueueModel<R> dual(mu, interarrival, DistributionSpec<R>::zero());
    const R rho_tilde = 1 / (mu * interarrival.mean());
    AsymptoticEstimate<R> est;
    if (rho_tilde < 1 - R(1e-12)) {
        const R eta1 = solve_fixed_point_super(dual);  // dual rho = 1/rho_tilde > 1
        est.regime = Regime::subcrit_geom;
        est.rate = eta1;
        est.constant = 1 - interarrival.transform_d1(mu, eta1);
        return est;
    }
    if (fabs(rho_tilde - 1) <= R(1e-12)) return detail::critical_estimate(interarrival, mu, classify(dual));
    // rho_tilde > 1: the loss tends to 1 - 1/rho_tilde; dual is underloaded.
    est.offset = 1 - 1 / rho_tilde;
    auto da = interarrival.singularity(mu);
    if (da.kind == SingularityDescriptor<R>::Kind::regularly_varying) {
        est.regime = Regime::supercrit;
        est.poly_order = -(da.regular_variation->alpha - 1);
        est.constant = pow(mu, da.regular_variation->alpha) / (da.regular_variation->alpha - 1);
        est.slowly_varying = da.regular_variation->l0;
        est.note = "polynomial correction evaluated with the dual rate mu";
        return est;
    }
    const R eta2 = solve_fixed_point_sub(dual);
    const R rho_dual = 1 / rho_tilde;
    est.regime = Regime::supercrit;
    est.rate = eta2;
    est.constant = (1 - rho_dual) * (1 - rho_dual) / (interarrival.transform_d1(mu, eta2) - 1);
    est.alt_constant = (1 - rho_dual) * (1 - rho_dual) / (eta2 - 1);
    est.note = "constant uses the derivative form; alt_constant is the value form";
    return est;
}

}  // namespace qla
