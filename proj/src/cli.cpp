#include "qla/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "qla/asymptotics.hpp"
#include "qla/chains.hpp"
#include "qla/kernel.hpp"
#include "qla/model_io.hpp"
#include "qla/simulator.hpp"

namespace qla {
namespace {

struct SweepSpec {
    int from = 0, to = 0, step = 1;
};

SweepSpec parse_sweep(const std::string &text) {
    SweepSpec s;
    char c1 = 0, c2 = 0;
    std::istringstream ss(text);
    if (!(ss >> s.from >> c1 >> s.to >> c2 >> s.step) || c1 != ':' || c2 != ':' || ss.peek() != EOF)
        throw InvalidConfig("sweep must be N1:N2:step");
    if (s.from < 1 || s.to < s.from || s.step < 1) throw InvalidConfig("bad sweep range");
    return s;
}

struct CommonOpts {
    std::string model_path;
    std::string emit = "csv";
    std::string out_path;
    int precision = 16;
    int capacity = 0;
    std::string sweep;

    std::vector<int> capacities() const {
        std::vector<int> ns;
        if (!sweep.empty()) {
            auto s = parse_sweep(sweep);
            for (int n = s.from; n <= s.to; n += s.step) ns.push_back(n);
        } else if (capacity >= 1) {
            ns.push_back(capacity);
        } else {
            throw InvalidConfig("need --capacity or --sweep");
        }
        return ns;
    }
};

// Minimal row sink emitting csv or an aligned table, deterministic output.
class Emitter {
public:
    Emitter(std::ostream &os, std::string mode, std::vector<std::string> header)
        : os_(os), csv_(mode == "csv"), header_(std::move(header)) {
        if (!csv_ && mode != "table") throw InvalidConfig("--emit must be csv or table");
    }
    void row(const std::vector<std::string> &cells) { rows_.push_back(cells); }
    ~Emitter() {
        if (csv_) {
            write_line(header_, ",");
            for (const auto &r : rows_) write_line(r, ",");
        } else {
            std::vector<std::size_t> w(header_.size());
            for (std::size_t i = 0; i < header_.size(); ++i) w[i] = header_[i].size();
            for (const auto &r : rows_)
                for (std::size_t i = 0; i < r.size(); ++i) w[i] = std::max(w[i], r[i].size());
            auto line = [&](const std::vector<std::string> &cells) {
                for (std::size_t i = 0; i < cells.size(); ++i)
                    os_ << std::setw(static_cast<int>(w[i]) + (i ? 2 : 0)) << cells[i];
                os_ << "\n";
            };
            line(header_);
            for (const auto &r : rows_) line(r);
        }
    }

private:
    void write_line(const std::vector<std::string> &cells, const char *sep) {
        for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? sep : "") << cells[i];
        os_ << "\n";
    }
    std::ostream &os_;
    bool csv_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

template <Scalar R>
std::string fmt(const R &x) {
    std::ostringstream ss;
    ss << std::setprecision(std::numeric_limits<R>::max_digits10) << x;
    return ss.str();
}

std::string fmt_d(double x, int prec = 17) {
    std::ostringstream ss;
    ss << std::setprecision(prec) << x;
    return ss.str();
}

template <Scalar R>
struct ExactSweep {
    std::vector<R> pi0N, loss;
    std::vector<R> tv;      // filled when tv_tail >= 0
};

// Exact losses for a set of capacities. GTH per capacity where cheap, one
// recursion pass otherwise; both routes agree through the proportionality
// identity (checked by the test suite).
template <Scalar R>
ExactSweep<R> exact_sweep(const QueueModel<R> &model, const std::vector<int> &ns,
                          const std::string &solver, int tv_tail) {
    ExactSweep<R> res;
    const int n_top = *std::max_element(ns.begin(), ns.end());
    const bool want_tv = tv_tail >= 0;
    // GTH is the double-precision workhorse; the recursion is the natural
    // high-precision route (stable loss forms, one pass per sweep)
    bool use_gth = solver == "gth" ||
                   (solver == "auto" && digits10_v<R> <= 20 && n_top <= 400 && !want_tv);
    if (solver == "recursion") use_gth = false;
    if (use_gth) {
        auto kernel =
            build_count_kernel(model.service, model.vacation, model.lambda, n_top + 50);
        for (int N : ns) {
            auto P = build_embedded_matrix(model, N, kernel);
            auto sol = invariant_vector_finite(std::move(P));
            res.pi0N.push_back(sol.values[0]);
            res.loss.push_back(loss_probability_exact(model, sol));
        }
    } else {
        const int tail = want_tv ? tv_tail : 0;
        const int n = n_top + tail + 1;
        auto kernel = build_count_kernel(model.service, model.vacation, model.lambda, n + 50);
        auto prefix = invariant_measure_infinite(model, kernel, n);
        for (int N : ns) {
            res.pi0N.push_back(prefix.values[0] / prefix.partial_sum(N));
            res.loss.push_back(loss_from_measure(model, prefix, N));
            if (want_tv) res.tv.push_back(tv_distance(model, prefix, N, tv_tail).distance);
        }
    }
    return res;
}

template <Scalar R>
int cmd_exact(const CommonOpts &o, const std::string &solver, int tv_tail, std::ostream &out) {
    auto cfg = load_model_config(o.model_path);
    auto ns = o.capacities();
    std::vector<std::string> header = {"N", "pi0N", "ploss_exact"};
    if (tv_tail >= 0) header.push_back("tv_distance");
    Emitter em(out, o.emit, header);
    if (cfg.kind == ModelConfig::Kind::gim1n) {
        if (tv_tail >= 0) throw InvalidConfig("tv_distance is not defined for gim1n configs");
        auto arr = primary_law<R>(cfg);
        R mu = arrival_rate<R>(cfg);
        for (int N : ns) {
            R loss = gim1_exact_loss(arr, mu, N);
            em.row({std::to_string(N), fmt(loss), fmt(loss)});
        }
        return 0;
    }
    auto model = to_queue_model<R>(cfg);
    if (tv_tail >= 0 && !(model.rho() < 1))
        throw DomainError("tv_distance requires rho < 1");
    auto sweep = exact_sweep(model, ns, solver, tv_tail);
    for (std::size_t i = 0; i < ns.size(); ++i) {
        std::vector<std::string> row = {std::to_string(ns[i]), fmt(sweep.pi0N[i]),
                                        fmt(sweep.loss[i])};
        if (tv_tail >= 0) row.push_back(fmt(sweep.tv[i]));
        em.row(row);
    }
    return 0;
}

template <Scalar R>
AsymptoticEstimate<double> estimate_for(const ModelConfig &cfg) {
    if (cfg.kind == ModelConfig::Kind::gim1n)
        return gim1_loss(primary_law<double>(cfg), arrival_rate<double>(cfg));
    return asymptotic_loss(to_queue_model<double>(cfg));
}

template <Scalar R>
int cmd_asymptotic(const CommonOpts &o, bool with_exact, const std::string &solver,
                   std::ostream &out) {
    auto cfg = load_model_config(o.model_path);
    auto ns = o.capacities();
    auto est = estimate_for<R>(cfg);
    std::vector<std::string> header = {"N",         "regime",    "offset", "rate",
                                       "poly_order", "constant", "ploss_asym"};
    if (with_exact) {
        header.push_back("ploss_exact");
        header.push_back("ratio");
    }
    Emitter em(out, o.emit, header);
    std::vector<R> exact;
    if (with_exact) {
        if (cfg.kind == ModelConfig::Kind::gim1n) {
            auto arr = primary_law<R>(cfg);
            R mu = arrival_rate<R>(cfg);
            for (int N : ns) exact.push_back(gim1_exact_loss(arr, mu, N));
        } else {
            exact = exact_sweep(to_queue_model<R>(cfg), ns, solver, -1).loss;
        }
    }
    for (std::size_t i = 0; i < ns.size(); ++i) {
        const int N = ns[i];
        std::vector<std::string> row = {std::to_string(N),    regime_name(est.regime),
                                        fmt_d(est.offset),    fmt_d(est.rate),
                                        fmt_d(est.poly_order), fmt_d(est.constant),
                                        fmt_d(est.evaluate(N))};
        if (with_exact) {
            row.push_back(fmt(exact[i]));
            R ratio = (exact[i] - R(est.offset)) / R(est.evaluate(N) - est.offset);
            row.push_back(fmt(ratio));
        }
        em.row(row);
    }
    return 0;
}

int cmd_simulate(const CommonOpts &o, long arrivals, long warmup, int batches, std::uint64_t seed,
                 std::ostream &out) {
    auto cfg = load_model_config(o.model_path);
    if (cfg.kind == ModelConfig::Kind::gim1n)
        throw InvalidConfig("the simulator models Poisson-arrival queues only");
    SimConfig sc{to_queue_model<double>(cfg), 0, warmup, arrivals, batches, seed};
    auto ns = o.capacities();
    Emitter em(out, o.emit, {"N", "point", "half_width", "arrivals", "blocked", "seed"});
    for (int N : ns) {
        sc.capacity = N;
        auto est = simulate(sc);
        em.row({std::to_string(N), fmt_d(est.point), fmt_d(est.half_width_95),
                std::to_string(est.arrivals_seen), std::to_string(est.blocked),
                std::to_string(seed)});
    }
    return 0;
}

template <Scalar R>
int cmd_compare(const CommonOpts &o, bool with_sim, long arrivals, long warmup, int batches,
                std::uint64_t seed, const std::string &solver, std::ostream &out) {
    auto cfg = load_model_config(o.model_path);
    auto ns = o.capacities();
    auto est = estimate_for<R>(cfg);
    std::vector<std::string> header = {"N", "regime", "ploss_exact", "ploss_asym", "ratio"};
    if (with_sim) {
        header.push_back("sim_point");
        header.push_back("sim_half_width");
    }
    Emitter em(out, o.emit, header);
    std::vector<R> exact;
    if (cfg.kind == ModelConfig::Kind::gim1n) {
        auto arr = primary_law<R>(cfg);
        R mu = arrival_rate<R>(cfg);
        for (int N : ns) exact.push_back(gim1_exact_loss(arr, mu, N));
        if (with_sim) throw InvalidConfig("simulation columns are not available for gim1n");
    } else {
        exact = exact_sweep(to_queue_model<R>(cfg), ns, solver, -1).loss;
    }
    std::optional<SimConfig> sc;
    if (with_sim) sc = SimConfig{to_queue_model<double>(cfg), 0, warmup, arrivals, batches, seed};
    for (std::size_t i = 0; i < ns.size(); ++i) {
        const int N = ns[i];
        R asym = R(est.evaluate(N));
        R ratio = (exact[i] - R(est.offset)) / (asym - R(est.offset));
        std::vector<std::string> row = {std::to_string(N), regime_name(est.regime), fmt(exact[i]),
                                        fmt(asym), fmt(ratio)};
        if (with_sim) {
            sc->capacity = N;
            auto sim = simulate(*sc);
            row.push_back(fmt_d(sim.point));
            row.push_back(fmt_d(sim.half_width_95));
        }
        em.row(row);
    }
    return 0;
}

template <Scalar R>
int cmd_kernel_dump(const CommonOpts &o, int nmax, std::ostream &out) {
    auto cfg = load_model_config(o.model_path);
    if (cfg.kind == ModelConfig::Kind::gim1n)
        throw InvalidConfig("kernel-dump applies to Poisson-arrival models");
    auto model = to_queue_model<R>(cfg);
    auto kernel = build_count_kernel(model.service, model.vacation, model.lambda, nmax);
    Emitter em(out, o.emit, {"j", "a_j", "nu_j", "b_j"});
    for (int j = 0; j <= nmax; ++j)
        em.row({std::to_string(j), fmt(kernel.a[j]), fmt(kernel.nu[j]),
                j < nmax ? fmt(kernel.b[j]) : std::string()});
    return 0;
}

enum class Tier { d64, d50, d100 };

Tier pick_tier(int digits) {
    if (digits <= 16) return Tier::d64;
    if (digits <= 50) return Tier::d50;
    if (digits <= 100) return Tier::d100;
    throw InvalidConfig("precision tiers available: up to 100 significant digits");
}

template <class F>
int with_tier(Tier t, F &&f) {
    switch (t) {
        case Tier::d64: return f.template operator()<double>();
        case Tier::d50: return f.template operator()<real50>();
        default: return f.template operator()<real100>();
    }
}

}  // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"exact, asymptotic and simulated loss probabilities for finite-buffer "
                 "single-server queues with server vacations"};
    app.require_subcommand(1);

    CommonOpts common;
    std::string solver = "auto";
    int tv_tail = -1;
    bool with_exact = false, with_sim = false;
    long arrivals = 1000000, warmup = 100000;
    int batches = 20, nmax = 100;
    std::uint64_t seed = 1;

    auto add_common = [&](CLI::App *cmd, bool needs_capacity) {
        cmd->add_option("--model", common.model_path, "model config (json)")->required();
        cmd->add_option("--precision", common.precision,
                        "significant decimal digits for the arithmetic");
        cmd->add_option("--emit", common.emit, "csv|table");
        cmd->add_option("--out", common.out_path, "write data rows to a file instead of stdout");
        if (needs_capacity) {
            cmd->add_option("--capacity", common.capacity, "system capacity N");
            cmd->add_option("--sweep", common.sweep, "capacity sweep N1:N2:step");
        }
    };

    auto *exact = app.add_subcommand("exact", "exact loss probabilities");
    add_common(exact, true);
    exact->add_option("--solver", solver, "auto|gth|recursion");
    exact->add_option("--tv-tail", tv_tail,
                      "emit tv_distance using this many invariant-measure terms beyond N");

    auto *asym = app.add_subcommand("asymptotic", "closed-form decay estimates");
    add_common(asym, true);
    asym->add_flag("--with-exact", with_exact, "add exact losses and the convergence ratio");
    asym->add_option("--solver", solver, "auto|gth|recursion");

    auto *sim = app.add_subcommand("simulate", "discrete-event simulation estimate");
    add_common(sim, true);
    sim->add_option("--arrivals", arrivals, "measured arrivals");
    sim->add_option("--warmup", warmup, "warmup arrivals discarded");
    sim->add_option("--batches", batches, "batch count for the confidence interval");
    sim->add_option("--seed", seed, "rng seed");

    auto *cmp = app.add_subcommand("compare", "exact vs asymptotic (vs simulated) table");
    add_common(cmp, true);
    cmp->add_flag("--simulate", with_sim, "add simulation columns");
    cmp->add_option("--arrivals", arrivals, "measured arrivals");
    cmp->add_option("--warmup", warmup, "warmup arrivals discarded");
    cmp->add_option("--batches", batches, "batch count");
    cmp->add_option("--seed", seed, "rng seed");
    cmp->add_option("--solver", solver, "auto|gth|recursion");

    auto *kd = app.add_subcommand("kernel-dump", "arrival-count sequences a_j, nu_j, b_j");
    add_common(kd, false);
    kd->add_option("--nmax", nmax, "largest index");

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::ParseError &e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        err << "ConfigError: " << e.what() << "\n";
        return 2;
    }

    try {
        bool precision_pinned = false;
        for (auto *cmd : {exact, asym, sim, cmp, kd})
            if (cmd->parsed() && cmd->count("--precision") > 0) precision_pinned = true;
        if (const char *env = std::getenv("QLA_PRECISION")) {
            try {
                common.precision = std::stoi(env);
            } catch (const std::exception &) {
                throw InvalidConfig("QLA_PRECISION must be an integer digit count");
            }
            precision_pinned = true;
        }
        Tier tier = pick_tier(common.precision);

        // The deep forward recursion is unstable at hardware precision, so
        // it defaults to the 50-digit tier beyond n = 30 unless the caller
        // pinned a precision explicitly.
        const bool wants_exact = exact->parsed() || cmp->parsed() || (asym->parsed() && with_exact);
        if (!precision_pinned && tier == Tier::d64 && wants_exact) {
            const auto ns = common.capacities();
            const int n_top = *std::max_element(ns.begin(), ns.end());
            const bool want_tv = exact->parsed() && tv_tail >= 0;
            const bool recursion_route =
                solver == "recursion" || (solver == "auto" && (n_top > 400 || want_tv));
            const int n_needed = n_top + (want_tv ? tv_tail : 0) + 1;
            if (recursion_route && n_needed > 30) {
                tier = Tier::d50;
                err << "note: using the 50-digit tier for the deep invariant-measure recursion "
                       "(pass --precision to override)\n";
            }
        }

        std::ofstream file;
        std::ostream *sink = &out;
        if (!common.out_path.empty()) {
            file.open(common.out_path);
            if (!file) throw InvalidConfig("cannot open output file: " + common.out_path);
            sink = &file;
        }

        if (exact->parsed()) {
            return with_tier(tier, [&]<Scalar R>() {
                return cmd_exact<R>(common, solver, tv_tail, *sink);
            });
        }
        if (asym->parsed()) {
            return with_tier(tier, [&]<Scalar R>() {
                return cmd_asymptotic<R>(common, with_exact, solver, *sink);
            });
        }
        if (sim->parsed()) return cmd_simulate(common, arrivals, warmup, batches, seed, *sink);
        if (cmp->parsed()) {
            return with_tier(tier, [&]<Scalar R>() {
                return cmd_compare<R>(common, with_sim, arrivals, warmup, batches, seed, solver,
                                      *sink);
            });
        }
        if (kd->parsed()) {
            return with_tier(tier, [&]<Scalar R>() { return cmd_kernel_dump<R>(common, nmax, *sink); });
        }
        err << "ConfigError: no subcommand\n";
        return 2;
    } catch (const InvalidConfig &e) {
        err << e.name() << ": " << e.what() << "\n";
        return 2;
    } catch (const Error &e) {
        err << e.name() << ": " << e.what() << "\n";
        return 3;
    } catch (const std::exception &e) {
        err << "Error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace qla
