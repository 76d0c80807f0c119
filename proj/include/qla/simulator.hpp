#pragma once

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "qla/chains.hpp"
#include "qla/distributions.hpp"
#include "qla/errors.hpp"

namespace qla {

struct SimConfig {
    QueueModel<double> model;
    int capacity = 10;
    long warmup_arrivals = 100000;
    long measured_arrivals = 1000000;
    int batches = 20;
    std::uint64_t seed = 1;
};

struct LossEstimate {
    double point = 0;          // blocked / arrivals_seen
    double half_width_95 = 0;  // batch-means Student-t half width
    std::vector<double> batch_means;
    long arrivals_seen = 0;
    long blocked = 0;
    double time_avg_full = 0;  // time fraction with N in system (PASTA check)
};

// Event-driven M/G/1/N queue with exhaustive service and multiple vacations.
// The server is always either serving or on vacation: a vacation starts the
// moment the system empties, and another one starts back-to-back if the
// system is still empty at vacation end. Simultaneous events resolve in the
// order (service completion, vacation end, arrival). Identical seeds yield
// identical outputs.
inline LossEstimate simulate(const SimConfig &cfg) {
    if (cfg.model.zero_vacation())
        throw InvalidConfig(
            "zero-length vacations are not simulable (idle periods would generate "
            "infinitely many events); validate the plain M/G/1/N queue analytically");
    if (cfg.capacity < 1) throw InvalidConfig("capacity must be >= 1");
    if (cfg.batches < 10) throw InvalidConfig("at least 10 batches required");
    if (cfg.measured_arrivals < 10L * cfg.batches)
        throw InvalidConfig("measured arrivals must be >= 10 * batches");

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double lambda = cfg.model.lambda;
    auto exp_arrival = [&]() { return -std::log(1.0 - uni(rng)) / lambda; };

    const int N = cfg.capacity;
    const long total_arrivals = cfg.warmup_arrivals + cfg.measured_arrivals;
    const double inf = std::numeric_limits<double>::infinity();

    double clock = 0.0;
    int in_system = 0;
    double next_arrival = exp_arrival();
    double next_service_end = inf;
    double next_vacation_end = cfg.model.vacation.sample(rng);

    long arrivals = 0, accepted = 0, departures = 0;
    long measured = 0, blocked = 0;
    std::vector<long> batch_blocked(cfg.batches, 0), batch_count(cfg.batches, 0);
    double full_time = 0.0;       // measured-window time spent with N in system
    double measure_start = -1.0;  // clock at the first measured arrival
    double last_event = 0.0;

    while (measured < cfg.measured_arrivals) {
        // tie-break order: service completion, vacation end, arrival
        int kind;
        double t;
        if (next_service_end <= next_vacation_end && next_service_end <= next_arrival) {
            kind = 0;
            t = next_service_end;
        } else if (next_vacation_end <= next_arrival) {
            kind = 1;
            t = next_vacation_end;
        } else {
            kind = 2;
            t = next_arrival;
        }
        if (measure_start >= 0 && in_system == N) full_time += t - last_event;
        last_event = t;
        clock = t;

        if (kind == 0) {  // service completion
            --in_system;
            ++departures;
            if (in_system > 0) {
                next_service_end = clock + cfg.model.service.sample(rng);
            } else {
                next_service_end = inf;
                next_vacation_end = clock + cfg.model.vacation.sample(rng);
            }
        } else if (kind == 1) {  // vacation end
            if (in_system > 0) {
                next_vacation_end = inf;
                next_service_end = clock + cfg.model.service.sample(rng);
            } else {
                next_vacation_end = clock + cfg.model.vacation.sample(rng);
            }
        } else {  // arrival
            ++arrivals;
            const bool in_window = arrivals > cfg.warmup_arrivals;
            if (in_window && measure_start < 0) {
                measure_start = clock;
                full_time = 0.0;
            }
            long idx = -1;
            if (in_window) {
                idx = measured * cfg.batches / cfg.measured_arrivals;
                ++batch_count[idx];
                ++measured;
            }
            if (in_system == N) {
                if (in_window) {
                    ++blocked;
                    ++batch_blocked[idx];
                }
            } else {
                ++in_system;
                ++accepted;
            }
            next_arrival = clock + exp_arrival();
        }
    }

    // flow conservation is exact by construction; a violation means a bug
    if (accepted != departures + in_system)
        throw Error("Internal", "flow conservation violated in simulation");

    LossEstimate est;
    est.arrivals_seen = measured;
    est.blocked = blocked;
    est.point = static_cast<double>(blocked) / static_cast<double>(measured);
    est.batch_means.resize(cfg.batches);
    double mean = 0.0;
    for (int i = 0; i < cfg.batches; ++i) {
        est.batch_means[i] = static_cast<double>(batch_blocked[i]) / batch_count[i];
        mean += est.batch_means[i];
    }
    mean /= cfg.batches;
    double var = 0.0;
    for (double m : est.batch_means) var += (m - mean) * (m - mean);
    var /= cfg.batches - 1;
    boost::math::students_t tdist(cfg.batches - 1);
    est.half_width_95 =
        boost::math::quantile(tdist, 0.975) * std::sqrt(var / cfg.batches);
    est.time_avg_full = clock > measure_start ? full_time / (clock - measure_start) : 0.0;
    return est;
}

}  // namespace qla
