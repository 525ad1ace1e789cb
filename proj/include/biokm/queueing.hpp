#pragma once

// M/M/1 steady-state analytics and a seeded discrete-event simulator used to
// cross-check them.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <deque>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "biokm/error.hpp"

namespace biokm::queueing {

struct QueueStats {
    double lambda = 0.0;
    double mu = 0.0;
    double rho = 0.0;
    double L = 0.0;   // packets in system
    double Lq = 0.0;  // packets waiting
    double Ls = 0.0;  // packets in service
    double W = 0.0;   // seconds in system
    double Wq = 0.0;  // seconds waiting
    double Ws = 0.0;  // seconds in service
    double idle = 1.0;
};

struct SteadyStateRow {
    std::size_t j = 0;
    double pi = 0.0;
    std::size_t in_queue = 0;
};

inline void require_stable(double lambda, double mu) {
    if (!(mu > 0.0)) throw Error(ErrorCode::NonPositiveServiceRate, "service rate must be > 0");
    if (lambda < 0.0 || !std::isfinite(lambda)) {
        throw Error(ErrorCode::UnstableQueue, "arrival rate must be a finite value >= 0");
    }
    if (lambda >= mu) {
        throw Error(ErrorCode::UnstableQueue,
                    "arrival rate " + std::to_string(lambda) + " >= service rate " + std::to_string(mu));
    }
}

inline QueueStats mm1_stats(double lambda, double mu) {
    require_stable(lambda, mu);
    QueueStats s;
    s.lambda = lambda;
    s.mu = mu;
    s.rho = lambda / mu;
    s.L = s.rho / (1.0 - s.rho);
    s.Lq = s.rho * s.rho / (1.0 - s.rho);
    s.Ls = s.rho;
    // Time quantities divide by lambda; with no arrivals they are 0 so that
    // L = lambda * W still holds.
    if (lambda > 0.0) {
        s.W = s.L / lambda;
        s.Wq = s.Lq / lambda;
        s.Ws = s.Ls / lambda;
    }
    s.idle = 1.0 - s.rho;
    return s;
}

inline constexpr double kDefaultEpsilon = 1e-6;
inline constexpr std::size_t kDefaultJMax = 1000;

/// Rows j = 0, 1, ... of pi_j = rho^j (1 - rho). Stops at the first row with
/// pi_j < epsilon (that row included) or at j_max. in_queue is max(j - 1, 0).
inline std::vector<SteadyStateRow> steady_state_table(double lambda, double mu, double epsilon = kDefaultEpsilon,
                                                      std::size_t j_max = kDefaultJMax) {
    require_stable(lambda, mu);
    if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidSpec, "epsilon must be > 0");
    const double rho = lambda / mu;
    const double pi0 = 1.0 - rho;
    std::vector<SteadyStateRow> rows;
    double pi = pi0;
    for (std::size_t j = 0;; ++j) {
        if (j > 0) pi = std::pow(rho, static_cast<double>(j)) * pi0;
        rows.push_back({j, pi, j <= 1 ? 0 : j - 1});
        if (pi < epsilon || j >= j_max || rho == 0.0) break;
    }
    return rows;
}

/// Fig-style CSV: Messages, Steady-State Probability, Expected Idle Time (pi_0
/// repeated on every row).
inline void write_steady_state_csv(const std::vector<SteadyStateRow>& rows, std::ostream& out) {
    const double idle = rows.empty() ? 1.0 : rows.front().pi;
    char buf[128];
    out << "Messages,Steady-State Probability,Expected Idle Time,Packets In Queue\n";
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%.9f,%.9f,%zu\n", r.j, r.pi, idle, r.in_queue);
        out << buf;
    }
}

struct SimulationResult {
    double L = 0.0;           // time-averaged number in system
    double W = 0.0;           // mean sojourn of completed packets, seconds
    double rho = 0.0;         // busy fraction
    double lambda_hat = 0.0;  // observed arrivals per second
    std::uint64_t arrivals = 0;
    std::uint64_t completions = 0;
};

/// Single FIFO server, exponential interarrival (rate lambda) and service
/// (rate mu) times, run for `horizon_s` seconds of simulated time.
inline SimulationResult simulate_mm1(double lambda, double mu, double horizon_s, std::uint64_t seed) {
    if (!(mu > 0.0)) throw Error(ErrorCode::NonPositiveServiceRate, "service rate must be > 0");
    if (lambda < 0.0) throw Error(ErrorCode::InvalidSpec, "arrival rate must be >= 0");
    if (!(horizon_s > 0.0)) throw Error(ErrorCode::InvalidSpec, "horizon must be > 0");

    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> service(mu);
    constexpr double kNever = std::numeric_limits<double>::infinity();

    auto next_arrival_after = [&](double t) {
        if (lambda == 0.0) return kNever;
        std::exponential_distribution<double> gap(lambda);
        return t + gap(rng);
    };

    SimulationResult r;
    std::deque<double> arrival_times;  // packets in system, FIFO
    double clock = 0.0;
    double area = 0.0;
    double busy = 0.0;
    double sojourn_sum = 0.0;
    double next_arrival = next_arrival_after(0.0);
    double next_departure = kNever;

    while (true) {
        const double t = std::min({next_arrival, next_departure, horizon_s});
        const double dt = t - clock;
        area += dt * static_cast<double>(arrival_times.size());
        if (!arrival_times.empty()) busy += dt;
        clock = t;
        if (t >= horizon_s) break;

        if (next_arrival <= next_departure) {
            ++r.arrivals;
            arrival_times.push_back(clock);
            if (arrival_times.size() == 1) next_departure = clock + service(rng);
            next_arrival = next_arrival_after(clock);
        } else {
            ++r.completions;
            sojourn_sum += clock - arrival_times.front();
            arrival_times.pop_front();
            next_departure = arrival_times.empty() ? kNever : clock + service(rng);
        }
    }

    r.L = area / horizon_s;
    r.rho = busy / horizon_s;
    r.lambda_hat = static_cast<double>(r.arrivals) / horizon_s;
    r.W = r.completions > 0 ? sojourn_sum / static_cast<double>(r.completions) : 0.0;
    return r;
}

}  // namespace biokm::queueing
