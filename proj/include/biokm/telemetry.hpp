#pragma once

// Measurement quantities of the hybridized model: per-session counters and
// the derived rates BS, C, lambda, mu plus the aggregate response Q = BS / C.
//
// Units: counters in bytes and frames, timestamps and durations in
// milliseconds, derived rates in bits/second and packets/second.

#include <atomic>
#include <cstdint>
#include <span>
#include <string>

#include "biokm/error.hpp"

namespace biokm::telemetry {

struct SessionMetrics {
    std::uint64_t packets_sent = 0;
    std::uint64_t packets_received = 0;
    std::uint64_t bytes_sent = 0;
    std::uint64_t bytes_received = 0;
    double start_mono_ms = 0.0;
    double departure_mono_ms = 0.0;

    double service_time_ms() const noexcept { return departure_mono_ms - start_mono_ms; }

    bool same_counters(const SessionMetrics& o) const noexcept {
        return packets_sent == o.packets_sent && packets_received == o.packets_received &&
               bytes_sent == o.bytes_sent && bytes_received == o.bytes_received;
    }
};

/// Counters updated concurrently by connection handlers. Every frame is at
/// least one byte, so bytes >= packets holds at any snapshot.
class LiveCounters {
public:
    void record_received(std::uint64_t frame_bytes) noexcept {
        bytes_received_.fetch_add(frame_bytes, std::memory_order_relaxed);
        packets_received_.fetch_add(1, std::memory_order_relaxed);
    }

    void record_sent(std::uint64_t frame_bytes) noexcept {
        bytes_sent_.fetch_add(frame_bytes, std::memory_order_relaxed);
        packets_sent_.fetch_add(1, std::memory_order_relaxed);
    }

    SessionMetrics snapshot(double start_mono_ms = 0.0, double departure_mono_ms = 0.0) const noexcept {
        SessionMetrics m;
        m.packets_sent = packets_sent_.load(std::memory_order_relaxed);
        m.packets_received = packets_received_.load(std::memory_order_relaxed);
        m.bytes_sent = bytes_sent_.load(std::memory_order_relaxed);
        m.bytes_received = bytes_received_.load(std::memory_order_relaxed);
        m.start_mono_ms = start_mono_ms;
        m.departure_mono_ms = departure_mono_ms;
        return m;
    }

private:
    std::atomic<std::uint64_t> packets_sent_{0};
    std::atomic<std::uint64_t> packets_received_{0};
    std::atomic<std::uint64_t> bytes_sent_{0};
    std::atomic<std::uint64_t> bytes_received_{0};
};

struct RunMetrics {
    std::string label;
    double opl_bytes = 0.0;        // received payload length
    double packets = 0.0;          // packets received
    double total_time_ms = 0.0;    // server current - server start
    double service_time_ms = 0.0;  // summed per-session service time
    double lambda = 0.0;           // packets/s
    double mu = 0.0;               // packets/s
    double byte_size = 0.0;        // BS, bits/s
    double capacity = 0.0;         // C, bits/s
};

struct BioStats {
    double q = 0.0;
    double idle = 1.0;
    bool constraint_ok = true;
};

struct Rates {
    double lambda = 0.0;
    double mu = 0.0;
};

inline void require_positive_duration(double ms, const char* what) {
    if (!(ms > 0.0)) throw Error(ErrorCode::ZeroDuration, std::string(what) + " must be > 0 ms");
}

/// BS: received bits per second of total server time.
inline double byte_size(double opl_bytes, double total_time_ms) {
    require_positive_duration(total_time_ms, "total time");
    return opl_bytes * 8.0 / (total_time_ms / 1000.0);
}

/// C: received bits per second of summed service time.
inline double capacity(double opl_bytes, double service_time_ms) {
    require_positive_duration(service_time_ms, "service time");
    return opl_bytes * 8.0 / (service_time_ms / 1000.0);
}

inline BioStats aggregate_response(double byte_size, double capacity) {
    if (!(capacity > 0.0)) throw Error(ErrorCode::ZeroCapacity, "capacity must be > 0 bit/s");
    BioStats s;
    s.q = byte_size / capacity;
    s.idle = 1.0 - s.q;
    s.constraint_ok = byte_size <= capacity;
    return s;
}

inline Rates rates(double packets, double total_time_ms, double service_time_ms) {
    require_positive_duration(total_time_ms, "total time");
    require_positive_duration(service_time_ms, "service time");
    return {packets / (total_time_ms / 1000.0), packets / (service_time_ms / 1000.0)};
}

/// Builds the full derived row for one run from its raw counters.
inline RunMetrics derive_run(std::string label, double opl_bytes, double packets, double total_time_ms,
                             double service_time_ms) {
    RunMetrics r;
    r.label = std::move(label);
    r.opl_bytes = opl_bytes;
    r.packets = packets;
    r.total_time_ms = total_time_ms;
    r.service_time_ms = service_time_ms;
    const Rates lm = rates(packets, total_time_ms, service_time_ms);
    r.lambda = lm.lambda;
    r.mu = lm.mu;
    r.byte_size = byte_size(opl_bytes, total_time_ms);
    r.capacity = capacity(opl_bytes, service_time_ms);
    return r;
}

/// Mean of the derived rates across runs. The raw counter fields of the
/// result are plain means as well and are informational only.
inline RunMetrics average_runs(std::span<const RunMetrics> runs) {
    if (runs.empty()) throw Error(ErrorCode::EmptyInput, "no runs to average");
    if (runs.size() == 1) return runs.front();
    RunMetrics avg;
    avg.label = "average";
    for (const auto& r : runs) {
        avg.opl_bytes += r.opl_bytes;
        avg.packets += r.packets;
        avg.total_time_ms += r.total_time_ms;
        avg.service_time_ms += r.service_time_ms;
        avg.lambda += r.lambda;
        avg.mu += r.mu;
        avg.byte_size += r.byte_size;
        avg.capacity += r.capacity;
    }
    const auto n = static_cast<double>(runs.size());
    avg.opl_bytes /= n;
    avg.packets /= n;
    avg.total_time_ms /= n;
    avg.service_time_ms /= n;
    avg.lambda /= n;
    avg.mu /= n;
    avg.byte_size /= n;
    avg.capacity /= n;
    return avg;
}

}  // namespace biokm::telemetry
