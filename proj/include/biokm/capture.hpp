#pragma once

// Capture log: JSON Lines written by the load generator after a scenario.
//
//   {"record":"session","nick":..,"packets_sent":..,"packets_received":..,
//    "bytes_sent":..,"bytes_received":..,"start_mono_ms":..,
//    "departure_mono_ms":..,"rtt_ms":..,"client":{...counters...}}
//   {"record":"run","label":..,"server_start_mono_ms":..,"end_mono_ms":..,
//    "clients":..,"packets_sent":..,"packets_received":..,"bytes_sent":..,
//    "bytes_received":..}
//
// Session counters and timestamps are the server's view of that session
// (server monotonic clock). The optional "client" object holds the load
// client's own socket-boundary counters. The run record carries the server
// aggregate; when its counters are absent they are summed from sessions.

#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "biokm/error.hpp"
#include "biokm/telemetry.hpp"
#include "json.hpp"

namespace biokm::capture {

struct SessionRecord {
    std::string nick;
    telemetry::SessionMetrics server;
    std::optional<telemetry::SessionMetrics> client;
    std::optional<double> rtt_ms;
};

struct RunRecord {
    std::string label;
    double server_start_mono_ms = 0.0;
    double end_mono_ms = 0.0;
    std::uint64_t packets_sent = 0;
    std::uint64_t packets_received = 0;
    std::uint64_t bytes_sent = 0;
    std::uint64_t bytes_received = 0;
};

struct Capture {
    RunRecord run;
    std::vector<SessionRecord> sessions;
};

namespace detail {

using nlohmann::json;

inline json counters_json(const telemetry::SessionMetrics& m) {
    return json{{"packets_sent", m.packets_sent},
                {"packets_received", m.packets_received},
                {"bytes_sent", m.bytes_sent},
                {"bytes_received", m.bytes_received}};
}

template <class T>
T field(const json& j, const char* key, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end()) {
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": missing field '" + key + "'");
    }
    if constexpr (std::is_unsigned_v<T>) {
        if (!it->is_number_unsigned()) {
            throw Error(ErrorCode::ParseError,
                        "line " + std::to_string(line) + ": field '" + key + "' must be a non-negative integer");
        }
    }
    try {
        return it->get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": field '" + key + "': " + e.what());
    }
}

inline telemetry::SessionMetrics counters_from(const json& j, std::size_t line) {
    telemetry::SessionMetrics m;
    m.packets_sent = field<std::uint64_t>(j, "packets_sent", line);
    m.packets_received = field<std::uint64_t>(j, "packets_received", line);
    m.bytes_sent = field<std::uint64_t>(j, "bytes_sent", line);
    m.bytes_received = field<std::uint64_t>(j, "bytes_received", line);
    return m;
}

}  // namespace detail

inline void write_capture(const Capture& cap, std::ostream& out) {
    using nlohmann::json;
    for (const auto& s : cap.sessions) {
        json j = {{"record", "session"}, {"nick", s.nick}};
        j.update(detail::counters_json(s.server));
        j["start_mono_ms"] = s.server.start_mono_ms;
        j["departure_mono_ms"] = s.server.departure_mono_ms;
        if (s.rtt_ms) j["rtt_ms"] = *s.rtt_ms;
        if (s.client) j["client"] = detail::counters_json(*s.client);
        out << j.dump() << '\n';
    }
    json run = {{"record", "run"},
                {"label", cap.run.label},
                {"server_start_mono_ms", cap.run.server_start_mono_ms},
                {"end_mono_ms", cap.run.end_mono_ms},
                {"clients", cap.sessions.size()},
                {"packets_sent", cap.run.packets_sent},
                {"packets_received", cap.run.packets_received},
                {"bytes_sent", cap.run.bytes_sent},
                {"bytes_received", cap.run.bytes_received}};
    out << run.dump() << '\n';
}

inline void write_capture(const Capture& cap, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    write_capture(cap, out);
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

inline Capture read_capture(std::istream& in) {
    using nlohmann::json;
    Capture cap;
    bool have_run = false;
    bool run_has_counters = false;
    std::string text;
    std::size_t line_no = 0;
    while (std::getline(in, text)) {
        ++line_no;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(text);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object()) throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": not an object");
        const auto kind = detail::field<std::string>(j, "record", line_no);
        if (kind == "session") {
            SessionRecord s;
            s.nick = detail::field<std::string>(j, "nick", line_no);
            s.server = detail::counters_from(j, line_no);
            s.server.start_mono_ms = detail::field<double>(j, "start_mono_ms", line_no);
            s.server.departure_mono_ms = detail::field<double>(j, "departure_mono_ms", line_no);
            if (s.server.departure_mono_ms < s.server.start_mono_ms) {
                throw Error(ErrorCode::ParseError,
                            "line " + std::to_string(line_no) + ": departure precedes start for " + s.nick);
            }
            if (j.contains("rtt_ms")) s.rtt_ms = detail::field<double>(j, "rtt_ms", line_no);
            if (j.contains("client")) s.client = detail::counters_from(j.at("client"), line_no);
            cap.sessions.push_back(std::move(s));
        } else if (kind == "run") {
            if (have_run) throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": second run record");
            have_run = true;
            cap.run.label = detail::field<std::string>(j, "label", line_no);
            cap.run.server_start_mono_ms = detail::field<double>(j, "server_start_mono_ms", line_no);
            cap.run.end_mono_ms = detail::field<double>(j, "end_mono_ms", line_no);
            if (j.contains("packets_received")) {
                const auto m = detail::counters_from(j, line_no);
                cap.run.packets_sent = m.packets_sent;
                cap.run.packets_received = m.packets_received;
                cap.run.bytes_sent = m.bytes_sent;
                cap.run.bytes_received = m.bytes_received;
                run_has_counters = true;
            }
        } else {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": unknown record '" + kind + "'");
        }
    }
    if (!have_run) throw Error(ErrorCode::ParseError, "capture has no run record");
    if (!run_has_counters) {
        for (const auto& s : cap.sessions) {
            cap.run.packets_sent += s.server.packets_sent;
            cap.run.packets_received += s.server.packets_received;
            cap.run.bytes_sent += s.server.bytes_sent;
            cap.run.bytes_received += s.server.bytes_received;
        }
    }
    return cap;
}

inline Capture read_capture(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open capture " + path.string());
    return read_capture(in);
}

inline double total_service_time_ms(const Capture& cap) {
    double ts = 0.0;
    for (const auto& s : cap.sessions) ts += s.server.service_time_ms();
    return ts;
}

/// Receive-side derivation: OPL and P are the bytes and frames the server
/// received; T_T spans server start to capture end.
inline telemetry::RunMetrics run_metrics(const Capture& cap) {
    return telemetry::derive_run(cap.run.label, static_cast<double>(cap.run.bytes_received),
                                 static_cast<double>(cap.run.packets_received),
                                 cap.run.end_mono_ms - cap.run.server_start_mono_ms, total_service_time_ms(cap));
}

}  // namespace biokm::capture
