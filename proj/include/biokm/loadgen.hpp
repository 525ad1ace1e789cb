#pragma once

// Deterministic scripted load: a seeded schedule of logins, chat messages,
// file transfers and quits, executed by one thread per simulated client over
// real TCP connections. Produces a capture log for the analysis pipeline.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "biokm/capture.hpp"
#include "biokm/error.hpp"
#include "biokm/net/socket.hpp"
#include "biokm/server.hpp"
#include "biokm/telemetry.hpp"
#include "biokm/wire_protocol.hpp"

namespace biokm::loadgen {

enum class Mode { Ircd, Ftp, Mixed };

inline std::string_view mode_name(Mode m) noexcept {
    switch (m) {
    case Mode::Ircd: return "ircd";
    case Mode::Ftp: return "ftp";
    case Mode::Mixed: return "mixed";
    }
    return "";
}

inline std::optional<Mode> parse_mode(std::string_view s) noexcept {
    if (s == "ircd") return Mode::Ircd;
    if (s == "ftp") return Mode::Ftp;
    if (s == "mixed") return Mode::Mixed;
    return std::nullopt;
}

struct ScenarioSpec {
    Mode mode = Mode::Ircd;
    std::size_t clients = 2;
    std::size_t messages_per_client = 10;
    std::size_t message_size = 100;
    std::size_t files_per_client = 0;
    std::size_t file_size = 4096;
    double inter_event_gap_ms = 1.0;  // base gap; exponential jitter with the same mean is added
    std::uint64_t seed = 1;
    double think_time_ms = 0.0;       // idle time before each client logs in
    std::size_t chunk_size = wire::kMaxChunk;
    unsigned probes = 5;              // PING/PONG round trips per client for rtt_ms
    std::string label;                // defaults to the mode name
    std::string nick_prefix = "client";
    int io_timeout_ms = 30000;
};

/// Spec defaults with work counts that satisfy the mode's invariants.
inline ScenarioSpec defaults_for(Mode mode) {
    ScenarioSpec s;
    s.mode = mode;
    s.messages_per_client = mode == Mode::Ftp ? 0 : 10;
    s.files_per_client = mode == Mode::Ircd ? 0 : 1;
    return s;
}

inline void validate(const ScenarioSpec& s) {
    auto bad = [](const std::string& why) { throw Error(ErrorCode::InvalidSpec, why); };
    if (s.clients < 1) bad("clients must be >= 1");
    if (s.mode == Mode::Ircd && s.files_per_client != 0) bad("ircd mode carries no files");
    if (s.mode == Mode::Ftp && s.messages_per_client != 0) bad("ftp mode carries no messages");
    if (s.mode == Mode::Mixed && (s.messages_per_client < 1 || s.files_per_client < 1)) {
        bad("mixed mode needs at least one message and one file per client");
    }
    if (s.message_size > wire::kMaxPayload) bad("message_size exceeds 65536");
    if (s.chunk_size < 1 || s.chunk_size > wire::kMaxChunk) bad("chunk_size must be in 1..65536");
    if (!(s.inter_event_gap_ms >= 0.0) || !(s.think_time_ms >= 0.0)) bad("gaps must be >= 0");
    if (s.nick_prefix.empty() || !wire::detail::valid_token(s.nick_prefix)) bad("bad nick prefix");
}

/// Key-value config ("key = value", '#' comments). Unknown keys are errors.
inline ScenarioSpec parse_config(std::istream& in, ScenarioSpec spec = {}) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        if (trim(line).empty()) continue;
        if (eq == std::string::npos) {
            throw Error(ErrorCode::InvalidSpec, "config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto number = [&](auto& target) {
            std::istringstream vs(value);
            vs >> target;
            if (!vs || !vs.eof()) {
                throw Error(ErrorCode::InvalidSpec, "config line " + std::to_string(line_no) + ": bad number for " + key);
            }
        };
        if (key == "mode") {
            auto m = parse_mode(value);
            if (!m) throw Error(ErrorCode::InvalidSpec, "unknown mode '" + value + "'");
            spec.mode = *m;
        } else if (key == "clients") {
            number(spec.clients);
        } else if (key == "messages") {
            number(spec.messages_per_client);
        } else if (key == "message_size") {
            number(spec.message_size);
        } else if (key == "files") {
            number(spec.files_per_client);
        } else if (key == "file_size") {
            number(spec.file_size);
        } else if (key == "gap_ms") {
            number(spec.inter_event_gap_ms);
        } else if (key == "think_ms") {
            number(spec.think_time_ms);
        } else if (key == "seed") {
            number(spec.seed);
        } else if (key == "chunk_size") {
            number(spec.chunk_size);
        } else if (key == "probes") {
            number(spec.probes);
        } else if (key == "label") {
            spec.label = value;
        } else if (key == "nick_prefix") {
            spec.nick_prefix = value;
        } else {
            throw Error(ErrorCode::InvalidSpec, "unknown config key '" + key + "'");
        }
    }
    return spec;
}

enum class EventKind { Login, Message, Transfer, Quit };

inline std::string_view event_name(EventKind k) noexcept {
    switch (k) {
    case EventKind::Login: return "login";
    case EventKind::Message: return "message";
    case EventKind::Transfer: return "transfer";
    case EventKind::Quit: return "quit";
    }
    return "";
}

struct Event {
    std::size_t client = 0;
    EventKind kind = EventKind::Login;
    std::size_t peer = 0;
    std::size_t bytes = 0;
    double gap_ms = 0.0;  // delay before the event

    bool operator==(const Event&) const = default;
};

namespace detail {

// Portable draws straight from the engine so schedules do not depend on the
// standard library's distribution implementations.
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double exponential(std::mt19937_64& rng, double mean) { return -std::log1p(-unit(rng)) * mean; }

inline std::size_t below(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

}  // namespace detail

/// Logins in client order, then every client's work interleaved at random
/// (each client's own order preserved), then quits in client order.
inline std::vector<Event> generate_schedule(const ScenarioSpec& spec) {
    validate(spec);
    std::mt19937_64 rng(spec.seed);
    const std::size_t n = spec.clients;
    auto gap = [&] {
        const double base = spec.inter_event_gap_ms;
        return base > 0.0 ? base + detail::exponential(rng, base) : 0.0;
    };

    std::vector<Event> events;
    for (std::size_t c = 0; c < n; ++c) events.push_back({c, EventKind::Login, c, 0, spec.think_time_ms});

    std::vector<std::deque<Event>> work(n);
    for (std::size_t c = 0; c < n; ++c) {
        std::vector<EventKind> kinds(spec.messages_per_client, EventKind::Message);
        kinds.insert(kinds.end(), spec.files_per_client, EventKind::Transfer);
        for (std::size_t k = kinds.size(); k > 1; --k) std::swap(kinds[k - 1], kinds[detail::below(rng, k)]);
        for (EventKind kind : kinds) {
            std::size_t peer = c;
            if (n > 1) {
                peer = detail::below(rng, n - 1);
                if (peer >= c) ++peer;
            }
            const std::size_t bytes = kind == EventKind::Message ? spec.message_size : spec.file_size;
            work[c].push_back({c, kind, peer, bytes, gap()});
        }
    }
    while (true) {
        std::vector<std::size_t> pending;
        for (std::size_t c = 0; c < n; ++c) {
            if (!work[c].empty()) pending.push_back(c);
        }
        if (pending.empty()) break;
        const std::size_t c = pending[detail::below(rng, pending.size())];
        events.push_back(work[c].front());
        work[c].pop_front();
    }

    for (std::size_t c = 0; c < n; ++c) events.push_back({c, EventKind::Quit, c, 0, gap()});
    return events;
}

inline std::string schedule_text(const std::vector<Event>& events) {
    std::ostringstream out;
    char gap[32];
    for (const auto& e : events) {
        std::snprintf(gap, sizeof gap, "%.17g", e.gap_ms);
        out << e.client << ' ' << event_name(e.kind) << ' ' << e.peer << ' ' << e.bytes << ' ' << gap << '\n';
    }
    return out.str();
}

inline std::string nick_for(const ScenarioSpec& spec, std::size_t client) {
    return spec.nick_prefix + std::to_string(client + 1);
}

/// Deterministic printable filler so payload bytes depend only on the spec.
inline std::string filler(std::size_t size, std::size_t salt) {
    std::string s(size, 'a');
    for (std::size_t k = 0; k < size; ++k) s[k] = static_cast<char>('a' + (k * 7 + salt * 13) % 26);
    return s;
}

/// Median PING/PONG round trip over a separate, never-logged-in connection,
/// so probes do not show up in any session's counters.
inline double probe_rtt_ms(const std::string& host, std::uint16_t port, unsigned probes, int timeout_ms = 5000) {
    if (probes == 0) throw Error(ErrorCode::InvalidSpec, "probe count must be >= 1");
    net::Socket s = net::connect_tcp(host, port);
    wire::FrameReader reader;
    std::vector<double> samples;
    for (unsigned k = 0; k < probes; ++k) {
        const std::string nonce = "p" + std::to_string(k);
        const double t0 = net::mono_ms();
        if (!s.send_all(wire::encode_frame({wire::Command::Ping, {nonce}}))) {
            throw Error(ErrorCode::ConnectError, "probe connection closed");
        }
        bool got = false;
        while (!got) {
            if (auto d = reader.next()) {
                got = d->frame.command == wire::Command::Pong && d->frame.args[0] == nonce;
                continue;
            }
            std::string buf;
            const auto st = s.read_some(buf, 100);
            if (st == net::Socket::ReadStatus::Closed || net::mono_ms() - t0 > timeout_ms) {
                throw Error(ErrorCode::ConnectError, "no PONG from server");
            }
            reader.feed(buf);
        }
        samples.push_back(net::mono_ms() - t0);
    }
    std::sort(samples.begin(), samples.end());
    const std::size_t mid = samples.size() / 2;
    return samples.size() % 2 ? samples[mid] : (samples[mid - 1] + samples[mid]) / 2.0;
}

namespace detail {

/// Reusable barrier that can be aborted when any participant fails.
class Rendezvous {
public:
    explicit Rendezvous(std::size_t parties) : parties_(parties) {}

    bool arrive_and_wait(int timeout_ms) {
        std::unique_lock lock(mu_);
        const std::size_t gen = generation_;
        if (++arrived_ == parties_) {
            arrived_ = 0;
            ++generation_;
            cv_.notify_all();
            return !aborted_;
        }
        const bool ok = cv_.wait_for(lock, std::chrono::milliseconds(timeout_ms),
                                     [&] { return aborted_ || generation_ != gen; });
        return ok && !aborted_;
    }

    void abort() {
        std::lock_guard lock(mu_);
        aborted_ = true;
        cv_.notify_all();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::size_t parties_;
    std::size_t arrived_ = 0;
    std::size_t generation_ = 0;
    bool aborted_ = false;
};

/// One scripted messenger client: a control connection with a reader thread
/// plus per-transfer data connections. Counts every frame it sends/receives.
class LoadClient {
public:
    LoadClient(std::string nick, std::string host, std::uint16_t port, const ScenarioSpec& spec,
               const std::atomic<bool>& abort)
        : nick_(std::move(nick)), host_(std::move(host)), port_(port), spec_(spec), abort_(abort) {}

    LoadClient(const LoadClient&) = delete;
    LoadClient& operator=(const LoadClient&) = delete;

    ~LoadClient() {
        stop_ = true;
        control_.shutdown();
        if (reader_.joinable()) reader_.join();
        std::vector<std::thread> receivers;
        {
            std::lock_guard lock(mu_);
            receivers.swap(receivers_);
        }
        for (auto& t : receivers) t.join();
    }

    /// Connects and logs in; returns the server start time from the OK.
    double login() {
        control_ = net::connect_tcp(host_, port_);
        reader_ = std::thread([this] { read_loop(); });
        const wire::Frame reply = request({wire::Command::Login, {nick_}});
        if (reply.command != wire::Command::Ok || reply.args.size() != 1) {
            throw Error(ErrorCode::ScenarioFailed, nick_ + ": login refused (" + describe(reply) + ")");
        }
        return std::strtod(reply.args[0].c_str(), nullptr);
    }

    void send_message(const std::string& to, const std::string& body) {
        send({wire::Command::Msg, {to, std::to_string(body.size())}}, body);
    }

    void send_file(const std::string& to, const std::string& filename, const std::string& contents) {
        {
            std::lock_guard lock(mu_);
            outgoing_port_.reset();
        }
        send({wire::Command::FileOffer, {to, filename, std::to_string(contents.size())}});
        std::uint16_t port = 0;
        wait_for([&] {
            if (!outgoing_port_) return false;
            port = *outgoing_port_;
            outgoing_port_.reset();
            return true;
        }, "FILE_ACCEPT from " + to);

        net::Socket data = net::connect_tcp(host_, port);
        send_chunk(data, nick_);
        for (std::size_t off = 0; off < contents.size(); off += spec_.chunk_size) {
            send_chunk(data, std::string_view(contents).substr(off, spec_.chunk_size));
        }
        send_chunk(data, {});
    }

    /// Blocks until the expected number of messages and files have arrived.
    void wait_incoming(std::size_t messages, std::size_t files) {
        wait_for([&] { return messages_in_ >= messages && files_in_ >= files; },
                 "incoming traffic (" + std::to_string(messages) + " messages, " + std::to_string(files) + " files)");
    }

    telemetry::SessionMetrics quit() {
        const wire::Frame reply = request({wire::Command::Quit, {}});
        if (reply.command != wire::Command::Ok || reply.args.size() != 1) {
            throw Error(ErrorCode::ScenarioFailed, nick_ + ": bad QUIT reply (" + describe(reply) + ")");
        }
        auto summary = server::parse_summary(reply.args[0]);
        if (!summary) throw Error(ErrorCode::ScenarioFailed, nick_ + ": unreadable session summary");
        stop_ = true;
        if (reader_.joinable()) reader_.join();
        return *summary;
    }

    telemetry::SessionMetrics counters() const { return counters_.snapshot(); }
    std::uint64_t file_bytes_received() const {
        std::lock_guard lock(mu_);
        return file_bytes_in_;
    }

private:
    static std::string describe(const wire::Frame& f) {
        std::string s(wire::command_name(f.command));
        for (const auto& a : f.args) s += " " + a;
        return s;
    }

    void send(const wire::Frame& frame, std::string_view payload = {}) {
        const std::string bytes = wire::encode_frame(frame, payload);
        std::lock_guard lock(write_mu_);
        if (!control_.send_all(bytes)) throw Error(ErrorCode::ScenarioFailed, nick_ + ": control connection lost");
        counters_.record_sent(bytes.size());
    }

    void send_chunk(const net::Socket& data, std::string_view bytes) {
        const std::string framed = wire::encode_chunk(bytes);
        if (!data.send_all(framed)) throw Error(ErrorCode::ScenarioFailed, nick_ + ": data connection lost");
        counters_.record_sent(framed.size());
    }

    wire::Frame request(const wire::Frame& frame) {
        {
            std::lock_guard lock(mu_);
            awaiting_reply_ = true;
            replies_.clear();
        }
        send(frame);
        wire::Frame reply;
        wait_for([&] {
            if (replies_.empty()) return false;
            reply = replies_.front();
            replies_.pop_front();
            awaiting_reply_ = false;
            return true;
        }, std::string("reply to ") + std::string(wire::command_name(frame.command)));
        return reply;
    }

    template <class Pred>
    void wait_for(Pred ready, const std::string& what) {
        std::unique_lock lock(mu_);
        const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(spec_.io_timeout_ms);
        while (!ready()) {
            if (!error_.empty()) throw Error(ErrorCode::ScenarioFailed, nick_ + ": " + error_);
            if (abort_) throw Error(ErrorCode::ScenarioFailed, nick_ + ": aborted by another client's failure");
            if (std::chrono::steady_clock::now() > deadline) {
                throw Error(ErrorCode::ScenarioFailed, nick_ + ": timed out waiting for " + what);
            }
            cv_.wait_for(lock, std::chrono::milliseconds(50));
        }
    }

    void fail(const std::string& why) {
        std::lock_guard lock(mu_);
        if (error_.empty()) error_ = why;
        cv_.notify_all();
    }

    void read_loop() {
        wire::FrameReader reader;
        std::string buf;
        while (!stop_) {
            buf.clear();
            const auto st = control_.read_some(buf, 50);
            if (st == net::Socket::ReadStatus::Timeout) continue;
            if (st == net::Socket::ReadStatus::Closed) {
                if (!stop_) fail("server closed the control connection");
                return;
            }
            reader.feed(buf);
            try {
                while (auto d = reader.next()) {
                    counters_.record_received(d->consumed);
                    on_frame(d->frame);
                }
            } catch (const Error& e) {
                fail(std::string("bad frame from server: ") + e.what());
                return;
            }
        }
    }

    void on_frame(const wire::Frame& f) {
        using wire::Command;
        switch (f.command) {
        case Command::Ok:
        case Command::Err: {
            std::lock_guard lock(mu_);
            if (awaiting_reply_) {
                replies_.push_back(f);
            } else if (f.command == Command::Err && error_.empty()) {
                error_ = "server error " + f.args[0];
            }
            cv_.notify_all();
            return;
        }
        case Command::Msg: {
            std::lock_guard lock(mu_);
            ++messages_in_;
            cv_.notify_all();
            return;
        }
        case Command::FileOffer: {
            const auto size = wire::parse_count(f.args[2]);
            {
                std::lock_guard lock(mu_);
                incoming_offers_[f.args[0]] = size.value_or(0);
            }
            send({Command::FileAccept, {f.args[0], "0"}});
            return;
        }
        case Command::FileAccept: {
            const auto port = wire::parse_count(f.args[1]);
            std::lock_guard lock(mu_);
            if (!port || *port > 65535) {
                error_ = "bad data port";
            } else if (f.args[0] == nick_) {
                // one offer out at a time, so this is its port
                outgoing_port_ = static_cast<std::uint16_t>(*port);
            } else if (auto it = incoming_offers_.find(f.args[0]); it != incoming_offers_.end()) {
                const std::uint64_t size = it->second;
                incoming_offers_.erase(it);
                receivers_.emplace_back([this, p = static_cast<std::uint16_t>(*port), size] { receive_file(p, size); });
            } else {
                error_ = "unexpected FILE_ACCEPT from " + f.args[0];
            }
            cv_.notify_all();
            return;
        }
        case Command::Ping:
            send({Command::Pong, {f.args[0]}});
            return;
        default:
            return;
        }
    }

    void receive_file(std::uint16_t port, std::uint64_t expected) {
        try {
            net::Socket data = net::connect_tcp(host_, port);
            send_chunk(data, nick_);
            std::string buf;
            std::uint64_t total = 0;
            const double deadline = net::mono_ms() + spec_.io_timeout_ms;
            while (true) {
                if (auto chunk = wire::decode_chunk(buf)) {
                    buf.erase(0, chunk->consumed);
                    counters_.record_received(chunk->consumed);
                    if (chunk->is_terminator()) break;
                    total += chunk->bytes.size();
                    continue;
                }
                if (stop_ || net::mono_ms() > deadline) throw Error(ErrorCode::TransferAborted, "receive timed out");
                if (data.read_some(buf, 50) == net::Socket::ReadStatus::Closed) {
                    throw Error(ErrorCode::TransferAborted, "data channel closed before terminator");
                }
            }
            if (total != expected) {
                throw Error(ErrorCode::TransferAborted,
                            "received " + std::to_string(total) + " of " + std::to_string(expected) + " bytes");
            }
            std::lock_guard lock(mu_);
            ++files_in_;
            file_bytes_in_ += total;
            cv_.notify_all();
        } catch (const Error& e) {
            fail(e.what());
        }
    }

    std::string nick_;
    std::string host_;
    std::uint16_t port_;
    const ScenarioSpec& spec_;
    const std::atomic<bool>& abort_;

    net::Socket control_;
    std::mutex write_mu_;
    telemetry::LiveCounters counters_;
    std::thread reader_;
    std::atomic<bool> stop_{false};

    mutable std::mutex mu_;
    std::condition_variable cv_;
    bool awaiting_reply_ = false;
    std::deque<wire::Frame> replies_;
    std::size_t messages_in_ = 0;
    std::size_t files_in_ = 0;
    std::uint64_t file_bytes_in_ = 0;
    std::optional<std::uint16_t> outgoing_port_;
    std::map<std::string, std::uint64_t> incoming_offers_;
    std::vector<std::thread> receivers_;
    std::string error_;
};

}  // namespace detail

struct ScenarioResult {
    capture::Capture capture;
    std::vector<std::uint64_t> file_bytes_received;  // per client, recipient side
};

inline ScenarioResult run_scenario_detailed(const ScenarioSpec& spec, const std::string& host, std::uint16_t port) {
    const auto schedule = generate_schedule(spec);
    const std::size_t n = spec.clients;

    std::vector<std::vector<Event>> per_client(n);
    std::vector<std::size_t> expect_messages(n, 0);
    std::vector<std::size_t> expect_files(n, 0);
    for (const auto& e : schedule) {
        per_client[e.client].push_back(e);
        if (e.kind == EventKind::Message) ++expect_messages[e.peer];
        if (e.kind == EventKind::Transfer) ++expect_files[e.peer];
    }

    struct Outcome {
        double server_start = 0.0;
        telemetry::SessionMetrics server;
        telemetry::SessionMetrics client;
        std::optional<double> rtt;
        std::uint64_t file_bytes = 0;
    };
    std::vector<Outcome> outcomes(n);
    std::atomic<bool> abort{false};
    std::mutex error_mu;
    std::optional<Error> first_error;
    detail::Rendezvous logged_in(n);
    detail::Rendezvous drained(n);

    auto sleep_ms = [](double ms) {
        if (ms > 0.0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
    };

    auto run_client = [&](std::size_t c) {
        try {
            Outcome& out = outcomes[c];
            if (spec.probes > 0) out.rtt = probe_rtt_ms(host, port, spec.probes);
            detail::LoadClient client(nick_for(spec, c), host, port, spec, abort);
            std::size_t file_index = 0;
            std::size_t message_index = 0;
            for (const auto& e : per_client[c]) {
                sleep_ms(e.gap_ms);
                if (abort) return;
                switch (e.kind) {
                case EventKind::Login:
                    out.server_start = client.login();
                    if (!logged_in.arrive_and_wait(spec.io_timeout_ms)) {
                        throw Error(ErrorCode::ScenarioFailed, "login barrier broken");
                    }
                    break;
                case EventKind::Message:
                    client.send_message(nick_for(spec, e.peer), filler(e.bytes, c * 1000003 + message_index++));
                    break;
                case EventKind::Transfer: {
                    ++file_index;
                    client.send_file(nick_for(spec, e.peer), "file" + std::to_string(file_index) + ".bin",
                                     filler(e.bytes, c + file_index));
                    break;
                }
                case EventKind::Quit:
                    client.wait_incoming(expect_messages[c], expect_files[c]);
                    if (!drained.arrive_and_wait(spec.io_timeout_ms)) {
                        throw Error(ErrorCode::ScenarioFailed, "drain barrier broken");
                    }
                    out.server = client.quit();
                    out.client = client.counters();
                    out.file_bytes = client.file_bytes_received();
                    break;
                }
            }
        } catch (const Error& e) {
            std::lock_guard lock(error_mu);
            if (!first_error) first_error = e;
            abort = true;
            logged_in.abort();
            drained.abort();
        }
    };

    std::vector<std::thread> threads;
    for (std::size_t c = 0; c < n; ++c) threads.emplace_back(run_client, c);
    for (auto& t : threads) t.join();

    if (first_error) {
        if (first_error->code() == ErrorCode::ConnectError) throw *first_error;
        throw Error(ErrorCode::ScenarioFailed, first_error->what());
    }

    ScenarioResult result;
    auto& cap = result.capture;
    cap.run.label = spec.label.empty() ? std::string(mode_name(spec.mode)) : spec.label;
    cap.run.server_start_mono_ms = outcomes.front().server_start;
    cap.run.end_mono_ms = cap.run.server_start_mono_ms;
    for (std::size_t c = 0; c < n; ++c) {
        const auto& o = outcomes[c];
        capture::SessionRecord rec;
        rec.nick = nick_for(spec, c);
        rec.server = o.server;
        rec.client = o.client;
        rec.rtt_ms = o.rtt;
        cap.sessions.push_back(rec);
        cap.run.end_mono_ms = std::max(cap.run.end_mono_ms, o.server.departure_mono_ms);
        cap.run.packets_sent += o.server.packets_sent;
        cap.run.packets_received += o.server.packets_received;
        cap.run.bytes_sent += o.server.bytes_sent;
        cap.run.bytes_received += o.server.bytes_received;
        result.file_bytes_received.push_back(o.file_bytes);
    }
    return result;
}

inline capture::Capture run_scenario(const ScenarioSpec& spec, const std::string& host, std::uint16_t port) {
    return run_scenario_detailed(spec, host, port).capture;
}

/// Runs the scenario and writes its capture log to `out_path`.
inline std::filesystem::path run_scenario(const ScenarioSpec& spec, const std::string& host, std::uint16_t port,
                                          const std::filesystem::path& out_path) {
    const auto cap = run_scenario(spec, host, port);
    capture::write_capture(cap, out_path);
    return out_path;
}

}  // namespace biokm::loadgen
