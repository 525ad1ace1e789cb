#pragma once

// Star-topology relay server. Every control connection gets its own handler
// thread; file transfers get a short-lived data-channel listener and relay
// thread each. All frames crossing the server's sockets are counted into the
// owning session's telemetry.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "biokm/error.hpp"
#include "biokm/event_log.hpp"
#include "biokm/net/socket.hpp"
#include "biokm/telemetry.hpp"
#include "biokm/wire_protocol.hpp"

namespace biokm::server {

struct ServerConfig {
    std::string bind_address = "127.0.0.1";
    std::uint16_t control_port = 0;     // 0: ephemeral
    std::uint16_t data_port_first = 0;  // 0: ephemeral data ports
    std::uint16_t data_port_last = 0;
    std::filesystem::path log_path;     // empty: no log file
    int transfer_accept_timeout_ms = 10000;
};

struct SessionView {
    std::string nick;
    telemetry::SessionMetrics metrics;
    bool live = false;
};

struct Snapshot {
    double start_mono_ms = 0.0;
    std::size_t live_sessions = 0;
    std::uint64_t logins = 0;
    std::uint64_t departures = 0;
    std::uint64_t transfers_completed = 0;
    std::uint64_t transfers_aborted = 0;
    std::vector<SessionView> sessions;  // live first, then departed, each in nick/arrival order
};

inline std::string format_ms(double ms) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.3f", ms);
    return buf;
}

/// QUIT acknowledgement token: the session's server-side counters and window,
/// "packets_received:bytes_received:packets_sent:bytes_sent:start_ms:departure_ms".
/// Counters include the QUIT frame and exclude the acknowledgement itself.
inline std::string encode_summary(const telemetry::SessionMetrics& m) {
    return std::to_string(m.packets_received) + ":" + std::to_string(m.bytes_received) + ":" +
           std::to_string(m.packets_sent) + ":" + std::to_string(m.bytes_sent) + ":" + format_ms(m.start_mono_ms) +
           ":" + format_ms(m.departure_mono_ms);
}

inline std::optional<telemetry::SessionMetrics> parse_summary(std::string_view token) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto colon = token.find(':', start);
        parts.emplace_back(token.substr(start, colon == std::string_view::npos ? std::string_view::npos : colon - start));
        if (colon == std::string_view::npos) break;
        start = colon + 1;
    }
    if (parts.size() != 6) return std::nullopt;
    telemetry::SessionMetrics m;
    auto pr = wire::parse_count(parts[0]);
    auto br = wire::parse_count(parts[1]);
    auto ps = wire::parse_count(parts[2]);
    auto bs = wire::parse_count(parts[3]);
    if (!pr || !br || !ps || !bs) return std::nullopt;
    m.packets_received = *pr;
    m.bytes_received = *br;
    m.packets_sent = *ps;
    m.bytes_sent = *bs;
    char* end = nullptr;
    m.start_mono_ms = std::strtod(parts[4].c_str(), &end);
    if (*end != '\0') return std::nullopt;
    m.departure_mono_ms = std::strtod(parts[5].c_str(), &end);
    if (*end != '\0') return std::nullopt;
    return m;
}

namespace detail {

struct Session {
    std::string nick;
    double connect_mono_ms = 0.0;
    double departure_mono_ms = 0.0;
    std::atomic<bool> live{true};
    telemetry::LiveCounters counters;

    telemetry::SessionMetrics metrics() const {
        return counters.snapshot(connect_mono_ms, live ? 0.0 : departure_mono_ms);
    }
};

struct Connection {
    net::Socket sock;
    std::string peer;
    std::mutex write_mu;
    std::shared_ptr<Session> session;  // written once by the owning handler before publication

    /// Sends one frame; counts it against the session while it is live.
    /// Counted before the write so a peer that has read it never sees the
    /// counter lag behind.
    bool send(const wire::Frame& frame, std::string_view payload = {}) {
        const std::string bytes = wire::encode_frame(frame, payload);
        std::lock_guard lock(write_mu);
        if (session && session->live) session->counters.record_sent(bytes.size());
        return sock.send_all(bytes);
    }
};

struct Live {
    std::shared_ptr<Session> session;
    std::shared_ptr<Connection> conn;
};

struct Offer {
    std::string filename;
    std::uint64_t size = 0;
};

}  // namespace detail

class Server {
public:
    static std::unique_ptr<Server> start(ServerConfig config) {
        if (config.data_port_first > config.data_port_last && config.data_port_last != 0) {
            throw Error(ErrorCode::InvalidSpec, "data port range is inverted");
        }
        net::Socket listener = net::listen_tcp(config.bind_address, config.control_port);
        auto server = std::unique_ptr<Server>(new Server(std::move(config), std::move(listener)));
        server->acceptor_ = std::thread([s = server.get()] { s->accept_loop(); });
        return server;
    }

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;
    ~Server() { stop(); }

    std::uint16_t control_port() const noexcept { return port_; }
    double start_mono_ms() const noexcept { return start_mono_ms_; }
    const EventLog& log() const noexcept { return log_; }

    void stop() {
        if (stopping_.exchange(true)) return;
        listener_.shutdown();
        if (acceptor_.joinable()) acceptor_.join();
        {
            std::lock_guard lock(threads_mu_);
            for (auto& weak : connections_) {
                if (auto c = weak.lock()) c->sock.shutdown();
            }
        }
        // handlers may still spawn transfer threads while we join
        while (true) {
            std::vector<std::thread> threads;
            {
                std::lock_guard lock(threads_mu_);
                threads.swap(threads_);
            }
            if (threads.empty()) break;
            for (auto& t : threads) t.join();
        }
        log_.append("server_stop");
    }

    Snapshot snapshot() const {
        Snapshot s;
        s.start_mono_ms = start_mono_ms_;
        s.transfers_completed = transfers_completed_;
        s.transfers_aborted = transfers_aborted_;
        std::lock_guard lock(registry_mu_);
        s.live_sessions = registry_.size();
        s.logins = logins_;
        s.departures = departures_;
        for (const auto& [nick, live] : registry_) s.sessions.push_back({nick, live.session->metrics(), true});
        for (const auto& d : departed_) s.sessions.push_back({d->nick, d->metrics(), false});
        return s;
    }

private:
    Server(ServerConfig config, net::Socket listener)
        : config_(std::move(config)),
          listener_(std::move(listener)),
          port_(listener_.local_port()),
          log_(config_.log_path),
          start_mono_ms_(net::mono_ms()) {
        log_.append("server_start", {}, {}, 0, "port=" + std::to_string(port_));
    }

    void spawn(std::thread t) {
        std::lock_guard lock(threads_mu_);
        threads_.push_back(std::move(t));
    }

    void accept_loop() {
        while (!stopping_) {
            net::Socket sock = listener_.accept(100);
            if (!sock.valid()) continue;
            auto conn = std::make_shared<detail::Connection>();
            conn->peer = sock.peer_name();
            conn->sock = std::move(sock);
            {
                std::lock_guard lock(threads_mu_);
                connections_.push_back(conn);
            }
            log_.append("connect", {}, conn->peer);
            spawn(std::thread([this, conn] { handle(conn); }));
        }
    }

    void handle(std::shared_ptr<detail::Connection> c) {
        wire::FrameReader reader;
        std::string buf;
        bool open = true;
        while (open && !stopping_) {
            buf.clear();
            const auto status = c->sock.read_some(buf, 100);
            if (status == net::Socket::ReadStatus::Timeout) continue;
            if (status == net::Socket::ReadStatus::Closed) break;
            reader.feed(buf);
            try {
                while (open) {
                    auto decoded = reader.next();
                    if (!decoded) break;
                    open = dispatch(c, *decoded);
                }
            } catch (const Error& e) {
                log_.append("malformed", c->session ? c->session->nick : std::string(), c->peer, reader.buffered(),
                            e.what());
                c->send({wire::Command::Err, {"MALFORMED"}});
                open = false;
            }
        }
        end_session(c, "disconnect");
        c->sock.shutdown();
    }

    /// Returns false when the connection should close.
    bool dispatch(const std::shared_ptr<detail::Connection>& c, const wire::Decoded& d) {
        using wire::Command;
        const auto& args = d.frame.args;
        if (d.frame.command == Command::Login) return login(c, args[0], d.consumed);

        if (c->session && c->session->live) c->session->counters.record_received(d.consumed);

        switch (d.frame.command) {
        case Command::Ping:
            c->send({Command::Pong, {args[0]}});
            return true;
        case Command::Pong:
        case Command::Ok:
        case Command::Err:
            return true;
        case Command::Quit:
            if (c->session) {
                const auto summary = end_session(c, "quit");
                c->send({Command::Ok, {encode_summary(summary)}});
            } else {
                c->send({Command::Ok, {}});
            }
            return false;
        default:
            break;
        }

        if (!c->session) {
            c->send({Command::Err, {"NOT_LOGGED_IN"}});
            return true;
        }
        const std::string& me = c->session->nick;
        switch (d.frame.command) {
        case Command::Msg: route_message(c, args[0], d.payload); break;
        case Command::Invite: {
            auto peer = lookup(args[0]);
            if (!peer) {
                c->send({Command::Err, {"NO_SUCH_USER"}});
            } else {
                peer->conn->send({Command::Invite, {me}});
                log_.append("invite", me, args[0]);
            }
            break;
        }
        case Command::List: {
            std::string names;
            {
                std::lock_guard lock(registry_mu_);
                for (const auto& [nick, live] : registry_) names += (names.empty() ? "" : ",") + nick;
            }
            c->send({Command::Ok, {names}});
            break;
        }
        case Command::FileOffer: offer_file(c, args[0], args[1], args[2]); break;
        case Command::FileAccept: accept_file(c, args[0]); break;
        default: break;
        }
        return true;
    }

    bool login(const std::shared_ptr<detail::Connection>& c, const std::string& nick, std::size_t frame_bytes) {
        using wire::Command;
        if (c->session) {
            if (c->session->live) c->session->counters.record_received(frame_bytes);
            c->send({Command::Err, {"ALREADY_LOGGED_IN"}});
            return true;
        }
        auto session = std::make_shared<detail::Session>();
        session->nick = nick;
        {
            std::lock_guard lock(registry_mu_);
            if (registry_.count(nick)) {
                session.reset();
            } else {
                session->connect_mono_ms = net::mono_ms();
                c->session = session;
                registry_[nick] = {session, c};
                ++logins_;
            }
        }
        if (!session) {
            log_.append("login_rejected", nick, c->peer, 0, "NICK_TAKEN");
            c->send({Command::Err, {"NICK_TAKEN"}});
            return true;
        }
        session->counters.record_received(frame_bytes);
        c->send({Command::Ok, {format_ms(start_mono_ms_)}});
        log_.append("login", nick, c->peer);
        return true;
    }

    std::optional<detail::Live> lookup(const std::string& nick) const {
        std::lock_guard lock(registry_mu_);
        auto it = registry_.find(nick);
        if (it == registry_.end()) return std::nullopt;
        return it->second;
    }

    void route_message(const std::shared_ptr<detail::Connection>& c, const std::string& to, const std::string& payload) {
        const std::string& from = c->session->nick;
        auto peer = lookup(to);
        if (!peer) {
            log_.append("msg_undeliverable", from, to, payload.size());
            c->send({wire::Command::Err, {"NO_SUCH_USER"}});
            return;
        }
        peer->conn->send({wire::Command::Msg, {from, std::to_string(payload.size())}}, payload);
        log_.append("msg", from, to, payload.size());
    }

    void offer_file(const std::shared_ptr<detail::Connection>& c, const std::string& to, const std::string& filename,
                    const std::string& size_token) {
        const std::string& from = c->session->nick;
        const auto size = wire::parse_count(size_token);
        if (!size) {
            c->send({wire::Command::Err, {"BAD_SIZE"}});
            return;
        }
        auto peer = lookup(to);
        if (!peer) {
            c->send({wire::Command::Err, {"NO_SUCH_USER"}});
            return;
        }
        {
            std::lock_guard lock(registry_mu_);
            offers_[{from, to}] = {filename, *size};
        }
        peer->conn->send({wire::Command::FileOffer, {from, filename, size_token}});
        log_.append("file_offer", from, to, *size, filename);
    }

    void accept_file(const std::shared_ptr<detail::Connection>& c, const std::string& sender) {
        const std::string& me = c->session->nick;
        std::optional<detail::Offer> offer;
        {
            std::lock_guard lock(registry_mu_);
            auto it = offers_.find({sender, me});
            if (it != offers_.end()) {
                offer = it->second;
                offers_.erase(it);
            }
        }
        if (!offer) {
            c->send({wire::Command::Err, {"NO_SUCH_OFFER"}});
            return;
        }
        auto from = lookup(sender);
        if (!from) {
            c->send({wire::Command::Err, {"NO_SUCH_USER"}});
            return;
        }
        std::uint16_t port = 0;
        net::Socket listener = allocate_data_listener(port);
        if (!listener.valid()) {
            c->send({wire::Command::Err, {"NO_DATA_PORT"}});
            from->conn->send({wire::Command::Err, {"NO_DATA_PORT"}});
            return;
        }
        log_.append("file_accept", me, sender, offer->size, "port=" + std::to_string(port));
        auto transfer = std::make_shared<Transfer>(Transfer{sender, me, offer->filename, offer->size, *from,
                                                            detail::Live{c->session, c}, std::move(listener), port});
        spawn(std::thread([this, transfer] { run_transfer(*transfer); }));
        // both parties see the sender's nick, so each can tell its role even
        // when two peers have offers out to each other
        from->conn->send({wire::Command::FileAccept, {sender, std::to_string(port)}});
        c->send({wire::Command::FileAccept, {sender, std::to_string(port)}});
    }

    struct Transfer {
        std::string from;
        std::string to;
        std::string filename;
        std::uint64_t size = 0;
        detail::Live sender;
        detail::Live recipient;
        net::Socket listener;
        std::uint16_t port = 0;
    };

    net::Socket allocate_data_listener(std::uint16_t& port) {
        if (config_.data_port_first == 0) {
            try {
                net::Socket s = net::listen_tcp(config_.bind_address, 0, 4);
                port = s.local_port();
                return s;
            } catch (const Error&) {
                return net::Socket();
            }
        }
        for (std::uint32_t p = config_.data_port_first; p <= config_.data_port_last; ++p) {
            {
                std::lock_guard lock(ports_mu_);
                if (ports_in_use_.count(static_cast<std::uint16_t>(p))) continue;
            }
            try {
                net::Socket s = net::listen_tcp(config_.bind_address, static_cast<std::uint16_t>(p), 4);
                std::lock_guard lock(ports_mu_);
                ports_in_use_.insert(static_cast<std::uint16_t>(p));
                port = static_cast<std::uint16_t>(p);
                return s;
            } catch (const Error&) {
                continue;
            }
        }
        return net::Socket();
    }

    void release_port(std::uint16_t port) {
        std::lock_guard lock(ports_mu_);
        ports_in_use_.erase(port);
    }

    /// Reads one chunk from `sock`, using `buf` as carry-over storage.
    std::optional<wire::DecodedChunk> read_chunk(const net::Socket& sock, std::string& buf, double deadline_ms) {
        while (true) {
            if (auto chunk = wire::decode_chunk(buf)) {
                buf.erase(0, chunk->consumed);
                return chunk;
            }
            if (stopping_ || (deadline_ms > 0 && net::mono_ms() > deadline_ms)) return std::nullopt;
            if (sock.read_some(buf, 100) == net::Socket::ReadStatus::Closed) return std::nullopt;
        }
    }

    void run_transfer(Transfer& t) {
        net::Socket from_sock;
        net::Socket to_sock;
        std::string from_buf;
        std::string to_buf;
        std::uint64_t relayed = 0;
        std::uint64_t received = 0;
        std::string failure;

        const double deadline = net::mono_ms() + config_.transfer_accept_timeout_ms;
        try {
            while (!(from_sock.valid() && to_sock.valid()) && failure.empty()) {
                if (stopping_ || net::mono_ms() > deadline) {
                    failure = "data channel not joined in time";
                    break;
                }
                net::Socket s = t.listener.accept(100);
                if (!s.valid()) continue;
                std::string buf;
                auto id = read_chunk(s, buf, deadline);
                if (!id) continue;
                if (id->bytes == t.from && !from_sock.valid()) {
                    t.sender.session->counters.record_received(id->consumed);
                    from_sock = std::move(s);
                    from_buf = std::move(buf);
                } else if (id->bytes == t.to && !to_sock.valid()) {
                    t.recipient.session->counters.record_received(id->consumed);
                    to_sock = std::move(s);
                    to_buf = std::move(buf);
                }
            }
            t.listener.close();
            if (config_.data_port_first != 0) release_port(t.port);

            while (failure.empty()) {
                auto chunk = read_chunk(from_sock, from_buf, 0.0);
                if (!chunk) {
                    failure = "sender data channel closed";
                    break;
                }
                t.sender.session->counters.record_received(chunk->consumed);
                received += chunk->bytes.size();
                if (received > t.size) {
                    failure = "sender exceeded offered size";
                    break;
                }
                const std::string framed = wire::encode_chunk(chunk->bytes);
                t.recipient.session->counters.record_sent(framed.size());
                if (!to_sock.send_all(framed)) {
                    failure = "recipient data channel closed";
                    break;
                }
                relayed += chunk->bytes.size();
                if (chunk->is_terminator()) {
                    if (relayed != t.size) failure = "size mismatch";
                    break;
                }
            }
        } catch (const Error& e) {
            failure = e.what();
        }
        if (t.listener.valid()) {
            t.listener.close();
            if (config_.data_port_first != 0) release_port(t.port);
        }

        const std::string detail = t.filename + " received=" + std::to_string(received) +
                                   " relayed=" + std::to_string(relayed) + " offered=" + std::to_string(t.size);
        if (failure.empty()) {
            ++transfers_completed_;
            log_.append("transfer_complete", t.from, t.to, relayed, detail);
        } else {
            ++transfers_aborted_;
            log_.append("transfer_aborted", t.from, t.to, relayed, detail + " reason=" + failure);
            from_sock.shutdown();
            to_sock.shutdown();
            const wire::Frame err{wire::Command::Err, {"TRANSFER_ABORTED"}};
            if (t.sender.session->live) t.sender.conn->send(err);
            if (t.recipient.session->live) t.recipient.conn->send(err);
        }
    }

    /// Marks the connection's session departed and removes it from the
    /// registry. Returns the final metrics (zeros when not logged in).
    telemetry::SessionMetrics end_session(const std::shared_ptr<detail::Connection>& c, const char* kind) {
        auto session = c->session;
        if (!session) return {};
        {
            std::lock_guard lock(registry_mu_);
            if (!session->live) return session->metrics();
            session->departure_mono_ms = net::mono_ms();
            session->live = false;
            registry_.erase(session->nick);
            departed_.push_back(session);
            ++departures_;
            for (auto it = offers_.begin(); it != offers_.end();) {
                if (it->first.first == session->nick || it->first.second == session->nick) {
                    it = offers_.erase(it);
                } else {
                    ++it;
                }
            }
        }
        const auto m = session->metrics();
        log_.append(kind, session->nick, c->peer, m.bytes_received, encode_summary(m));
        return m;
    }

    ServerConfig config_;
    net::Socket listener_;
    std::uint16_t port_ = 0;
    EventLog log_;
    double start_mono_ms_ = 0.0;
    std::atomic<bool> stopping_{false};
    std::thread acceptor_;

    std::mutex threads_mu_;
    std::vector<std::thread> threads_;
    std::vector<std::weak_ptr<detail::Connection>> connections_;

    mutable std::mutex registry_mu_;
    std::map<std::string, detail::Live> registry_;
    std::vector<std::shared_ptr<detail::Session>> departed_;
    std::map<std::pair<std::string, std::string>, detail::Offer> offers_;
    std::uint64_t logins_ = 0;
    std::uint64_t departures_ = 0;

    std::mutex ports_mu_;
    std::set<std::uint16_t> ports_in_use_;
    std::atomic<std::uint64_t> transfers_completed_{0};
    std::atomic<std::uint64_t> transfers_aborted_{0};
};

}  // namespace biokm::server
