#pragma once

// Bare protocol client for server tests: raw sockets plus the frame codec,
// no loadgen logic.

#include <gtest/gtest.h>

#include <optional>
#include <string>

#include "biokm/net/socket.hpp"
#include "biokm/wire_protocol.hpp"

namespace support {

using biokm::wire::Command;

class RawClient {
public:
    explicit RawClient(std::uint16_t port) : sock_(biokm::net::connect_tcp("127.0.0.1", port)) {}

    void send_raw(std::string_view bytes) { ASSERT_TRUE(sock_.send_all(bytes)); }

    void send(Command c, std::vector<std::string> args, std::string_view payload = {}) {
        send_raw(biokm::wire::encode_frame({c, std::move(args)}, payload));
    }

    /// Next frame, or nullopt on timeout/close.
    std::optional<biokm::wire::Decoded> next(int timeout_ms = 5000) {
        const double deadline = biokm::net::mono_ms() + timeout_ms;
        while (true) {
            if (auto d = reader_.next()) return d;
            if (biokm::net::mono_ms() > deadline) return std::nullopt;
            std::string buf;
            if (sock_.read_some(buf, 50) == biokm::net::Socket::ReadStatus::Closed) {
                closed_ = true;
                return reader_.next();
            }
            reader_.feed(buf);
        }
    }

    /// Skips frames until one with command `c` arrives.
    std::optional<biokm::wire::Decoded> expect(Command c, int timeout_ms = 5000) {
        while (auto d = next(timeout_ms)) {
            if (d->frame.command == c) return d;
        }
        return std::nullopt;
    }

    bool closed_by_peer(int timeout_ms = 3000) {
        while (!closed_ && next(timeout_ms)) {
        }
        return closed_;
    }

    void login(const std::string& nick) {
        send(Command::Login, {nick});
        auto ok = next();
        ASSERT_TRUE(ok);
        ASSERT_EQ(ok->frame.command, Command::Ok) << nick;
    }

    biokm::net::Socket& socket() { return sock_; }

private:
    biokm::net::Socket sock_;
    biokm::wire::FrameReader reader_;
    bool closed_ = false;
};

/// Data-channel side of a transfer.
class DataChannel {
public:
    DataChannel(std::uint16_t port, const std::string& nick) : sock_(biokm::net::connect_tcp("127.0.0.1", port)) {
        sock_.send_all(biokm::wire::encode_chunk(nick));
    }

    bool send_chunk(std::string_view bytes) { return sock_.send_all(biokm::wire::encode_chunk(bytes)); }

    /// Reads until the terminator; returns payload bytes, or nullopt if the
    /// channel closed first.
    std::optional<std::string> receive_all(int timeout_ms = 10000) {
        std::string buf, out;
        const double deadline = biokm::net::mono_ms() + timeout_ms;
        while (biokm::net::mono_ms() < deadline) {
            while (auto c = biokm::wire::decode_chunk(buf)) {
                buf.erase(0, c->consumed);
                if (c->is_terminator()) return out;
                out += c->bytes;
            }
            if (sock_.read_some(buf, 50) == biokm::net::Socket::ReadStatus::Closed) return std::nullopt;
        }
        return std::nullopt;
    }

    void close() { sock_.close(); }

private:
    biokm::net::Socket sock_;
};

inline std::uint16_t port_arg(const biokm::wire::Decoded& d) {
    return static_cast<std::uint16_t>(std::stoul(d.frame.args.at(1)));
}

}  // namespace support
