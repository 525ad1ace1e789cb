#pragma once

// Thin RAII layer over POSIX TCP sockets. Blocking I/O with poll()-based
// timeouts so handler loops can observe a stop flag.

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <utility>

#include "biokm/error.hpp"

namespace biokm::net {

inline double mono_ms() noexcept {
    using namespace std::chrono;
    return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

inline std::int64_t epoch_ms() noexcept {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) noexcept : fd_(fd) {}
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
    Socket& operator=(Socket&& o) noexcept {
        if (this != &o) {
            close();
            fd_ = std::exchange(o.fd_, -1);
        }
        return *this;
    }
    ~Socket() { close(); }

    int fd() const noexcept { return fd_; }
    bool valid() const noexcept { return fd_ >= 0; }

    void close() noexcept {
        if (fd_ >= 0) {
            ::close(fd_);
            fd_ = -1;
        }
    }

    /// Wakes any thread blocked on this socket without releasing the fd.
    void shutdown() noexcept {
        if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
    }

    std::uint16_t local_port() const {
        sockaddr_in addr{};
        socklen_t len = sizeof addr;
        if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) return 0;
        return ntohs(addr.sin_port);
    }

    std::string peer_name() const {
        sockaddr_in addr{};
        socklen_t len = sizeof addr;
        if (::getpeername(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) return "?";
        char buf[INET_ADDRSTRLEN] = {};
        ::inet_ntop(AF_INET, &addr.sin_addr, buf, sizeof buf);
        return std::string(buf) + ":" + std::to_string(ntohs(addr.sin_port));
    }

    /// Writes everything or returns false on a broken connection.
    bool send_all(std::string_view bytes) const noexcept {
        while (!bytes.empty()) {
            const ssize_t n = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                return false;
            }
            bytes.remove_prefix(static_cast<std::size_t>(n));
        }
        return true;
    }

    enum class ReadStatus { Data, Timeout, Closed };

    /// Waits up to `timeout_ms` for data and appends what arrives to `out`.
    ReadStatus read_some(std::string& out, int timeout_ms) const {
        pollfd p{fd_, POLLIN, 0};
        const int ready = ::poll(&p, 1, timeout_ms);
        if (ready == 0) return ReadStatus::Timeout;
        if (ready < 0) return errno == EINTR ? ReadStatus::Timeout : ReadStatus::Closed;
        char buf[16384];
        const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
        if (n < 0 && (errno == EINTR || errno == EAGAIN)) return ReadStatus::Timeout;
        if (n <= 0) return ReadStatus::Closed;
        out.append(buf, static_cast<std::size_t>(n));
        return ReadStatus::Data;
    }

    /// Accepts one connection, or returns an invalid socket on timeout.
    Socket accept(int timeout_ms) const {
        pollfd p{fd_, POLLIN, 0};
        if (::poll(&p, 1, timeout_ms) <= 0) return Socket();
        const int fd = ::accept(fd_, nullptr, nullptr);
        if (fd < 0) return Socket();
        const int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        return Socket(fd);
    }

private:
    int fd_ = -1;
};

inline sockaddr_in make_address(const std::string& host, std::uint16_t port, ErrorCode on_error) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;

    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
        throw Error(on_error, "cannot resolve host '" + host + "'");
    }
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    ::freeaddrinfo(res);
    return addr;
}

/// Listening socket on host:port; port 0 picks an ephemeral port.
inline Socket listen_tcp(const std::string& host, std::uint16_t port, int backlog = 64) {
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.valid()) throw Error(ErrorCode::BindError, std::string("socket(): ") + std::strerror(errno));
    const int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    const sockaddr_in addr = make_address(host, port, ErrorCode::BindError);
    if (::bind(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
        throw Error(ErrorCode::BindError,
                    "bind " + host + ":" + std::to_string(port) + ": " + std::strerror(errno));
    }
    if (::listen(s.fd(), backlog) != 0) {
        throw Error(ErrorCode::BindError, std::string("listen: ") + std::strerror(errno));
    }
    return s;
}

inline Socket connect_tcp(const std::string& host, std::uint16_t port) {
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.valid()) throw Error(ErrorCode::ConnectError, std::string("socket(): ") + std::strerror(errno));
    const sockaddr_in addr = make_address(host, port, ErrorCode::ConnectError);
    if (::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
        throw Error(ErrorCode::ConnectError,
                    "connect " + host + ":" + std::to_string(port) + ": " + std::strerror(errno));
    }
    const int one = 1;
    ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return s;
}

/// Splits "host:port".
inline std::pair<std::string, std::uint16_t> parse_host_port(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
        throw Error(ErrorCode::InvalidSpec, "expected HOST:PORT, got '" + std::string(text) + "'");
    }
    const std::string port_text(text.substr(colon + 1));
    char* end = nullptr;
    const long port = std::strtol(port_text.c_str(), &end, 10);
    if (*end != '\0' || port <= 0 || port > 65535) {
        throw Error(ErrorCode::InvalidSpec, "bad port '" + port_text + "'");
    }
    return {std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

}  // namespace biokm::net
