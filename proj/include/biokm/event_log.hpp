#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>

#include "biokm/error.hpp"
#include "biokm/net/socket.hpp"
#include "json.hpp"

namespace biokm {

/// Append-only JSON Lines log shared by all connection handlers. Each line:
/// {ts_epoch_ms, ts_mono_ms, kind, nick, peer, bytes, detail}.
class EventLog {
public:
    EventLog() = default;

    explicit EventLog(const std::filesystem::path& path) : path_(path) {
        if (path.empty()) return;
        out_.open(path, std::ios::app);
        if (!out_) throw Error(ErrorCode::LogIoError, "cannot open event log " + path.string());
    }

    void append(const std::string& kind, const std::string& nick = {}, const std::string& peer = {},
                std::uint64_t bytes = 0, const std::string& detail = {}) {
        nlohmann::json j = {{"ts_epoch_ms", net::epoch_ms()}, {"ts_mono_ms", net::mono_ms()},
                            {"kind", kind},                   {"nick", nick},
                            {"peer", peer},                   {"bytes", bytes},
                            {"detail", detail}};
        const std::string line = j.dump();
        std::lock_guard lock(mu_);
        ++count_;
        if (!out_.is_open()) return;
        out_ << line << '\n';
        out_.flush();
    }

    std::uint64_t count() const {
        std::lock_guard lock(mu_);
        return count_;
    }

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mu_;
    std::ofstream out_;
    std::uint64_t count_ = 0;
};

}  // namespace biokm
