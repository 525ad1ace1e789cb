#pragma once

// Messenger wire format.
//
// Control channel: one text line per frame, `COMMAND arg1 ... argN\r\n`,
// single-space separated UTF-8 tokens. MSG carries a decimal payload length
// as its second argument and the raw payload follows the line immediately.
//
// Data channel: 4-byte big-endian length prefix followed by that many opaque
// bytes. A zero-length chunk terminates a transfer.

#include <array>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "biokm/error.hpp"

namespace biokm::wire {

inline constexpr std::size_t kMaxPayload = 65536;
inline constexpr std::size_t kMaxChunk = 65536;
inline constexpr std::size_t kMaxLineBytes = 4096;
inline constexpr std::size_t kChunkHeaderBytes = 4;

enum class Command { Login, Msg, Invite, List, Ping, Pong, FileOffer, FileAccept, Quit, Ok, Err };

inline constexpr std::array kAllCommands = {
    Command::Login, Command::Msg,        Command::Invite, Command::List,
    Command::Ping,  Command::Pong,       Command::FileOffer, Command::FileAccept,
    Command::Quit,  Command::Ok,         Command::Err,
};

constexpr std::string_view command_name(Command c) noexcept {
    switch (c) {
    case Command::Login: return "LOGIN";
    case Command::Msg: return "MSG";
    case Command::Invite: return "INVITE";
    case Command::List: return "LIST";
    case Command::Ping: return "PING";
    case Command::Pong: return "PONG";
    case Command::FileOffer: return "FILE_OFFER";
    case Command::FileAccept: return "FILE_ACCEPT";
    case Command::Quit: return "QUIT";
    case Command::Ok: return "OK";
    case Command::Err: return "ERR";
    }
    return "";
}

inline std::optional<Command> parse_command(std::string_view name) noexcept {
    for (Command c : kAllCommands) {
        if (command_name(c) == name) return c;
    }
    return std::nullopt;
}

struct Arity {
    std::size_t min;
    std::size_t max;
};

constexpr Arity arity_of(Command c) noexcept {
    switch (c) {
    case Command::Login: return {1, 1};
    case Command::Msg: return {2, 2};
    case Command::Invite: return {1, 1};
    case Command::List: return {0, 0};
    case Command::Ping: return {1, 1};
    case Command::Pong: return {1, 1};
    case Command::FileOffer: return {3, 3};
    case Command::FileAccept: return {2, 2};
    case Command::Quit: return {0, 0};
    case Command::Ok: return {0, 1};
    case Command::Err: return {1, 1};
    }
    return {0, 0};
}

struct Frame {
    Command command = Command::Ok;
    std::vector<std::string> args;

    bool operator==(const Frame&) const = default;
};

namespace detail {

inline bool valid_utf8(std::string_view s) noexcept {
    std::size_t i = 0;
    while (i < s.size()) {
        const auto b = static_cast<unsigned char>(s[i]);
        std::size_t extra = 0;
        std::uint32_t cp = 0;
        if (b < 0x80) {
            ++i;
            continue;
        } else if ((b & 0xE0) == 0xC0) {
            extra = 1;
            cp = b & 0x1F;
        } else if ((b & 0xF0) == 0xE0) {
            extra = 2;
            cp = b & 0x0F;
        } else if ((b & 0xF8) == 0xF0) {
            extra = 3;
            cp = b & 0x07;
        } else {
            return false;
        }
        if (i + extra >= s.size()) return false;
        for (std::size_t k = 1; k <= extra; ++k) {
            const auto c = static_cast<unsigned char>(s[i + k]);
            if ((c & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (c & 0x3F);
        }
        // overlong encodings, surrogates, out-of-range code points
        if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) ||
            (extra == 3 && cp < 0x10000) || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
            return false;
        }
        i += extra + 1;
    }
    return true;
}

inline bool valid_token(std::string_view t) noexcept {
    if (t.empty()) return false;
    for (char c : t) {
        if (c == ' ' || c == '\r' || c == '\n') return false;
    }
    return valid_utf8(t);
}

}  // namespace detail

/// Parses a decimal count token ("0", "42"); rejects signs, blanks and
/// anything that is not pure ASCII digits.
inline std::optional<std::size_t> parse_count(std::string_view token) noexcept {
    if (token.empty() || token.size() > 19) return std::nullopt;
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size()) return std::nullopt;
    return value;
}

/// Payload length declared by a frame; nonzero only for MSG.
inline std::size_t declared_payload_length(const Frame& frame) {
    if (frame.command != Command::Msg) return 0;
    auto n = parse_count(frame.args.at(1));
    if (!n || *n > kMaxPayload) {
        throw Error(ErrorCode::PayloadLengthError,
                    "MSG payload length '" + frame.args.at(1) + "' is not a decimal count <= 65536");
    }
    return *n;
}

inline std::string encode_frame(const Frame& frame, std::string_view payload = {}) {
    const Arity arity = arity_of(frame.command);
    if (frame.args.size() < arity.min || frame.args.size() > arity.max) {
        throw Error(ErrorCode::ArityViolation,
                    std::string(command_name(frame.command)) + " takes " + std::to_string(arity.min) +
                        (arity.min == arity.max ? "" : ".." + std::to_string(arity.max)) +
                        " arguments, got " + std::to_string(frame.args.size()));
    }
    for (const auto& arg : frame.args) {
        if (!detail::valid_token(arg)) {
            throw Error(ErrorCode::TokenError, "argument '" + arg + "' is empty, not UTF-8, or contains space/CR/LF");
        }
    }
    const std::size_t declared = declared_payload_length(frame);
    if (declared != payload.size()) {
        throw Error(ErrorCode::PayloadLengthError, "declared payload length " + std::to_string(declared) +
                                                       " but " + std::to_string(payload.size()) + " bytes given");
    }

    std::string out(command_name(frame.command));
    for (const auto& arg : frame.args) {
        out += ' ';
        out += arg;
    }
    out += "\r\n";
    out.append(payload);
    return out;
}

struct Decoded {
    Frame frame;
    std::string payload;
    std::size_t consumed = 0;
};

/// Decodes one frame from the start of `buffer`. Returns nullopt when the line
/// or its payload is still incomplete (NeedMore).
inline std::optional<Decoded> decode_frame(std::string_view buffer) {
    const std::size_t lf = buffer.find('\n');
    if (lf == std::string_view::npos) {
        const std::size_t cr = buffer.find('\r');
        if (cr != std::string_view::npos && cr + 1 != buffer.size()) {
            throw Error(ErrorCode::MalformedFrame, "bare CR inside control line");
        }
        if (buffer.size() > kMaxLineBytes) {
            throw Error(ErrorCode::MalformedFrame, "control line exceeds " + std::to_string(kMaxLineBytes) + " bytes");
        }
        return std::nullopt;
    }
    if (lf == 0 || buffer[lf - 1] != '\r') {
        throw Error(ErrorCode::MalformedFrame, "line not terminated by CRLF");
    }
    if (lf + 1 > kMaxLineBytes + 2) {
        throw Error(ErrorCode::MalformedFrame, "control line exceeds " + std::to_string(kMaxLineBytes) + " bytes");
    }
    const std::string_view line = buffer.substr(0, lf - 1);
    if (line.find('\r') != std::string_view::npos) {
        throw Error(ErrorCode::MalformedFrame, "bare CR inside control line");
    }

    std::vector<std::string_view> tokens;
    std::size_t start = 0;
    while (true) {
        const std::size_t sp = line.find(' ', start);
        tokens.push_back(line.substr(start, sp == std::string_view::npos ? std::string_view::npos : sp - start));
        if (sp == std::string_view::npos) break;
        start = sp + 1;
    }
    for (auto t : tokens) {
        if (t.empty()) throw Error(ErrorCode::MalformedFrame, "empty token (stray space)");
        if (!detail::valid_utf8(t)) throw Error(ErrorCode::MalformedFrame, "token is not valid UTF-8");
    }

    auto command = parse_command(tokens.front());
    if (!command) {
        throw Error(ErrorCode::MalformedFrame, "unknown command '" + std::string(tokens.front()) + "'");
    }
    Decoded out;
    out.frame.command = *command;
    for (std::size_t i = 1; i < tokens.size(); ++i) out.frame.args.emplace_back(tokens[i]);

    const Arity arity = arity_of(*command);
    if (out.frame.args.size() < arity.min || out.frame.args.size() > arity.max) {
        throw Error(ErrorCode::MalformedFrame, std::string(command_name(*command)) + " with " +
                                                   std::to_string(out.frame.args.size()) + " arguments");
    }

    const std::size_t payload_len = declared_payload_length(out.frame);
    const std::size_t line_bytes = lf + 1;
    if (buffer.size() - line_bytes < payload_len) return std::nullopt;
    out.payload.assign(buffer.substr(line_bytes, payload_len));
    out.consumed = line_bytes + payload_len;
    return out;
}

/// Incremental decoder for a byte stream: feed arbitrary splits, pull whole
/// frames. A malformed frame leaves the stream unsynchronised; callers close.
class FrameReader {
public:
    void feed(std::string_view bytes) { buffer_.append(bytes); }

    std::optional<Decoded> next() {
        auto decoded = decode_frame(buffer_);
        if (decoded) buffer_.erase(0, decoded->consumed);
        return decoded;
    }

    std::size_t buffered() const noexcept { return buffer_.size(); }

private:
    std::string buffer_;
};

// ---------------------------------------------------------------------------
// Data channel

inline std::string encode_chunk(std::string_view bytes) {
    if (bytes.size() > kMaxChunk) {
        throw Error(ErrorCode::ChunkTooLarge, std::to_string(bytes.size()) + " bytes exceeds chunk limit");
    }
    const auto n = static_cast<std::uint32_t>(bytes.size());
    std::string out;
    out.reserve(kChunkHeaderBytes + bytes.size());
    out.push_back(static_cast<char>((n >> 24) & 0xFF));
    out.push_back(static_cast<char>((n >> 16) & 0xFF));
    out.push_back(static_cast<char>((n >> 8) & 0xFF));
    out.push_back(static_cast<char>(n & 0xFF));
    out.append(bytes);
    return out;
}

struct DecodedChunk {
    std::string bytes;
    std::size_t consumed = 0;

    bool is_terminator() const noexcept { return bytes.empty(); }
};

inline std::uint32_t read_be32(std::string_view header) noexcept {
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(header[0])) << 24) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(header[1])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(header[2])) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(header[3]));
}

inline std::optional<DecodedChunk> decode_chunk(std::string_view buffer) {
    if (buffer.size() < kChunkHeaderBytes) return std::nullopt;
    const std::uint32_t n = read_be32(buffer);
    if (n > kMaxChunk) {
        throw Error(ErrorCode::ChunkTooLarge, "chunk header announces " + std::to_string(n) + " bytes");
    }
    if (buffer.size() - kChunkHeaderBytes < n) return std::nullopt;
    return DecodedChunk{std::string(buffer.substr(kChunkHeaderBytes, n)), kChunkHeaderBytes + n};
}

}  // namespace biokm::wire
