#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace biokm {

enum class ErrorCode {
    ArityViolation,
    TokenError,
    MalformedFrame,
    PayloadLengthError,
    ChunkTooLarge,
    BindError,
    LogIoError,
    ConnectError,
    ScenarioFailed,
    InvalidSpec,
    TransferAborted,
    ZeroDuration,
    ZeroCapacity,
    EmptyInput,
    IndexOutOfRange,
    MatrixInvariantViolation,
    NegativeRtt,
    UnknownLink,
    UnstableQueue,
    NonPositiveServiceRate,
    ParseError,
    IoError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::ArityViolation: return "ArityViolation";
    case ErrorCode::TokenError: return "TokenError";
    case ErrorCode::MalformedFrame: return "MalformedFrame";
    case ErrorCode::PayloadLengthError: return "PayloadLengthError";
    case ErrorCode::ChunkTooLarge: return "ChunkTooLarge";
    case ErrorCode::BindError: return "BindError";
    case ErrorCode::LogIoError: return "LogIoError";
    case ErrorCode::ConnectError: return "ConnectError";
    case ErrorCode::ScenarioFailed: return "ScenarioFailed";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::TransferAborted: return "TransferAborted";
    case ErrorCode::ZeroDuration: return "ZeroDuration";
    case ErrorCode::ZeroCapacity: return "ZeroCapacity";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::MatrixInvariantViolation: return "MatrixInvariantViolation";
    case ErrorCode::NegativeRtt: return "NegativeRtt";
    case ErrorCode::UnknownLink: return "UnknownLink";
    case ErrorCode::UnstableQueue: return "UnstableQueue";
    case ErrorCode::NonPositiveServiceRate: return "NonPositiveServiceRate";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace biokm
