#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kosmap {

enum class ErrorCode {
    MalformedTriple,
    CycleDetected,
    DanglingReference,
    MissingPrefLabel,
    SchemaViolation,
    UnknownTopic,
    UnknownScheme,
    EmptyText,
    RemoteUnavailable,
    RemoteBadResponse,
    DimensionMismatch,
    InvalidConfig,
    EmptyIndex,
    UnknownRestrictedTopic,
    FingerprintMismatch,
    NoMultiFieldScheme,
    EmptyQuery,
    SessionFinalized,
    NotFinalized,
    UnknownActionTarget,
    UnknownSession,
    ReplayDiverged,
    BidirectionalInconsistency,
    RegistryUnavailable,
    Io,
};

// Stable snake_case code, used on the wire and in CLI messages.
std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }
    std::string_view code_name() const { return error_code_name(code_); }

private:
    ErrorCode code_;
};

}  // namespace kosmap
