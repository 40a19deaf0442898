#include "kosmap/error.hpp"

namespace kosmap {

std::string_view error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::MalformedTriple: return "malformed_triple";
    case ErrorCode::CycleDetected: return "cycle_detected";
    case ErrorCode::DanglingReference: return "dangling_reference";
    case ErrorCode::MissingPrefLabel: return "missing_pref_label";
    case ErrorCode::SchemaViolation: return "schema_violation";
    case ErrorCode::UnknownTopic: return "unknown_topic";
    case ErrorCode::UnknownScheme: return "unknown_scheme";
    case ErrorCode::EmptyText: return "empty_text";
    case ErrorCode::RemoteUnavailable: return "remote_unavailable";
    case ErrorCode::RemoteBadResponse: return "remote_bad_response";
    case ErrorCode::DimensionMismatch: return "dimension_mismatch";
    case ErrorCode::InvalidConfig: return "invalid_config";
    case ErrorCode::EmptyIndex: return "empty_index";
    case ErrorCode::UnknownRestrictedTopic: return "unknown_restricted_topic";
    case ErrorCode::FingerprintMismatch: return "fingerprint_mismatch";
    case ErrorCode::NoMultiFieldScheme: return "no_multi_field_scheme";
    case ErrorCode::EmptyQuery: return "empty_query";
    case ErrorCode::SessionFinalized: return "session_finalized";
    case ErrorCode::NotFinalized: return "not_finalized";
    case ErrorCode::UnknownActionTarget: return "unknown_action_target";
    case ErrorCode::UnknownSession: return "unknown_session";
    case ErrorCode::ReplayDiverged: return "replay_diverged";
    case ErrorCode::BidirectionalInconsistency: return "bidirectional_inconsistency";
    case ErrorCode::RegistryUnavailable: return "registry_unavailable";
    case ErrorCode::Io: return "io_error";
    }
    return "unknown_error";
}

}  // namespace kosmap
