#pragma once
// Session service: event-sourced dialogue sessions behind an HTTP API.
//
// Every session is an append-only JSON-lines file <session_dir>/<id>.jsonl.
// Events: created {query, config, seed, digest}, stepped {action},
// turn_emitted {digest, warnings}, finalized {}. A step appends its
// stepped + turn_emitted (+ finalized) lines in one write; a failed step
// appends nothing. <session_dir>/index.jsonl lists the session ids in
// creation order. On startup every logged session is replayed through the
// dialogue engine and each turn digest is checked.
//
// Endpoints (JSON bodies; errors are {"code", "message"}):
//   POST /v1/sessions                       {query, config?, seed?} -> 201 {session_id, phase, turn}
//   POST /v1/sessions/{id}/steps            UserAction -> 200 {session_id, phase, round, turn}
//   POST /v1/sessions/{id}/finalize         -> 200 {session_id, phase, round, turn}
//   GET  /v1/sessions/{id}                  session view
//   GET  /v1/sessions/{id}/resolution       {session_id, entities}; 409 until finalized
//   GET  /v1/schemes                        {schemes, links}
//   GET  /v1/schemes/{sid}/topics/{tid}     topic view with breadcrumb
//   GET  /v1/health                         {status, schemes, sessions}

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kosmap/config.hpp"
#include "kosmap/dialogue.hpp"
#include "kosmap/error.hpp"
#include "kosmap/registry.hpp"

namespace httplib {
class Server;
}

namespace kosmap {

enum class EventKind { Created, Stepped, TurnEmitted, Finalized };

std::string_view event_kind_name(EventKind kind);  // "created" | "stepped" | "turn_emitted" | "finalized"

struct SessionEvent {
    std::string session_id;
    std::uint64_t seq = 0;
    std::string timestamp;  // UTC, RFC 3339
    EventKind kind = EventKind::Created;
    nlohmann::json payload = nlohmann::json::object();
};

nlohmann::json event_to_json(const SessionEvent& event);
SessionEvent event_from_json(const nlohmann::json& j);  // throws SchemaViolation

// Hex FNV-1a 64 of the turn's canonical JSON.
std::string turn_digest(const AgentTurn& turn);

class EventLog {
public:
    explicit EventLog(std::filesystem::path dir);

    const std::filesystem::path& dir() const { return dir_; }

    // Registers a new session in the index and writes its first events.
    void create(const std::string& session_id, const std::vector<SessionEvent>& events);
    // All events in one write(2) on an O_APPEND descriptor. Throws Io.
    void append(const std::string& session_id, const std::vector<SessionEvent>& events);
    // A trailing partial line (torn write) is dropped.
    std::vector<SessionEvent> read(const std::string& session_id) const;
    std::vector<std::string> session_ids() const;

private:
    std::filesystem::path dir_;
    std::mutex index_mutex_;
};

// 16 random bytes, base64url without padding (22 characters).
std::string new_session_id();

// Rebuilds a session from its events. A trailing stepped event without its
// turn_emitted is ignored. Throws ReplayDiverged when a digest differs.
DialogueSession replay_events(const std::vector<SessionEvent>& events, const Registry& registry);

// HTTP-independent core. Methods return response bodies and throw Error;
// http_status() maps error codes to statuses.
class SessionService {
public:
    using Clock = std::function<std::string()>;

    // registry may be null: session endpoints then answer 503.
    SessionService(std::shared_ptr<const Registry> registry, EngineConfig defaults, std::filesystem::path session_dir,
                   Clock clock = {});

    // Replays every session in the log directory. Returns the count.
    std::size_t recover();

    nlohmann::json create(const nlohmann::json& request);
    nlohmann::json post_step(const std::string& session_id, const nlohmann::json& action);
    nlohmann::json finalize(const std::string& session_id);
    nlohmann::json get_session(const std::string& session_id) const;
    nlohmann::json resolution(const std::string& session_id) const;
    nlohmann::json schemes() const;
    nlohmann::json topic(const std::string& scheme_id, const std::string& topic_id) const;
    nlohmann::json health() const;

    std::size_t session_count() const;

private:
    struct Slot {
        std::mutex mutex;
        DialogueSession session;
        std::uint64_t next_seq = 0;
    };

    const Registry& registry() const;  // throws RegistryUnavailable
    std::shared_ptr<Slot> slot(const std::string& session_id) const;
    nlohmann::json apply(const std::string& session_id, const UserAction& action);
    SessionEvent event(const std::string& session_id, std::uint64_t seq, EventKind kind, nlohmann::json payload) const;

    std::shared_ptr<const Registry> registry_;
    EngineConfig defaults_;
    mutable EventLog log_;
    Clock clock_;
    mutable std::shared_mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Slot>> sessions_;
};

int http_status(ErrorCode code);
nlohmann::json error_body(std::string_view code, std::string_view message);

// Registers every endpoint on server. Requests are logged one line each.
void install_routes(httplib::Server& server, SessionService& service);

// Parses "host:port". Throws InvalidConfig.
std::pair<std::string, int> parse_listen(const std::string& listen);

}  // namespace kosmap
