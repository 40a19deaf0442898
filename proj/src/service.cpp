#include "kosmap/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "kosmap/error.hpp"
#include "kosmap/explain.hpp"
#include "kosmap/taxonomy_io.hpp"

namespace kosmap {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
}

std::optional<EventKind> parse_event_kind(std::string_view name) {
    for (auto k : {EventKind::Created, EventKind::Stepped, EventKind::TurnEmitted, EventKind::Finalized})
        if (event_kind_name(k) == name) return k;
    return std::nullopt;
}

void write_all(const fs::path& path, const std::string& bytes) {
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "': " + std::strerror(errno));
    std::size_t done = 0;
    while (done < bytes.size()) {
        const ssize_t n = ::write(fd, bytes.data() + done, bytes.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            const std::string why = std::strerror(errno);
            ::close(fd);
            throw Error(ErrorCode::Io, "write to '" + path.string() + "' failed: " + why);
        }
        done += static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
}

std::string encode_lines(const std::vector<SessionEvent>& events) {
    std::string out;
    for (const auto& e : events) out += event_to_json(e).dump() + "\n";
    return out;
}

UserAction parse_action_body(const json& body) {
    return action_from_json(body);
}

}  // namespace

std::string_view event_kind_name(EventKind kind) {
    switch (kind) {
    case EventKind::Created: return "created";
    case EventKind::Stepped: return "stepped";
    case EventKind::TurnEmitted: return "turn_emitted";
    case EventKind::Finalized: return "finalized";
    }
    return "created";
}

json event_to_json(const SessionEvent& e) {
    return {{"session_id", e.session_id},
            {"seq", e.seq},
            {"timestamp", e.timestamp},
            {"kind", std::string(event_kind_name(e.kind))},
            {"payload", e.payload}};
}

SessionEvent event_from_json(const json& j) {
    try {
        SessionEvent e;
        e.session_id = j.at("session_id").get<std::string>();
        e.seq = j.at("seq").get<std::uint64_t>();
        e.timestamp = j.at("timestamp").get<std::string>();
        const auto kind = parse_event_kind(j.at("kind").get<std::string>());
        if (!kind) throw Error(ErrorCode::SchemaViolation, "unknown event kind " + j.at("kind").dump());
        e.kind = *kind;
        e.payload = j.at("payload");
        return e;
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::SchemaViolation, std::string("malformed event: ") + ex.what());
    }
}

std::string turn_digest(const AgentTurn& turn) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(turn_to_json(turn).dump())));
    return buf;
}

// ---- EventLog ---------------------------------------------------------------

EventLog::EventLog(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create session directory '" + dir_.string() + "': " + ec.message());
}

void EventLog::create(const std::string& session_id, const std::vector<SessionEvent>& events) {
    append(session_id, events);
    std::lock_guard lock(index_mutex_);
    write_all(dir_ / "index.jsonl", json{{"session_id", session_id}}.dump() + "\n");
}

void EventLog::append(const std::string& session_id, const std::vector<SessionEvent>& events) {
    write_all(dir_ / (session_id + ".jsonl"), encode_lines(events));
}

std::vector<SessionEvent> EventLog::read(const std::string& session_id) const {
    const fs::path path = dir_ / (session_id + ".jsonl");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::UnknownSession, "no log for session '" + session_id + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    std::vector<SessionEvent> events;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) break;  // torn tail
        events.push_back(event_from_json(json::parse(text.substr(pos, nl - pos))));
        pos = nl + 1;
    }
    return events;
}

std::vector<std::string> EventLog::session_ids() const {
    std::vector<std::string> ids;
    std::ifstream in(dir_ / "index.jsonl");
    std::string line;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            const auto id = json::parse(line).at("session_id").get<std::string>();
            if (seen.insert(id).second) ids.push_back(id);
        } catch (const json::exception&) {
            // torn final line
        }
    }
    return ids;
}

std::string new_session_id() {
    static constexpr char alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";
    std::random_device rd;
    std::array<unsigned char, 16> bytes{};
    for (std::size_t i = 0; i < bytes.size(); i += 4) {
        const std::uint32_t r = rd();
        for (std::size_t j = 0; j < 4; ++j) bytes[i + j] = static_cast<unsigned char>(r >> (8 * j));
    }
    std::string out;
    std::uint32_t acc = 0;
    int bits = 0;
    for (unsigned char b : bytes) {
        acc = (acc << 8) | b;
        bits += 8;
        while (bits >= 6) {
            bits -= 6;
            out += alphabet[(acc >> bits) & 0x3f];
        }
    }
    if (bits > 0) out += alphabet[(acc << (6 - bits)) & 0x3f];
    return out;
}

DialogueSession replay_events(const std::vector<SessionEvent>& events, const Registry& registry) {
    if (events.empty() || events.front().kind != EventKind::Created)
        throw Error(ErrorCode::ReplayDiverged, "log does not start with a created event");
    const SessionEvent& created = events.front();
    const json& p = created.payload;
    const EngineConfig config = apply_engine_overrides(EngineConfig{}, p.at("config"));
    auto [session, opening] = start_session(p.at("query").get<std::string>(), registry, config,
                                            p.at("seed").get<std::uint64_t>(), created.session_id);
    if (p.contains("digest") && p.at("digest").get<std::string>() != turn_digest(opening))
        throw Error(ErrorCode::ReplayDiverged, "opening turn of '" + created.session_id + "' differs from the log");

    for (std::size_t i = 1; i < events.size(); ++i) {
        const SessionEvent& e = events[i];
        if (e.seq != i) throw Error(ErrorCode::ReplayDiverged, "sequence gap at event " + std::to_string(i));
        if (e.kind == EventKind::Finalized) continue;
        if (e.kind != EventKind::Stepped)
            throw Error(ErrorCode::ReplayDiverged, "unexpected " + std::string(event_kind_name(e.kind)) + " event");
        if (i + 1 >= events.size() || events[i + 1].kind != EventKind::TurnEmitted) break;  // incomplete step
        if (events[i + 1].seq != i + 1) throw Error(ErrorCode::ReplayDiverged, "sequence gap at event " + std::to_string(i + 1));
        auto [next, turn] = step(std::move(session), action_from_json(e.payload.at("action")), registry);
        if (events[i + 1].payload.at("digest").get<std::string>() != turn_digest(turn))
            throw Error(ErrorCode::ReplayDiverged,
                        "round " + std::to_string(next.rounds.size()) + " of '" + created.session_id +
                            "' differs from the log");
        session = std::move(next);
        ++i;
    }
    return session;
}

// ---- SessionService ---------------------------------------------------------

SessionService::SessionService(std::shared_ptr<const Registry> registry, EngineConfig defaults,
                               fs::path session_dir, Clock clock)
    : registry_(std::move(registry)),
      defaults_(std::move(defaults)),
      log_(std::move(session_dir)),
      clock_(clock ? std::move(clock) : Clock(utc_now)) {
    defaults_.validate();
}

const Registry& SessionService::registry() const {
    if (!registry_) throw Error(ErrorCode::RegistryUnavailable, "the topic registry failed to load");
    return *registry_;
}

SessionEvent SessionService::event(const std::string& session_id, std::uint64_t seq, EventKind kind,
                                   json payload) const {
    return {session_id, seq, clock_(), kind, std::move(payload)};
}

std::size_t SessionService::recover() {
    const Registry& reg = registry();
    std::size_t count = 0;
    for (const auto& id : log_.session_ids()) {
        auto events = log_.read(id);
        auto slot = std::make_shared<Slot>();
        slot->session = replay_events(events, reg);
        // Drop an incomplete trailing step so sequence numbers stay dense.
        std::size_t used = 1 + slot->session.rounds.size() * 2 +
                           (slot->session.phase == Phase::Finalized ? 1 : 0);
        if (used < events.size()) {
            events.resize(used);
            const fs::path path = log_.dir() / (id + ".jsonl");
            const fs::path tmp = log_.dir() / (id + ".jsonl.tmp");
            fs::remove(tmp);
            write_all(tmp, encode_lines(events));
            fs::rename(tmp, path);
            spdlog::warn("session {}: dropped incomplete trailing events", id);
        }
        slot->next_seq = used;
        std::unique_lock lock(sessions_mutex_);
        sessions_[id] = std::move(slot);
        ++count;
    }
    return count;
}

std::shared_ptr<SessionService::Slot> SessionService::slot(const std::string& session_id) const {
    std::shared_lock lock(sessions_mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session '" + session_id + "'");
    return it->second;
}

json SessionService::create(const json& request) {
    const Registry& reg = registry();
    if (!request.is_object()) throw Error(ErrorCode::SchemaViolation, "request body must be an object");
    for (const auto& [key, value] : request.items())
        if (key != "query" && key != "config" && key != "seed")
            throw Error(ErrorCode::SchemaViolation, "unknown field '" + key + "'");
    if (!request.contains("query") || !request.at("query").is_string())
        throw Error(ErrorCode::EmptyQuery, "'query' must be a non-empty string");
    const EngineConfig config =
        apply_engine_overrides(defaults_, request.contains("config") ? request.at("config") : json());
    std::uint64_t seed = config.seed;
    if (request.contains("seed")) {
        const json& raw = request.at("seed");
        if (!raw.is_number_integer() || (!raw.is_number_unsigned() && raw.get<std::int64_t>() < 0))
            throw Error(ErrorCode::SchemaViolation, "'seed' must be a non-negative integer");
        seed = request.at("seed").get<std::uint64_t>();
    }

    const std::string id = new_session_id();
    auto [session, turn] = start_session(request.at("query").get<std::string>(), reg, config, seed, id);
    const json payload{{"query", session.context.original_query},
                       {"config", engine_config_to_json(config)},
                       {"seed", seed},
                       {"digest", turn_digest(turn)},
                       {"warnings", session.warnings}};
    log_.create(id, {event(id, 0, EventKind::Created, payload)});

    auto slot = std::make_shared<Slot>();
    slot->session = std::move(session);
    slot->next_seq = 1;
    const std::string phase(phase_name(slot->session.phase));
    {
        std::unique_lock lock(sessions_mutex_);
        sessions_[id] = std::move(slot);
    }
    return {{"session_id", id}, {"phase", phase}, {"turn", turn_to_json(turn)}};
}

json SessionService::apply(const std::string& session_id, const UserAction& action) {
    const Registry& reg = registry();
    auto s = slot(session_id);
    std::lock_guard lock(s->mutex);
    const std::size_t warnings_before = s->session.warnings.size();
    auto [next, turn] = step(s->session, action, reg);
    const Round& round = next.rounds.back();

    std::vector<SessionEvent> events;
    std::uint64_t seq = s->next_seq;
    events.push_back(event(session_id, seq++, EventKind::Stepped, {{"action", action_to_json(round.action)}}));
    const std::vector<std::string> fresh(next.warnings.begin() + static_cast<std::ptrdiff_t>(warnings_before),
                                         next.warnings.end());
    events.push_back(event(session_id, seq++, EventKind::TurnEmitted,
                           {{"digest", turn_digest(turn)}, {"warnings", fresh}}));
    if (next.phase == Phase::Finalized) events.push_back(event(session_id, seq++, EventKind::Finalized, json::object()));
    log_.append(session_id, events);
    for (const auto& w : fresh) spdlog::warn("session {}: {}", session_id, w);

    s->session = std::move(next);
    s->next_seq = seq;
    return {{"session_id", session_id},
            {"phase", std::string(phase_name(s->session.phase))},
            {"round", s->session.rounds.size()},
            {"turn", turn_to_json(turn)}};
}

json SessionService::post_step(const std::string& session_id, const json& action) {
    return apply(session_id, parse_action_body(action));
}

json SessionService::finalize(const std::string& session_id) {
    return apply(session_id, UserAction::done());
}

json SessionService::get_session(const std::string& session_id) const {
    registry();
    auto s = slot(session_id);
    std::lock_guard lock(s->mutex);
    return session_to_json(s->session, false);
}

json SessionService::resolution(const std::string& session_id) const {
    registry();
    auto s = slot(session_id);
    std::lock_guard lock(s->mutex);
    json entities = json::array();
    for (const auto& e : kosmap::finalize(s->session)) entities.push_back(entity_to_json(e));
    return {{"session_id", session_id}, {"entities", std::move(entities)}};
}

json SessionService::schemes() const {
    const Registry& reg = registry();
    json schemes = json::array();
    for (const auto& [id, entry] : reg.schemes()) {
        const auto& sc = entry.graph.scheme();
        schemes.push_back({{"id", id},
                           {"name", sc.name},
                           {"kind", std::string(scheme_kind_name(sc.kind))},
                           {"field_tags", sc.field_tags},
                           {"topic_count", entry.graph.size()},
                           {"roots", entry.graph.roots()},
                           {"index", {{"dim", entry.index.dim()},
                                      {"provider_fingerprint", entry.index.provider_fingerprint()}}}});
    }
    return {{"schemes", std::move(schemes)}, {"links", json::parse(serialize_scheme_links(reg.links()))}};
}

json SessionService::topic(const std::string& scheme_id, const std::string& topic_id) const {
    const KosGraph& graph = registry().at(scheme_id).graph;
    const TopicNode& node = graph.at(topic_id);
    json breadcrumb = json::array();
    for (const auto& a : graph.ancestors_with_distance(topic_id))
        breadcrumb.push_back({{"id", a.id}, {"pref_label", graph.at(a.id).pref_label}, {"distance", a.distance}});
    json path = json::array();
    for (const auto& id : graph.preferred_path(topic_id))
        if (id != topic_id) path.push_back({{"id", id}, {"pref_label", graph.at(id).pref_label}});
    return {{"scheme_id", scheme_id},
            {"id", node.id},
            {"pref_label", node.pref_label},
            {"alt_labels", node.alt_labels},
            {"definition", node.definition},
            {"broader", node.broader},
            {"narrower", node.narrower},
            {"breadcrumb", std::move(breadcrumb)},
            {"preferred_path", std::move(path)},
            {"explanation", template_explanation(node, graph)}};
}

json SessionService::health() const {
    return {{"status", registry_ ? "ok" : "degraded"},
            {"schemes", registry_ ? registry_->schemes().size() : 0},
            {"sessions", session_count()}};
}

std::size_t SessionService::session_count() const {
    std::shared_lock lock(sessions_mutex_);
    return sessions_.size();
}

// ---- HTTP -------------------------------------------------------------------

int http_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::EmptyQuery:
    case ErrorCode::EmptyText:
    case ErrorCode::SchemaViolation:
    case ErrorCode::InvalidConfig: return 400;
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownScheme:
    case ErrorCode::UnknownTopic: return 404;
    case ErrorCode::SessionFinalized:
    case ErrorCode::NotFinalized: return 409;
    case ErrorCode::UnknownActionTarget: return 422;
    case ErrorCode::RemoteUnavailable:
    case ErrorCode::RemoteBadResponse: return 502;
    case ErrorCode::RegistryUnavailable:
    case ErrorCode::NoMultiFieldScheme: return 503;
    default: return 500;
    }
}

json error_body(std::string_view code, std::string_view message) {
    return {{"code", std::string(code)}, {"message", std::string(message)}};
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

template <typename F>
httplib::Server::Handler guarded(F&& body, int ok_status = 200) {
    return [body = std::forward<F>(body), ok_status](const httplib::Request& req, httplib::Response& res) {
        try {
            send_json(res, ok_status, body(req));
        } catch (const Error& e) {
            send_json(res, http_status(e.code()), error_body(e.code_name(), e.what()));
        } catch (const json::exception& e) {
            send_json(res, 400, error_body("malformed_request", e.what()));
        } catch (const std::exception& e) {
            send_json(res, 500, error_body("internal_error", e.what()));
        }
    };
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    return json::parse(req.body);
}

}  // namespace

void install_routes(httplib::Server& server, SessionService& service) {
    const std::string id = "([A-Za-z0-9_-]+)";
    const std::string any = "([^/]+)";

    server.Post("/v1/sessions", guarded([&](const httplib::Request& req) { return service.create(parse_body(req)); }, 201));
    server.Post("/v1/sessions/" + id + "/steps", guarded([&](const httplib::Request& req) {
                    return service.post_step(req.matches[1], parse_body(req));
                }));
    server.Post("/v1/sessions/" + id + "/finalize",
                guarded([&](const httplib::Request& req) { return service.finalize(req.matches[1]); }));
    server.Get("/v1/sessions/" + id + "/resolution",
               guarded([&](const httplib::Request& req) { return service.resolution(req.matches[1]); }));
    server.Get("/v1/sessions/" + id,
               guarded([&](const httplib::Request& req) { return service.get_session(req.matches[1]); }));
    server.Get("/v1/schemes", guarded([&](const httplib::Request&) { return service.schemes(); }));
    server.Get("/v1/schemes/" + any + "/topics/" + any, guarded([&](const httplib::Request& req) {
                   return service.topic(httplib::detail::decode_url(req.matches[1], false),
                                        httplib::detail::decode_url(req.matches[2], false));
               }));
    server.Get("/v1/health", guarded([&](const httplib::Request&) { return service.health(); }));

    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (res.status == 404 && res.body.empty())
            send_json(res, 404, error_body("not_found", "no route for " + req.method + " " + req.path));
    });
    server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
        spdlog::info(R"({{"method":"{}","path":"{}","status":{},"remote":"{}"}})", req.method, req.path, res.status,
                     req.remote_addr);
    });
}

std::pair<std::string, int> parse_listen(const std::string& listen) {
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == listen.size())
        throw Error(ErrorCode::InvalidConfig, "listen address must be host:port, got '" + listen + "'");
    int port = 0;
    try {
        std::size_t used = 0;
        port = std::stoi(listen.substr(colon + 1), &used);
        if (used != listen.size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidConfig, "bad port in listen address '" + listen + "'");
    }
    if (port < 0 || port > 65535) throw Error(ErrorCode::InvalidConfig, "port out of range in '" + listen + "'");
    return {listen.substr(0, colon), port};
}

}  // namespace kosmap
