#include <cstdio>
#include <iostream>
#include <memory>
#include <sstream>

#include <httplib.h>

#include "cli.hpp"
#include "kosmap/dialogue.hpp"
#include "kosmap/error.hpp"
#include "kosmap/registry.hpp"

namespace kosmap::cli {

using nlohmann::json;

namespace {

std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// The two ways of driving a session: in-process or over HTTP. Both speak the
// JSON shapes produced by the dialogue serializers.
class Backend {
public:
    virtual ~Backend() = default;
    virtual json start(const std::string& query) = 0;  // turn
    virtual json step(const json& action) = 0;         // turn
    virtual json resolve() = 0;                        // entity array
};

class LocalBackend final : public Backend {
public:
    LocalBackend(std::shared_ptr<const Registry> registry, EngineConfig config, std::uint64_t seed)
        : registry_(std::move(registry)), config_(std::move(config)), seed_(seed) {}

    json start(const std::string& query) override {
        auto [session, turn] = start_session(query, *registry_, config_, seed_, "local");
        session_ = std::move(session);
        return turn_to_json(turn);
    }
    json step(const json& action) override {
        auto [session, turn] = kosmap::step(session_, action_from_json(action), *registry_);
        session_ = std::move(session);
        return turn_to_json(turn);
    }
    json resolve() override {
        json out = json::array();
        for (const auto& e : finalize(session_)) out.push_back(entity_to_json(e));
        return out;
    }

private:
    std::shared_ptr<const Registry> registry_;
    EngineConfig config_;
    std::uint64_t seed_;
    DialogueSession session_;
};

class RemoteBackend final : public Backend {
public:
    RemoteBackend(const std::string& url, std::uint64_t seed) : client_(url), seed_(seed) {
        client_.set_connection_timeout(5);
        client_.set_read_timeout(60);
    }

    json start(const std::string& query) override {
        const json body = call("POST", "/v1/sessions", json{{"query", query}, {"seed", seed_}}.dump());
        id_ = body.at("session_id").get<std::string>();
        return body.at("turn");
    }
    json step(const json& action) override {
        if (action.at("kind") == "done") return call("POST", "/v1/sessions/" + id_ + "/finalize", "{}").at("turn");
        return call("POST", "/v1/sessions/" + id_ + "/steps", action.dump()).at("turn");
    }
    json resolve() override { return call("GET", "/v1/sessions/" + id_ + "/resolution", "").at("entities"); }

private:
    json call(const std::string& method, const std::string& path, const std::string& body) {
        auto res = method == "GET" ? client_.Get(path) : client_.Post(path, body, "application/json");
        if (!res)
            throw Error(ErrorCode::RemoteUnavailable, "service unreachable: " + httplib::to_string(res.error()));
        json reply;
        try {
            reply = json::parse(res->body);
        } catch (const json::exception&) {
            throw Error(ErrorCode::RemoteBadResponse, "service returned non-JSON (HTTP " + std::to_string(res->status) + ")");
        }
        if (res->status >= 300) {
            const auto code = reply.value("code", std::string("http_") + std::to_string(res->status));
            throw std::runtime_error(code + ": " + reply.value("message", std::string()));
        }
        return reply;
    }

    httplib::Client client_;
    std::uint64_t seed_;
    std::string id_;
};

constexpr const char* kMenu =
    "commands: c N confirm | r N reject | b N broaden | n N narrow | s N siblings | f TEXT refine | d done";

// Parses one command line against the current turn. Returns nullopt and
// sets why when the line is not a valid command.
std::optional<json> parse_command(const std::string& line, const json& turn, std::string& why) {
    std::istringstream in(line);
    std::string verb;
    in >> verb;
    if (verb == "d" || verb == "done") return json{{"kind", "done"}};
    if (verb == "f" || verb == "refine") {
        std::string rest;
        std::getline(in, rest);
        rest = trim(rest);
        if (rest.empty()) {
            why = "refine needs some text";
            return std::nullopt;
        }
        return json{{"kind", "refine"}, {"text", rest}};
    }
    static const std::map<std::string, std::string> kinds{
        {"c", "confirm"}, {"r", "reject"}, {"b", "broaden"}, {"n", "narrow"}, {"s", "explore_siblings"}};
    const auto it = kinds.find(verb);
    if (it == kinds.end()) {
        why = verb.empty() ? "empty input" : "unknown command '" + verb + "'";
        return std::nullopt;
    }
    const auto& candidates = turn.at("candidates");
    long n = 0;
    std::string extra;
    if (!(in >> n) || (in >> extra) || n < 1 || n > static_cast<long>(candidates.size())) {
        why = candidates.empty() ? "there are no candidates to choose from"
                                 : "choose a number between 1 and " + std::to_string(candidates.size());
        return std::nullopt;
    }
    const auto& c = candidates.at(static_cast<std::size_t>(n - 1));
    return json{{"kind", it->second}, {"topic_id", c.at("topic_id")}, {"scheme_id", c.at("scheme_id")}};
}

}  // namespace

void render_turn(const json& turn, std::ostream& out) {
    out << "[" << turn.at("phase").get<std::string>() << "]";
    if (!turn.at("scope").get<std::string>().empty()) out << " " << turn.at("scope").get<std::string>();
    out << "\n";
    if (turn.contains("notice") && !turn.at("notice").is_null())
        out << "note (" << turn["notice"]["code"].get<std::string>() << "): "
            << turn["notice"]["message"].get<std::string>() << "\n";
    out << turn.at("question").get<std::string>() << "\n";
    std::size_t i = 1;
    for (const auto& c : turn.at("candidates")) {
        out << "  " << i++ << ". " << c.at("pref_label").get<std::string>() << "  ("
            << c.at("scheme_id").get<std::string>() << ":" << c.at("topic_id").get<std::string>() << ")  score "
            << fixed(c.at("final_score").get<double>()) << "\n";
        std::string crumb;
        for (const auto& label : c.at("breadcrumb")) crumb += (crumb.empty() ? "" : " > ") + label.get<std::string>();
        out << "     in: " << (crumb.empty() ? "(top level)" : crumb) << "\n";
        out << "     = base " << fixed(c.at("base_sim").get<double>()) << " + ancestors "
            << fixed(c.at("ancestor_bonus").get<double>()) << " + siblings "
            << fixed(c.at("sibling_bonus").get<double>()) << "\n";
        for (const auto& a : c.at("breakdown").at("ancestors"))
            out << "       ancestor " << a.at("id").get<std::string>() << " d=" << a.at("distance").get<int>()
                << " sim " << fixed(a.at("sim").get<double>()) << " -> " << fixed(a.at("contribution").get<double>())
                << "\n";
        for (const auto& s : c.at("breakdown").at("siblings"))
            out << "       sibling " << s.at("id").get<std::string>() << " sim " << fixed(s.at("sim").get<double>())
                << " -> " << fixed(s.at("contribution").get<double>()) << "\n";
        out << "     " << c.at("explanation").get<std::string>() << "\n";
    }
}

void render_entities(const json& entities, std::ostream& out) {
    if (entities.empty()) {
        out << "no entities resolved\n";
        return;
    }
    out << "resolved entities:\n";
    std::size_t i = 1;
    for (const auto& e : entities) {
        out << "  " << i++ << ". " << e.at("pref_label").get<std::string>() << "  (" << e.at("scheme_id").get<std::string>()
            << ":" << e.at("topic_id").get<std::string>() << ")  confidence " << fixed(e.at("confidence").get<double>())
            << "\n";
        for (const auto& p : e.at("provenance")) {
            const auto& a = p.at("action");
            out << "     round " << p.at("round").get<int>() << " [" << p.at("phase").get<std::string>() << "] "
                << a.at("kind").get<std::string>();
            if (a.contains("topic_id")) out << " " << a.at("topic_id").get<std::string>();
            if (a.contains("text")) out << " \"" << a.at("text").get<std::string>() << "\"";
            out << "\n";
        }
    }
}

int run_chat(const ServiceConfig& config, const ChatOptions& options, std::istream& in, std::ostream& out,
             std::ostream& err) {
    std::unique_ptr<Backend> backend;
    try {
        if (options.server) {
            backend = std::make_unique<RemoteBackend>(*options.server, options.seed);
        } else {
            auto registry = std::make_shared<const Registry>(
                Registry::load_directory(config.data_dir, make_provider(config.provider)));
            backend = std::make_unique<LocalBackend>(std::move(registry), config.engine, options.seed);
        }
    } catch (const std::exception& e) {
        err << "error: cannot load registry: " << e.what() << "\n";
        return 1;
    }

    std::string line;
    json turn;
    try {
        std::string query = options.query.value_or("");
        while (trim(query).empty()) {
            out << "query> " << std::flush;
            if (!std::getline(in, line)) {
                out << "\nno entities resolved\n";
                return 0;
            }
            query = trim(line);
        }
        turn = backend->start(query);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    render_turn(turn, out);
    out << kMenu << "\n";
    while (true) {
        out << "> " << std::flush;
        json action;
        if (!std::getline(in, line)) {
            out << "\n";
            action = json{{"kind", "done"}};
        } else {
            std::string why;
            auto parsed = parse_command(trim(line), turn, why);
            if (!parsed) {
                out << "invalid input: " << why << "\n" << kMenu << "\n";
                continue;
            }
            action = std::move(*parsed);
        }
        try {
            turn = backend->step(action);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::RemoteUnavailable) {
                err << "error: " << e.what() << "\n";
                return 1;
            }
            out << "rejected: " << e.code_name() << ": " << e.what() << "\n";
            continue;
        } catch (const std::exception& e) {
            out << "rejected: " << e.what() << "\n";
            continue;
        }
        if (action.at("kind") == "done") {
            out << turn.at("question").get<std::string>() << "\n";
            try {
                render_entities(backend->resolve(), out);
            } catch (const std::exception& e) {
                err << "error: " << e.what() << "\n";
                return 1;
            }
            return 0;
        }
        render_turn(turn, out);
    }
}

}  // namespace kosmap::cli
