#include <set>

#include "kosmap/dialogue.hpp"
#include "kosmap/error.hpp"

namespace kosmap {

using nlohmann::json;

namespace {

json vector_to_json(const EmbeddingVector& v) {
    json out = json::array();
    for (double x : v.values()) out.push_back(x);
    return out;
}

json ref_to_json(const TopicRef& ref) {
    return {{"scheme_id", ref.scheme_id}, {"topic_id", ref.topic_id}};
}

json scope_to_json(const SearchScope& scope) {
    json schemes = json::array();
    for (const auto& [id, restrict] : scope.schemes) {
        json entry{{"scheme_id", id}};
        entry["restrict_to"] = restrict ? json(std::vector<std::string>(restrict->begin(), restrict->end())) : json();
        schemes.push_back(std::move(entry));
    }
    json out{{"schemes", std::move(schemes)}, {"tau", scope.tau}, {"description", scope.description}};
    out["min_score"] = scope.min_score ? json(*scope.min_score) : json();
    out["stringent_root"] = scope.stringent_root ? ref_to_json(*scope.stringent_root) : json();
    return out;
}

}  // namespace

json action_to_json(const UserAction& action) {
    json out{{"kind", std::string(action_kind_name(action.kind))}};
    if (action.targets_topic()) {
        out["topic_id"] = action.topic_id;
        if (!action.scheme_id.empty()) out["scheme_id"] = action.scheme_id;
    }
    if (action.kind == ActionKind::Refine) out["text"] = action.text;
    return out;
}

UserAction action_from_json(const json& j) {
    auto bad = [](const std::string& what) { return Error(ErrorCode::SchemaViolation, "action: " + what); };
    if (!j.is_object()) throw bad("must be an object");
    static const std::set<std::string> allowed{"kind", "topic_id", "scheme_id", "text"};
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw bad("unknown field '" + key + "'");
        if (!value.is_string()) throw bad("field '" + key + "' must be a string");
    }
    if (!j.contains("kind")) throw bad("missing 'kind'");
    const auto kind = parse_action_kind(j.at("kind").get<std::string>());
    if (!kind) throw bad("unknown kind '" + j.at("kind").get<std::string>() + "'");
    UserAction a;
    a.kind = *kind;
    if (a.targets_topic()) {
        if (!j.contains("topic_id") || j.at("topic_id").get<std::string>().empty())
            throw bad("'" + std::string(action_kind_name(a.kind)) + "' needs a topic_id");
        a.topic_id = j.at("topic_id").get<std::string>();
        if (j.contains("scheme_id")) a.scheme_id = j.at("scheme_id").get<std::string>();
    } else if (j.contains("topic_id") || j.contains("scheme_id")) {
        throw bad("'" + std::string(action_kind_name(a.kind)) + "' takes no topic");
    }
    if (a.kind == ActionKind::Refine) {
        if (!j.contains("text")) throw bad("'refine' needs text");
        a.text = j.at("text").get<std::string>();
    } else if (j.contains("text")) {
        throw bad("only 'refine' takes text");
    }
    return a;
}

json candidate_to_json(const RetrievalCandidate& c) {
    json ancestors = json::array();
    for (const auto& a : c.ancestor_path) ancestors.push_back({{"id", a.id}, {"distance", a.distance}, {"sim", a.sim}});
    json siblings = json::array();
    for (const auto& s : c.sibling_top) siblings.push_back({{"id", s.id}, {"sim", s.sim}});
    return {{"scheme_id", c.scheme_id},       {"topic_id", c.topic_id},
            {"base_sim", c.base_sim},         {"ancestor_bonus", c.ancestor_bonus},
            {"sibling_bonus", c.sibling_bonus}, {"final_score", c.final_score},
            {"ancestor_path", ancestors},     {"sibling_top", siblings}};
}

json breakdown_to_json(const ScoreBreakdown& b) {
    json ancestors = json::array();
    for (const auto& r : b.ancestors)
        ancestors.push_back({{"id", r.id},
                             {"distance", r.distance},
                             {"weight", r.weight},
                             {"sim", r.sim},
                             {"contribution", r.contribution}});
    json siblings = json::array();
    for (const auto& r : b.siblings) siblings.push_back({{"id", r.id}, {"sim", r.sim}, {"contribution", r.contribution}});
    return {{"base_sim", b.base_sim},           {"ancestor_bonus", b.ancestor_bonus},
            {"sibling_bonus", b.sibling_bonus}, {"final_score", b.final_score},
            {"ancestors", ancestors},           {"siblings", siblings}};
}

json turn_to_json(const AgentTurn& turn) {
    json candidates = json::array();
    for (const auto& c : turn.candidates) {
        json entry = candidate_to_json(c.candidate);
        entry["pref_label"] = c.pref_label;
        entry["explanation"] = c.explanation;
        entry["breadcrumb"] = c.breadcrumb;
        entry["breakdown"] = breakdown_to_json(score_breakdown(c.candidate));
        candidates.push_back(std::move(entry));
    }
    json out{{"phase", std::string(phase_name(turn.phase))},
             {"question", turn.question},
             {"scope", turn.scope},
             {"candidates", std::move(candidates)}};
    out["notice"] = turn.notice ? json{{"code", turn.notice->code}, {"message", turn.notice->message}} : json();
    return out;
}

json entity_to_json(const ResolvedEntity& e) {
    json provenance = json::array();
    for (const auto& p : e.provenance)
        provenance.push_back(
            {{"round", p.round}, {"action", action_to_json(p.action)}, {"phase", std::string(phase_name(p.phase))}});
    return {{"scheme_id", e.scheme_id},
            {"topic_id", e.topic_id},
            {"pref_label", e.pref_label},
            {"confidence", e.confidence},
            {"provenance", std::move(provenance)}};
}

json session_to_json(const DialogueSession& s, bool include_vectors) {
    json confirmed = json::array();
    for (const auto& c : s.confirmed)
        confirmed.push_back({{"scheme_id", c.ref.scheme_id},
                             {"topic_id", c.ref.topic_id},
                             {"pref_label", c.pref_label},
                             {"score", c.score},
                             {"round", c.round}});
    json rejected = json::array();
    for (const auto& r : s.rejected) rejected.push_back(ref_to_json(r));
    json rounds = json::array();
    for (const auto& r : s.rounds)
        rounds.push_back({{"number", r.number},
                          {"action", action_to_json(r.action)},
                          {"phase", std::string(phase_name(r.phase))},
                          {"turn", turn_to_json(r.turn)}});
    json out{{"session_id", s.session_id},
             {"phase", std::string(phase_name(s.phase))},
             {"query", s.context.original_query},
             {"refinements", s.context.refinements},
             {"lambda", s.context.lambda},
             {"confirmed", std::move(confirmed)},
             {"rejected", std::move(rejected)},
             {"scope", scope_to_json(s.scope)},
             {"config", engine_config_to_json(s.config)},
             {"seed", s.rng_seed},
             {"opening", turn_to_json(s.opening)},
             {"rounds", std::move(rounds)},
             {"warnings", s.warnings}};
    if (include_vectors) {
        json confirmed_vecs = json::array();
        for (const auto& v : s.context.confirmed_vecs) confirmed_vecs.push_back(vector_to_json(v));
        out["vectors"] = {{"original", vector_to_json(s.context.original_vec)},
                          {"effective", vector_to_json(s.context.effective_vec)},
                          {"confirmed", std::move(confirmed_vecs)}};
    }
    return out;
}

}  // namespace kosmap
