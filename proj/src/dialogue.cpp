#include "kosmap/dialogue.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "kosmap/error.hpp"
#include "kosmap/explain.hpp"

namespace kosmap {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t round_seed(std::uint64_t session_seed, int round, std::string_view scheme_id) {
    return splitmix64(session_seed ^ splitmix64(static_cast<std::uint64_t>(round) + 1) ^ fnv1a64(scheme_id));
}

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string in_quotes(std::string_view s) {
    return "\"" + std::string(s) + "\"";
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += sep;
        out += p;
    }
    return out;
}

std::string capitalize(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

using IdSet = std::set<std::string, std::less<>>;

SearchScope broad_scope(const Registry& registry, const EngineConfig& config) {
    SearchScope scope;
    std::vector<std::string> names;
    for (const auto& id : registry.multi_field_ids()) {
        scope.schemes.emplace_back(id, std::nullopt);
        names.push_back(registry.at(id).graph.scheme().name);
    }
    scope.tau = config.tau_broad;
    scope.description = "all multi-field schemes (" + join(names, ", ") + ")";
    return scope;
}

// Adds the regions reachable through links to scope (whole scheme when a
// link has no entry topics).
void add_linked_regions(SearchScope& scope, const Registry& registry, const std::vector<const SchemeLink*>& links) {
    std::map<std::string, std::optional<IdSet>> regions;
    for (auto& [id, restrict] : scope.schemes) regions[id] = restrict;
    for (const SchemeLink* link : links) {
        const auto& graph = registry.at(link->to_scheme).graph;
        auto [it, inserted] = regions.try_emplace(link->to_scheme, IdSet{});
        auto& region = it->second;
        if (!region) continue;  // already the whole scheme
        if (link->entry_topics.empty()) {
            region.reset();
            continue;
        }
        for (const auto& entry : link->entry_topics)
            for (auto& id : graph.descendants(entry, true)) region->insert(std::move(id));
    }
    scope.schemes.assign(regions.begin(), regions.end());

    std::vector<std::string> names;
    for (const auto& [id, restrict] : scope.schemes) {
        std::string name = registry.at(id).graph.scheme().name;
        if (restrict) name += " (" + std::to_string(restrict->size()) + " topics)";
        names.push_back(std::move(name));
    }
    scope.description = "linked single-field schemes: " + join(names, ", ");
}

SearchScope stringent_scope(const Registry& registry, const EngineConfig& config, const TopicRef& root) {
    const auto& graph = registry.at(root.scheme_id).graph;
    SearchScope scope;
    auto below = graph.descendants(root.topic_id, false);
    scope.schemes.emplace_back(root.scheme_id, IdSet(below.begin(), below.end()));
    scope.tau = config.tau_stringent;
    scope.min_score = config.stringent_threshold;
    scope.stringent_root = root;
    scope.description = "topics beneath " + in_quotes(graph.at(root.topic_id).pref_label) + " in " + graph.scheme().name;
    return scope;
}

struct RoundResult {
    std::vector<RetrievalCandidate> candidates;
    std::optional<Notice> notice;
};

RoundResult run_retrieval(const DialogueSession& session, const Registry& registry, const SearchScope& scope,
                          int round) {
    const auto& config = session.config;
    std::set<TopicRef> excluded = session.rejected;
    for (const auto& c : session.confirmed) excluded.insert(c.ref);

    std::vector<RetrievalCandidate> merged;
    std::size_t eligible_total = 0;
    for (const auto& [scheme_id, restrict] : scope.schemes) {
        const auto& entry = registry.at(scheme_id);
        IdSet exclude;
        for (const auto& ref : excluded)
            if (ref.scheme_id == scheme_id) exclude.insert(ref.topic_id);

        std::size_t eligible = 0;
        if (restrict) {
            for (const auto& id : *restrict) eligible += exclude.count(id) ? 0 : 1;
        } else {
            for (const auto& [id, vec] : entry.index.entries()) eligible += exclude.count(id) ? 0 : 1;
        }
        if (eligible == 0) continue;
        eligible_total += eligible;

        RetrievalParams params;
        params.k = config.k;
        params.tau = scope.tau;
        params.seed = round_seed(session.rng_seed, round, scheme_id);
        if (restrict) params.restrict_to = *restrict;
        params.exclude = std::move(exclude);
        auto found = initial_search(entry.index, session.context.effective_vec, params);
        auto ranked = rerank(entry.graph, entry.index, session.context.effective_vec, std::move(found), config.rerank);
        std::move(ranked.begin(), ranked.end(), std::back_inserter(merged));
    }
    std::sort(merged.begin(), merged.end(), [](const RetrievalCandidate& a, const RetrievalCandidate& b) {
        return ranks_before(a.final_score, a.topic_id, a.scheme_id, b.final_score, b.topic_id, b.scheme_id);
    });

    RoundResult result;
    if (eligible_total == 0) {
        result.notice = Notice{"empty_scope", "No topics are left to search in " + scope.description + "."};
        return result;
    }
    if (scope.min_score) {
        const double threshold = *scope.min_score;
        std::erase_if(merged, [threshold](const RetrievalCandidate& c) { return c.final_score < threshold; });
        if (merged.empty()) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.2f", threshold);
            result.notice = Notice{"below_threshold", "No candidate in " + scope.description +
                                                          " reaches the minimum score of " + buf + "."};
            return result;
        }
    }
    if (merged.size() > config.display) merged.resize(config.display);
    result.candidates = std::move(merged);
    return result;
}

std::string compose_question(const DialogueSession& session, const Registry& registry, const AgentTurn& turn) {
    const std::string& query = session.context.original_query;
    if (turn.phase == Phase::Finalized) {
        const auto n = session.confirmed.size();
        if (n == 0) return "No topic was confirmed for " + in_quotes(query) + ". Start a new session to try again?";
        return "Resolved " + std::to_string(n) + " topic" + (n == 1 ? "" : "s") + " for " + in_quotes(query) +
               ". Anything else you would like to look up?";
    }
    if (turn.candidates.empty()) {
        std::string msg = turn.notice ? turn.notice->message + " " : std::string();
        return msg + "Would you like to broaden the search, look at a neighbouring topic, or rephrase what you mean by " +
               in_quotes(query) + "?";
    }

    std::string prefix;
    if (turn.phase == Phase::SpecializedDrilldown) {
        std::vector<std::string> names;
        for (const auto& [id, restrict] : session.scope.schemes) names.push_back(registry.at(id).graph.scheme().name);
        prefix = "Within " + join(names, " and ") + ", ";
    } else if (session.scope.stringent_root) {
        const auto& root = *session.scope.stringent_root;
        prefix = "Looking only beneath " + in_quotes(registry.at(root.scheme_id).graph.at(root.topic_id).pref_label) + ", ";
    }
    auto sentence = [&](const std::string& body) { return prefix.empty() ? capitalize(body) : prefix + body; };

    const auto& a = turn.candidates[0];
    if (turn.candidates.size() == 1)
        return sentence("does " + in_quotes(a.pref_label) + " capture what you mean by " + in_quotes(query) +
                        ", or should we look broader?");

    const auto& b = turn.candidates[1];
    if (a.candidate.scheme_id != b.candidate.scheme_id) {
        return sentence(in_quotes(a.pref_label) + " comes from " +
                        registry.at(a.candidate.scheme_id).graph.scheme().name + " while " + in_quotes(b.pref_label) +
                        " comes from " + registry.at(b.candidate.scheme_id).graph.scheme().name +
                        ": which vocabulary fits your work on " + in_quotes(query) + "?");
    }
    const auto& graph = registry.at(a.candidate.scheme_id).graph;
    const auto path_a = graph.preferred_path(a.candidate.topic_id);
    const auto path_b = graph.preferred_path(b.candidate.topic_id);
    auto label = [&](const std::string& id) { return in_quotes(graph.at(id).pref_label); };

    if (std::find(path_b.begin(), path_b.end(), path_a.back()) != path_b.end())
        return sentence(in_quotes(a.pref_label) + " is broader than " + in_quotes(b.pref_label) +
                        ": should we stay at the general level, or is the narrower topic what you mean?");
    if (std::find(path_a.begin(), path_a.end(), path_b.back()) != path_a.end())
        return sentence(in_quotes(b.pref_label) + " is broader than " + in_quotes(a.pref_label) +
                        ": is the narrower topic what you mean, or should we stay general?");
    if (path_a.front() != path_b.front())
        return sentence("is " + in_quotes(query) + " closer to " + in_quotes(a.pref_label) + " (in " +
                        label(path_a.front()) + ") or to " + in_quotes(b.pref_label) + " (in " + label(path_b.front()) +
                        ")?");
    const auto& parent_a = path_a[path_a.size() - 2];
    const auto& parent_b = path_b[path_b.size() - 2];
    if (parent_a != parent_b)
        return sentence("both candidates sit under " + label(path_a.front()) + ": do you mean " +
                        in_quotes(a.pref_label) + " (under " + label(parent_a) + ") or " + in_quotes(b.pref_label) +
                        " (under " + label(parent_b) + ")?");
    return sentence(in_quotes(a.pref_label) + " and " + in_quotes(b.pref_label) + " are both kinds of " + label(parent_a) +
                    ": which is closer to " + in_quotes(query) + ", or is it something else under " + label(parent_a) +
                    "?");
}

AgentTurn make_turn(DialogueSession& session, const Registry& registry, const SearchScope& scope, RoundResult result) {
    AgentTurn turn;
    turn.phase = session.phase;
    turn.scope = scope.description;
    turn.notice = std::move(result.notice);
    for (auto& c : result.candidates) {
        const auto& graph = registry.at(c.scheme_id).graph;
        const auto& node = graph.at(c.topic_id);
        auto explanation = explain(node, graph, session.config.explainer, session.context.original_query);
        if (explanation.warning) session.warnings.push_back(*explanation.warning);
        ShownCandidate shown;
        shown.pref_label = node.pref_label;
        shown.explanation = std::move(explanation.text);
        shown.breadcrumb = breadcrumb_labels(graph, c.topic_id);
        shown.candidate = std::move(c);
        turn.candidates.push_back(std::move(shown));
    }
    turn.question = compose_question(session, registry, turn);
    return turn;
}

// Last shown instance of each topic across the opening turn and all rounds.
std::map<TopicRef, const ShownCandidate*> shown_topics(const DialogueSession& session) {
    std::map<TopicRef, const ShownCandidate*> shown;
    auto add = [&](const AgentTurn& turn) {
        for (const auto& c : turn.candidates) shown[{c.candidate.scheme_id, c.candidate.topic_id}] = &c;
    };
    add(session.opening);
    for (const auto& r : session.rounds) add(r.turn);
    return shown;
}

TopicRef resolve_target(const DialogueSession& session, const UserAction& action) {
    const auto shown = shown_topics(session);
    std::vector<TopicRef> matches;
    for (const auto& [ref, c] : shown)
        if (ref.topic_id == action.topic_id && (action.scheme_id.empty() || ref.scheme_id == action.scheme_id))
            matches.push_back(ref);
    if (matches.empty())
        throw Error(ErrorCode::UnknownActionTarget,
                    "topic '" + action.topic_id + "' has not been shown in this session");
    if (matches.size() > 1)
        throw Error(ErrorCode::UnknownActionTarget,
                    "topic id '" + action.topic_id + "' was shown from several schemes; give a scheme_id");
    return matches.front();
}

SearchScope navigation_scope(const DialogueSession& session, const Registry& registry, const TopicRef& ref,
                             ActionKind kind) {
    const auto& graph = registry.at(ref.scheme_id).graph;
    const auto& label = graph.at(ref.topic_id).pref_label;
    IdSet ids;
    SearchScope scope;
    scope.tau = session.scope.tau;
    scope.min_score = session.scope.min_score;
    scope.stringent_root = session.scope.stringent_root;
    switch (kind) {
    case ActionKind::Broaden:
        for (const auto& a : graph.ancestors_with_distance(ref.topic_id)) ids.insert(a.id);
        for (const auto& parent : graph.at(ref.topic_id).broader)
            for (auto& s : graph.siblings(parent)) ids.insert(std::move(s));
        scope.description = "broader topics around " + in_quotes(label);
        break;
    case ActionKind::Narrow:
        for (auto& d : graph.descendants(ref.topic_id, false)) ids.insert(std::move(d));
        scope.description = "narrower topics of " + in_quotes(label);
        break;
    case ActionKind::ExploreSiblings:
        for (auto& s : graph.siblings(ref.topic_id)) ids.insert(std::move(s));
        scope.description = "sibling topics of " + in_quotes(label);
        break;
    default:
        break;
    }

    // Navigation never leaves the phase's own scope.
    auto phase_region = std::find_if(session.scope.schemes.begin(), session.scope.schemes.end(),
                                     [&](const auto& entry) { return entry.first == ref.scheme_id; });
    if (phase_region == session.scope.schemes.end()) {
        ids.clear();
    } else if (phase_region->second) {
        std::erase_if(ids, [&](const std::string& id) { return !phase_region->second->count(id); });
    }
    if (!ids.empty()) scope.schemes.emplace_back(ref.scheme_id, std::move(ids));
    return scope;
}

}  // namespace

std::string_view phase_name(Phase phase) {
    switch (phase) {
    case Phase::BroadExploration: return "broad_exploration";
    case Phase::SpecializedDrilldown: return "specialized_drilldown";
    case Phase::Finalized: return "finalized";
    }
    return "unknown";
}

std::string_view action_kind_name(ActionKind kind) {
    switch (kind) {
    case ActionKind::Confirm: return "confirm";
    case ActionKind::Reject: return "reject";
    case ActionKind::Refine: return "refine";
    case ActionKind::Broaden: return "broaden";
    case ActionKind::Narrow: return "narrow";
    case ActionKind::ExploreSiblings: return "explore_siblings";
    case ActionKind::Done: return "done";
    }
    return "unknown";
}

std::optional<ActionKind> parse_action_kind(std::string_view name) {
    for (auto kind : {ActionKind::Confirm, ActionKind::Reject, ActionKind::Refine, ActionKind::Broaden,
                      ActionKind::Narrow, ActionKind::ExploreSiblings, ActionKind::Done})
        if (action_kind_name(kind) == name) return kind;
    return std::nullopt;
}

UserAction UserAction::confirm(std::string topic_id, std::string scheme_id) {
    return {ActionKind::Confirm, std::move(topic_id), std::move(scheme_id), {}};
}
UserAction UserAction::reject(std::string topic_id, std::string scheme_id) {
    return {ActionKind::Reject, std::move(topic_id), std::move(scheme_id), {}};
}
UserAction UserAction::refine(std::string text) {
    return {ActionKind::Refine, {}, {}, std::move(text)};
}
UserAction UserAction::broaden(std::string topic_id, std::string scheme_id) {
    return {ActionKind::Broaden, std::move(topic_id), std::move(scheme_id), {}};
}
UserAction UserAction::narrow(std::string topic_id, std::string scheme_id) {
    return {ActionKind::Narrow, std::move(topic_id), std::move(scheme_id), {}};
}
UserAction UserAction::explore_siblings(std::string topic_id, std::string scheme_id) {
    return {ActionKind::ExploreSiblings, std::move(topic_id), std::move(scheme_id), {}};
}
UserAction UserAction::done() {
    return {ActionKind::Done, {}, {}, {}};
}

bool UserAction::targets_topic() const {
    return kind != ActionKind::Refine && kind != ActionKind::Done;
}

QueryContext accumulate_context(QueryContext context, const EmbeddingProvider& provider) {
    std::vector<EmbeddingVector> extra = context.confirmed_vecs;
    if (!context.refinements.empty()) {
        auto refined = provider.embed_batch(context.refinements);
        std::move(refined.begin(), refined.end(), std::back_inserter(extra));
    }
    if (extra.empty() || context.lambda == 0.0) {
        context.effective_vec = context.original_vec;
        return context;
    }
    const std::size_t dim = context.original_vec.dim();
    std::vector<double> mean(dim, 0.0);
    for (const auto& v : extra) {
        if (v.dim() != dim) throw Error(ErrorCode::DimensionMismatch, "context vectors differ in dimension");
        const auto values = v.values();
        for (std::size_t i = 0; i < dim; ++i) mean[i] += values[i];
    }
    const double n = static_cast<double>(extra.size());
    const auto original = context.original_vec.values();
    std::vector<double> blended(dim);
    for (std::size_t i = 0; i < dim; ++i)
        blended[i] = (1.0 - context.lambda) * original[i] + context.lambda * (mean[i] / n);
    context.effective_vec = EmbeddingVector::normalized(std::move(blended));
    return context;
}

std::pair<DialogueSession, AgentTurn> start_session(std::string_view query, const Registry& registry,
                                                    const EngineConfig& config, std::uint64_t seed,
                                                    std::string session_id) {
    if (blank(query)) throw Error(ErrorCode::EmptyQuery, "query is empty");
    if (registry.multi_field_ids().empty())
        throw Error(ErrorCode::NoMultiFieldScheme, "no multi-field scheme is loaded");
    config.validate();

    DialogueSession session;
    session.session_id = std::move(session_id);
    session.config = config;
    session.rng_seed = seed;
    session.context.original_query = std::string(query);
    session.context.original_vec = registry.provider().embed(query);
    session.context.effective_vec = session.context.original_vec;
    session.context.lambda = config.lambda;
    session.scope = broad_scope(registry, config);

    session.opening = make_turn(session, registry, session.scope, run_retrieval(session, registry, session.scope, 0));
    AgentTurn turn = session.opening;
    return {std::move(session), std::move(turn)};
}

std::pair<DialogueSession, AgentTurn> step(DialogueSession session, const UserAction& action,
                                           const Registry& registry) {
    if (session.phase == Phase::Finalized)
        throw Error(ErrorCode::SessionFinalized, "session '" + session.session_id + "' is finalized");

    const int number = static_cast<int>(session.rounds.size()) + 1;
    Round round;
    round.number = number;
    round.phase = session.phase;
    round.action = action;

    std::optional<TopicRef> target;
    if (action.targets_topic()) {
        target = resolve_target(session, action);
        round.action.scheme_id = target->scheme_id;
    }

    AgentTurn turn;
    switch (action.kind) {
    case ActionKind::Done: {
        session.phase = Phase::Finalized;
        turn.phase = Phase::Finalized;
        turn.scope = "";
        turn.question = compose_question(session, registry, turn);
        break;
    }
    case ActionKind::Refine: {
        if (blank(action.text)) throw Error(ErrorCode::EmptyQuery, "refinement text is empty");
        session.context.refinements.push_back(action.text);
        session.context = accumulate_context(std::move(session.context), registry.provider());
        turn = make_turn(session, registry, session.scope, run_retrieval(session, registry, session.scope, number));
        break;
    }
    case ActionKind::Reject: {
        session.rejected.insert(*target);
        turn = make_turn(session, registry, session.scope, run_retrieval(session, registry, session.scope, number));
        break;
    }
    case ActionKind::Confirm: {
        const auto shown = shown_topics(session);
        const ShownCandidate* last = shown.at(*target);
        const bool already = std::any_of(session.confirmed.begin(), session.confirmed.end(),
                                         [&](const ConfirmedTopic& c) { return c.ref == *target; });
        if (!already) {
            session.confirmed.push_back({*target, last->pref_label, last->candidate.final_score, number});
            session.context.confirmed_vecs.push_back(registry.at(target->scheme_id).index.at(target->topic_id));
            session.context = accumulate_context(std::move(session.context), registry.provider());
        }
        const auto links = registry.links_from(target->scheme_id, target->topic_id);
        if (session.phase == Phase::BroadExploration) {
            if (!links.empty()) {
                session.phase = Phase::SpecializedDrilldown;
                session.scope = SearchScope{};
                session.scope.tau = session.config.tau_drilldown;
                add_linked_regions(session.scope, registry, links);
            } else {
                session.scope = stringent_scope(registry, session.config, *target);
            }
        } else if (!links.empty()) {
            add_linked_regions(session.scope, registry, links);
        }
        turn = make_turn(session, registry, session.scope, run_retrieval(session, registry, session.scope, number));
        break;
    }
    case ActionKind::Broaden:
    case ActionKind::Narrow:
    case ActionKind::ExploreSiblings: {
        const SearchScope scope = navigation_scope(session, registry, *target, action.kind);
        turn = make_turn(session, registry, scope, run_retrieval(session, registry, scope, number));
        break;
    }
    }

    round.turn = turn;
    session.rounds.push_back(std::move(round));
    return {std::move(session), std::move(turn)};
}

std::vector<ResolvedEntity> finalize(const DialogueSession& session) {
    if (session.phase != Phase::Finalized)
        throw Error(ErrorCode::NotFinalized, "session '" + session.session_id + "' is not finalized");
    std::vector<ResolvedEntity> out;
    for (auto it = session.confirmed.rbegin(); it != session.confirmed.rend(); ++it) {
        ResolvedEntity e;
        e.topic_id = it->ref.topic_id;
        e.scheme_id = it->ref.scheme_id;
        e.pref_label = it->pref_label;
        e.confidence = it->score;
        for (const auto& r : session.rounds)
            if (r.number <= it->round) e.provenance.push_back({r.number, r.action, r.phase});
        out.push_back(std::move(e));
    }
    return out;
}

DialogueSession replay(std::string_view query, const std::vector<UserAction>& actions, const Registry& registry,
                       const EngineConfig& config, std::uint64_t seed, std::string session_id) {
    auto session = start_session(query, registry, config, seed, std::move(session_id)).first;
    for (const auto& action : actions) session = step(std::move(session), action, registry).first;
    return session;
}

}  // namespace kosmap
