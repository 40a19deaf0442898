#pragma once
// Multi-round topic dialogue.
//
// BroadExploration searches every multi-field scheme. Confirming a topic
// that has a scheme link moves the session to SpecializedDrilldown, scoped to
// the linked single-field schemes. Confirming a topic without a link keeps
// the session in BroadExploration under stringent filtering: strict
// descendants of the confirmed topic only, a lower temperature and a minimum
// final score. Done finalizes. Confirmations and refinements are blended
// into the query vector for later rounds.
//
// Sessions are values: step() returns a new session. The round list is the
// source of truth; replay() rebuilds a session from its actions.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "kosmap/config.hpp"
#include "kosmap/registry.hpp"
#include "kosmap/retrieval.hpp"

namespace kosmap {

enum class Phase { BroadExploration, SpecializedDrilldown, Finalized };

std::string_view phase_name(Phase phase);  // "broad_exploration" | "specialized_drilldown" | "finalized"

struct TopicRef {
    std::string scheme_id;
    std::string topic_id;

    auto operator<=>(const TopicRef&) const = default;
};

enum class ActionKind { Confirm, Reject, Refine, Broaden, Narrow, ExploreSiblings, Done };

std::string_view action_kind_name(ActionKind kind);  // "confirm", "reject", ... "explore_siblings", "done"
std::optional<ActionKind> parse_action_kind(std::string_view name);

struct UserAction {
    ActionKind kind = ActionKind::Done;
    std::string topic_id;   // topic-targeting kinds
    std::string scheme_id;  // optional; inferred from shown candidates when empty
    std::string text;       // Refine

    static UserAction confirm(std::string topic_id, std::string scheme_id = {});
    static UserAction reject(std::string topic_id, std::string scheme_id = {});
    static UserAction refine(std::string text);
    static UserAction broaden(std::string topic_id, std::string scheme_id = {});
    static UserAction narrow(std::string topic_id, std::string scheme_id = {});
    static UserAction explore_siblings(std::string topic_id, std::string scheme_id = {});
    static UserAction done();

    bool targets_topic() const;
    bool operator==(const UserAction&) const = default;
};

struct ShownCandidate {
    RetrievalCandidate candidate;
    std::string pref_label;
    std::string explanation;
    std::vector<std::string> breadcrumb;  // root-to-parent labels
};

struct Notice {
    std::string code;  // "empty_scope" | "below_threshold"
    std::string message;
};

struct AgentTurn {
    Phase phase = Phase::BroadExploration;
    std::string question;
    std::string scope;  // human-readable description of what was searched
    std::vector<ShownCandidate> candidates;
    std::optional<Notice> notice;
};

struct Round {
    int number = 0;  // 1-based
    UserAction action;
    Phase phase = Phase::BroadExploration;  // phase the action was taken in
    AgentTurn turn;
};

struct QueryContext {
    std::string original_query;
    EmbeddingVector original_vec;
    std::vector<std::string> refinements;
    std::vector<EmbeddingVector> confirmed_vecs;
    EmbeddingVector effective_vec;
    double lambda = 0.4;
};

// effective = normalize((1 - lambda) * original + lambda * mean(confirmed ∪ refinement embeddings));
// effective == original when that set is empty or lambda == 0.
QueryContext accumulate_context(QueryContext context, const EmbeddingProvider& provider);

// Where the current phase searches: per scheme, either the whole scheme
// (nullopt) or a restricted id set.
struct SearchScope {
    std::vector<std::pair<std::string, std::optional<std::set<std::string, std::less<>>>>> schemes;
    double tau = 0.0;
    std::optional<double> min_score;
    std::optional<TopicRef> stringent_root;
    std::string description;
};

struct ConfirmedTopic {
    TopicRef ref;
    std::string pref_label;
    double score = 0.0;
    int round = 0;
};

struct DialogueSession {
    std::string session_id;
    Phase phase = Phase::BroadExploration;
    QueryContext context;
    AgentTurn opening;
    std::vector<Round> rounds;
    std::vector<ConfirmedTopic> confirmed;
    std::set<TopicRef> rejected;
    SearchScope scope;
    EngineConfig config;
    std::uint64_t rng_seed = 0;
    std::vector<std::string> warnings;  // explainer fallbacks and similar
};

struct ProvenanceEntry {
    int round = 0;
    UserAction action;
    Phase phase = Phase::BroadExploration;
};

struct ResolvedEntity {
    std::string topic_id;
    std::string scheme_id;
    std::string pref_label;
    double confidence = 0.0;
    std::vector<ProvenanceEntry> provenance;
};

// Throws EmptyQuery, NoMultiFieldScheme, or provider errors.
std::pair<DialogueSession, AgentTurn> start_session(std::string_view query, const Registry& registry,
                                                    const EngineConfig& config, std::uint64_t seed,
                                                    std::string session_id = {});

// Throws SessionFinalized, UnknownActionTarget, EmptyQuery (blank refinement).
// An empty restriction is not an error: the turn carries an "empty_scope" notice.
std::pair<DialogueSession, AgentTurn> step(DialogueSession session, const UserAction& action,
                                           const Registry& registry);

// Most recently confirmed first. Throws NotFinalized.
std::vector<ResolvedEntity> finalize(const DialogueSession& session);

DialogueSession replay(std::string_view query, const std::vector<UserAction>& actions, const Registry& registry,
                       const EngineConfig& config, std::uint64_t seed, std::string session_id = {});

// Canonical JSON forms. Field order is fixed so identical sessions serialize
// to identical bytes.
nlohmann::json action_to_json(const UserAction& action);
UserAction action_from_json(const nlohmann::json& j);  // throws SchemaViolation
nlohmann::json turn_to_json(const AgentTurn& turn);
nlohmann::json candidate_to_json(const RetrievalCandidate& candidate);
nlohmann::json breakdown_to_json(const ScoreBreakdown& breakdown);
nlohmann::json entity_to_json(const ResolvedEntity& entity);
// include_vectors adds the query vectors (needed for byte-level comparison).
nlohmann::json session_to_json(const DialogueSession& session, bool include_vectors);

}  // namespace kosmap
