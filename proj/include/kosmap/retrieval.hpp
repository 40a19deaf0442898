#pragma once
// Two-stage topic retrieval.
//
// Stage 1 (initial_search) scores every eligible topic by cosine similarity
// to the query. With tau == 0 it returns the deterministic top-k; with
// tau > 0 it samples k topics without replacement from the softmax
// p(t) ~ exp(sim(q,t) / tau), so larger tau yields more diverse candidates.
//
// Stage 2 (rerank) rescoring:
//   final(t) = sim(q,t)
//            + alpha * sum over ancestors a of beta^d(t,a) * sim(q,a)
//            + gamma * mean(top-m non-negative sim(q,s) over siblings s)
// where d is the shortest broader-path distance (1 for a parent) and each
// ancestor counts once.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kosmap/embedding.hpp"
#include "kosmap/kos_model.hpp"

namespace kosmap {

class TopicIndex {
public:
    using EntryMap = std::map<std::string, EmbeddingVector, std::less<>>;

    TopicIndex() = default;
    // Throws DimensionMismatch if any entry's dim differs from dim.
    TopicIndex(std::string scheme_id, std::size_t dim, std::string provider_fingerprint, EntryMap entries);

    const std::string& scheme_id() const { return scheme_id_; }
    std::size_t dim() const { return dim_; }
    const std::string& provider_fingerprint() const { return fingerprint_; }
    const EntryMap& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    const EmbeddingVector* find(std::string_view topic_id) const;
    const EmbeddingVector& at(std::string_view topic_id) const;  // throws UnknownTopic

    bool operator==(const TopicIndex&) const = default;

private:
    std::string scheme_id_;
    std::size_t dim_ = 0;
    std::string fingerprint_;
    EntryMap entries_;
};

struct RetrievalParams {
    std::size_t k = 10;
    double tau = 0.0;
    std::uint64_t seed = 0;
    std::optional<std::set<std::string, std::less<>>> restrict_to;
    std::set<std::string, std::less<>> exclude;  // never returned

    void validate() const;  // throws InvalidConfig
};

struct RerankParams {
    double alpha = 0.3;
    double beta = 0.5;
    double gamma = 0.1;
    std::size_t m = 3;

    void validate() const;  // throws InvalidConfig
    bool operator==(const RerankParams&) const = default;
};

struct AncestorTerm {
    std::string id;
    int distance = 0;
    double sim = 0.0;
};

struct SiblingTerm {
    std::string id;
    double sim = 0.0;
};

struct RetrievalCandidate {
    std::string topic_id;
    std::string scheme_id;
    double base_sim = 0.0;
    double ancestor_bonus = 0.0;
    double sibling_bonus = 0.0;
    double final_score = 0.0;
    std::vector<AncestorTerm> ancestor_path;  // ancestors_with_distance order
    std::vector<SiblingTerm> sibling_top;     // the siblings averaged into the bonus
    RerankParams weights;                     // parameters the bonuses were computed with
};

struct ScoreBreakdown {
    struct AncestorRow {
        std::string id;
        int distance = 0;
        double weight = 0.0;  // beta^d
        double sim = 0.0;
        double contribution = 0.0;  // alpha * beta^d * sim
    };
    struct SiblingRow {
        std::string id;
        double sim = 0.0;
        double contribution = 0.0;  // gamma * sim / |top-m|
    };

    std::string topic_id;
    std::string scheme_id;
    double base_sim = 0.0;
    std::vector<AncestorRow> ancestors;
    std::vector<SiblingRow> siblings;
    double ancestor_bonus = 0.0;
    double sibling_bonus = 0.0;
    double final_score = 0.0;
};

// pref_label; alt labels joined by ", "; definition. Empty parts are skipped.
std::string topic_embedding_text(const TopicNode& node);

// Requires a graph with zero validation findings. Provider failures are
// rethrown with the topic id prepended to the message.
TopicIndex build_index(const KosGraph& graph, const EmbeddingProvider& provider);

// Candidates ordered by base_sim descending, topic id ascending; bonuses zero.
std::vector<RetrievalCandidate> initial_search(const TopicIndex& index, const EmbeddingVector& query,
                                               const RetrievalParams& params);

// Rescores the same candidates and sorts by final_score descending, topic id
// ascending.
std::vector<RetrievalCandidate> rerank(const KosGraph& graph, const TopicIndex& index, const EmbeddingVector& query,
                                       std::vector<RetrievalCandidate> candidates, const RerankParams& params);

ScoreBreakdown score_breakdown(const RetrievalCandidate& candidate);

// Total order used for every candidate list: score descending, then topic id,
// then scheme id.
bool ranks_before(double score_a, const std::string& topic_a, const std::string& scheme_a, double score_b,
                  const std::string& topic_b, const std::string& scheme_b);

// JSON snapshot: {format, scheme_id, dim, provider_fingerprint, entries:[{topic_id, vector}]}.
std::string serialize_index(const TopicIndex& index);
// Throws FingerprintMismatch when the snapshot was built by another provider.
TopicIndex load_index(std::string_view text, const std::string& expected_fingerprint);

}  // namespace kosmap
