#include "kosmap/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "kosmap/error.hpp"

namespace kosmap {

using nlohmann::json;

namespace {

constexpr const char* kIndexFormat = "kosmap.topic_index.v1";

// Uniform double in [0, 1) from the top 53 bits; independent of the
// standard library's distribution implementations.
double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

struct Scored {
    const std::string* id;
    double sim;
};

}  // namespace

bool ranks_before(double score_a, const std::string& topic_a, const std::string& scheme_a, double score_b,
                  const std::string& topic_b, const std::string& scheme_b) {
    if (score_a != score_b) return score_a > score_b;
    if (topic_a != topic_b) return topic_a < topic_b;
    return scheme_a < scheme_b;
}

TopicIndex::TopicIndex(std::string scheme_id, std::size_t dim, std::string provider_fingerprint, EntryMap entries)
    : scheme_id_(std::move(scheme_id)), dim_(dim), fingerprint_(std::move(provider_fingerprint)),
      entries_(std::move(entries)) {
    for (const auto& [id, vec] : entries_)
        if (vec.dim() != dim_)
            throw Error(ErrorCode::DimensionMismatch, "index entry '" + id + "' has dim " + std::to_string(vec.dim()) +
                                                          ", expected " + std::to_string(dim_));
}

const EmbeddingVector* TopicIndex::find(std::string_view topic_id) const {
    auto it = entries_.find(topic_id);
    return it == entries_.end() ? nullptr : &it->second;
}

const EmbeddingVector& TopicIndex::at(std::string_view topic_id) const {
    if (const auto* v = find(topic_id)) return *v;
    throw Error(ErrorCode::UnknownTopic,
                "topic '" + std::string(topic_id) + "' is not in the index of scheme '" + scheme_id_ + "'");
}

void RetrievalParams::validate() const {
    if (k < 1) throw Error(ErrorCode::InvalidConfig, "k must be >= 1");
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw Error(ErrorCode::InvalidConfig, "tau must be a finite value >= 0");
    if (restrict_to && restrict_to->empty())
        throw Error(ErrorCode::InvalidConfig, "restrict_to, when present, must be non-empty");
}

void RerankParams::validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw Error(ErrorCode::InvalidConfig, "alpha must be >= 0");
    if (!(beta > 0.0 && beta <= 1.0)) throw Error(ErrorCode::InvalidConfig, "beta must be in (0, 1]");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw Error(ErrorCode::InvalidConfig, "gamma must be >= 0");
    if (m < 1) throw Error(ErrorCode::InvalidConfig, "m must be >= 1");
}

std::string topic_embedding_text(const TopicNode& node) {
    std::vector<std::string> parts;
    if (!node.pref_label.empty()) parts.push_back(node.pref_label);
    std::string alts;
    for (const auto& alt : node.alt_labels) {
        if (alt.empty()) continue;
        if (!alts.empty()) alts += ", ";
        alts += alt;
    }
    if (!alts.empty()) parts.push_back(std::move(alts));
    if (!node.definition.empty()) parts.push_back(node.definition);
    std::string text;
    for (const auto& p : parts) {
        if (!text.empty()) text += "; ";
        text += p;
    }
    return text;
}

TopicIndex build_index(const KosGraph& graph, const EmbeddingProvider& provider) {
    const auto report = validate(graph);
    if (!report.ok())
        throw Error(ErrorCode::SchemaViolation, "cannot index scheme '" + graph.scheme().id + "': " +
                                                    std::to_string(report.findings.size()) + " validation finding(s)");
    TopicIndex::EntryMap entries;
    for (const auto& [id, node] : graph.nodes()) {
        try {
            entries.emplace(id, provider.embed(topic_embedding_text(node)));
        } catch (const Error& e) {
            throw Error(e.code(), "topic '" + id + "': " + e.what());
        }
    }
    return TopicIndex(graph.scheme().id, provider.dim(), provider.fingerprint(), std::move(entries));
}

std::vector<RetrievalCandidate> initial_search(const TopicIndex& index, const EmbeddingVector& query,
                                               const RetrievalParams& params) {
    params.validate();
    if (index.size() == 0) throw Error(ErrorCode::EmptyIndex, "index of scheme '" + index.scheme_id() + "' is empty");
    if (query.dim() != index.dim())
        throw Error(ErrorCode::DimensionMismatch, "query dim " + std::to_string(query.dim()) + " vs index dim " +
                                                      std::to_string(index.dim()));
    if (params.restrict_to) {
        for (const auto& id : *params.restrict_to)
            if (!index.find(id))
                throw Error(ErrorCode::UnknownRestrictedTopic,
                            "restricted topic '" + id + "' is not in scheme '" + index.scheme_id() + "'");
    }

    std::vector<Scored> pool;
    for (const auto& [id, vec] : index.entries()) {
        if (params.restrict_to && !params.restrict_to->count(id)) continue;
        if (params.exclude.count(id)) continue;
        pool.push_back({&id, cosine(query, vec)});
    }

    auto by_sim = [](const Scored& a, const Scored& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        return *a.id < *b.id;
    };

    std::vector<Scored> chosen;
    const std::size_t take = std::min(params.k, pool.size());
    if (params.tau == 0.0) {
        std::sort(pool.begin(), pool.end(), by_sim);
        chosen.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
    } else {
        // pool is in id order; weights are shifted by the max for stability.
        double max_sim = -2.0;
        for (const auto& s : pool) max_sim = std::max(max_sim, s.sim);
        std::vector<double> weight(pool.size());
        for (std::size_t i = 0; i < pool.size(); ++i) weight[i] = std::exp((pool[i].sim - max_sim) / params.tau);
        std::vector<bool> taken(pool.size(), false);
        std::mt19937_64 gen(params.seed);
        for (std::size_t draw = 0; draw < take; ++draw) {
            double total = 0.0;
            for (std::size_t i = 0; i < pool.size(); ++i)
                if (!taken[i]) total += weight[i];
            const double u = uniform01(gen);
            std::size_t pick = pool.size();
            if (total > 0.0) {
                const double target = u * total;
                double cumulative = 0.0;
                for (std::size_t i = 0; i < pool.size(); ++i) {
                    if (taken[i]) continue;
                    cumulative += weight[i];
                    pick = i;
                    if (cumulative > target) break;
                }
            } else {
                // Every remaining weight underflowed: fall back to the best remaining.
                for (std::size_t i = 0; i < pool.size(); ++i)
                    if (!taken[i] && (pick == pool.size() || by_sim(pool[i], pool[pick]))) pick = i;
            }
            taken[pick] = true;
            chosen.push_back(pool[pick]);
        }
        std::sort(chosen.begin(), chosen.end(), by_sim);
    }

    std::vector<RetrievalCandidate> out;
    out.reserve(chosen.size());
    for (const auto& s : chosen) {
        RetrievalCandidate c;
        c.topic_id = *s.id;
        c.scheme_id = index.scheme_id();
        c.base_sim = s.sim;
        c.final_score = s.sim;
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<RetrievalCandidate> rerank(const KosGraph& graph, const TopicIndex& index, const EmbeddingVector& query,
                                       std::vector<RetrievalCandidate> candidates, const RerankParams& params) {
    params.validate();
    if (query.dim() != index.dim())
        throw Error(ErrorCode::DimensionMismatch, "query dim " + std::to_string(query.dim()) + " vs index dim " +
                                                      std::to_string(index.dim()));
    for (auto& c : candidates) {
        graph.at(c.topic_id);
        c.scheme_id = graph.scheme().id;
        c.weights = params;
        c.base_sim = cosine(query, index.at(c.topic_id));

        c.ancestor_path.clear();
        double ancestor_sum = 0.0;
        for (const auto& a : graph.ancestors_with_distance(c.topic_id)) {
            const double sim = cosine(query, index.at(a.id));
            c.ancestor_path.push_back({a.id, a.distance, sim});
            ancestor_sum += std::pow(params.beta, a.distance) * sim;
        }
        c.ancestor_bonus = params.alpha * ancestor_sum;

        std::vector<SiblingTerm> sibs;
        for (const auto& s : graph.siblings(c.topic_id)) {
            const double sim = cosine(query, index.at(s));
            if (sim >= 0.0) sibs.push_back({s, sim});
        }
        std::sort(sibs.begin(), sibs.end(), [](const SiblingTerm& a, const SiblingTerm& b) {
            if (a.sim != b.sim) return a.sim > b.sim;
            return a.id < b.id;
        });
        if (sibs.size() > params.m) sibs.resize(params.m);
        double sibling_sum = 0.0;
        for (const auto& s : sibs) sibling_sum += s.sim;
        c.sibling_bonus = sibs.empty() ? 0.0 : params.gamma * (sibling_sum / static_cast<double>(sibs.size()));
        c.sibling_top = std::move(sibs);

        c.final_score = c.base_sim + c.ancestor_bonus + c.sibling_bonus;
    }
    std::sort(candidates.begin(), candidates.end(), [](const RetrievalCandidate& a, const RetrievalCandidate& b) {
        return ranks_before(a.final_score, a.topic_id, a.scheme_id, b.final_score, b.topic_id, b.scheme_id);
    });
    return candidates;
}

ScoreBreakdown score_breakdown(const RetrievalCandidate& candidate) {
    ScoreBreakdown b;
    b.topic_id = candidate.topic_id;
    b.scheme_id = candidate.scheme_id;
    b.base_sim = candidate.base_sim;
    b.ancestor_bonus = candidate.ancestor_bonus;
    b.sibling_bonus = candidate.sibling_bonus;
    b.final_score = candidate.final_score;
    const auto& w = candidate.weights;
    if (w.alpha != 0.0) {
        for (const auto& a : candidate.ancestor_path) {
            const double weight = std::pow(w.beta, a.distance);
            b.ancestors.push_back({a.id, a.distance, weight, a.sim, w.alpha * weight * a.sim});
        }
    }
    if (w.gamma != 0.0 && !candidate.sibling_top.empty()) {
        const double n = static_cast<double>(candidate.sibling_top.size());
        for (const auto& s : candidate.sibling_top) b.siblings.push_back({s.id, s.sim, w.gamma * s.sim / n});
    }
    return b;
}

std::string serialize_index(const TopicIndex& index) {
    json entries = json::array();
    for (const auto& [id, vec] : index.entries()) {
        json values = json::array();
        for (double x : vec.values()) values.push_back(x);
        entries.push_back({{"topic_id", id}, {"vector", std::move(values)}});
    }
    json doc{{"format", kIndexFormat},
             {"scheme_id", index.scheme_id()},
             {"dim", index.dim()},
             {"provider_fingerprint", index.provider_fingerprint()},
             {"entries", std::move(entries)}};
    return doc.dump() + "\n";
}

TopicIndex load_index(std::string_view text, const std::string& expected_fingerprint) {
    json doc;
    try {
        doc = json::parse(text);
        if (doc.at("format").get<std::string>() != kIndexFormat)
            throw Error(ErrorCode::SchemaViolation, "unsupported index snapshot format");
        const auto fingerprint = doc.at("provider_fingerprint").get<std::string>();
        if (fingerprint != expected_fingerprint)
            throw Error(ErrorCode::FingerprintMismatch, "index snapshot was built with '" + fingerprint +
                                                            "' but the active provider is '" + expected_fingerprint +
                                                            "'");
        const auto dim = doc.at("dim").get<std::size_t>();
        TopicIndex::EntryMap entries;
        for (const auto& e : doc.at("entries"))
            entries.emplace(e.at("topic_id").get<std::string>(),
                            EmbeddingVector::from_unit(e.at("vector").get<std::vector<double>>()));
        return TopicIndex(doc.at("scheme_id").get<std::string>(), dim, fingerprint, std::move(entries));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("malformed index snapshot: ") + e.what());
    }
}

}  // namespace kosmap
