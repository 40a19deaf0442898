#pragma once
// Knowledge organization systems as polyhierarchical graphs of topic concepts.
//
// A KosGraph is immutable once built. Nodes live in an ordered map so every
// traversal and every listing is lexicographic by topic id.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kosmap {

enum class SchemeKind { MultiField, SingleField };

std::string_view scheme_kind_name(SchemeKind kind);  // "multi_field" | "single_field"
std::optional<SchemeKind> parse_scheme_kind(std::string_view name);

struct KosScheme {
    std::string id;
    std::string name;
    SchemeKind kind = SchemeKind::MultiField;
    std::vector<std::string> field_tags;

    bool operator==(const KosScheme&) const = default;
};

struct TopicNode {
    std::string id;
    std::string scheme_id;
    std::string pref_label;
    std::vector<std::string> alt_labels;
    std::string definition;
    std::vector<std::string> broader;   // parent ids
    std::vector<std::string> narrower;  // child ids, inverse of broader

    bool operator==(const TopicNode&) const = default;
};

// Parser output before edges are reconciled. Explicit narrower statements
// (SKOS) are folded into the children's broader lists when the graph is built.
struct TaxonomyDraft {
    KosScheme scheme;
    std::vector<TopicNode> topics;
};

struct AncestorDistance {
    std::string id;
    int distance = 0;  // 1 for an immediate parent

    bool operator==(const AncestorDistance&) const = default;
};

enum class FindingKind { Cycle, DanglingReference, BidirectionalInconsistency, EmptyLabel };

std::string_view finding_kind_name(FindingKind kind);

struct Finding {
    FindingKind kind;
    std::vector<std::string> ids;  // cycle path, or (from, to) for edge findings
    std::string message;
};

struct ValidationReport {
    std::vector<Finding> findings;

    bool ok() const { return findings.empty(); }
    std::size_t count(FindingKind kind) const;
};

class KosGraph {
public:
    using NodeMap = std::map<std::string, TopicNode, std::less<>>;

    KosGraph() = default;

    // Reconciles broader/narrower in both directions, then requires zero
    // findings from validate_assertions() and validate(). Throws Error
    // (BidirectionalInconsistency, MissingPrefLabel, DanglingReference,
    // CycleDetected) naming the first offending ids.
    static KosGraph build(TaxonomyDraft draft);

    // Same reconciliation as build() but never throws on structural
    // problems; used by ingestion to report every finding at once.
    static KosGraph reconcile(TaxonomyDraft draft);

    // Takes the nodes exactly as given, with no edge derivation.
    static KosGraph assemble_unchecked(KosScheme scheme, std::vector<TopicNode> nodes);

    const KosScheme& scheme() const { return scheme_; }
    const NodeMap& nodes() const { return nodes_; }
    const std::vector<std::string>& roots() const { return roots_; }
    std::size_t size() const { return nodes_.size(); }

    bool contains(std::string_view id) const { return nodes_.find(id) != nodes_.end(); }
    const TopicNode* find(std::string_view id) const;
    const TopicNode& at(std::string_view id) const;  // throws UnknownTopic

    // Every distinct ancestor once, at its shortest broader-path distance;
    // sorted by (distance, id).
    std::vector<AncestorDistance> ancestors_with_distance(std::string_view id) const;

    // Nodes sharing at least one immediate parent, excluding id itself.
    std::vector<std::string> siblings(std::string_view id) const;

    // Narrower closure, sorted. include_self adds id itself.
    std::vector<std::string> descendants(std::string_view id, bool include_self) const;

    // One root-to-topic id path (inclusive). At each step upward the parent
    // closest to a root wins, ties broken by id.
    std::vector<std::string> preferred_path(std::string_view id) const;

    bool operator==(const KosGraph& other) const {
        return scheme_ == other.scheme_ && nodes_ == other.nodes_;
    }

private:
    KosGraph(KosScheme scheme, NodeMap nodes);

    KosScheme scheme_;
    NodeMap nodes_;
    std::vector<std::string> roots_;
};

ValidationReport validate(const KosGraph& graph);

// Checks the edges as authored, before reconciliation. When both ends of a
// parent/child pair state their relations and they disagree (the parent
// lists narrower topics that omit the child, or the child lists broader
// topics that omit the parent), a BidirectionalInconsistency is reported.
// One-sided statements are fine: reconciliation derives the inverse.
ValidationReport validate_assertions(const TaxonomyDraft& draft);

// Crosswalk from a multi-field topic into a single-field scheme.
struct SchemeLink {
    std::string from_scheme;
    std::string from_topic;
    std::string to_scheme;
    std::vector<std::string> entry_topics;  // empty: whole target scheme

    bool operator==(const SchemeLink&) const = default;
};

}  // namespace kosmap
