#include "kosmap/kos_model.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <functional>
#include <set>
#include <unordered_map>

#include "kosmap/error.hpp"

namespace kosmap {

namespace {

void sort_unique(std::vector<std::string>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string join_path(const std::vector<std::string>& ids) {
    std::string out;
    for (const auto& id : ids) {
        if (!out.empty()) out += " -> ";
        out += id;
    }
    return out;
}

}  // namespace

std::string_view scheme_kind_name(SchemeKind kind) {
    return kind == SchemeKind::MultiField ? "multi_field" : "single_field";
}

std::optional<SchemeKind> parse_scheme_kind(std::string_view name) {
    if (name == "multi_field") return SchemeKind::MultiField;
    if (name == "single_field") return SchemeKind::SingleField;
    return std::nullopt;
}

std::string_view finding_kind_name(FindingKind kind) {
    switch (kind) {
    case FindingKind::Cycle: return "cycle_detected";
    case FindingKind::DanglingReference: return "dangling_reference";
    case FindingKind::BidirectionalInconsistency: return "bidirectional_inconsistency";
    case FindingKind::EmptyLabel: return "empty_label";
    }
    return "unknown";
}

std::size_t ValidationReport::count(FindingKind kind) const {
    return static_cast<std::size_t>(std::count_if(
        findings.begin(), findings.end(), [kind](const Finding& f) { return f.kind == kind; }));
}

KosGraph::KosGraph(KosScheme scheme, NodeMap nodes)
    : scheme_(std::move(scheme)), nodes_(std::move(nodes)) {
    for (const auto& [id, node] : nodes_)
        if (node.broader.empty()) roots_.push_back(id);
}

KosGraph KosGraph::reconcile(TaxonomyDraft draft) {
    NodeMap nodes;
    std::vector<std::pair<std::string, std::string>> edges;  // (parent, child)
    for (auto& topic : draft.topics) {
        for (const auto& parent : topic.broader) edges.emplace_back(parent, topic.id);
        for (const auto& child : topic.narrower) edges.emplace_back(topic.id, child);
        topic.broader.clear();
        topic.narrower.clear();
        topic.scheme_id = draft.scheme.id;
        nodes.try_emplace(topic.id, std::move(topic));
    }
    for (const auto& [parent, child] : edges) {
        if (auto it = nodes.find(child); it != nodes.end()) it->second.broader.push_back(parent);
        if (auto it = nodes.find(parent); it != nodes.end()) it->second.narrower.push_back(child);
    }
    for (auto& [id, node] : nodes) {
        sort_unique(node.broader);
        sort_unique(node.narrower);
    }
    return KosGraph(std::move(draft.scheme), std::move(nodes));
}

KosGraph KosGraph::build(TaxonomyDraft draft) {
    const auto asserted = validate_assertions(draft);
    if (!asserted.ok()) throw Error(ErrorCode::BidirectionalInconsistency, asserted.findings.front().message);
    KosGraph graph = reconcile(std::move(draft));
    const auto report = validate(graph);
    for (auto kind : {FindingKind::EmptyLabel, FindingKind::DanglingReference, FindingKind::Cycle,
                      FindingKind::BidirectionalInconsistency}) {
        for (const auto& f : report.findings) {
            if (f.kind != kind) continue;
            switch (kind) {
            case FindingKind::EmptyLabel: throw Error(ErrorCode::MissingPrefLabel, f.message);
            case FindingKind::DanglingReference: throw Error(ErrorCode::DanglingReference, f.message);
            case FindingKind::Cycle: throw Error(ErrorCode::CycleDetected, f.message);
            case FindingKind::BidirectionalInconsistency: throw Error(ErrorCode::BidirectionalInconsistency, f.message);
            }
        }
    }
    return graph;
}

KosGraph KosGraph::assemble_unchecked(KosScheme scheme, std::vector<TopicNode> nodes) {
    NodeMap map;
    for (auto& node : nodes) map.try_emplace(node.id, std::move(node));
    return KosGraph(std::move(scheme), std::move(map));
}

const TopicNode* KosGraph::find(std::string_view id) const {
    auto it = nodes_.find(id);
    return it == nodes_.end() ? nullptr : &it->second;
}

const TopicNode& KosGraph::at(std::string_view id) const {
    if (const auto* node = find(id)) return *node;
    throw Error(ErrorCode::UnknownTopic,
                "unknown topic '" + std::string(id) + "' in scheme '" + scheme_.id + "'");
}

std::vector<AncestorDistance> KosGraph::ancestors_with_distance(std::string_view id) const {
    const TopicNode& start = at(id);
    std::map<std::string, int, std::less<>> dist;
    std::deque<const TopicNode*> queue{&start};
    std::unordered_map<const TopicNode*, int> depth{{&start, 0}};
    while (!queue.empty()) {
        const TopicNode* node = queue.front();
        queue.pop_front();
        const int d = depth[node] + 1;
        for (const auto& parent_id : node->broader) {
            const TopicNode* parent = find(parent_id);
            if (parent == nullptr || parent == &start || dist.count(parent_id)) continue;
            dist.emplace(parent_id, d);
            depth[parent] = d;
            queue.push_back(parent);
        }
    }
    std::vector<AncestorDistance> out;
    out.reserve(dist.size());
    for (const auto& [ancestor, d] : dist) out.push_back({ancestor, d});
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.distance < b.distance; });
    return out;
}

std::vector<std::string> KosGraph::siblings(std::string_view id) const {
    const TopicNode& node = at(id);
    std::vector<std::string> out;
    for (const auto& parent_id : node.broader) {
        const TopicNode* parent = find(parent_id);
        if (parent == nullptr) continue;
        for (const auto& child : parent->narrower)
            if (child != node.id) out.push_back(child);
    }
    sort_unique(out);
    return out;
}

std::vector<std::string> KosGraph::descendants(std::string_view id, bool include_self) const {
    const TopicNode& start = at(id);
    std::set<std::string, std::less<>> seen;
    std::vector<const TopicNode*> stack{&start};
    while (!stack.empty()) {
        const TopicNode* node = stack.back();
        stack.pop_back();
        for (const auto& child_id : node->narrower) {
            const TopicNode* child = find(child_id);
            if (child == nullptr || !seen.insert(child_id).second) continue;
            stack.push_back(child);
        }
    }
    if (include_self)
        seen.insert(start.id);
    else
        seen.erase(start.id);
    return {seen.begin(), seen.end()};
}

std::vector<std::string> KosGraph::preferred_path(std::string_view id) const {
    const TopicNode& start = at(id);
    // Distance from each node up to its nearest root; -1 marks "in progress".
    std::unordered_map<std::string, int> to_root;
    std::function<int(const TopicNode&)> height = [&](const TopicNode& node) -> int {
        if (auto it = to_root.find(node.id); it != to_root.end())
            return it->second < 0 ? 1 << 20 : it->second;
        to_root[node.id] = -1;
        int best = node.broader.empty() ? 0 : 1 << 20;
        for (const auto& parent_id : node.broader)
            if (const TopicNode* parent = find(parent_id)) best = std::min(best, height(*parent) + 1);
        to_root[node.id] = best;
        return best;
    };

    std::vector<std::string> path{start.id};
    std::set<std::string> visited{start.id};
    const TopicNode* current = &start;
    while (true) {
        const TopicNode* next = nullptr;
        int next_height = 0;
        for (const auto& parent_id : current->broader) {
            const TopicNode* parent = find(parent_id);
            if (parent == nullptr || visited.count(parent_id)) continue;
            const int h = height(*parent);
            if (next == nullptr || h < next_height) {
                next = parent;
                next_height = h;
            }
        }
        if (next == nullptr) break;
        path.push_back(next->id);
        visited.insert(next->id);
        current = next;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

ValidationReport validate(const KosGraph& graph) {
    ValidationReport report;
    const auto& nodes = graph.nodes();

    for (const auto& [id, node] : nodes) {
        if (id.empty() || blank(node.pref_label))
            report.findings.push_back({FindingKind::EmptyLabel, {id}, "topic '" + id + "' has no preferred label"});
    }

    std::set<std::pair<std::string, std::string>> dangling, inconsistent;
    for (const auto& [id, node] : nodes) {
        for (const auto& parent_id : node.broader) {
            const TopicNode* parent = graph.find(parent_id);
            if (parent == nullptr)
                dangling.emplace(id, parent_id);
            else if (std::find(parent->narrower.begin(), parent->narrower.end(), id) == parent->narrower.end())
                inconsistent.emplace(parent_id, id);
        }
        for (const auto& child_id : node.narrower) {
            const TopicNode* child = graph.find(child_id);
            if (child == nullptr)
                dangling.emplace(id, child_id);
            else if (std::find(child->broader.begin(), child->broader.end(), id) == child->broader.end())
                inconsistent.emplace(id, child_id);
        }
    }
    for (const auto& [from, to] : dangling)
        report.findings.push_back({FindingKind::DanglingReference, {from, to},
                                   "topic '" + from + "' references undeclared topic '" + to + "'"});
    for (const auto& [parent, child] : inconsistent)
        report.findings.push_back(
            {FindingKind::BidirectionalInconsistency, {parent, child},
             "broader/narrower mismatch between parent '" + parent + "' and child '" + child + "'"});

    // Cycle search over broader edges: white(absent) / gray(1) / black(2).
    std::unordered_map<std::string, int> color;
    std::vector<std::string> stack;
    std::function<void(const TopicNode&)> visit = [&](const TopicNode& node) {
        color[node.id] = 1;
        stack.push_back(node.id);
        for (const auto& parent_id : node.broader) {
            const TopicNode* parent = graph.find(parent_id);
            if (parent == nullptr) continue;
            const int c = color.count(parent_id) ? color[parent_id] : 0;
            if (c == 1) {
                auto begin = std::find(stack.begin(), stack.end(), parent_id);
                std::vector<std::string> cycle(begin, stack.end());
                cycle.push_back(parent_id);
                report.findings.push_back(
                    {FindingKind::Cycle, cycle, "broader cycle: " + join_path(cycle)});
            } else if (c == 0) {
                visit(*parent);
            }
        }
        stack.pop_back();
        color[node.id] = 2;
    };
    for (const auto& [id, node] : nodes)
        if (!color.count(id)) visit(node);

    return report;
}

ValidationReport validate_assertions(const TaxonomyDraft& draft) {
    std::map<std::string, const TopicNode*, std::less<>> byid;
    for (const auto& t : draft.topics) byid.try_emplace(t.id, &t);
    auto lists = [](const std::vector<std::string>& v, const std::string& id) {
        return std::find(v.begin(), v.end(), id) != v.end();
    };
    std::set<std::pair<std::string, std::string>> bad;  // (parent, child)
    for (const auto& t : draft.topics) {
        for (const auto& child : t.narrower) {
            auto it = byid.find(child);
            if (it != byid.end() && !it->second->broader.empty() && !lists(it->second->broader, t.id))
                bad.emplace(t.id, child);
        }
        for (const auto& parent : t.broader) {
            auto it = byid.find(parent);
            if (it != byid.end() && !it->second->narrower.empty() && !lists(it->second->narrower, t.id))
                bad.emplace(parent, t.id);
        }
    }
    ValidationReport report;
    for (const auto& [parent, child] : bad)
        report.findings.push_back({FindingKind::BidirectionalInconsistency, {parent, child},
                                   "broader/narrower mismatch between parent '" + parent + "' and child '" + child +
                                       "' as authored"});
    return report;
}

}  // namespace kosmap
