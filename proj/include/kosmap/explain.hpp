#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kosmap/config.hpp"
#include "kosmap/kos_model.hpp"

namespace kosmap {

struct Explanation {
    std::string text;
    std::optional<std::string> warning;  // set when a remote explainer fell back
};

// Label, root-to-topic path and first definition sentence ("(no definition)" if
// empty), separated by U+2014 dashes.
std::string template_explanation(const TopicNode& topic, const KosGraph& graph);

// Remote explainers POST {topic: {id, pref_label, definition}, ancestor_labels, query}
// and expect {explanation}. Any failure falls back to the template.
Explanation explain(const TopicNode& topic, const KosGraph& graph, const ExplainerConfig& config,
                    std::string_view query = {});

// Labels root-to-parent along KosGraph::preferred_path (the topic excluded).
std::vector<std::string> breadcrumb_labels(const KosGraph& graph, std::string_view topic_id);

// Up to and including the first '.', '!' or '?' followed by whitespace or end.
std::string first_sentence(std::string_view text);

}  // namespace kosmap
