#include "kosmap/explain.hpp"

#include <cctype>

#include <httplib.h>

#include <nlohmann/json.hpp>

#include "remote_provider.hpp"

namespace kosmap {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

std::string first_sentence(std::string_view text) {
    text = trim(text);
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if ((c == '.' || c == '!' || c == '?') &&
            (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]))))
            return std::string(text.substr(0, i + 1));
    }
    return std::string(text);
}

std::vector<std::string> breadcrumb_labels(const KosGraph& graph, std::string_view topic_id) {
    auto path = graph.preferred_path(topic_id);
    path.pop_back();
    std::vector<std::string> labels;
    for (const auto& id : path) labels.push_back(graph.at(id).pref_label);
    return labels;
}

std::string template_explanation(const TopicNode& topic, const KosGraph& graph) {
    std::string path;
    for (const auto& id : graph.preferred_path(topic.id)) {
        if (!path.empty()) path += " > ";
        path += graph.at(id).pref_label;
    }
    std::string sentence = first_sentence(topic.definition);
    if (sentence.empty()) sentence = "(no definition)";
    return topic.pref_label + " — path: " + path + " — " + sentence;
}

Explanation explain(const TopicNode& topic, const KosGraph& graph, const ExplainerConfig& config,
                    std::string_view query) {
    if (config.kind == ExplainerKind::Template) return {template_explanation(topic, graph), std::nullopt};

    auto fallback = [&](const std::string& why) {
        return Explanation{template_explanation(topic, graph),
                           "explainer fallback for '" + topic.id + "': " + why};
    };
    const auto [base, path] = split_endpoint(config.endpoint);
    httplib::Client client(base);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());

    const json body{{"topic", {{"id", topic.id}, {"pref_label", topic.pref_label}, {"definition", topic.definition}}},
                    {"ancestor_labels", breadcrumb_labels(graph, topic.id)},
                    {"query", std::string(query)}};
    auto res = client.Post(path, body.dump(), "application/json");
    if (!res) return fallback("unreachable: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) return fallback("HTTP " + std::to_string(res->status));
    try {
        const json reply = json::parse(res->body);
        const auto text = reply.at("explanation").get<std::string>();
        if (trim(text).empty()) return fallback("empty explanation");
        return {text, std::nullopt};
    } catch (const json::exception& e) {
        return fallback(std::string("malformed reply: ") + e.what());
    }
}

}  // namespace kosmap
