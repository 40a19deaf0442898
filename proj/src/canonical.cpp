#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kosmap/error.hpp"
#include "kosmap/taxonomy_io.hpp"

namespace kosmap {

using nlohmann::json;

namespace {

[[noreturn]] void violation(const std::string& what) {
    throw Error(ErrorCode::SchemaViolation, what);
}

void require_fields(const json& obj, const std::string& where, std::initializer_list<const char*> required,
                    std::initializer_list<const char*> optional) {
    if (!obj.is_object()) violation(where + " must be an object");
    std::set<std::string> allowed;
    for (const char* f : required) {
        allowed.insert(f);
        if (!obj.contains(f)) violation(where + " is missing required field '" + f + "'");
    }
    for (const char* f : optional) allowed.insert(f);
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key)) violation(where + " has unknown field '" + key + "'");
}

std::string string_field(const json& obj, const char* name, const std::string& where) {
    const auto& v = obj.at(name);
    if (!v.is_string()) violation(where + "." + name + " must be a string");
    return v.get<std::string>();
}

std::vector<std::string> string_list(const json& obj, const char* name, const std::string& where) {
    if (!obj.contains(name)) return {};
    const auto& v = obj.at(name);
    if (!v.is_array()) violation(where + "." + name + " must be an array of strings");
    std::vector<std::string> out;
    for (const auto& item : v) {
        if (!item.is_string()) violation(where + "." + name + " must be an array of strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

json parse_json(std::string_view text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        violation(std::string("not a valid JSON document: ") + e.what());
    }
}

}  // namespace

TaxonomyDraft read_canonical(std::string_view text) {
    const json doc = parse_json(text);
    require_fields(doc, "document", {"scheme", "topics"}, {});

    const json& s = doc.at("scheme");
    require_fields(s, "scheme", {"id", "name", "kind"}, {"field_tags"});
    TaxonomyDraft draft;
    draft.scheme.id = string_field(s, "id", "scheme");
    draft.scheme.name = string_field(s, "name", "scheme");
    const auto kind = parse_scheme_kind(string_field(s, "kind", "scheme"));
    if (!kind) violation("scheme.kind must be \"multi_field\" or \"single_field\"");
    draft.scheme.kind = *kind;
    draft.scheme.field_tags = string_list(s, "field_tags", "scheme");
    if (draft.scheme.id.empty()) violation("scheme.id must be non-empty");
    if (draft.scheme.kind == SchemeKind::SingleField && draft.scheme.field_tags.empty())
        violation("single_field scheme '" + draft.scheme.id + "' needs at least one field tag");

    const json& topics = doc.at("topics");
    if (!topics.is_array()) violation("topics must be an array");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < topics.size(); ++i) {
        const std::string where = "topics[" + std::to_string(i) + "]";
        const json& t = topics[i];
        require_fields(t, where, {"id", "pref_label"}, {"alt_labels", "definition", "broader"});
        TopicNode node;
        node.id = string_field(t, "id", where);
        if (node.id.empty()) violation(where + ".id must be non-empty");
        if (!seen.insert(node.id).second) violation("duplicate topic id '" + node.id + "'");
        node.pref_label = string_field(t, "pref_label", where);
        node.alt_labels = string_list(t, "alt_labels", where);
        if (t.contains("definition")) node.definition = string_field(t, "definition", where);
        node.broader = string_list(t, "broader", where);
        draft.topics.push_back(std::move(node));
    }
    return draft;
}

KosGraph parse_canonical(std::string_view text) {
    return KosGraph::build(read_canonical(text));
}

std::string serialize_canonical(const KosGraph& graph) {
    json topics = json::array();
    for (const auto& [id, node] : graph.nodes()) {
        topics.push_back(json{{"id", node.id},
                              {"pref_label", node.pref_label},
                              {"alt_labels", node.alt_labels},
                              {"definition", node.definition},
                              {"broader", node.broader}});
    }
    const auto& scheme = graph.scheme();
    json doc{{"scheme",
              {{"id", scheme.id},
               {"name", scheme.name},
               {"kind", std::string(scheme_kind_name(scheme.kind))},
               {"field_tags", scheme.field_tags}}},
             {"topics", std::move(topics)}};
    return doc.dump(2) + "\n";
}

std::vector<SchemeLink> parse_scheme_links(std::string_view text) {
    const json doc = parse_json(text);
    if (!doc.is_array()) violation("scheme link document must be an array");
    std::vector<SchemeLink> links;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string where = "links[" + std::to_string(i) + "]";
        require_fields(doc[i], where, {"from_scheme", "from_topic", "to_scheme"}, {"entry_topics"});
        links.push_back({string_field(doc[i], "from_scheme", where), string_field(doc[i], "from_topic", where),
                         string_field(doc[i], "to_scheme", where), string_list(doc[i], "entry_topics", where)});
    }
    return links;
}

std::string serialize_scheme_links(const std::vector<SchemeLink>& links) {
    json doc = json::array();
    for (const auto& l : links)
        doc.push_back({{"from_scheme", l.from_scheme},
                       {"from_topic", l.from_topic},
                       {"to_scheme", l.to_scheme},
                       {"entry_topics", l.entry_topics}});
    return doc.dump(2) + "\n";
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed for '" + path + "'");
}

}  // namespace kosmap
