#include "kosmap/registry.hpp"

#include <algorithm>
#include <filesystem>

#include "kosmap/error.hpp"
#include "kosmap/taxonomy_io.hpp"

namespace kosmap {

namespace fs = std::filesystem;

Registry::Registry(std::shared_ptr<const EmbeddingProvider> provider, std::vector<KosGraph> graphs,
                   std::vector<SchemeLink> links, std::map<std::string, TopicIndex> prebuilt)
    : provider_(std::move(provider)), links_(std::move(links)) {
    if (!provider_) throw Error(ErrorCode::InvalidConfig, "registry needs an embedding provider");
    for (auto& graph : graphs) {
        const std::string id = graph.scheme().id;
        if (schemes_.count(id)) throw Error(ErrorCode::InvalidConfig, "scheme '" + id + "' loaded twice");
        TopicIndex index;
        if (auto it = prebuilt.find(id); it != prebuilt.end()) {
            index = std::move(it->second);
            if (index.provider_fingerprint() != provider_->fingerprint())
                throw Error(ErrorCode::FingerprintMismatch, "index for scheme '" + id + "' was built with '" +
                                                                index.provider_fingerprint() + "'");
            for (const auto& [topic_id, node] : graph.nodes())
                if (!index.find(topic_id))
                    throw Error(ErrorCode::InvalidConfig,
                                "index for scheme '" + id + "' lacks topic '" + topic_id + "'");
        } else {
            index = build_index(graph, *provider_);
        }
        schemes_.emplace(id, SchemeEntry{std::move(graph), std::move(index)});
    }

    for (const auto& link : links_) {
        const auto* from = find(link.from_scheme);
        const auto* to = find(link.to_scheme);
        const std::string where = "link " + link.from_scheme + "/" + link.from_topic + " -> " + link.to_scheme;
        if (from == nullptr || from->graph.scheme().kind != SchemeKind::MultiField)
            throw Error(ErrorCode::InvalidConfig, where + ": source must be a loaded multi_field scheme");
        if (!from->graph.contains(link.from_topic))
            throw Error(ErrorCode::InvalidConfig, where + ": unknown source topic");
        if (to == nullptr || to->graph.scheme().kind != SchemeKind::SingleField)
            throw Error(ErrorCode::InvalidConfig, where + ": target must be a loaded single_field scheme");
        for (const auto& entry : link.entry_topics)
            if (!to->graph.contains(entry))
                throw Error(ErrorCode::InvalidConfig, where + ": unknown entry topic '" + entry + "'");
    }
}

Registry Registry::load_directory(const std::string& dir, std::shared_ptr<const EmbeddingProvider> provider) {
    const fs::path root(dir);
    const fs::path schemes_dir = root / "schemes";
    if (!fs::is_directory(schemes_dir))
        throw Error(ErrorCode::Io, "registry directory '" + dir + "' has no schemes/ subdirectory");

    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(schemes_dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());

    std::vector<KosGraph> graphs;
    std::map<std::string, TopicIndex> prebuilt;
    for (const auto& f : files) {
        try {
            graphs.push_back(parse_canonical(read_file(f.string())));
        } catch (const Error& e) {
            throw Error(e.code(), f.string() + ": " + e.what());
        }
        const auto& id = graphs.back().scheme().id;
        const fs::path snapshot = root / "indexes" / (id + ".index.json");
        if (fs::exists(snapshot))
            prebuilt.emplace(id, load_index(read_file(snapshot.string()), provider->fingerprint()));
    }

    std::vector<SchemeLink> links;
    if (fs::exists(root / "links.json")) links = parse_scheme_links(read_file((root / "links.json").string()));
    return Registry(std::move(provider), std::move(graphs), std::move(links), std::move(prebuilt));
}

const SchemeEntry* Registry::find(std::string_view scheme_id) const {
    auto it = schemes_.find(scheme_id);
    return it == schemes_.end() ? nullptr : &it->second;
}

const SchemeEntry& Registry::at(std::string_view scheme_id) const {
    if (const auto* e = find(scheme_id)) return *e;
    throw Error(ErrorCode::UnknownScheme, "unknown scheme '" + std::string(scheme_id) + "'");
}

std::vector<std::string> Registry::multi_field_ids() const {
    std::vector<std::string> out;
    for (const auto& [id, entry] : schemes_)
        if (entry.graph.scheme().kind == SchemeKind::MultiField) out.push_back(id);
    return out;
}

std::vector<const SchemeLink*> Registry::links_from(std::string_view scheme_id, std::string_view topic_id) const {
    std::vector<const SchemeLink*> out;
    for (const auto& link : links_)
        if (link.from_scheme == scheme_id && link.from_topic == topic_id) out.push_back(&link);
    return out;
}

}  // namespace kosmap
