#pragma once
// Read-only set of loaded schemes, their topic indexes and the crosswalk
// links between them. Shared by every session; never mutated after load.
//
// Directory layout for load_directory():
//   <dir>/schemes/*.json               canonical taxonomy documents
//   <dir>/links.json                   optional scheme link document
//   <dir>/indexes/<scheme_id>.index.json  optional index snapshots; a missing
//                                      snapshot is built from the provider

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "kosmap/embedding.hpp"
#include "kosmap/kos_model.hpp"
#include "kosmap/retrieval.hpp"

namespace kosmap {

struct SchemeEntry {
    KosGraph graph;
    TopicIndex index;
};

class Registry {
public:
    // Builds any index not supplied in prebuilt. Throws InvalidConfig when a
    // link does not resolve, FingerprintMismatch on a foreign index.
    Registry(std::shared_ptr<const EmbeddingProvider> provider, std::vector<KosGraph> graphs,
             std::vector<SchemeLink> links, std::map<std::string, TopicIndex> prebuilt = {});

    static Registry load_directory(const std::string& dir, std::shared_ptr<const EmbeddingProvider> provider);

    const EmbeddingProvider& provider() const { return *provider_; }
    const std::map<std::string, SchemeEntry, std::less<>>& schemes() const { return schemes_; }
    const std::vector<SchemeLink>& links() const { return links_; }

    const SchemeEntry* find(std::string_view scheme_id) const;
    const SchemeEntry& at(std::string_view scheme_id) const;  // throws UnknownScheme

    std::vector<std::string> multi_field_ids() const;
    std::vector<const SchemeLink*> links_from(std::string_view scheme_id, std::string_view topic_id) const;

private:
    std::shared_ptr<const EmbeddingProvider> provider_;
    std::map<std::string, SchemeEntry, std::less<>> schemes_;
    std::vector<SchemeLink> links_;
};

}  // namespace kosmap
