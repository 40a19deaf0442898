#pragma once
// Taxonomy ingestion: SKOS N-Triples and the canonical JSON document.
//
// Canonical document:
//   {
//     "scheme": {"id": "...", "name": "...", "kind": "multi_field" | "single_field",
//                "field_tags": ["..."]},
//     "topics": [{"id": "...", "pref_label": "...", "alt_labels": ["..."],
//                 "definition": "...", "broader": ["..."]}]
//   }
// Unknown fields are rejected. Scheme link document:
//   [{"from_scheme": "...", "from_topic": "...", "to_scheme": "...", "entry_topics": ["..."]}]

#include <string>
#include <string_view>
#include <vector>

#include "kosmap/kos_model.hpp"

namespace kosmap {

namespace skos {
inline constexpr std::string_view kNamespace = "http://www.w3.org/2004/02/skos/core#";
inline constexpr std::string_view kRdfType = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
}  // namespace skos

struct SkosOptions {
    // Removed from concept IRIs to form topic ids (e.g. "http://example.org/kos/").
    std::string strip_prefix;
    // Override the scheme found in the data (ConceptScheme subject / inScheme object).
    std::string scheme_id;
    std::string scheme_name;
    SchemeKind kind = SchemeKind::MultiField;
    std::vector<std::string> field_tags;
};

// Throws MalformedTriple (with 1-based line number) or MissingPrefLabel.
TaxonomyDraft read_skos_ntriples(std::string_view text, const SkosOptions& options = {});

// read_skos_ntriples followed by KosGraph::build.
KosGraph parse_skos_ntriples(std::string_view text, const SkosOptions& options = {});

// Throws SchemaViolation on structural problems in the document.
TaxonomyDraft read_canonical(std::string_view text);
KosGraph parse_canonical(std::string_view text);
std::string serialize_canonical(const KosGraph& graph);

std::vector<SchemeLink> parse_scheme_links(std::string_view text);
std::string serialize_scheme_links(const std::vector<SchemeLink>& links);

std::string read_file(const std::string& path);  // throws Io
void write_file(const std::string& path, std::string_view contents);

}  // namespace kosmap
