// Line-oriented N-Triples reader restricted to the SKOS vocabulary we need.
// Each line holds one `subject predicate object .` statement with full IRIs;
// blank lines and `#` comments are skipped.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>

#include "kosmap/error.hpp"
#include "kosmap/taxonomy_io.hpp"

namespace kosmap {

namespace {

enum class TermKind { Iri, Blank, Literal };

struct Term {
    TermKind kind;
    std::string value;
    std::string lang;  // literals only
};

class LineParser {
public:
    LineParser(std::string_view line, std::size_t line_no) : s_(line), line_no_(line_no) {}

    Term subject() {
        skip_ws();
        if (peek() == '<') return iri();
        if (starts_with("_:")) return blank();
        fail("expected IRI or blank node as subject");
    }

    Term predicate() {
        skip_ws();
        if (peek() != '<') fail("expected IRI as predicate");
        return iri();
    }

    Term object() {
        skip_ws();
        if (peek() == '<') return iri();
        if (starts_with("_:")) return blank();
        if (peek() == '"') return literal();
        fail("expected IRI, blank node or literal as object");
    }

    void terminator() {
        skip_ws();
        if (peek() != '.') fail("expected '.' terminating the triple");
        ++pos_;
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] != '#') fail("unexpected trailing content");
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorCode::MalformedTriple,
                    "line " + std::to_string(line_no_) + ": " + what);
    }

    char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
    bool starts_with(std::string_view p) const { return s_.substr(pos_).substr(0, p.size()) == p; }

    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
    }

    Term iri() {
        const auto end = s_.find('>', pos_ + 1);
        if (end == std::string_view::npos) fail("unterminated IRI");
        std::string value(s_.substr(pos_ + 1, end - pos_ - 1));
        if (value.empty() || value.find_first_of(" \t\"") != std::string::npos) fail("invalid IRI");
        pos_ = end + 1;
        return {TermKind::Iri, std::move(value), {}};
    }

    Term blank() {
        const auto start = pos_;
        pos_ += 2;
        while (pos_ < s_.size() && s_[pos_] != ' ' && s_[pos_] != '\t') ++pos_;
        if (pos_ == start + 2) fail("empty blank node label");
        return {TermKind::Blank, std::string(s_.substr(start, pos_ - start)), {}};
    }

    static void append_utf8(std::string& out, std::uint32_t cp) {
        if (cp < 0x80) {
            out += static_cast<char>(cp);
        } else if (cp < 0x800) {
            out += static_cast<char>(0xC0 | (cp >> 6));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else if (cp < 0x10000) {
            out += static_cast<char>(0xE0 | (cp >> 12));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else {
            out += static_cast<char>(0xF0 | (cp >> 18));
            out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        }
    }

    std::uint32_t hex(std::size_t digits) {
        if (pos_ + digits > s_.size()) fail("truncated unicode escape");
        std::uint32_t cp = 0;
        for (std::size_t i = 0; i < digits; ++i) {
            const char c = s_[pos_++];
            cp <<= 4;
            if (c >= '0' && c <= '9')
                cp |= static_cast<std::uint32_t>(c - '0');
            else if (c >= 'a' && c <= 'f')
                cp |= static_cast<std::uint32_t>(c - 'a' + 10);
            else if (c >= 'A' && c <= 'F')
                cp |= static_cast<std::uint32_t>(c - 'A' + 10);
            else
                fail("invalid hex digit in unicode escape");
        }
        if (cp > 0x10FFFF) fail("unicode escape out of range");
        return cp;
    }

    Term literal() {
        ++pos_;  // opening quote
        std::string value;
        while (true) {
            if (pos_ >= s_.size()) fail("unterminated literal");
            const char c = s_[pos_++];
            if (c == '"') break;
            if (c != '\\') {
                value += c;
                continue;
            }
            if (pos_ >= s_.size()) fail("dangling escape");
            const char e = s_[pos_++];
            switch (e) {
            case 't': value += '\t'; break;
            case 'b': value += '\b'; break;
            case 'n': value += '\n'; break;
            case 'r': value += '\r'; break;
            case 'f': value += '\f'; break;
            case '"': value += '"'; break;
            case '\'': value += '\''; break;
            case '\\': value += '\\'; break;
            case 'u': append_utf8(value, hex(4)); break;
            case 'U': append_utf8(value, hex(8)); break;
            default: fail(std::string("unknown escape \\") + e);
            }
        }
        Term term{TermKind::Literal, std::move(value), {}};
        if (peek() == '@') {
            const auto start = ++pos_;
            while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '-'))
                ++pos_;
            if (pos_ == start) fail("empty language tag");
            term.lang = std::string(s_.substr(start, pos_ - start));
        } else if (starts_with("^^")) {
            pos_ += 2;
            if (peek() != '<') fail("expected datatype IRI");
            iri();
        }
        return term;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    std::size_t line_no_;
};

struct LangValue {
    std::string lang;
    std::string value;
};

struct Subject {
    std::vector<LangValue> pref_labels;
    std::vector<std::string> alt_labels;
    std::vector<LangValue> definitions;
    std::vector<std::string> broader;
    std::vector<std::string> narrower;
    std::vector<std::string> in_scheme;
    bool is_scheme = false;
};

// English first, then untagged, then the smallest language tag; file order
// within a language.
std::optional<std::string> pick(const std::vector<LangValue>& values) {
    auto rank = [](const std::string& lang) {
        if (lang == "en" || lang.rfind("en-", 0) == 0) return 0;
        return lang.empty() ? 1 : 2;
    };
    const LangValue* best = nullptr;
    for (const auto& v : values) {
        if (best == nullptr) {
            best = &v;
            continue;
        }
        const int r = rank(v.lang), rb = rank(best->lang);
        if (r < rb || (r == rb && r == 2 && v.lang < best->lang)) best = &v;
    }
    if (best == nullptr) return std::nullopt;
    return best->value;
}

std::string strip(const std::string& iri, const std::string& prefix) {
    if (!prefix.empty() && iri.size() > prefix.size() && iri.compare(0, prefix.size(), prefix) == 0)
        return iri.substr(prefix.size());
    return iri;
}

}  // namespace

TaxonomyDraft read_skos_ntriples(std::string_view text, const SkosOptions& options) {
    const std::string skos_ns(skos::kNamespace);
    auto skos_term = [&](const char* local) { return skos_ns + local; };
    const std::string p_pref = skos_term("prefLabel"), p_alt = skos_term("altLabel"),
                      p_def = skos_term("definition"), p_broader = skos_term("broader"),
                      p_narrower = skos_term("narrower"), p_in_scheme = skos_term("inScheme"),
                      c_concept = skos_term("Concept"), c_scheme = skos_term("ConceptScheme");

    std::map<std::string, Subject> subjects;
    std::set<std::string> scheme_iris;

    std::size_t line_no = 0, pos = 0;
    while (pos <= text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string_view::npos || line[first] == '#') continue;

        LineParser parser(line, line_no);
        Term s = parser.subject();
        Term p = parser.predicate();
        Term o = parser.object();
        parser.terminator();

        auto object_node = [&]() -> const std::string& {
            if (o.kind == TermKind::Literal)
                throw Error(ErrorCode::MalformedTriple,
                            "line " + std::to_string(line_no) + ": " + p.value + " expects a resource object");
            return o.value;
        };
        auto object_literal = [&]() -> LangValue {
            if (o.kind != TermKind::Literal)
                throw Error(ErrorCode::MalformedTriple,
                            "line " + std::to_string(line_no) + ": " + p.value + " expects a literal object");
            return {o.lang, o.value};
        };

        if (p.value == skos::kRdfType) {
            if (o.value == c_concept)
                subjects[s.value];
            else if (o.value == c_scheme) {
                subjects[s.value].is_scheme = true;
                scheme_iris.insert(s.value);
            }
        } else if (p.value == p_pref) {
            subjects[s.value].pref_labels.push_back(object_literal());
        } else if (p.value == p_alt) {
            subjects[s.value].alt_labels.push_back(object_literal().value);
        } else if (p.value == p_def) {
            subjects[s.value].definitions.push_back(object_literal());
        } else if (p.value == p_broader) {
            subjects[s.value].broader.push_back(object_node());
        } else if (p.value == p_narrower) {
            subjects[s.value].narrower.push_back(object_node());
        } else if (p.value == p_in_scheme) {
            subjects[s.value].in_scheme.push_back(object_node());
            scheme_iris.insert(object_node());
        }
    }

    TaxonomyDraft draft;
    draft.scheme.kind = options.kind;
    draft.scheme.field_tags = options.field_tags;
    if (!options.scheme_id.empty()) {
        draft.scheme.id = options.scheme_id;
    } else if (!scheme_iris.empty()) {
        draft.scheme.id = strip(*scheme_iris.begin(), options.strip_prefix);
    } else {
        draft.scheme.id = "skos";
    }
    draft.scheme.name = options.scheme_name;
    if (draft.scheme.name.empty() && !scheme_iris.empty()) {
        if (auto it = subjects.find(*scheme_iris.begin()); it != subjects.end())
            draft.scheme.name = pick(it->second.pref_labels).value_or("");
    }
    if (draft.scheme.name.empty()) draft.scheme.name = draft.scheme.id;

    for (auto& [iri, subject] : subjects) {
        if (subject.is_scheme || scheme_iris.count(iri)) continue;
        auto label = pick(subject.pref_labels);
        if (!label)
            throw Error(ErrorCode::MissingPrefLabel, "concept '" + iri + "' has no skos:prefLabel");
        TopicNode node;
        node.id = strip(iri, options.strip_prefix);
        node.pref_label = *label;
        for (auto& alt : subject.alt_labels)
            if (std::find(node.alt_labels.begin(), node.alt_labels.end(), alt) == node.alt_labels.end())
                node.alt_labels.push_back(std::move(alt));
        node.definition = pick(subject.definitions).value_or("");
        for (const auto& b : subject.broader) node.broader.push_back(strip(b, options.strip_prefix));
        for (const auto& n : subject.narrower) node.narrower.push_back(strip(n, options.strip_prefix));
        draft.topics.push_back(std::move(node));
    }
    return draft;
}

KosGraph parse_skos_ntriples(std::string_view text, const SkosOptions& options) {
    return KosGraph::build(read_skos_ntriples(text, options));
}

}  // namespace kosmap
