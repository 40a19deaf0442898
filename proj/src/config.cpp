#include "kosmap/config.hpp"

#include <cmath>
#include <cstdlib>
#include <set>

#include "kosmap/error.hpp"
#include "kosmap/taxonomy_io.hpp"

namespace kosmap {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& what) {
    throw Error(ErrorCode::InvalidConfig, what);
}

void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) bad(where + " must be an object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key)) bad("unknown config key '" + where + "." + key + "'");
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        bad("config key '" + where + "." + key + "' has the wrong type");
    }
}

void read_ms(const json& obj, const char* key, std::chrono::milliseconds& out, const std::string& where) {
    long long ms = out.count();
    read(obj, key, ms, where);
    out = std::chrono::milliseconds(ms);
}

}  // namespace

void EngineConfig::validate() const {
    if (k < 1) bad("retrieval.k must be >= 1");
    if (display < 1) bad("retrieval.display must be >= 1");
    for (double tau : {tau_broad, tau_drilldown, tau_stringent})
        if (!(tau >= 0.0) || !std::isfinite(tau)) bad("temperatures must be finite and >= 0");
    rerank.validate();
    if (!(lambda >= 0.0 && lambda <= 1.0)) bad("dialogue.lambda must be in [0, 1]");
    if (!std::isfinite(stringent_threshold)) bad("dialogue.stringent_threshold must be finite");
    if (explainer.kind == ExplainerKind::RemoteLlm && explainer.endpoint.rfind("http://", 0) != 0)
        bad("explainer.endpoint must be an http:// URL");
}

std::string ServiceConfig::effective_session_dir() const {
    return session_dir.empty() ? data_dir + "/sessions" : session_dir;
}

EngineConfig apply_engine_overrides(EngineConfig c, const json& o) {
    if (o.is_null()) return c;
    only_keys(o, "config", {"retrieval", "rerank", "dialogue", "explainer"});
    if (o.contains("retrieval")) {
        const json& r = o.at("retrieval");
        only_keys(r, "retrieval", {"k", "display", "tau_broad", "tau_drilldown", "tau_stringent", "seed"});
        read(r, "k", c.k, "retrieval");
        read(r, "display", c.display, "retrieval");
        read(r, "tau_broad", c.tau_broad, "retrieval");
        read(r, "tau_drilldown", c.tau_drilldown, "retrieval");
        read(r, "tau_stringent", c.tau_stringent, "retrieval");
        read(r, "seed", c.seed, "retrieval");
    }
    if (o.contains("rerank")) {
        const json& r = o.at("rerank");
        only_keys(r, "rerank", {"alpha", "beta", "gamma", "m"});
        read(r, "alpha", c.rerank.alpha, "rerank");
        read(r, "beta", c.rerank.beta, "rerank");
        read(r, "gamma", c.rerank.gamma, "rerank");
        read(r, "m", c.rerank.m, "rerank");
    }
    if (o.contains("dialogue")) {
        const json& d = o.at("dialogue");
        only_keys(d, "dialogue", {"lambda", "stringent_threshold"});
        read(d, "lambda", c.lambda, "dialogue");
        read(d, "stringent_threshold", c.stringent_threshold, "dialogue");
    }
    if (o.contains("explainer")) {
        const json& e = o.at("explainer");
        only_keys(e, "explainer", {"kind", "endpoint", "timeout_ms"});
        std::string kind = c.explainer.kind == ExplainerKind::Template ? "template" : "remote_llm";
        read(e, "kind", kind, "explainer");
        if (kind == "template")
            c.explainer.kind = ExplainerKind::Template;
        else if (kind == "remote_llm")
            c.explainer.kind = ExplainerKind::RemoteLlm;
        else
            bad("explainer.kind must be \"template\" or \"remote_llm\"");
        read(e, "endpoint", c.explainer.endpoint, "explainer");
        read_ms(e, "timeout_ms", c.explainer.timeout, "explainer");
    }
    c.validate();
    return c;
}

json engine_config_to_json(const EngineConfig& c) {
    return json{{"retrieval",
                 {{"k", c.k},
                  {"display", c.display},
                  {"tau_broad", c.tau_broad},
                  {"tau_drilldown", c.tau_drilldown},
                  {"tau_stringent", c.tau_stringent},
                  {"seed", c.seed}}},
                {"rerank", {{"alpha", c.rerank.alpha}, {"beta", c.rerank.beta}, {"gamma", c.rerank.gamma}, {"m", c.rerank.m}}},
                {"dialogue", {{"lambda", c.lambda}, {"stringent_threshold", c.stringent_threshold}}},
                {"explainer",
                 {{"kind", c.explainer.kind == ExplainerKind::Template ? "template" : "remote_llm"},
                  {"endpoint", c.explainer.endpoint},
                  {"timeout_ms", c.explainer.timeout.count()}}}};
}

ServiceConfig parse_service_config(const json& doc) {
    only_keys(doc, "config",
              {"data_dir", "session_dir", "listen", "provider", "retrieval", "rerank", "dialogue", "explainer"});
    ServiceConfig sc;
    read(doc, "data_dir", sc.data_dir, "config");
    read(doc, "session_dir", sc.session_dir, "config");
    read(doc, "listen", sc.listen, "config");
    if (doc.contains("provider")) {
        const json& p = doc.at("provider");
        only_keys(p, "provider", {"kind", "dim", "endpoint", "model", "timeout_ms", "max_in_flight"});
        std::string kind = "local";
        read(p, "kind", kind, "provider");
        if (kind == "local")
            sc.provider.kind = ProviderKind::LocalDeterministic;
        else if (kind == "remote_http")
            sc.provider.kind = ProviderKind::RemoteHttp;
        else
            bad("provider.kind must be \"local\" or \"remote_http\"");
        read(p, "dim", sc.provider.dim, "provider");
        read(p, "endpoint", sc.provider.endpoint, "provider");
        read(p, "model", sc.provider.model_name, "provider");
        read_ms(p, "timeout_ms", sc.provider.timeout, "provider");
        read(p, "max_in_flight", sc.provider.max_in_flight, "provider");
    }
    json engine = json::object();
    for (const char* key : {"retrieval", "rerank", "dialogue", "explainer"})
        if (doc.contains(key)) engine[key] = doc.at(key);
    sc.engine = apply_engine_overrides(EngineConfig{}, engine);
    sc.provider.validate();
    return sc;
}

ServiceConfig load_service_config(const std::string& path) {
    try {
        return parse_service_config(json::parse(read_file(path)));
    } catch (const json::parse_error& e) {
        bad("config file '" + path + "' is not valid JSON: " + e.what());
    }
}

json service_config_to_json(const ServiceConfig& sc) {
    json doc = engine_config_to_json(sc.engine);
    doc["data_dir"] = sc.data_dir;
    doc["session_dir"] = sc.session_dir;
    doc["listen"] = sc.listen;
    doc["provider"] = {{"kind", sc.provider.kind == ProviderKind::LocalDeterministic ? "local" : "remote_http"},
                       {"dim", sc.provider.dim},
                       {"endpoint", sc.provider.endpoint},
                       {"model", sc.provider.model_name},
                       {"timeout_ms", sc.provider.timeout.count()},
                       {"max_in_flight", sc.provider.max_in_flight}};
    return doc;
}

void apply_environment(ServiceConfig& config) {
    if (const char* v = std::getenv("KOSMAP_LISTEN"); v && *v) config.listen = v;
    if (const char* v = std::getenv("KOSMAP_DATA_DIR"); v && *v) config.data_dir = v;
    if (const char* v = std::getenv("KOSMAP_SESSION_DIR"); v && *v) config.session_dir = v;
}

}  // namespace kosmap
