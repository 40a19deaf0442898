#pragma once
// One config document holds every tunable. Layout (all sections optional,
// unknown keys rejected):
//
//   {
//     "data_dir": "data", "session_dir": "", "listen": "127.0.0.1:8080",
//     "provider":  {"kind": "local" | "remote_http", "dim": 256, "endpoint": "",
//                   "model": "", "timeout_ms": 5000, "max_in_flight": 4},
//     "retrieval": {"k": 10, "display": 5, "tau_broad": 0.05, "tau_drilldown": 0.05,
//                   "tau_stringent": 0.0, "seed": 0},
//     "rerank":    {"alpha": 0.3, "beta": 0.5, "gamma": 0.1, "m": 3},
//     "dialogue":  {"lambda": 0.4, "stringent_threshold": 0.25},
//     "explainer": {"kind": "template" | "remote_llm", "endpoint": "", "timeout_ms": 3000}
//   }

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "kosmap/embedding.hpp"
#include "kosmap/retrieval.hpp"

namespace kosmap {

enum class ExplainerKind { Template, RemoteLlm };

struct ExplainerConfig {
    ExplainerKind kind = ExplainerKind::Template;
    std::string endpoint;
    std::chrono::milliseconds timeout{3000};

    bool operator==(const ExplainerConfig&) const = default;
};

struct EngineConfig {
    std::size_t k = 10;       // candidates retrieved per scheme per round
    std::size_t display = 5;  // candidates shown per turn
    double tau_broad = 0.05;
    double tau_drilldown = 0.05;
    double tau_stringent = 0.0;
    std::uint64_t seed = 0;
    RerankParams rerank;
    double lambda = 0.4;
    double stringent_threshold = 0.25;
    ExplainerConfig explainer;

    void validate() const;  // throws InvalidConfig
    bool operator==(const EngineConfig&) const = default;
};

struct ServiceConfig {
    std::string data_dir = "data";
    std::string session_dir;  // empty: <data_dir>/sessions
    std::string listen = "127.0.0.1:8080";
    ProviderConfig provider;
    EngineConfig engine;

    std::string effective_session_dir() const;
};

// Engine sections ("retrieval", "rerank", "dialogue", "explainer") applied on
// top of base. Throws InvalidConfig on unknown keys or bad values.
EngineConfig apply_engine_overrides(EngineConfig base, const nlohmann::json& overrides);
nlohmann::json engine_config_to_json(const EngineConfig& config);

ServiceConfig parse_service_config(const nlohmann::json& doc);
ServiceConfig load_service_config(const std::string& path);
nlohmann::json service_config_to_json(const ServiceConfig& config);

// Overrides listen / data_dir / session_dir from KOSMAP_LISTEN,
// KOSMAP_DATA_DIR and KOSMAP_SESSION_DIR when set.
void apply_environment(ServiceConfig& config);

}  // namespace kosmap
