#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "kosmap/config.hpp"

namespace kosmap::cli {

// Flags shared by the commands that run the engine. Unset flags leave the
// environment / config file value in place.
struct EngineFlags {
    std::optional<std::string> data_dir;
    std::optional<std::string> provider;
    std::optional<std::size_t> dim;
    std::optional<std::string> endpoint;
    std::optional<std::string> model;
    std::optional<std::size_t> k;
    std::optional<std::size_t> display;
    std::optional<double> tau;
    std::optional<double> alpha;
    std::optional<double> beta;
    std::optional<double> gamma;
    std::optional<std::size_t> m;
    std::optional<double> lambda;
    std::optional<std::uint64_t> seed;
};

// Precedence: flags > KOSMAP_* environment > config file > built-in defaults.
// The config file is config_path, else $KOSMAP_CONFIG, else none.
ServiceConfig resolve_config(const std::optional<std::string>& config_path, const EngineFlags& flags);

struct ChatOptions {
    std::optional<std::string> query;
    std::optional<std::string> server;  // http://host:port
    std::uint64_t seed = 0;
};

// Reads commands from in, writes the transcript to out. Returns the exit code.
int run_chat(const ServiceConfig& config, const ChatOptions& options, std::istream& in, std::ostream& out,
             std::ostream& err);

// Plain-text rendering of a turn as returned by turn_to_json().
void render_turn(const nlohmann::json& turn, std::ostream& out);
void render_entities(const nlohmann::json& entities, std::ostream& out);

}  // namespace kosmap::cli
