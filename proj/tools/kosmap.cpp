// kosmap: ingest taxonomies, build indexes, chat, batch-resolve, serve.
//
// Exit codes: 0 ok, 1 operational error, 2 validation findings.

#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "cli.hpp"
#include "kosmap/dialogue.hpp"
#include "kosmap/error.hpp"
#include "kosmap/registry.hpp"
#include "kosmap/retrieval.hpp"
#include "kosmap/service.hpp"
#include "kosmap/taxonomy_io.hpp"

namespace kosmap::cli {

using nlohmann::json;

namespace {

void add_provider_flags(CLI::App* cmd, EngineFlags& f) {
    cmd->add_option("--provider", f.provider, "Embedding provider: local or remote_http");
    cmd->add_option("--dim", f.dim, "Embedding dimension");
    cmd->add_option("--endpoint", f.endpoint, "Remote embedding endpoint (http://host:port/path)");
    cmd->add_option("--model", f.model, "Remote embedding model name");
}

void add_engine_flags(CLI::App* cmd, EngineFlags& f) {
    cmd->add_option("--data-dir", f.data_dir, "Registry directory (schemes/, indexes/, links.json)");
    add_provider_flags(cmd, f);
    cmd->add_option("--k", f.k, "Candidates retrieved per scheme");
    cmd->add_option("--display", f.display, "Candidates shown per turn");
    cmd->add_option("--tau", f.tau, "Sampling temperature (0 = deterministic top-k)");
    cmd->add_option("--alpha", f.alpha, "Ancestor weight");
    cmd->add_option("--beta", f.beta, "Ancestor decay per level");
    cmd->add_option("--gamma", f.gamma, "Sibling weight");
    cmd->add_option("--m", f.m, "Siblings averaged");
    cmd->add_option("--lambda", f.lambda, "Context blend weight");
    cmd->add_option("--seed", f.seed, "Random seed");
}

std::string finding_line(const Finding& f) {
    return "finding: " + std::string(finding_kind_name(f.kind)) + ": " + f.message;
}

struct IngestArgs {
    std::string input;
    std::string format = "canonical";
    std::string output;
    SkosOptions skos;
    std::string kind = "multi_field";
};

int cmd_ingest(const IngestArgs& a) {
    KosGraph graph;
    ValidationReport report;
    try {
        const std::string text = read_file(a.input);
        if (a.format == "skos") {
            SkosOptions opts = a.skos;
            const auto kind = parse_scheme_kind(a.kind);
            if (!kind) throw Error(ErrorCode::InvalidConfig, "--kind must be multi_field or single_field");
            opts.kind = *kind;
            TaxonomyDraft draft = read_skos_ntriples(text, opts);
            report = validate_assertions(draft);
            graph = KosGraph::reconcile(std::move(draft));
        } else {
            graph = KosGraph::reconcile(read_canonical(text));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    for (auto& f : validate(graph).findings) report.findings.push_back(std::move(f));
    for (const auto& f : report.findings) std::cout << finding_line(f) << "\n";
    if (!report.ok()) {
        std::cout << report.findings.size() << " finding(s); nothing written\n";
        return 2;
    }
    try {
        if (a.output.empty() || a.output == "-")
            std::cout << serialize_canonical(graph);
        else
            write_file(a.output, serialize_canonical(graph));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    if (!a.output.empty() && a.output != "-")
        std::cout << "ok: " << graph.size() << " topics, " << graph.roots().size() << " roots, scheme "
                  << graph.scheme().id << " -> " << a.output << "\n";
    return 0;
}

int cmd_index(const std::string& input, const std::string& output, const ServiceConfig& config) {
    try {
        const KosGraph graph = parse_canonical(read_file(input));
        const auto provider = make_provider(config.provider);
        const TopicIndex index = build_index(graph, *provider);
        write_file(output, serialize_index(index));
        std::cout << "indexed " << index.size() << " topics, dim " << index.dim() << ", provider "
                  << index.provider_fingerprint() << " -> " << output << "\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.code_name() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

json resolve_one(const std::string& query, const Registry& registry, const EngineConfig& config, bool auto_confirm) {
    auto [session, turn] = start_session(query, registry, config, config.seed, "resolve");
    json record{{"query", query}, {"question", turn.question}, {"candidates", turn_to_json(turn).at("candidates")}};
    if (turn.notice) record["notice"] = {{"code", turn.notice->code}, {"message", turn.notice->message}};
    if (auto_confirm) {
        json entities = json::array();
        if (!turn.candidates.empty()) {
            const auto& top = turn.candidates.front().candidate;
            session = step(std::move(session), UserAction::confirm(top.topic_id, top.scheme_id), registry).first;
            session = step(std::move(session), UserAction::done(), registry).first;
            for (const auto& e : finalize(session)) entities.push_back(entity_to_json(e));
        }
        record["entities"] = std::move(entities);
    }
    return record;
}

int cmd_resolve(const std::optional<std::string>& query, const std::optional<std::string>& batch,
                bool auto_confirm, const ServiceConfig& config) {
    std::shared_ptr<const Registry> registry;
    try {
        registry = std::make_shared<const Registry>(
            Registry::load_directory(config.data_dir, make_provider(config.provider)));
    } catch (const std::exception& e) {
        std::cerr << "error: cannot load registry: " << e.what() << "\n";
        return 1;
    }
    if (batch) {
        std::ifstream in(*batch);
        if (!in) {
            std::cerr << "error: cannot open batch file '" << *batch << "'\n";
            return 1;
        }
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            try {
                std::cout << resolve_one(line, *registry, config.engine, auto_confirm).dump() << "\n";
            } catch (const Error& e) {
                std::cout << json{{"query", line}, {"error", error_body(e.code_name(), e.what())}}.dump() << "\n";
            }
        }
        return 0;
    }
    try {
        std::cout << resolve_one(query.value_or(""), *registry, config.engine, auto_confirm).dump() << "\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.code_name() << ": " << e.what() << "\n";
        return 1;
    }
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

int cmd_serve(const ServiceConfig& config) {
    std::shared_ptr<const Registry> registry;
    try {
        registry = std::make_shared<const Registry>(
            Registry::load_directory(config.data_dir, make_provider(config.provider)));
        spdlog::info("loaded {} scheme(s) from {}", registry->schemes().size(), config.data_dir);
    } catch (const std::exception& e) {
        spdlog::error("registry unavailable: {}", e.what());
    }
    try {
        SessionService service(registry, config.engine, config.effective_session_dir());
        if (registry) spdlog::info("recovered {} session(s)", service.recover());
        const auto [host, port] = parse_listen(config.listen);
        httplib::Server server;
        install_routes(server, service);
        int bound = port;
        if (port == 0) {
            bound = server.bind_to_any_port(host);
        } else if (!server.bind_to_port(host, port)) {
            bound = -1;
        }
        if (bound < 0) {
            spdlog::error("cannot listen on {}", config.listen);
            return 1;
        }
        g_server = &server;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        std::cout << "listening on http://" << host << ":" << bound << std::endl;
        server.listen_after_bind();
        g_server = nullptr;
        return 0;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
}

}  // namespace

}  // namespace kosmap::cli

int main(int argc, char** argv) {
    using namespace kosmap;
    using namespace kosmap::cli;

    CLI::App app{"kosmap: map research-topic queries to knowledge organization system topics"};
    app.require_subcommand(1);
    std::optional<std::string> config_path;
    app.add_option("--config", config_path, "Config file (default: $KOSMAP_CONFIG)");

    IngestArgs ingest;
    auto* ingest_cmd = app.add_subcommand("ingest", "Parse and validate a taxonomy, write the canonical document");
    ingest_cmd->add_option("input", ingest.input, "Input file")->required();
    ingest_cmd->add_option("--format", ingest.format, "skos (N-Triples) or canonical")
        ->check(CLI::IsMember({"skos", "canonical"}));
    ingest_cmd->add_option("-o,--output", ingest.output, "Output path (default: stdout)");
    ingest_cmd->add_option("--strip-prefix", ingest.skos.strip_prefix, "IRI prefix removed to form topic ids");
    ingest_cmd->add_option("--scheme-id", ingest.skos.scheme_id, "Scheme id override");
    ingest_cmd->add_option("--scheme-name", ingest.skos.scheme_name, "Scheme name override");
    ingest_cmd->add_option("--kind", ingest.kind, "multi_field or single_field");
    ingest_cmd->add_option("--field-tag", ingest.skos.field_tags, "Field tag (repeatable)");

    EngineFlags index_flags;
    std::string index_input, index_output;
    auto* index_cmd = app.add_subcommand("index", "Embed every topic of a canonical document");
    index_cmd->add_option("input", index_input, "Canonical document")->required();
    index_cmd->add_option("-o,--output", index_output, "Snapshot path")->required();
    add_provider_flags(index_cmd, index_flags);

    EngineFlags chat_flags;
    ChatOptions chat;
    auto* chat_cmd = app.add_subcommand("chat", "Interactive dialogue on the terminal");
    chat_cmd->add_option("query", chat.query, "Opening query (prompted when omitted)");
    chat_cmd->add_option("--server", chat.server, "Attach to a running service, e.g. http://127.0.0.1:8080");
    add_engine_flags(chat_cmd, chat_flags);

    EngineFlags resolve_flags;
    std::optional<std::string> resolve_query, resolve_batch;
    bool auto_confirm = false;
    auto* resolve_cmd = app.add_subcommand("resolve", "Non-interactive resolution, one JSON record per query");
    resolve_cmd->add_option("query", resolve_query, "Query text");
    resolve_cmd->add_option("--batch", resolve_batch, "File with one query per line");
    resolve_cmd->add_flag("--auto-confirm-top", auto_confirm, "Confirm the top candidate, finish, emit entities");
    add_engine_flags(resolve_cmd, resolve_flags);

    EngineFlags serve_flags;
    std::optional<std::string> listen, session_dir;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP session service");
    serve_cmd->add_option("--listen", listen, "host:port (port 0 picks a free port)");
    serve_cmd->add_option("--session-dir", session_dir, "Session log directory");
    add_engine_flags(serve_cmd, serve_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*ingest_cmd) return cmd_ingest(ingest);
        if (*index_cmd) {
            return cmd_index(index_input, index_output, resolve_config(config_path, index_flags));
        }
        if (*chat_cmd) {
            const ServiceConfig config = resolve_config(config_path, chat_flags);
            chat.seed = config.engine.seed;
            return run_chat(config, chat, std::cin, std::cout, std::cerr);
        }
        if (*resolve_cmd) {
            if (resolve_query.has_value() == resolve_batch.has_value()) {
                std::cerr << "error: give either a query or --batch\n";
                return 1;
            }
            return cmd_resolve(resolve_query, resolve_batch, auto_confirm, resolve_config(config_path, resolve_flags));
        }
        if (*serve_cmd) {
            ServiceConfig config = resolve_config(config_path, serve_flags);
            if (listen) config.listen = *listen;
            if (session_dir) config.session_dir = *session_dir;
            return cmd_serve(config);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.code_name() << ": " << e.what() << "\n";
        return 1;
    }
    return 1;
}
