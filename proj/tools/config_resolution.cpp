#include <cstdlib>

#include "cli.hpp"
#include "kosmap/error.hpp"

namespace kosmap::cli {

ServiceConfig resolve_config(const std::optional<std::string>& config_path, const EngineFlags& f) {
    ServiceConfig c;
    std::optional<std::string> path = config_path;
    if (!path)
        if (const char* env = std::getenv("KOSMAP_CONFIG"); env && *env) path = env;
    if (path) c = load_service_config(*path);
    apply_environment(c);

    if (f.data_dir) c.data_dir = *f.data_dir;
    if (f.provider) {
        if (*f.provider == "local")
            c.provider.kind = ProviderKind::LocalDeterministic;
        else if (*f.provider == "remote_http")
            c.provider.kind = ProviderKind::RemoteHttp;
        else
            throw Error(ErrorCode::InvalidConfig, "--provider must be local or remote_http");
    }
    if (f.dim) c.provider.dim = *f.dim;
    if (f.endpoint) c.provider.endpoint = *f.endpoint;
    if (f.model) c.provider.model_name = *f.model;
    c.provider.validate();

    EngineConfig& e = c.engine;
    if (f.k) e.k = *f.k;
    if (f.display) e.display = *f.display;
    if (f.tau) e.tau_broad = e.tau_drilldown = *f.tau;
    if (f.alpha) e.rerank.alpha = *f.alpha;
    if (f.beta) e.rerank.beta = *f.beta;
    if (f.gamma) e.rerank.gamma = *f.gamma;
    if (f.m) e.rerank.m = *f.m;
    if (f.lambda) e.lambda = *f.lambda;
    if (f.seed) e.seed = *f.seed;
    e.validate();
    return c;
}

}  // namespace kosmap::cli
