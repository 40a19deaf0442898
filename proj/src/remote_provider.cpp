#include "remote_provider.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

#include "kosmap/error.hpp"

namespace kosmap {

using nlohmann::json;

std::pair<std::string, std::string> split_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

RemoteHttpProvider::RemoteHttpProvider(ProviderConfig config) : config_(std::move(config)) {
    config_.validate();
    std::tie(base_, path_) = split_endpoint(config_.endpoint);
    in_flight_ = std::make_unique<std::counting_semaphore<>>(config_.max_in_flight);
}

std::vector<EmbeddingVector> RemoteHttpProvider::embed_batch(const std::vector<std::string>& texts) const {
    for (const auto& t : texts) require_text(t);

    httplib::Client client(base_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    const std::string body = json{{"model", config_.model_name}, {"texts", texts}}.dump();
    httplib::Result res = [&] {
        in_flight_->acquire();
        auto r = client.Post(path_, body, "application/json");
        in_flight_->release();
        return r;
    }();

    if (!res)
        throw Error(ErrorCode::RemoteUnavailable,
                    "embedding endpoint " + config_.endpoint + " unreachable: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        throw Error(ErrorCode::RemoteBadResponse, "embedding endpoint returned HTTP " + std::to_string(res->status));

    std::vector<EmbeddingVector> out;
    try {
        const json reply = json::parse(res->body);
        const json& vectors = reply.at("vectors");
        if (!vectors.is_array() || vectors.size() != texts.size())
            throw Error(ErrorCode::RemoteBadResponse, "expected one vector per input text");
        for (const auto& v : vectors) {
            if (!v.is_array() || v.size() != config_.dim)
                throw Error(ErrorCode::RemoteBadResponse,
                            "expected vectors of length " + std::to_string(config_.dim));
            std::vector<double> raw;
            raw.reserve(v.size());
            for (const auto& x : v) {
                if (!x.is_number()) throw Error(ErrorCode::RemoteBadResponse, "non-numeric vector component");
                raw.push_back(x.get<double>());
            }
            out.push_back(EmbeddingVector::normalized(std::move(raw)));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::RemoteBadResponse, std::string("malformed embedding response: ") + e.what());
    }
    return out;
}

}  // namespace kosmap
