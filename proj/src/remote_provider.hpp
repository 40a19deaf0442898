#pragma once

#include <memory>
#include <semaphore>

#include "kosmap/embedding.hpp"

namespace kosmap {

// POST {model, texts} -> {vectors}; at most config.max_in_flight requests
// are outstanding at once across all callers of one provider.
class RemoteHttpProvider final : public EmbeddingProvider {
public:
    explicit RemoteHttpProvider(ProviderConfig config);

    std::size_t dim() const override { return config_.dim; }
    std::string fingerprint() const override { return config_.fingerprint(); }
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) const override;

private:
    ProviderConfig config_;
    std::string base_;  // scheme://host[:port]
    std::string path_;
    std::unique_ptr<std::counting_semaphore<>> in_flight_;
};

// Splits "http://host:port/path" into ("http://host:port", "/path").
std::pair<std::string, std::string> split_endpoint(const std::string& url);

}  // namespace kosmap
