#include "kosmap/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>

#include "kosmap/error.hpp"
#include "remote_provider.hpp"

namespace kosmap {

EmbeddingVector EmbeddingVector::normalized(std::vector<double> raw) {
    double sq = 0.0;
    for (double x : raw) sq += x * x;
    if (raw.empty()) throw Error(ErrorCode::DimensionMismatch, "embedding must have positive dimension");
    if (sq == 0.0 || !std::isfinite(sq)) {
        std::fill(raw.begin(), raw.end(), 0.0);
        raw[0] = 1.0;
        return EmbeddingVector(std::move(raw));
    }
    const double n = std::sqrt(sq);
    for (double& x : raw) x /= n;
    return EmbeddingVector(std::move(raw));
}

EmbeddingVector EmbeddingVector::from_unit(std::vector<double> values) {
    EmbeddingVector v(std::move(values));
    if (v.dim() == 0 || std::abs(v.norm() - 1.0) > 1e-6)
        throw Error(ErrorCode::DimensionMismatch, "vector is not unit-normalized");
    return v;
}

double EmbeddingVector::norm() const {
    double sq = 0.0;
    for (double x : values_) sq += x * x;
    return std::sqrt(sq);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim())
        throw Error(ErrorCode::DimensionMismatch,
                    "dimension mismatch: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
    const auto x = a.values(), y = b.values();
    double dot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
    return std::clamp(dot, -1.0, 1.0);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void require_text(std::string_view text) {
    if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); }))
        throw Error(ErrorCode::EmptyText, "text to embed is empty");
}

std::map<std::size_t, double> local_features(std::string_view text, std::size_t dim) {
    if (text.empty()) throw Error(ErrorCode::EmptyText, "text to embed is empty");
    if (dim == 0) throw Error(ErrorCode::InvalidConfig, "dim must be positive");
    std::string lowered(text);
    for (char& c : lowered)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (lowered.size() < 3) lowered.append(3 - lowered.size(), ' ');

    std::map<std::size_t, double> features;
    for (std::size_t i = 0; i + 3 <= lowered.size(); ++i) {
        const std::uint64_t h = fnv1a64(std::string_view(lowered).substr(i, 3));
        const auto index = static_cast<std::size_t>(h % dim);
        features[index] += (h >> 63) ? -1.0 : 1.0;
    }
    return features;
}

void ProviderConfig::validate() const {
    if (dim < 8) throw Error(ErrorCode::InvalidConfig, "embedding dim must be >= 8");
    if (timeout.count() <= 0) throw Error(ErrorCode::InvalidConfig, "timeout must be positive");
    if (kind == ProviderKind::RemoteHttp) {
        static const std::regex url(R"(^http://[A-Za-z0-9.\-_\[\]:]+(:[0-9]{1,5})?(/[^\s]*)?$)");
        if (!std::regex_match(endpoint, url))
            throw Error(ErrorCode::InvalidConfig, "remote endpoint must be an http:// URL, got '" + endpoint + "'");
        if (max_in_flight < 1) throw Error(ErrorCode::InvalidConfig, "max_in_flight must be >= 1");
    }
}

std::string ProviderConfig::fingerprint() const {
    if (kind == ProviderKind::LocalDeterministic) return "local-trigram-fnv1a64/dim=" + std::to_string(dim);
    return "remote-http/" + endpoint + "/model=" + model_name + "/dim=" + std::to_string(dim);
}

EmbeddingVector EmbeddingProvider::embed(std::string_view text) const {
    return embed_batch({std::string(text)}).front();
}

LocalTrigramProvider::LocalTrigramProvider(std::size_t dim) : dim_(dim) {
    if (dim_ < 8) throw Error(ErrorCode::InvalidConfig, "embedding dim must be >= 8");
}

std::string LocalTrigramProvider::fingerprint() const {
    ProviderConfig config;
    config.dim = dim_;
    return config.fingerprint();
}

std::vector<EmbeddingVector> LocalTrigramProvider::embed_batch(const std::vector<std::string>& texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        require_text(text);
        std::vector<double> raw(dim_, 0.0);
        for (const auto& [index, weight] : local_features(text, dim_)) raw[index] = weight;
        out.push_back(EmbeddingVector::normalized(std::move(raw)));
    }
    return out;
}

std::shared_ptr<const EmbeddingProvider> make_provider(const ProviderConfig& config) {
    config.validate();
    if (config.kind == ProviderKind::LocalDeterministic) return std::make_shared<LocalTrigramProvider>(config.dim);
    return std::make_shared<RemoteHttpProvider>(config);
}

EmbeddingVector embed(const ProviderConfig& config, std::string_view text) {
    require_text(text);
    return make_provider(config)->embed(text);
}

}  // namespace kosmap
