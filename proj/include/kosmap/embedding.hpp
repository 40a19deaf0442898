#pragma once
// Dense text embeddings behind a provider interface.
//
// The local provider is a hashed character-trigram model:
//   1. ASCII-lowercase the text (other bytes pass through unchanged).
//   2. Texts shorter than three bytes are right-padded with spaces to three.
//   3. Every 3-byte window (spaces included) is hashed with FNV-1a 64
//      (offset basis 0xcbf29ce484222325, prime 0x100000001b3).
//   4. index = hash mod dim; sign = -1 if bit 63 of the hash is set, else +1.
//   5. Signed counts accumulate per index; the vector is L2-normalized.
// An all-zero accumulation normalizes to the basis vector e0.

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kosmap {

class EmbeddingVector {
public:
    EmbeddingVector() = default;

    // L2-normalizes raw; a zero vector becomes e0.
    static EmbeddingVector normalized(std::vector<double> raw);
    // Keeps the values bit-for-bit; throws DimensionMismatch unless the norm
    // is 1 within 1e-6.
    static EmbeddingVector from_unit(std::vector<double> values);

    std::size_t dim() const { return values_.size(); }
    std::span<const double> values() const { return values_; }
    double norm() const;

    bool operator==(const EmbeddingVector&) const = default;

private:
    explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {}
    std::vector<double> values_;
};

// Throws DimensionMismatch. Result is clamped to [-1, 1].
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

std::uint64_t fnv1a64(std::string_view bytes);

inline constexpr std::size_t kDefaultLocalDim = 256;

// Unnormalized signed trigram counts, keyed by index in [0, dim).
std::map<std::size_t, double> local_features(std::string_view text, std::size_t dim = kDefaultLocalDim);

enum class ProviderKind { LocalDeterministic, RemoteHttp };

struct ProviderConfig {
    ProviderKind kind = ProviderKind::LocalDeterministic;
    std::size_t dim = kDefaultLocalDim;
    std::string endpoint;    // remote only, http://host[:port]/path
    std::string model_name;  // remote only
    std::chrono::milliseconds timeout{5000};
    int max_in_flight = 4;  // concurrent remote requests

    void validate() const;  // throws InvalidConfig
    std::string fingerprint() const;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual std::size_t dim() const = 0;
    virtual std::string fingerprint() const = 0;
    // Throws EmptyText for any blank input; remote failures surface as
    // RemoteUnavailable / RemoteBadResponse.
    virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) const = 0;

    EmbeddingVector embed(std::string_view text) const;
};

class LocalTrigramProvider final : public EmbeddingProvider {
public:
    explicit LocalTrigramProvider(std::size_t dim = kDefaultLocalDim);

    std::size_t dim() const override { return dim_; }
    std::string fingerprint() const override;
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) const override;

private:
    std::size_t dim_;
};

std::shared_ptr<const EmbeddingProvider> make_provider(const ProviderConfig& config);

EmbeddingVector embed(const ProviderConfig& config, std::string_view text);

// Throws EmptyText when text is blank after trimming whitespace.
void require_text(std::string_view text);

}  // namespace kosmap
