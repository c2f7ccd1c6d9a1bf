// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "netquery/concurrency.hpp"

namespace netquery {

enum class EmbedderKind { HashedBow, Remote };

struct EmbedderSpec {
    EmbedderKind kind = EmbedderKind::HashedBow;
    std::size_t dimension = 512;
    std::optional<std::string> endpoint;   // remote only, full URL
    std::optional<std::string> model_name; // remote only
    std::string api_key_env = "NETQUERY_EMBEDDER_API_KEY";
    double timeout_s = 30.0;
    std::size_t max_in_flight = 4;

    /// Throws ConfigError: dimension < 8, or remote without endpoint.
    void validate() const;

    /// name + version + dimension, e.g. "hashed-bow/v1/512".
    std::string embedder_id() const;

    static EmbedderSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct EmbeddingVector {
    std::vector<double> values;
    std::string embedder_id;
    bool degenerate = false; // zero vector: no tokens, nothing to compare

    std::size_t dimension() const noexcept { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

class Embedder {
public:
    virtual ~Embedder() = default;

    virtual EmbeddingVector embed(std::string_view text) const = 0;

    /// Default implementation embeds one text at a time.
    virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const;

    virtual const std::string& id() const noexcept = 0;
    virtual std::size_t dimension() const noexcept = 0;
};

/// Offline, deterministic embedder: raw term counts hashed into D bins.
class HashedBowEmbedder final : public Embedder {
public:
    explicit HashedBowEmbedder(std::size_t dimension);

    EmbeddingVector embed(std::string_view text) const override;
    const std::string& id() const noexcept override { return id_; }
    std::size_t dimension() const noexcept override { return dimension_; }

private:
    std::size_t dimension_;
    std::string id_;
};

/// POST {texts:[...]} -> {vectors:[[...]]}; vectors are re-normalized locally.
class RemoteEmbedder final : public Embedder {
public:
    explicit RemoteEmbedder(EmbedderSpec spec);

    EmbeddingVector embed(std::string_view text) const override;
    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const override;
    const std::string& id() const noexcept override { return id_; }
    std::size_t dimension() const noexcept override { return spec_.dimension; }

private:
    EmbedderSpec spec_;
    std::string id_;
    mutable SlotLimiter in_flight_;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderSpec& spec);

/// Lowercase (ASCII), then split on maximal runs of bytes outside
/// [a-z0-9] and >= 0x80.
std::vector<std::string> tokenize(std::string_view text);

/// In-place L2 normalization; returns false (vector untouched) for a zero vector.
bool l2_normalize(std::vector<double>& values);

EmbeddingVector embed_text(std::string_view text, const EmbedderSpec& spec);

/// Throws DegenerateInput when `v` is flagged degenerate.
void require_non_degenerate(const EmbeddingVector& v, std::string_view what);

/// Dot product of two unit vectors. Throws IncompatibleEmbedders or DegenerateVector.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

} // namespace netquery
