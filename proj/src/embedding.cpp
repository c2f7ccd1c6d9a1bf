// SPDX-License-Identifier: Apache-2.0
#include "netquery/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "netquery/error.hpp"
#include "netquery/http.hpp"
#include "netquery/text.hpp"

namespace netquery {
namespace {

constexpr std::size_t kMinDimension = 8;
constexpr std::size_t kRemoteBatch = 32;

bool is_token_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80;
}

EmbeddingVector finish(std::vector<double> values, const std::string& id) {
    EmbeddingVector v;
    v.degenerate = !l2_normalize(values);
    v.values = std::move(values);
    v.embedder_id = id;
    return v;
}

} // namespace

void EmbedderSpec::validate() const {
    if (dimension < kMinDimension)
        throw Error(ErrorCode::ConfigError,
                    "embedder dimension must be >= 8, got " + std::to_string(dimension));
    if (kind == EmbedderKind::Remote && (!endpoint || endpoint->empty()))
        throw Error(ErrorCode::ConfigError, "remote embedder requires an endpoint");
    if (timeout_s <= 0)
        throw Error(ErrorCode::ConfigError, "embedder timeout must be positive");
}

std::string EmbedderSpec::embedder_id() const {
    if (kind == EmbedderKind::HashedBow)
        return "hashed-bow/v1/" + std::to_string(dimension);
    return "remote/" + model_name.value_or("default") + "/" + std::to_string(dimension);
}

EmbedderSpec EmbedderSpec::from_json(const nlohmann::json& j) {
    EmbedderSpec spec;
    auto kind = j.value("kind", std::string("hashed-bow"));
    if (kind == "hashed-bow")
        spec.kind = EmbedderKind::HashedBow;
    else if (kind == "remote")
        spec.kind = EmbedderKind::Remote;
    else
        throw Error(ErrorCode::ConfigError, "unknown embedder kind '" + kind + "'");
    spec.dimension = j.value("dimension", spec.dimension);
    if (j.contains("endpoint"))
        spec.endpoint = j["endpoint"].get<std::string>();
    if (j.contains("model_name"))
        spec.model_name = j["model_name"].get<std::string>();
    spec.api_key_env = j.value("api_key_env", spec.api_key_env);
    spec.timeout_s = j.value("timeout_s", spec.timeout_s);
    spec.max_in_flight = j.value("max_in_flight", spec.max_in_flight);
    spec.validate();
    return spec;
}

nlohmann::json EmbedderSpec::to_json() const {
    nlohmann::json j = {{"kind", kind == EmbedderKind::HashedBow ? "hashed-bow" : "remote"},
                        {"dimension", dimension}};
    if (endpoint)
        j["endpoint"] = *endpoint;
    if (model_name)
        j["model_name"] = *model_name;
    return j;
}

std::vector<std::string> tokenize(std::string_view input) {
    auto lowered = text::to_lower_ascii(input);
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : lowered) {
        if (is_token_byte(c)) {
            current.push_back(static_cast<char>(c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty())
        tokens.push_back(std::move(current));
    return tokens;
}

bool l2_normalize(std::vector<double>& values) {
    double sum = 0.0;
    for (double x : values)
        sum += x * x;
    if (sum == 0.0)
        return false;
    double norm = std::sqrt(sum);
    for (auto& x : values)
        x /= norm;
    return true;
}

std::vector<EmbeddingVector> Embedder::embed_batch(std::span<const std::string> texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts)
        out.push_back(embed(t));
    return out;
}

HashedBowEmbedder::HashedBowEmbedder(std::size_t dimension)
    : dimension_(dimension) {
    EmbedderSpec spec;
    spec.dimension = dimension;
    spec.validate();
    id_ = spec.embedder_id();
}

EmbeddingVector HashedBowEmbedder::embed(std::string_view input) const {
    std::vector<double> counts(dimension_, 0.0);
    for (const auto& token : tokenize(input))
        counts[hashing::fnv1a64(token) % dimension_] += 1.0;
    return finish(std::move(counts), id_);
}

RemoteEmbedder::RemoteEmbedder(EmbedderSpec spec)
    : spec_(std::move(spec)), in_flight_(spec_.max_in_flight) {
    spec_.validate();
    id_ = spec_.embedder_id();
}

EmbeddingVector RemoteEmbedder::embed(std::string_view input) const {
    std::string one(input);
    return embed_batch(std::span<const std::string>(&one, 1)).front();
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(std::span<const std::string> texts) const {
    std::vector<http::Header> headers;
    if (const char* key = std::getenv(spec_.api_key_env.c_str()); key && *key)
        headers.emplace_back("Authorization", std::string("Bearer ") + key);

    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += kRemoteBatch) {
        auto chunk = texts.subspan(start, std::min(kRemoteBatch, texts.size() - start));
        nlohmann::json body = {{"texts", nlohmann::json::array()}};
        for (const auto& t : chunk)
            body["texts"].push_back(t);
        if (spec_.model_name)
            body["model"] = *spec_.model_name;

        http::Response res;
        {
            SlotLimiter::Slot slot(in_flight_);
            res = http::post_json(*spec_.endpoint, body.dump(), headers, spec_.timeout_s);
        }
        if (res.status == 0)
            throw Error(ErrorCode::ProviderUnavailable, "embedding endpoint: " + res.transport_error, true);
        if (!res.ok())
            throw Error(ErrorCode::ProviderUnavailable,
                        "embedding endpoint returned HTTP " + std::to_string(res.status),
                        res.status >= 500 || res.status == 429);

        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(res.body);
        } catch (const nlohmann::json::parse_error&) {
            throw Error(ErrorCode::ProviderUnavailable, "embedding endpoint returned invalid JSON", false);
        }
        if (!parsed.contains("vectors") || !parsed["vectors"].is_array() ||
            parsed["vectors"].size() != chunk.size())
            throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(chunk.size()) +
                                                          " vectors in response");
        for (const auto& row : parsed["vectors"]) {
            if (!row.is_array() || row.size() != spec_.dimension)
                throw Error(ErrorCode::DimensionMismatch,
                            "expected dimension " + std::to_string(spec_.dimension) + ", got " +
                                std::to_string(row.is_array() ? row.size() : 0));
            std::vector<double> values;
            values.reserve(row.size());
            for (const auto& x : row) {
                if (!x.is_number())
                    throw Error(ErrorCode::DimensionMismatch, "non-numeric vector component");
                values.push_back(x.get<double>());
            }
            out.push_back(finish(std::move(values), id_));
        }
    }
    return out;
}

std::unique_ptr<Embedder> make_embedder(const EmbedderSpec& spec) {
    spec.validate();
    if (spec.kind == EmbedderKind::HashedBow)
        return std::make_unique<HashedBowEmbedder>(spec.dimension);
    return std::make_unique<RemoteEmbedder>(spec);
}

EmbeddingVector embed_text(std::string_view input, const EmbedderSpec& spec) {
    return make_embedder(spec)->embed(input);
}

void require_non_degenerate(const EmbeddingVector& v, std::string_view what) {
    if (v.degenerate)
        throw Error(ErrorCode::DegenerateInput, std::string(what) + " has no embeddable tokens");
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.embedder_id != b.embedder_id || a.values.size() != b.values.size())
        throw Error(ErrorCode::IncompatibleEmbedders,
                    "'" + a.embedder_id + "' vs '" + b.embedder_id + "'");
    if (a.degenerate || b.degenerate)
        throw Error(ErrorCode::DegenerateVector, "cosine of a degenerate vector");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        dot += a.values[i] * b.values[i];
    return std::clamp(dot, -1.0, 1.0);
}

} // namespace netquery
