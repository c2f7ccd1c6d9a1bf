// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "netquery/doc_ingest.hpp"
#include "netquery/embedding.hpp"

namespace netquery {

struct IndexEntry {
    MethodDoc doc;
    EmbeddingVector vector;

    bool operator==(const IndexEntry&) const = default;
};

struct IndexHeader {
    static constexpr int kFormatVersion = 1;

    int format_version = kFormatVersion;
    std::string embedder_id;
    std::size_t dimension = 0;
    std::string source_label;
    std::string built_at;

    bool operator==(const IndexHeader&) const = default;
};

struct Retrieval {
    std::string doc_id;
    double score = 0.0;
    std::size_t rank = 0; // 1-based

    bool operator==(const Retrieval&) const = default;
};

/// Exact cosine index over embedded MethodDocs. Immutable once constructed;
/// concurrent top_k calls are safe.
class VectorIndex {
public:
    /// Validates: shared dimension, unique ids, matching embedder ids,
    /// no degenerate vectors, at least one entry (EmptyIndex otherwise).
    VectorIndex(IndexHeader header, std::vector<IndexEntry> entries);

    const IndexHeader& header() const noexcept { return header_; }
    const std::vector<IndexEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    const IndexEntry* find(std::string_view doc_id) const;

    /// min(k, size) results, score descending, ties by ascending doc id.
    std::vector<Retrieval> top_k(const EmbeddingVector& query, std::size_t k) const;

    bool operator==(const VectorIndex& other) const {
        return header_ == other.header_ && entries_ == other.entries_;
    }

private:
    IndexHeader header_;
    std::vector<IndexEntry> entries_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

struct BuildDiagnostic {
    std::string doc_id;
    std::string reason;
};

struct BuildResult {
    VectorIndex index;
    std::vector<BuildDiagnostic> diagnostics;
};

/// Text embedded for a doc: signature, newline, description.
std::string index_text(const MethodDoc& doc);

BuildResult build_index(const DocCorpus& corpus, const Embedder& embedder,
                        std::string built_at);

/// JSON Lines: header object, then one entry object per line. Vector
/// components are written with 17 significant digits.
std::string serialize_index(const VectorIndex& index);
VectorIndex parse_index(std::string_view contents);

void save_index(const VectorIndex& index, const std::filesystem::path& path);
VectorIndex load_index(const std::filesystem::path& path);

} // namespace netquery
