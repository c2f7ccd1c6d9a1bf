// SPDX-License-Identifier: Apache-2.0
#include "netquery/vector_index.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>

#include "netquery/error.hpp"
#include "netquery/text.hpp"

namespace netquery {
namespace {

std::string format_component(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string entry_line(const IndexEntry& e) {
    std::string line = "{\"id\":";
    line += nlohmann::json(e.doc.id).dump();
    line += ",\"name\":";
    line += nlohmann::json(e.doc.name).dump();
    line += ",\"signature\":";
    line += nlohmann::json(e.doc.signature).dump();
    line += ",\"description\":";
    line += nlohmann::json(e.doc.description).dump();
    line += ",\"vector\":[";
    for (std::size_t i = 0; i < e.vector.values.size(); ++i) {
        if (i)
            line += ',';
        line += format_component(e.vector.values[i]);
    }
    line += "]}";
    return line;
}

std::string checksum_of(const std::vector<std::string>& lines) {
    std::string joined;
    for (const auto& l : lines) {
        joined += l;
        joined += '\n';
    }
    return "sha256:" + hashing::sha256_hex(joined);
}

[[noreturn]] void corrupt(const std::string& why) {
    throw Error(ErrorCode::ChecksumMismatch, why);
}

} // namespace

VectorIndex::VectorIndex(IndexHeader header, std::vector<IndexEntry> entries)
    : header_(std::move(header)), entries_(std::move(entries)) {
    if (entries_.empty())
        throw Error(ErrorCode::EmptyIndex, "index has no entries");
    by_id_.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (e.vector.dimension() != header_.dimension)
            throw Error(ErrorCode::DimensionMismatch, "entry '" + e.doc.id + "' has dimension " +
                                                          std::to_string(e.vector.dimension()));
        if (e.vector.embedder_id != header_.embedder_id)
            throw Error(ErrorCode::IncompatibleEmbedders, "entry '" + e.doc.id + "' embedded by '" +
                                                              e.vector.embedder_id + "'");
        if (e.vector.degenerate)
            throw Error(ErrorCode::DegenerateVector, "entry '" + e.doc.id + "' is degenerate");
        if (!by_id_.emplace(e.doc.id, i).second)
            throw Error(ErrorCode::DuplicateId, "entry id '" + e.doc.id + "' repeated");
    }
}

const IndexEntry* VectorIndex::find(std::string_view doc_id) const {
    auto it = by_id_.find(std::string(doc_id));
    return it == by_id_.end() ? nullptr : &entries_[it->second];
}

std::vector<Retrieval> VectorIndex::top_k(const EmbeddingVector& query, std::size_t k) const {
    if (k == 0)
        throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    if (query.embedder_id != header_.embedder_id || query.dimension() != header_.dimension)
        throw Error(ErrorCode::IncompatibleEmbedders,
                    "query from '" + query.embedder_id + "', index is '" + header_.embedder_id + "'");
    if (query.degenerate)
        throw Error(ErrorCode::DegenerateVector, "query vector is degenerate");

    struct Scored {
        double score;
        std::size_t entry;
    };
    std::vector<Scored> scored;
    scored.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& v = entries_[i].vector.values;
        double dot = 0.0;
        for (std::size_t d = 0; d < v.size(); ++d)
            dot += v[d] * query.values[d];
        scored.push_back({dot, i});
    }

    auto better = [this](const Scored& a, const Scored& b) {
        if (a.score != b.score)
            return a.score > b.score;
        return entries_[a.entry].doc.id < entries_[b.entry].doc.id;
    };
    auto n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), better);

    std::vector<Retrieval> out;
    out.reserve(n);
    for (std::size_t r = 0; r < n; ++r)
        out.push_back({entries_[scored[r].entry].doc.id, scored[r].score, r + 1});
    return out;
}

std::string index_text(const MethodDoc& doc) { return doc.signature + "\n" + doc.description; }

BuildResult build_index(const DocCorpus& corpus, const Embedder& embedder, std::string built_at) {
    if (corpus.docs.empty())
        throw Error(ErrorCode::EmptyCorpus, "cannot index an empty corpus");

    std::vector<std::string> texts;
    texts.reserve(corpus.docs.size());
    for (const auto& d : corpus.docs)
        texts.push_back(index_text(d));

    std::vector<EmbeddingVector> vectors;
    try {
        vectors = embedder.embed_batch(texts);
    } catch (const Error& e) {
        // Narrow down to the first failing doc so the error names it.
        for (const auto& d : corpus.docs) {
            try {
                (void)embedder.embed(index_text(d));
            } catch (const Error& inner) {
                throw Error(ErrorCode::EmbedFailure, "doc '" + d.id + "': " + inner.what(),
                            inner.retryable());
            }
        }
        throw Error(ErrorCode::EmbedFailure, e.what(), e.retryable());
    }

    std::vector<IndexEntry> entries;
    std::vector<BuildDiagnostic> diagnostics;
    for (std::size_t i = 0; i < corpus.docs.size(); ++i) {
        if (vectors[i].degenerate) {
            diagnostics.push_back({corpus.docs[i].id, "degenerate embedding (no tokens); excluded"});
            continue;
        }
        entries.push_back({corpus.docs[i], std::move(vectors[i])});
    }
    if (entries.empty())
        throw Error(ErrorCode::EmptyIndex, "every doc embedded to a degenerate vector");

    IndexHeader header;
    header.embedder_id = embedder.id();
    header.dimension = embedder.dimension();
    header.source_label = corpus.source_label;
    header.built_at = std::move(built_at);
    return {VectorIndex(std::move(header), std::move(entries)), std::move(diagnostics)};
}

std::string serialize_index(const VectorIndex& index) {
    std::vector<std::string> lines;
    lines.reserve(index.size());
    for (const auto& e : index.entries())
        lines.push_back(entry_line(e));

    const auto& h = index.header();
    nlohmann::json header = {
        {"format_version", h.format_version}, {"embedder_id", h.embedder_id},
        {"dimension", h.dimension},           {"source_label", h.source_label},
        {"built_at", h.built_at},             {"entry_count", lines.size()},
        {"checksum", checksum_of(lines)},
    };
    std::string out = header.dump();
    out += '\n';
    for (const auto& l : lines) {
        out += l;
        out += '\n';
    }
    return out;
}

VectorIndex parse_index(std::string_view contents) {
    auto all = text::split_lines(contents);
    if (all.empty())
        corrupt("index file is empty");
    if (contents.back() != '\n')
        corrupt("index file does not end with a newline (truncated?)");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(all.front());
    } catch (const nlohmann::json::parse_error&) {
        corrupt("index header is unreadable (truncated?)");
    }
    if (!header.is_object() || !header.contains("format_version"))
        corrupt("index header lacks format_version");
    if (header["format_version"] != IndexHeader::kFormatVersion)
        throw Error(ErrorCode::FormatVersionMismatch,
                    "index format " + header["format_version"].dump() + ", expected " +
                        std::to_string(IndexHeader::kFormatVersion));

    std::vector<std::string> lines;
    for (std::size_t i = 1; i < all.size(); ++i)
        lines.emplace_back(all[i]);
    auto expected_count = header.value("entry_count", std::size_t{0});
    if (lines.size() != expected_count)
        corrupt("header declares " + std::to_string(expected_count) + " entries, file has " +
                std::to_string(lines.size()));
    if (checksum_of(lines) != header.value("checksum", std::string{}))
        corrupt("entry checksum does not match header");

    IndexHeader h;
    h.format_version = header["format_version"].get<int>();
    h.embedder_id = header.at("embedder_id").get<std::string>();
    h.dimension = header.at("dimension").get<std::size_t>();
    h.source_label = header.value("source_label", std::string{});
    h.built_at = header.value("built_at", std::string{});

    std::vector<IndexEntry> entries;
    entries.reserve(lines.size());
    for (const auto& line : lines) {
        auto j = nlohmann::json::parse(line);
        IndexEntry e;
        e.doc.id = j.at("id").get<std::string>();
        e.doc.name = j.at("name").get<std::string>();
        e.doc.signature = j.at("signature").get<std::string>();
        e.doc.description = j.at("description").get<std::string>();
        e.vector.embedder_id = h.embedder_id;
        for (const auto& x : j.at("vector"))
            e.vector.values.push_back(x.get<double>());
        entries.push_back(std::move(e));
    }
    return VectorIndex(std::move(h), std::move(entries));
}

void save_index(const VectorIndex& index, const std::filesystem::path& path) {
    text::write_file_atomic(path, serialize_index(index));
}

VectorIndex load_index(const std::filesystem::path& path) {
    return parse_index(text::read_file(path));
}

} // namespace netquery
