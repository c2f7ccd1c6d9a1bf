// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace netquery {

/// One toolkit API method; the unit of retrieval.
struct MethodDoc {
    std::string id;        // lowercased name, unique within a corpus
    std::string name;
    std::string signature; // "name(arg1, arg2, ...)"
    std::string description;

    bool operator==(const MethodDoc&) const = default;
};

struct DocCorpus {
    std::vector<MethodDoc> docs; // source order
    std::string source_label;
    std::string extracted_at;

    const MethodDoc* find(std::string_view id) const;
};

struct IngestDiagnostic {
    std::size_t entry_index; // 0-based position among blank-line-separated entries
    std::string reason;
};

struct IngestResult {
    DocCorpus corpus;
    std::vector<IngestDiagnostic> diagnostics;
};

/// Builds a MethodDoc from raw fields, enforcing the record invariants.
/// Throws SchemaError with `context` prefixed to the message.
MethodDoc make_method_doc(std::string name, std::string signature, std::string description,
                          std::string_view context = {});

/// Parses the plaintext dump grammar:
///
///     getNodeCount()
///         Retrieves the number of nodes.
///
/// Entries are separated by one or more blank lines. The first line of an
/// entry is the signature; the remaining lines must be indented and form the
/// description (each line trimmed, joined with '\n'). Malformed entries are
/// skipped and reported; duplicate ids and an empty result are hard errors.
IngestResult parse_doc_dump(std::string_view text, std::string source_label,
                            std::string extracted_at);

/// Accepts either `{"source_label": ..., "docs": [...]}` or a bare array of
/// `{name, signature, description}` records (then `fallback_label` is used).
DocCorpus load_corpus_structured(const nlohmann::json& value, std::string fallback_label = {});

/// Structured form read back by load_corpus_structured.
nlohmann::json export_corpus(const DocCorpus& corpus);

/// Plaintext form read back by parse_doc_dump.
std::string render_doc_dump(const DocCorpus& corpus);

DocCorpus read_corpus_file(const std::filesystem::path& path);
void write_corpus_file(const DocCorpus& corpus, const std::filesystem::path& path);

} // namespace netquery
