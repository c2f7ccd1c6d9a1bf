// SPDX-License-Identifier: Apache-2.0
#include "netquery/doc_ingest.hpp"

#include <unordered_set>

#include "netquery/error.hpp"
#include "netquery/text.hpp"

namespace netquery {
namespace {

bool is_identifier(std::string_view s) {
    if (s.empty())
        return false;
    auto head = s.front();
    if (!(head == '_' || (head >= 'a' && head <= 'z') || (head >= 'A' && head <= 'Z')))
        return false;
    for (char c : s) {
        bool ok = c == '_' || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
        if (!ok)
            return false;
    }
    return true;
}

bool is_indented(std::string_view line) {
    return !line.empty() && (line.front() == ' ' || line.front() == '\t');
}

// Entry-level grammar check; returns the failure reason or empty on success.
std::string check_signature(std::string_view signature, std::string& name_out) {
    auto paren = signature.find('(');
    if (paren == std::string_view::npos)
        return "missing parameter list";
    auto name = text::trim(signature.substr(0, paren));
    if (name.size() != paren)
        return "whitespace before parameter list";
    if (!is_identifier(name))
        return "invalid method name";
    if (signature.back() != ')')
        return "unterminated parameter list";
    name_out = std::string(name);
    return {};
}

void add_unique(DocCorpus& corpus, std::unordered_set<std::string>& seen, MethodDoc doc,
                std::string_view where) {
    if (!seen.insert(doc.id).second) {
        throw Error(ErrorCode::DuplicateId,
                    "id '" + doc.id + "' (" + doc.name + ") appears twice; second at " + std::string(where));
    }
    corpus.docs.push_back(std::move(doc));
}

} // namespace

const MethodDoc* DocCorpus::find(std::string_view id) const {
    for (const auto& d : docs) {
        if (d.id == id)
            return &d;
    }
    return nullptr;
}

MethodDoc make_method_doc(std::string name, std::string signature, std::string description,
                          std::string_view context) {
    auto fail = [&](const std::string& what) {
        std::string msg(context);
        if (!msg.empty())
            msg += ": ";
        throw Error(ErrorCode::SchemaError, msg + what);
    };
    if (text::trim(name).empty())
        fail("field 'name' is empty");
    if (text::trim(signature).empty())
        fail("field 'signature' is empty");
    if (!is_identifier(name))
        fail("field 'name' is not an identifier");
    if (signature.rfind(name + "(", 0) != 0 || signature.back() != ')')
        fail("field 'signature' must be '" + name + "(...)'");
    if (text::trim(description).empty())
        fail("field 'description' is empty");
    MethodDoc doc;
    doc.id = text::to_lower_ascii(name);
    doc.name = std::move(name);
    doc.signature = std::move(signature);
    doc.description = std::move(description);
    return doc;
}

IngestResult parse_doc_dump(std::string_view input, std::string source_label,
                            std::string extracted_at) {
    IngestResult out;
    out.corpus.source_label = std::move(source_label);
    out.corpus.extracted_at = std::move(extracted_at);

    // Group non-blank lines into entries.
    std::vector<std::vector<std::string_view>> entries;
    bool in_entry = false;
    for (auto line : text::split_lines(input)) {
        if (text::is_blank(line)) {
            in_entry = false;
            continue;
        }
        if (!in_entry) {
            entries.emplace_back();
            in_entry = true;
        }
        entries.back().push_back(line);
    }

    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& lines = entries[i];
        auto report = [&](std::string reason) { out.diagnostics.push_back({i, std::move(reason)}); };

        if (is_indented(lines.front())) {
            report("entry starts with an indented line");
            continue;
        }
        auto signature = std::string(text::trim(lines.front()));
        std::string name;
        if (auto reason = check_signature(signature, name); !reason.empty()) {
            report(std::move(reason));
            continue;
        }
        std::string description;
        bool bad_indent = false;
        for (std::size_t l = 1; l < lines.size(); ++l) {
            if (!is_indented(lines[l])) {
                bad_indent = true;
                break;
            }
            if (!description.empty())
                description.push_back('\n');
            description.append(text::trim(lines[l]));
        }
        if (bad_indent) {
            report("description line is not indented");
            continue;
        }
        if (description.empty()) {
            report("missing description");
            continue;
        }
        auto doc = make_method_doc(std::move(name), std::move(signature), std::move(description));
        add_unique(out.corpus, seen, std::move(doc), "entry " + std::to_string(i));
    }

    if (out.corpus.docs.empty())
        throw Error(ErrorCode::EmptyCorpus, "no well-formed entries in " +
                                                std::to_string(entries.size()) + " candidate(s)");
    return out;
}

DocCorpus load_corpus_structured(const nlohmann::json& value, std::string fallback_label) {
    DocCorpus corpus;
    const nlohmann::json* records = &value;
    if (value.is_object()) {
        if (!value.contains("docs") || !value["docs"].is_array())
            throw Error(ErrorCode::SchemaError, "corpus object needs a 'docs' array");
        records = &value["docs"];
        corpus.source_label = value.value("source_label", fallback_label);
        corpus.extracted_at = value.value("extracted_at", std::string{});
    } else if (value.is_array()) {
        corpus.source_label = std::move(fallback_label);
    } else {
        throw Error(ErrorCode::SchemaError, "corpus must be an object or an array");
    }

    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < records->size(); ++i) {
        const auto& r = (*records)[i];
        auto ctx = "record " + std::to_string(i);
        if (!r.is_object())
            throw Error(ErrorCode::SchemaError, ctx + ": not an object");
        auto field = [&](const char* key) -> std::string {
            if (!r.contains(key))
                throw Error(ErrorCode::SchemaError, ctx + ": missing field '" + key + "'");
            if (!r[key].is_string())
                throw Error(ErrorCode::SchemaError, ctx + ": field '" + key + "' is not a string");
            return r[key].get<std::string>();
        };
        auto doc = make_method_doc(field("name"), field("signature"), field("description"), ctx);
        add_unique(corpus, seen, std::move(doc), ctx);
    }
    if (corpus.docs.empty())
        throw Error(ErrorCode::EmptyCorpus, "corpus has no records");
    return corpus;
}

nlohmann::json export_corpus(const DocCorpus& corpus) {
    auto docs = nlohmann::json::array();
    for (const auto& d : corpus.docs)
        docs.push_back({{"name", d.name}, {"signature", d.signature}, {"description", d.description}});
    nlohmann::json out = {{"source_label", corpus.source_label}, {"docs", std::move(docs)}};
    if (!corpus.extracted_at.empty())
        out["extracted_at"] = corpus.extracted_at;
    return out;
}

std::string render_doc_dump(const DocCorpus& corpus) {
    std::string out;
    for (const auto& d : corpus.docs) {
        if (!out.empty())
            out += "\n";
        out += d.signature;
        out += "\n";
        for (auto line : text::split_lines(d.description)) {
            if (text::is_blank(line))
                continue;
            out += "    ";
            out += text::trim(line);
            out += "\n";
        }
    }
    return out;
}

DocCorpus read_corpus_file(const std::filesystem::path& path) {
    auto raw = text::read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
    }
    return load_corpus_structured(j, path.filename().string());
}

void write_corpus_file(const DocCorpus& corpus, const std::filesystem::path& path) {
    text::write_file_atomic(path, export_corpus(corpus).dump(1) + "\n");
}

} // namespace netquery
