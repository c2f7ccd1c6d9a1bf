// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>

#include "netquery/doc_ingest.hpp"

namespace netquery {

enum class PromptLevel { Basic, Complex };
enum class PromptKind { Generate, Evaluate, Repair };

std::string_view to_string(PromptLevel level);
std::string_view to_string(PromptKind kind);
PromptLevel parse_prompt_level(std::string_view s); // "basic" | "complex"

struct PromptBundle {
    std::string system_text;
    std::string user_text;
    PromptKind kind = PromptKind::Generate;
    std::string template_version;
};

/// Reserved names shared with the execution harness.
inline constexpr std::string_view kNetworkHandle = "en";
inline constexpr std::string_view kResultVariable = "result";

inline constexpr std::size_t kDescriptionLimit = 600;   // code points per doc
inline constexpr std::size_t kTracebackLimit = 4000;    // code points, tail kept
inline constexpr std::string_view kTruncationMarker = "…[truncated]";

/// The prompt template set, loaded once and treated as data. The version is a
/// content hash over every file, so any byte change is visible in RunRecords.
class PromptTemplates {
public:
    static constexpr std::string_view kSystemBasic = "system_basic.txt";
    static constexpr std::string_view kComplexTips = "complex_tips.txt";
    static constexpr std::string_view kGenerateUser = "generate_user.txt";
    static constexpr std::string_view kEvaluateSystem = "evaluate_system.txt";
    static constexpr std::string_view kEvaluateUser = "evaluate_user.txt";
    static constexpr std::string_view kRepairUser = "repair_user.txt";

    /// Reads all six files. One trailing newline per file is not part of the
    /// template text. Throws MissingTemplate.
    static PromptTemplates load(const std::filesystem::path& dir);
    static PromptTemplates from_texts(std::map<std::string, std::string> texts);

    const std::string& text(std::string_view name) const;
    const std::string& version() const noexcept { return version_; }

    /// Basic: the base system prompt. Complex: base + blank line + tip list.
    std::string generation_system(PromptLevel level) const;

private:
    std::map<std::string, std::string, std::less<>> texts_;
    std::string version_;
};

struct RetrievedDoc {
    MethodDoc doc;
    double score = 0.0;
};

PromptBundle build_generation_prompt(const PromptTemplates& templates, std::string_view query,
                                     std::span<const RetrievedDoc> retrievals, PromptLevel level);

/// Throws MalformedFunctionBlock unless `function_block` is a single top-level
/// function definition.
PromptBundle build_eval_prompt(const PromptTemplates& templates, std::string_view query,
                               std::string_view function_block);

PromptBundle build_repair_prompt(const PromptTemplates& templates, std::string_view query,
                                 std::string_view function_block, std::string_view eval_line,
                                 std::string_view traceback, PromptLevel level);

/// Lexical check: the first code line starts with `def ` (decorators allowed
/// before it) and no second top-level statement follows.
void validate_function_block(std::string_view function_block);

/// Name of the function defined by a validated block.
std::string defined_function_name(std::string_view function_block);

/// First fenced block wins; otherwise the trimmed whole output.
/// Throws EmptyGeneration when nothing non-whitespace remains.
std::string extract_code_block(std::string_view model_output);

/// Reduces evaluator output to the single `result = ...` line.
/// Throws MalformedEvalLine.
std::string extract_eval_line(std::string_view model_output);

std::string truncate_description(std::string_view description);
std::string truncate_traceback(std::string_view traceback);

} // namespace netquery
