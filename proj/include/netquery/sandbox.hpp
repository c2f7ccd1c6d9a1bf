// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "netquery/concurrency.hpp"

namespace netquery {

/// One attempt's generated code. `assembled_script` is derived by assemble_script.
struct GeneratedProgram {
    std::string function_block;
    std::string eval_line;
    std::size_t attempt_index = 0;
    std::string assembled_script;
};

enum class ExecutionStatus { Ok, Error, Timeout };

std::string_view to_string(ExecutionStatus status);

/// Exactly one of `result` / `traceback` is set.
struct ExecutionEnvelope {
    ExecutionStatus status = ExecutionStatus::Error;
    std::optional<nlohmann::json> result;
    std::optional<std::string> traceback;
    std::string stdout_excerpt;
    std::int64_t wall_time_ms = 0;
    std::filesystem::path workdir; // not serialized; set only when the workdir is kept

    nlohmann::json to_json() const;
    static ExecutionEnvelope from_json(const nlohmann::json& j);

    static ExecutionEnvelope error(std::string traceback, std::int64_t wall_time_ms = 0);
};

struct SandboxSpec {
    static constexpr std::string_view kScriptPlaceholder = "{script}";

    std::vector<std::string> executor_command; // argv template, "{script}" exactly once
    std::filesystem::path harness_template_path;
    std::filesystem::path network_file;        // set per run from the network registry
    double timeout_s = 60.0;
    std::vector<std::string> env_allowlist = {"PATH", "LANG", "LC_ALL", "PYTHONPATH"};
    std::filesystem::path temp_root;           // empty: system temp dir
    std::string script_name = "program.py";
    bool keep_workdir = false;
    std::size_t stdout_excerpt_cap = 8 * 1024;

    void validate() const;
    static SandboxSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// The harness preamble with {{NETWORK_PATH}}, {{FUNCTION_BLOCK}}, {{EVAL_LINE}}.
class HarnessTemplate {
public:
    static constexpr std::string_view kNetworkPath = "NETWORK_PATH";
    static constexpr std::string_view kFunctionBlock = "FUNCTION_BLOCK";
    static constexpr std::string_view kEvalLine = "EVAL_LINE";

    /// Throws MissingPlaceholder.
    explicit HarnessTemplate(std::string text);
    static HarnessTemplate load(const std::filesystem::path& path);

    const std::string& text() const noexcept { return text_; }
    const std::string& version() const noexcept { return version_; }

private:
    std::string text_;
    std::string version_;
};

/// Pure text substitution; the execution language is never interpreted here.
std::string assemble_script(const GeneratedProgram& program, const HarnessTemplate& harness,
                            const std::filesystem::path& network_file);

/// Parses captured process output into an envelope. The final non-empty
/// stdout line must be the envelope object; anything else becomes an error
/// envelope whose traceback starts with "ENVELOPE_PARSE_FAILURE".
ExecutionEnvelope parse_envelope_output(std::string_view stdout_text, std::string_view stderr_text,
                                        std::int64_t wall_time_ms, std::size_t excerpt_cap);

inline constexpr std::string_view kEnvelopeParseFailure = "ENVELOPE_PARSE_FAILURE";

/// Runs scripts in subprocesses: fresh temp cwd, allowlisted environment,
/// stdio only, process-group kill on deadline. Bounded by a global cap.
class Sandbox {
public:
    explicit Sandbox(std::size_t max_concurrent = 0); // 0: hardware concurrency

    /// Script failures come back as error/timeout envelopes. Throws only
    /// ExecutorNotFound / SpawnFailure / IoError.
    ExecutionEnvelope execute(const std::string& script, const SandboxSpec& spec);

    std::size_t capacity() const noexcept { return limiter_.capacity(); }

private:
    SlotLimiter limiter_;
};

} // namespace netquery
