// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace netquery {

enum class ErrorCode {
    // doc-ingest
    EmptyCorpus,
    DuplicateId,
    SchemaError,
    // embedding
    DimensionMismatch,
    ProviderUnavailable,
    DegenerateInput,
    IncompatibleEmbedders,
    DegenerateVector,
    // vector-index
    EmbedFailure,
    EmptyIndex,
    FormatVersionMismatch,
    ChecksumMismatch,
    // prompting
    NoRetrievals,
    MalformedFunctionBlock,
    MalformedEvalLine,
    EmptyGeneration,
    MissingTemplate,
    // llm-client
    TranscriptMiss,
    RateLimited,
    RoleMismatch,
    // sandbox
    MissingPlaceholder,
    ExecutorNotFound,
    SpawnFailure,
    // pipeline
    IndexMissing,
    NetworkUnknown,
    AssetDrift,
    ReplayMismatch,
    // benchmark
    SuiteSchemaError,
    OracleFailure,
    ExpectedExists,
    // plumbing
    ConfigError,
    IoError,
    InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Every failure the library reports carries one of the codes above so the
/// service and CLI can map it to a status or exit code without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message, bool retryable = false)
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code),
          detail_(std::move(message)),
          retryable_(retryable) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }
    bool retryable() const noexcept { return retryable_; }

private:
    ErrorCode code_;
    std::string detail_;
    bool retryable_;
};

} // namespace netquery
