// SPDX-License-Identifier: Apache-2.0
#include "netquery/error.hpp"

namespace netquery {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::IncompatibleEmbedders: return "IncompatibleEmbedders";
    case ErrorCode::DegenerateVector: return "DegenerateVector";
    case ErrorCode::EmbedFailure: return "EmbedFailure";
    case ErrorCode::EmptyIndex: return "EmptyIndex";
    case ErrorCode::FormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::NoRetrievals: return "NoRetrievals";
    case ErrorCode::MalformedFunctionBlock: return "MalformedFunctionBlock";
    case ErrorCode::MalformedEvalLine: return "MalformedEvalLine";
    case ErrorCode::EmptyGeneration: return "EmptyGeneration";
    case ErrorCode::MissingTemplate: return "MissingTemplate";
    case ErrorCode::TranscriptMiss: return "TranscriptMiss";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::RoleMismatch: return "RoleMismatch";
    case ErrorCode::MissingPlaceholder: return "MissingPlaceholder";
    case ErrorCode::ExecutorNotFound: return "ExecutorNotFound";
    case ErrorCode::SpawnFailure: return "SpawnFailure";
    case ErrorCode::IndexMissing: return "IndexMissing";
    case ErrorCode::NetworkUnknown: return "NetworkUnknown";
    case ErrorCode::AssetDrift: return "AssetDrift";
    case ErrorCode::ReplayMismatch: return "ReplayMismatch";
    case ErrorCode::SuiteSchemaError: return "SuiteSchemaError";
    case ErrorCode::OracleFailure: return "OracleFailure";
    case ErrorCode::ExpectedExists: return "ExpectedExists";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

} // namespace netquery
