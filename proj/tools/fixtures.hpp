// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "netquery/benchmark.hpp"

namespace netquery {

/// Turns a scenario file (per case and prompt level, the sequence of attempt
/// outcomes) into scripted completions by driving the pipeline with a
/// RecordingProvider at the largest retry budget. Outcomes: ok, wrong, raise,
/// malformed, name_error, bad_eval.
std::vector<TranscriptEntry> record_fixture_transcripts(const Pipeline& pipeline, const BenchmarkSuite& suite,
                                                        const nlohmann::json& scenarios);

} // namespace netquery
