// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "netquery/embedding.hpp"
#include "netquery/llm_client.hpp"
#include "netquery/network_registry.hpp"
#include "netquery/prompting.hpp"
#include "netquery/sandbox.hpp"
#include "netquery/vector_index.hpp"

namespace netquery {

/// The experiment knobs; the only part of a run's configuration a client may
/// override per submission.
struct ExperimentKnobs {
    static constexpr int kMaxRetriesCap = 10;

    PromptLevel prompt_level = PromptLevel::Basic;
    int max_retries = 0;
    std::size_t top_k = 8;

    void validate() const;
    nlohmann::json to_json() const;
    /// Applies a partial override object. Unknown keys are rejected
    /// (InvalidArgument), which keeps executor settings server-side.
    ExperimentKnobs with_overrides(const nlohmann::json& overrides) const;

    bool operator==(const ExperimentKnobs&) const = default;
};

enum class RunStage { Queued, Retrieving, Generating, Executing, Repairing, Finished };
std::string_view to_string(RunStage stage);

struct ProviderCall {
    std::string prompt_hash;
    ModelRole role = ModelRole::Generator;
    std::string response_text;
    std::int64_t latency_ms = 0;
};

struct AttemptTimings {
    std::int64_t generate_ms = 0;
    std::int64_t evaluate_ms = 0;
    std::int64_t execute_ms = 0;
};

struct Attempt {
    std::size_t index = 0;
    PromptKind generation_kind = PromptKind::Generate; // Generate or Repair
    ProviderCall generation;
    std::optional<ProviderCall> evaluation; // absent when the function block was rejected
    GeneratedProgram program;               // assembled_script is not persisted
    std::string script_sha256;              // empty when nothing was executed
    ExecutionEnvelope envelope;
    AttemptTimings timings;
};

enum class FinalStatus { Answered, Failed };
std::string_view to_string(FinalStatus status);

struct RunFailure {
    std::string code;
    std::string message;
    std::string stage;
};

/// Audit trail of one query. Append-only while the run is in progress;
/// `final_status` is set exactly once at the end.
struct RunRecord {
    std::string run_id;
    std::string query;
    std::string network_id;
    std::string created_at;
    nlohmann::json config;
    std::vector<Retrieval> retrievals;
    std::vector<Attempt> attempts;
    std::optional<FinalStatus> final_status;
    std::optional<nlohmann::json> answer;
    std::optional<RunFailure> failure;
    std::int64_t retrieval_ms = 0;
    std::int64_t total_ms = 0;

    nlohmann::json to_json() const;
    static RunRecord from_json(const nlohmann::json& j);

    /// Every completion made during the run as transcript entries.
    std::vector<TranscriptEntry> transcript() const;
    std::size_t completion_count() const;
};

/// The record minus everything that legitimately varies between identical
/// runs (ids, timestamps, timings, provider labels). Replays compare this.
nlohmann::json deterministic_view(const RunRecord& record);

/// "YYYYMMDDTHHMMSSZ-xxxxxxxx" (8 lowercase hex).
std::string new_run_id();
bool is_valid_run_id(std::string_view id);

struct PipelineAssets {
    std::shared_ptr<const PromptTemplates> templates;
    std::shared_ptr<const HarnessTemplate> harness;
    std::shared_ptr<const Embedder> embedder;
    std::shared_ptr<const NetworkRegistry> networks;
    std::shared_ptr<Sandbox> sandbox;
    SandboxSpec sandbox_spec; // network_file is filled per run
};

class RunObserver {
public:
    virtual ~RunObserver() = default;
    virtual void on_stage(RunStage) {}
    virtual void on_retrievals(const std::vector<Retrieval>&) {}
    virtual void on_attempt(const Attempt&) {}
};

/// Query -> retrieval -> generation -> evaluation line -> execution, with a
/// bounded repair loop. One Pipeline serves many concurrent runs; the index
/// can be swapped while runs are in flight.
class Pipeline {
public:
    Pipeline(PipelineAssets assets, std::shared_ptr<ChatProvider> generator,
             std::shared_ptr<ChatProvider> evaluator);
    Pipeline(Pipeline&& other) noexcept;

    void set_index(std::shared_ptr<const VectorIndex> index);
    std::shared_ptr<const VectorIndex> index() const;

    /// Throws IndexMissing / NetworkUnknown / IncompatibleEmbedders.
    void check_ready(std::string_view network_id) const;

    /// Provider failures end the run as `failed` with a cause; precondition
    /// failures (see check_ready) throw.
    RunRecord run_query(const std::string& query, const std::string& network_id,
                        const ExperimentKnobs& knobs, RunObserver* observer = nullptr,
                        std::string run_id = {}) const;

    /// Same assets and index, different providers.
    Pipeline with_providers(std::shared_ptr<ChatProvider> generator,
                            std::shared_ptr<ChatProvider> evaluator) const;

    const PipelineAssets& assets() const noexcept { return assets_; }

private:
    PipelineAssets assets_;
    std::shared_ptr<ChatProvider> generator_;
    std::shared_ptr<ChatProvider> evaluator_;
    mutable std::mutex index_mutex_;
    std::shared_ptr<const VectorIndex> index_;
};

/// Re-runs a record against the current assets using scripted completions
/// built from the record itself (or `transcripts` when given). Throws
/// AssetDrift naming the first diverged asset.
RunRecord replay_run(const RunRecord& record, const Pipeline& current,
                     const std::optional<std::vector<TranscriptEntry>>& transcripts = std::nullopt);

bool replay_identical(const RunRecord& original, const RunRecord& replayed);

} // namespace netquery
