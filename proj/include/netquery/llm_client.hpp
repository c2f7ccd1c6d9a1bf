// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "netquery/concurrency.hpp"
#include "netquery/prompting.hpp"

namespace netquery {

enum class ModelRole { Generator, Evaluator };

std::string_view to_string(ModelRole role);
ModelRole parse_model_role(std::string_view s);

enum class ProviderKind { HttpChat, Scripted };

struct ProviderSpec {
    ProviderKind kind = ProviderKind::HttpChat;
    // http-chat
    std::string endpoint;   // full URL of the chat-completions route
    std::string model_name;
    double temperature = 0.0;
    std::string api_key_env = "NETQUERY_LLM_API_KEY";
    std::size_t max_in_flight = 4;
    int max_transport_retries = 3;
    int backoff_initial_ms = 500;
    // scripted
    std::filesystem::path transcript_path;

    double request_timeout_s = 120.0;

    void validate() const;
    static ProviderSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct ProviderMeta {
    std::int64_t latency_ms = 0;
    std::optional<std::int64_t> prompt_tokens;
    std::optional<std::int64_t> completion_tokens;
    int transport_retries = 0;
};

struct Completion {
    std::string text;
    ProviderMeta meta;
    std::string prompt_hash;
};

/// SHA-256 over the length-framed (role, system_text, user_text) triple.
std::string prompt_hash(const PromptBundle& bundle, ModelRole role);

/// Throws RoleMismatch when the evaluator is asked for anything but an
/// evaluation prompt.
void check_role(const PromptBundle& bundle, ModelRole role);

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual Completion complete(const PromptBundle& bundle, ModelRole role) = 0;
    virtual std::string describe() const = 0;
};

/// Chat-completion over HTTP: {model, messages:[system, user], temperature}
/// -> choices[0].message.content. Transport errors and 429s are retried here;
/// the pipeline's code-repair counter never sees them.
class HttpChatProvider final : public ChatProvider {
public:
    explicit HttpChatProvider(ProviderSpec spec);

    Completion complete(const PromptBundle& bundle, ModelRole role) override;
    std::string describe() const override;

    nlohmann::json request_body(const PromptBundle& bundle) const;

private:
    ProviderSpec spec_;
    SlotLimiter in_flight_;
};

struct TranscriptEntry {
    std::string prompt_hash;
    ModelRole role = ModelRole::Generator;
    std::string response_text;
    std::string note;

    nlohmann::json to_json() const;
    static TranscriptEntry from_json(const nlohmann::json& j);
};

std::vector<TranscriptEntry> read_transcript(const std::filesystem::path& path);
void write_transcript(const std::vector<TranscriptEntry>& entries,
                      const std::filesystem::path& path);

/// Replays recorded completions keyed by prompt hash.
class ScriptedProvider final : public ChatProvider {
public:
    explicit ScriptedProvider(const std::vector<TranscriptEntry>& entries,
                              std::string label = "scripted");
    static std::unique_ptr<ScriptedProvider> from_file(const std::filesystem::path& path);

    Completion complete(const PromptBundle& bundle, ModelRole role) override;
    std::string describe() const override { return label_; }
    std::size_t size() const noexcept { return by_hash_.size(); }

private:
    std::unordered_map<std::string, TranscriptEntry> by_hash_;
    std::string label_;
};

/// Fixture authoring: serves queued responses per role in order and records
/// what it served as transcript entries.
class RecordingProvider final : public ChatProvider {
public:
    void enqueue(ModelRole role, std::string response, std::string note = {});

    Completion complete(const PromptBundle& bundle, ModelRole role) override;
    std::string describe() const override { return "recording"; }

    /// Entries in first-seen order. Throws InvalidArgument if one prompt was
    /// answered with two different responses.
    std::vector<TranscriptEntry> entries() const;
    std::size_t pending(ModelRole role) const;

private:
    mutable std::mutex mutex_;
    std::deque<std::pair<std::string, std::string>> generator_queue_;
    std::deque<std::pair<std::string, std::string>> evaluator_queue_;
    std::vector<TranscriptEntry> recorded_;
};

std::unique_ptr<ChatProvider> make_provider(const ProviderSpec& spec);

} // namespace netquery
