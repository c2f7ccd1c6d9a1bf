// SPDX-License-Identifier: Apache-2.0
#include "netquery/llm_client.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "netquery/error.hpp"
#include "netquery/http.hpp"
#include "netquery/text.hpp"

namespace netquery {
namespace {

void frame(std::string& out, std::string_view part) {
    out += std::to_string(part.size());
    out += ':';
    out.append(part);
}

std::string prompt_digest(const PromptBundle& b) {
    auto first_line = [](std::string_view s) {
        auto lines = text::split_lines(s);
        for (auto l : lines) {
            if (!text::is_blank(l))
                return std::string(text::utf8_prefix(text::trim(l), 80));
        }
        return std::string{};
    };
    auto query_pos = b.user_text.find("Task:");
    std::string head = query_pos == std::string::npos ? first_line(b.user_text)
                                                      : first_line(b.user_text.substr(query_pos));
    return std::string(to_string(b.kind)) + " prompt, " + std::to_string(b.user_text.size()) +
           " user bytes, starts '" + head + "'";
}

int parse_retry_after_ms(const std::string& header, int fallback_ms) {
    if (header.empty())
        return fallback_ms;
    char* end = nullptr;
    double secs = std::strtod(header.c_str(), &end);
    if (end == header.c_str() || secs < 0)
        return fallback_ms;
    return static_cast<int>(secs * 1000.0);
}

} // namespace

std::string_view to_string(ModelRole role) {
    return role == ModelRole::Generator ? "generator" : "evaluator";
}

ModelRole parse_model_role(std::string_view s) {
    if (s == "generator")
        return ModelRole::Generator;
    if (s == "evaluator")
        return ModelRole::Evaluator;
    throw Error(ErrorCode::InvalidArgument, "unknown model role '" + std::string(s) + "'");
}

void ProviderSpec::validate() const {
    if (kind == ProviderKind::HttpChat) {
        if (endpoint.empty())
            throw Error(ErrorCode::ConfigError, "http-chat provider requires an endpoint");
        http::split_url(endpoint);
        if (model_name.empty())
            throw Error(ErrorCode::ConfigError, "http-chat provider requires a model_name");
    } else if (transcript_path.empty()) {
        throw Error(ErrorCode::ConfigError, "scripted provider requires a transcript_path");
    }
    if (request_timeout_s <= 0)
        throw Error(ErrorCode::ConfigError, "request_timeout_s must be positive");
    if (max_transport_retries < 0)
        throw Error(ErrorCode::ConfigError, "max_transport_retries must be >= 0");
    if (temperature < 0)
        throw Error(ErrorCode::ConfigError, "temperature must be >= 0");
}

ProviderSpec ProviderSpec::from_json(const nlohmann::json& j) {
    ProviderSpec s;
    auto kind = j.value("kind", std::string("http-chat"));
    if (kind == "http-chat")
        s.kind = ProviderKind::HttpChat;
    else if (kind == "scripted")
        s.kind = ProviderKind::Scripted;
    else
        throw Error(ErrorCode::ConfigError, "unknown provider kind '" + kind + "'");
    s.endpoint = j.value("endpoint", s.endpoint);
    s.model_name = j.value("model_name", s.model_name);
    s.temperature = j.value("temperature", s.temperature);
    s.api_key_env = j.value("api_key_env", s.api_key_env);
    s.max_in_flight = j.value("max_in_flight", s.max_in_flight);
    s.max_transport_retries = j.value("max_transport_retries", s.max_transport_retries);
    s.backoff_initial_ms = j.value("backoff_initial_ms", s.backoff_initial_ms);
    if (j.contains("transcript_path"))
        s.transcript_path = j["transcript_path"].get<std::string>();
    s.request_timeout_s = j.value("request_timeout_s", s.request_timeout_s);
    s.validate();
    return s;
}

nlohmann::json ProviderSpec::to_json() const {
    if (kind == ProviderKind::Scripted)
        return {{"kind", "scripted"}, {"transcript", transcript_path.filename().string()}};
    return {{"kind", "http-chat"},
            {"endpoint", endpoint},
            {"model_name", model_name},
            {"temperature", temperature},
            {"request_timeout_s", request_timeout_s}};
}

std::string prompt_hash(const PromptBundle& bundle, ModelRole role) {
    std::string framed;
    frame(framed, to_string(role));
    frame(framed, bundle.system_text);
    frame(framed, bundle.user_text);
    return hashing::sha256_hex(framed);
}

void check_role(const PromptBundle& bundle, ModelRole role) {
    bool is_eval = bundle.kind == PromptKind::Evaluate;
    if (is_eval != (role == ModelRole::Evaluator))
        throw Error(ErrorCode::RoleMismatch, std::string(to_string(bundle.kind)) +
                                                 " prompt sent to the " + std::string(to_string(role)));
}

HttpChatProvider::HttpChatProvider(ProviderSpec spec)
    : spec_(std::move(spec)), in_flight_(spec_.max_in_flight) {
    spec_.validate();
}

std::string HttpChatProvider::describe() const { return "http-chat:" + spec_.model_name; }

nlohmann::json HttpChatProvider::request_body(const PromptBundle& bundle) const {
    return {{"model", spec_.model_name},
            {"messages",
             nlohmann::json::array({{{"role", "system"}, {"content", bundle.system_text}},
                                    {{"role", "user"}, {"content", bundle.user_text}}})},
            {"temperature", spec_.temperature}};
}

Completion HttpChatProvider::complete(const PromptBundle& bundle, ModelRole role) {
    check_role(bundle, role);
    const auto body = request_body(bundle).dump();

    std::vector<http::Header> headers;
    if (const char* key = std::getenv(spec_.api_key_env.c_str()); key && *key)
        headers.emplace_back("Authorization", std::string("Bearer ") + key);

    Completion out;
    out.prompt_hash = prompt_hash(bundle, role);
    auto started = std::chrono::steady_clock::now();
    int backoff_ms = spec_.backoff_initial_ms;

    for (int attempt = 0;; ++attempt) {
        http::Response res;
        {
            SlotLimiter::Slot slot(in_flight_);
            res = http::post_json(spec_.endpoint, body, headers, spec_.request_timeout_s);
        }

        std::optional<Error> failure;
        int wait_ms = backoff_ms;
        if (res.status == 0) {
            failure.emplace(ErrorCode::ProviderUnavailable,
                            describe() + ": " + res.transport_error, true);
        } else if (res.status == 429) {
            wait_ms = parse_retry_after_ms(res.retry_after, backoff_ms);
            failure.emplace(ErrorCode::RateLimited, describe() + ": HTTP 429", true);
        } else if (res.status >= 500) {
            failure.emplace(ErrorCode::ProviderUnavailable,
                            describe() + ": HTTP " + std::to_string(res.status), true);
        } else if (!res.ok()) {
            throw Error(ErrorCode::ProviderUnavailable,
                        describe() + ": HTTP " + std::to_string(res.status), false);
        }

        if (failure) {
            if (attempt >= spec_.max_transport_retries)
                throw *failure;
            spdlog::warn("{} transport retry {}/{} after {} ms: {}", describe(), attempt + 1,
                         spec_.max_transport_retries, wait_ms, failure->what());
            std::this_thread::sleep_for(std::chrono::milliseconds(wait_ms));
            backoff_ms *= 2;
            continue;
        }

        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(res.body);
            out.text = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorCode::ProviderUnavailable, describe() + ": malformed completion body", false);
        }
        if (auto usage = parsed.find("usage"); usage != parsed.end() && usage->is_object()) {
            if (usage->contains("prompt_tokens") && (*usage)["prompt_tokens"].is_number_integer())
                out.meta.prompt_tokens = (*usage)["prompt_tokens"].get<std::int64_t>();
            if (usage->contains("completion_tokens") && (*usage)["completion_tokens"].is_number_integer())
                out.meta.completion_tokens = (*usage)["completion_tokens"].get<std::int64_t>();
        }
        out.meta.transport_retries = attempt;
        break;
    }
    out.meta.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - started)
                              .count();
    return out;
}

nlohmann::json TranscriptEntry::to_json() const {
    return {{"prompt_hash", prompt_hash},
            {"role", std::string(to_string(role))},
            {"response_text", response_text},
            {"note", note}};
}

TranscriptEntry TranscriptEntry::from_json(const nlohmann::json& j) {
    TranscriptEntry e;
    e.prompt_hash = j.at("prompt_hash").get<std::string>();
    e.role = parse_model_role(j.at("role").get<std::string>());
    e.response_text = j.at("response_text").get<std::string>();
    e.note = j.value("note", std::string{});
    return e;
}

std::vector<TranscriptEntry> read_transcript(const std::filesystem::path& path) {
    auto raw = text::read_file(path);
    std::vector<TranscriptEntry> out;
    std::size_t line_no = 0;
    for (auto line : text::split_lines(raw)) {
        ++line_no;
        if (text::is_blank(line))
            continue;
        try {
            out.push_back(TranscriptEntry::from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::SchemaError,
                        path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void write_transcript(const std::vector<TranscriptEntry>& entries, const std::filesystem::path& path) {
    std::string out;
    for (const auto& e : entries) {
        out += e.to_json().dump();
        out += '\n';
    }
    text::write_file_atomic(path, out);
}

ScriptedProvider::ScriptedProvider(const std::vector<TranscriptEntry>& entries, std::string label)
    : label_(std::move(label)) {
    for (const auto& e : entries) {
        auto [it, inserted] = by_hash_.emplace(e.prompt_hash, e);
        if (!inserted && it->second.response_text != e.response_text)
            throw Error(ErrorCode::DuplicateId,
                        "transcript has two responses for prompt " + e.prompt_hash);
    }
}

std::unique_ptr<ScriptedProvider> ScriptedProvider::from_file(const std::filesystem::path& path) {
    return std::make_unique<ScriptedProvider>(read_transcript(path), "scripted:" + path.filename().string());
}

Completion ScriptedProvider::complete(const PromptBundle& bundle, ModelRole role) {
    check_role(bundle, role);
    auto hash = prompt_hash(bundle, role);
    auto it = by_hash_.find(hash);
    if (it == by_hash_.end())
        throw Error(ErrorCode::TranscriptMiss, "no recorded completion for " + hash + " (" +
                                                   std::string(to_string(role)) + ", " +
                                                   prompt_digest(bundle) + ")");
    Completion c;
    c.text = it->second.response_text;
    c.prompt_hash = std::move(hash);
    return c;
}

void RecordingProvider::enqueue(ModelRole role, std::string response, std::string note) {
    std::lock_guard lock(mutex_);
    auto& q = role == ModelRole::Generator ? generator_queue_ : evaluator_queue_;
    q.emplace_back(std::move(response), std::move(note));
}

Completion RecordingProvider::complete(const PromptBundle& bundle, ModelRole role) {
    check_role(bundle, role);
    std::lock_guard lock(mutex_);
    auto& q = role == ModelRole::Generator ? generator_queue_ : evaluator_queue_;
    if (q.empty())
        throw Error(ErrorCode::TranscriptMiss, "recording provider has no queued " +
                                                   std::string(to_string(role)) + " response for " +
                                                   prompt_digest(bundle));
    auto [response, note] = std::move(q.front());
    q.pop_front();
    TranscriptEntry e{prompt_hash(bundle, role), role, response, std::move(note)};
    Completion c;
    c.text = std::move(response);
    c.prompt_hash = e.prompt_hash;
    recorded_.push_back(std::move(e));
    return c;
}

std::vector<TranscriptEntry> RecordingProvider::entries() const {
    std::lock_guard lock(mutex_);
    std::vector<TranscriptEntry> out;
    std::unordered_map<std::string, std::size_t> seen;
    for (const auto& e : recorded_) {
        auto [it, inserted] = seen.emplace(e.prompt_hash, out.size());
        if (inserted) {
            out.push_back(e);
        } else if (out[it->second].response_text != e.response_text) {
            throw Error(ErrorCode::InvalidArgument,
                        "prompt " + e.prompt_hash + " was answered with two different responses");
        }
    }
    return out;
}

std::size_t RecordingProvider::pending(ModelRole role) const {
    std::lock_guard lock(mutex_);
    return role == ModelRole::Generator ? generator_queue_.size() : evaluator_queue_.size();
}

std::unique_ptr<ChatProvider> make_provider(const ProviderSpec& spec) {
    spec.validate();
    if (spec.kind == ProviderKind::Scripted)
        return ScriptedProvider::from_file(spec.transcript_path);
    return std::make_unique<HttpChatProvider>(spec);
}

} // namespace netquery
