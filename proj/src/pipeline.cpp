// SPDX-License-Identifier: Apache-2.0
#include "netquery/pipeline.hpp"

#include <chrono>
#include <ctime>
#include <random>

#include <spdlog/spdlog.h>

#include "netquery/error.hpp"
#include "netquery/text.hpp"

namespace netquery {
namespace {

using Clock = std::chrono::steady_clock;

std::int64_t ms_since(Clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
}

constexpr std::size_t kMaxTopK = 64;

nlohmann::json call_to_json(const ProviderCall& c) {
    return {{"prompt_hash", c.prompt_hash},
            {"role", std::string(to_string(c.role))},
            {"response_text", c.response_text},
            {"latency_ms", c.latency_ms}};
}

ProviderCall call_from_json(const nlohmann::json& j) {
    ProviderCall c;
    c.prompt_hash = j.at("prompt_hash").get<std::string>();
    c.role = parse_model_role(j.at("role").get<std::string>());
    c.response_text = j.at("response_text").get<std::string>();
    c.latency_ms = j.value("latency_ms", std::int64_t{0});
    return c;
}

PromptKind parse_generation_kind(const std::string& s) {
    if (s == "generate")
        return PromptKind::Generate;
    if (s == "repair")
        return PromptKind::Repair;
    throw Error(ErrorCode::SchemaError, "unknown generation kind '" + s + "'");
}

// A rejected block or eval line is reported back to the generator in the
// same shape as an execution failure.
ExecutionEnvelope rejection(const Error& e) {
    return ExecutionEnvelope::error(std::string(to_string(e.code())) + ": " + e.detail());
}

ProviderCall call_provider(ChatProvider& provider, const PromptBundle& bundle, ModelRole role) {
    auto started = Clock::now();
    auto completion = provider.complete(bundle, role);
    ProviderCall call;
    call.prompt_hash = completion.prompt_hash;
    call.role = role;
    call.response_text = std::move(completion.text);
    call.latency_ms = completion.meta.latency_ms ? completion.meta.latency_ms : ms_since(started);
    return call;
}

void notify(RunObserver* observer, RunStage stage) {
    if (observer)
        observer->on_stage(stage);
}

} // namespace

void ExperimentKnobs::validate() const {
    if (max_retries < 0 || max_retries > kMaxRetriesCap)
        throw Error(ErrorCode::InvalidArgument,
                    "max_retries must be in [0, 10], got " + std::to_string(max_retries));
    if (top_k < 1 || top_k > kMaxTopK)
        throw Error(ErrorCode::InvalidArgument,
                    "top_k must be in [1, 64], got " + std::to_string(top_k));
}

nlohmann::json ExperimentKnobs::to_json() const {
    return {{"prompt_level", std::string(to_string(prompt_level))},
            {"max_retries", max_retries},
            {"top_k", top_k}};
}

ExperimentKnobs ExperimentKnobs::with_overrides(const nlohmann::json& overrides) const {
    if (overrides.is_null())
        return *this;
    if (!overrides.is_object())
        throw Error(ErrorCode::InvalidArgument, "overrides must be an object");
    ExperimentKnobs out = *this;
    for (const auto& [key, value] : overrides.items()) {
        if (key == "prompt_level") {
            if (!value.is_string())
                throw Error(ErrorCode::InvalidArgument, "prompt_level must be a string");
            out.prompt_level = parse_prompt_level(value.get<std::string>());
        } else if (key == "max_retries") {
            if (!value.is_number_integer())
                throw Error(ErrorCode::InvalidArgument, "max_retries must be an integer");
            out.max_retries = value.get<int>();
        } else if (key == "top_k") {
            if (!value.is_number_integer() || value.get<long long>() < 1)
                throw Error(ErrorCode::InvalidArgument, "top_k must be a positive integer");
            out.top_k = value.get<std::size_t>();
        } else {
            throw Error(ErrorCode::InvalidArgument, "override '" + key + "' is not allowed");
        }
    }
    out.validate();
    return out;
}

std::string_view to_string(RunStage stage) {
    switch (stage) {
    case RunStage::Queued: return "queued";
    case RunStage::Retrieving: return "retrieving";
    case RunStage::Generating: return "generating";
    case RunStage::Executing: return "executing";
    case RunStage::Repairing: return "repairing";
    case RunStage::Finished: return "finished";
    }
    return "queued";
}

std::string_view to_string(FinalStatus status) {
    return status == FinalStatus::Answered ? "answered" : "failed";
}

nlohmann::json RunRecord::to_json() const {
    auto retrieval_list = nlohmann::json::array();
    for (const auto& r : retrievals)
        retrieval_list.push_back({{"doc_id", r.doc_id}, {"score", r.score}, {"rank", r.rank}});

    auto attempt_list = nlohmann::json::array();
    for (const auto& a : attempts) {
        nlohmann::json j = {
            {"index", a.index},
            {"generation_kind", std::string(to_string(a.generation_kind))},
            {"generation", call_to_json(a.generation)},
            {"program", {{"function_block", a.program.function_block}, {"eval_line", a.program.eval_line}}},
            {"script_sha256", a.script_sha256},
            {"envelope", a.envelope.to_json()},
            {"timings",
             {{"generate_ms", a.timings.generate_ms},
              {"evaluate_ms", a.timings.evaluate_ms},
              {"execute_ms", a.timings.execute_ms}}},
        };
        if (a.evaluation)
            j["evaluation"] = call_to_json(*a.evaluation);
        attempt_list.push_back(std::move(j));
    }

    nlohmann::json j = {
        {"run_id", run_id},
        {"query", query},
        {"network_id", network_id},
        {"created_at", created_at},
        {"config", config},
        {"retrievals", std::move(retrieval_list)},
        {"attempts", std::move(attempt_list)},
        {"final_status", final_status ? nlohmann::json(std::string(to_string(*final_status))) : nlohmann::json()},
        {"timings", {{"retrieval_ms", retrieval_ms}, {"total_ms", total_ms}}},
    };
    if (answer)
        j["answer"] = *answer;
    if (failure)
        j["failure"] = {{"code", failure->code}, {"message", failure->message}, {"stage", failure->stage}};
    return j;
}

RunRecord RunRecord::from_json(const nlohmann::json& j) {
    RunRecord r;
    try {
        r.run_id = j.at("run_id").get<std::string>();
        r.query = j.at("query").get<std::string>();
        r.network_id = j.at("network_id").get<std::string>();
        r.created_at = j.value("created_at", std::string{});
        r.config = j.value("config", nlohmann::json::object());
        for (const auto& x : j.at("retrievals"))
            r.retrievals.push_back(
                {x.at("doc_id").get<std::string>(), x.at("score").get<double>(), x.at("rank").get<std::size_t>()});
        for (const auto& x : j.at("attempts")) {
            Attempt a;
            a.index = x.at("index").get<std::size_t>();
            a.generation_kind = parse_generation_kind(x.at("generation_kind").get<std::string>());
            a.generation = call_from_json(x.at("generation"));
            if (x.contains("evaluation"))
                a.evaluation = call_from_json(x["evaluation"]);
            a.program.function_block = x.at("program").at("function_block").get<std::string>();
            a.program.eval_line = x.at("program").at("eval_line").get<std::string>();
            a.program.attempt_index = a.index;
            a.script_sha256 = x.value("script_sha256", std::string{});
            a.envelope = ExecutionEnvelope::from_json(x.at("envelope"));
            if (x.contains("timings")) {
                const auto& t = x["timings"];
                a.timings.generate_ms = t.value("generate_ms", std::int64_t{0});
                a.timings.evaluate_ms = t.value("evaluate_ms", std::int64_t{0});
                a.timings.execute_ms = t.value("execute_ms", std::int64_t{0});
            }
            r.attempts.push_back(std::move(a));
        }
        if (j.contains("final_status") && j["final_status"].is_string()) {
            auto s = j["final_status"].get<std::string>();
            if (s == "answered")
                r.final_status = FinalStatus::Answered;
            else if (s == "failed")
                r.final_status = FinalStatus::Failed;
            else
                throw Error(ErrorCode::SchemaError, "unknown final_status '" + s + "'");
        }
        if (j.contains("answer"))
            r.answer = j["answer"];
        if (j.contains("failure")) {
            const auto& f = j["failure"];
            r.failure = RunFailure{f.at("code").get<std::string>(), f.value("message", std::string{}),
                                   f.value("stage", std::string{})};
        }
        if (j.contains("timings")) {
            r.retrieval_ms = j["timings"].value("retrieval_ms", std::int64_t{0});
            r.total_ms = j["timings"].value("total_ms", std::int64_t{0});
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaError, std::string("run record: ") + e.what());
    }
    return r;
}

std::vector<TranscriptEntry> RunRecord::transcript() const {
    std::vector<TranscriptEntry> out;
    for (const auto& a : attempts) {
        out.push_back({a.generation.prompt_hash, a.generation.role, a.generation.response_text,
                       run_id + " attempt " + std::to_string(a.index)});
        if (a.evaluation)
            out.push_back({a.evaluation->prompt_hash, a.evaluation->role, a.evaluation->response_text,
                           run_id + " attempt " + std::to_string(a.index)});
    }
    return out;
}

std::size_t RunRecord::completion_count() const {
    std::size_t n = 0;
    for (const auto& a : attempts)
        n += 1 + (a.evaluation ? 1 : 0);
    return n;
}

nlohmann::json deterministic_view(const RunRecord& record) {
    auto j = record.to_json();
    j.erase("run_id");
    j.erase("created_at");
    j.erase("timings");
    j["config"].erase("generator");
    j["config"].erase("evaluator");
    for (auto& a : j["attempts"]) {
        a.erase("timings");
        // The assembled script embeds the absolute network path.
        a.erase("script_sha256");
        a["generation"].erase("latency_ms");
        if (a.contains("evaluation"))
            a["evaluation"].erase("latency_ms");
        a["envelope"].erase("wall_time_ms");
    }
    return j;
}

std::string new_run_id() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[20];
    std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);

    thread_local std::mt19937 rng{std::random_device{}()};
    char suffix[9];
    std::snprintf(suffix, sizeof suffix, "%08x", static_cast<unsigned>(rng()));
    return std::string(stamp) + "-" + suffix;
}

bool is_valid_run_id(std::string_view id) {
    if (id.size() != 25 || id[8] != 'T' || id[15] != 'Z' || id[16] != '-')
        return false;
    auto digits = [&](std::size_t from, std::size_t to) {
        for (auto i = from; i < to; ++i) {
            if (id[i] < '0' || id[i] > '9')
                return false;
        }
        return true;
    };
    if (!digits(0, 8) || !digits(9, 15))
        return false;
    for (auto i = 17u; i < 25; ++i) {
        char c = id[i];
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f')))
            return false;
    }
    return true;
}

Pipeline::Pipeline(PipelineAssets assets, std::shared_ptr<ChatProvider> generator,
                   std::shared_ptr<ChatProvider> evaluator)
    : assets_(std::move(assets)), generator_(std::move(generator)), evaluator_(std::move(evaluator)) {
    if (!assets_.templates || !assets_.harness || !assets_.embedder || !assets_.networks || !assets_.sandbox)
        throw Error(ErrorCode::ConfigError, "pipeline assets are incomplete");
    if (!generator_ || !evaluator_)
        throw Error(ErrorCode::ConfigError, "pipeline needs a generator and an evaluator");
}

Pipeline::Pipeline(Pipeline&& other) noexcept
    : assets_(std::move(other.assets_)),
      generator_(std::move(other.generator_)),
      evaluator_(std::move(other.evaluator_)),
      index_(other.index()) {}

void Pipeline::set_index(std::shared_ptr<const VectorIndex> index) {
    if (index && (index->header().embedder_id != assets_.embedder->id()))
        throw Error(ErrorCode::IncompatibleEmbedders, "index built by '" + index->header().embedder_id +
                                                          "', pipeline embeds with '" +
                                                          assets_.embedder->id() + "'");
    std::lock_guard lock(index_mutex_);
    index_ = std::move(index);
}

std::shared_ptr<const VectorIndex> Pipeline::index() const {
    std::lock_guard lock(index_mutex_);
    return index_;
}

void Pipeline::check_ready(std::string_view network_id) const {
    auto idx = index();
    if (!idx)
        throw Error(ErrorCode::IndexMissing, "no vector index is loaded; build one first");
    if (idx->header().embedder_id != assets_.embedder->id())
        throw Error(ErrorCode::IncompatibleEmbedders, "index built by '" + idx->header().embedder_id + "'");
    (void)assets_.networks->at(network_id);
}

Pipeline Pipeline::with_providers(std::shared_ptr<ChatProvider> generator,
                                  std::shared_ptr<ChatProvider> evaluator) const {
    Pipeline p(assets_, std::move(generator), std::move(evaluator));
    p.set_index(index());
    return p;
}

RunRecord Pipeline::run_query(const std::string& query, const std::string& network_id,
                              const ExperimentKnobs& knobs, RunObserver* observer,
                              std::string run_id) const {
    knobs.validate();
    check_ready(network_id);
    auto idx = index(); // pinned for the whole run
    const auto& network = assets_.networks->at(network_id);
    const auto& templates = *assets_.templates;
    auto total_start = Clock::now();

    RunRecord record;
    record.run_id = run_id.empty() ? new_run_id() : std::move(run_id);
    record.query = query;
    record.network_id = network_id;
    record.created_at = text::utc_timestamp();
    record.config = {
        {"knobs", knobs.to_json()},
        {"template_version", templates.version()},
        {"harness_version", assets_.harness->version()},
        {"embedder_id", idx->header().embedder_id},
        {"generator", generator_->describe()},
        {"evaluator", evaluator_->describe()},
        {"sandbox", {{"timeout_s", assets_.sandbox_spec.timeout_s}}},
    };

    auto finish = [&](FinalStatus status) {
        record.final_status = status;
        record.total_ms = ms_since(total_start);
        notify(observer, RunStage::Finished);
        spdlog::info("run {} {} after {} attempt(s)", record.run_id, to_string(status), record.attempts.size());
        return record;
    };
    auto fail = [&](const Error& e, RunStage stage) {
        record.failure = RunFailure{std::string(to_string(e.code())), e.detail(), std::string(to_string(stage))};
        spdlog::warn("run {} failed at {}: {}", record.run_id, to_string(stage), e.what());
        return finish(FinalStatus::Failed);
    };

    // Retrieval.
    notify(observer, RunStage::Retrieving);
    auto retrieval_start = Clock::now();
    std::vector<RetrievedDoc> docs;
    try {
        auto qv = assets_.embedder->embed(query);
        require_non_degenerate(qv, "query");
        record.retrievals = idx->top_k(qv, knobs.top_k);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::DegenerateInput)
            throw;
        record.retrieval_ms = ms_since(retrieval_start);
        return fail(e, RunStage::Retrieving);
    }
    record.retrieval_ms = ms_since(retrieval_start);
    for (const auto& r : record.retrievals)
        docs.push_back({idx->find(r.doc_id)->doc, r.score});
    if (observer)
        observer->on_retrievals(record.retrievals);

    auto sandbox_spec = assets_.sandbox_spec;
    sandbox_spec.network_file = network.file_path;

    const std::size_t max_attempts = static_cast<std::size_t>(knobs.max_retries) + 1;
    for (std::size_t i = 0; i < max_attempts; ++i) {
        Attempt attempt;
        attempt.index = i;
        attempt.program.attempt_index = i;

        // Generation, or repair of the previous attempt.
        PromptBundle gen_bundle;
        if (i == 0) {
            notify(observer, RunStage::Generating);
            attempt.generation_kind = PromptKind::Generate;
            gen_bundle = build_generation_prompt(templates, query, docs, knobs.prompt_level);
        } else {
            notify(observer, RunStage::Repairing);
            const auto& prev = record.attempts.back();
            attempt.generation_kind = PromptKind::Repair;
            auto traceback = prev.envelope.traceback.value_or("");
            if (text::is_blank(traceback))
                traceback = "Error: execution failed without a traceback";
            gen_bundle = build_repair_prompt(templates, query, prev.program.function_block,
                                             prev.program.eval_line, traceback, knobs.prompt_level);
        }
        auto phase = Clock::now();
        try {
            attempt.generation = call_provider(*generator_, gen_bundle, ModelRole::Generator);
        } catch (const Error& e) {
            return fail(e, i == 0 ? RunStage::Generating : RunStage::Repairing);
        }
        attempt.timings.generate_ms = ms_since(phase);

        std::optional<ExecutionEnvelope> rejected;
        try {
            attempt.program.function_block = extract_code_block(attempt.generation.response_text);
            validate_function_block(attempt.program.function_block);
        } catch (const Error& e) {
            if (attempt.program.function_block.empty())
                attempt.program.function_block = std::string(text::trim(attempt.generation.response_text));
            rejected = rejection(e);
        }

        if (!rejected) {
            phase = Clock::now();
            auto eval_bundle = build_eval_prompt(templates, query, attempt.program.function_block);
            try {
                attempt.evaluation = call_provider(*evaluator_, eval_bundle, ModelRole::Evaluator);
            } catch (const Error& e) {
                record.attempts.push_back(std::move(attempt));
                record.attempts.back().envelope = ExecutionEnvelope::error(
                    "evaluator unavailable: " + std::string(e.what()));
                return fail(e, RunStage::Generating);
            }
            attempt.timings.evaluate_ms = ms_since(phase);
            try {
                attempt.program.eval_line = extract_eval_line(attempt.evaluation->response_text);
            } catch (const Error& e) {
                rejected = rejection(e);
            }
        }

        if (rejected) {
            attempt.envelope = std::move(*rejected);
        } else {
            notify(observer, RunStage::Executing);
            phase = Clock::now();
            auto script = assemble_script(attempt.program, *assets_.harness, sandbox_spec.network_file);
            attempt.script_sha256 = hashing::sha256_hex(script);
            try {
                attempt.envelope = assets_.sandbox->execute(script, sandbox_spec);
            } catch (const Error& e) {
                attempt.envelope = ExecutionEnvelope::error("sandbox failure: " + std::string(e.what()));
                record.attempts.push_back(std::move(attempt));
                return fail(e, RunStage::Executing);
            }
            attempt.timings.execute_ms = ms_since(phase);
        }

        bool ok = attempt.envelope.status == ExecutionStatus::Ok;
        record.attempts.push_back(std::move(attempt));
        if (observer)
            observer->on_attempt(record.attempts.back());
        if (ok) {
            record.answer = record.attempts.back().envelope.result;
            return finish(FinalStatus::Answered);
        }
    }
    return finish(FinalStatus::Failed);
}

RunRecord replay_run(const RunRecord& record, const Pipeline& current,
                     const std::optional<std::vector<TranscriptEntry>>& transcripts) {
    const auto& cfg = record.config;
    auto drift = [](const std::string& what, const std::string& was, const std::string& now) {
        throw Error(ErrorCode::AssetDrift, what + " changed: recorded '" + was + "', current '" + now + "'");
    };
    auto recorded = [&](const char* key) { return cfg.value(key, std::string{}); };

    const auto& assets = current.assets();
    if (recorded("template_version") != assets.templates->version())
        drift("template_version", recorded("template_version"), assets.templates->version());
    if (recorded("harness_version") != assets.harness->version())
        drift("harness_version", recorded("harness_version"), assets.harness->version());
    auto idx = current.index();
    auto current_embedder = idx ? idx->header().embedder_id : assets.embedder->id();
    if (recorded("embedder_id") != current_embedder)
        drift("embedder_id", recorded("embedder_id"), current_embedder);

    ExperimentKnobs knobs;
    try {
        knobs = ExperimentKnobs{}.with_overrides(cfg.at("knobs"));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaError, std::string("record config lacks knobs: ") + e.what());
    }

    std::shared_ptr<ScriptedProvider> scripted;
    try {
        scripted = std::make_shared<ScriptedProvider>(transcripts ? *transcripts : record.transcript(),
                                                      "replay:" + record.run_id);
    } catch (const Error& e) {
        throw Error(ErrorCode::ReplayMismatch, "record is not replayable: " + e.detail());
    }
    auto replayer = current.with_providers(scripted, scripted);
    return replayer.run_query(record.query, record.network_id, knobs, nullptr, record.run_id);
}

bool replay_identical(const RunRecord& original, const RunRecord& replayed) {
    return deterministic_view(original) == deterministic_view(replayed);
}

} // namespace netquery
