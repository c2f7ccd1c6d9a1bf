// SPDX-License-Identifier: Apache-2.0
#include "netquery/config.hpp"

#include <cstdlib>

#include <spdlog/spdlog.h>

#include "netquery/error.hpp"
#include "netquery/text.hpp"

namespace netquery {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

fs::path resolve(const fs::path& base, const std::string& raw) {
    fs::path p = expand_env(raw);
    if (p.empty())
        return p;
    return (p.is_absolute() ? p : base / p).lexically_normal();
}

Json expand_strings(Json j) {
    if (j.is_string())
        return expand_env(j.get<std::string>());
    if (j.is_array() || j.is_object()) {
        for (auto& x : j)
            x = expand_strings(x);
    }
    return j;
}

ProviderSpec provider_from(const Json& j, const fs::path& base) {
    auto spec_json = expand_strings(j);
    if (spec_json.contains("transcript_path"))
        spec_json["transcript_path"] = resolve(base, spec_json["transcript_path"].get<std::string>()).string();
    return ProviderSpec::from_json(spec_json);
}

} // namespace

std::string expand_env(std::string_view s) {
    std::string out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (s.compare(i, 2, "${") == 0) {
            auto close = s.find('}', i + 2);
            if (close != std::string_view::npos) {
                std::string name(s.substr(i + 2, close - i - 2));
                if (const char* v = std::getenv(name.c_str()))
                    out += v;
                i = close + 1;
                continue;
            }
        }
        out.push_back(s[i++]);
    }
    return out;
}

AppConfig AppConfig::from_json(const Json& j, const fs::path& base_dir) {
    if (!j.is_object())
        throw Error(ErrorCode::ConfigError, "config must be a JSON object");
    AppConfig c;
    c.base_dir = base_dir;
    try {
        auto path_of = [&](const char* key, const std::string& fallback) {
            return resolve(base_dir, j.contains(key) ? j[key].get<std::string>() : fallback);
        };
        c.data_dir = path_of("data_dir", "data");
        c.corpus_path = path_of("corpus", "corpus/epanet_methods.json");
        c.index_path = j.contains("index") ? path_of("index", "") : c.data_dir / "index.jsonl";
        c.templates_dir = path_of("templates", "templates");

        c.embedder = EmbedderSpec::from_json(expand_strings(j.value("embedder", Json::object())));

        if (!j.contains("providers") || !j["providers"].contains("generator") ||
            !j["providers"].contains("evaluator"))
            throw Error(ErrorCode::ConfigError, "config needs providers.generator and providers.evaluator");
        c.generator = provider_from(j["providers"]["generator"], base_dir);
        c.evaluator = provider_from(j["providers"]["evaluator"], base_dir);

        auto sandbox = expand_strings(j.value("sandbox", Json::object()));
        if (sandbox.contains("harness_template_path"))
            sandbox["harness_template_path"] =
                resolve(base_dir, sandbox["harness_template_path"].get<std::string>()).string();
        if (sandbox.contains("temp_root"))
            sandbox["temp_root"] = resolve(base_dir, sandbox["temp_root"].get<std::string>()).string();
        c.sandbox_concurrency = sandbox.value("max_concurrent", std::size_t{0});
        c.sandbox = SandboxSpec::from_json(sandbox);
        if (c.sandbox.harness_template_path.empty())
            throw Error(ErrorCode::ConfigError, "sandbox.harness_template_path is required");

        for (const auto& n : j.value("networks", Json::array())) {
            auto entry = expand_strings(n);
            c.networks.push_back(NetworkRegistryEntry::from_json(entry, base_dir));
        }
        if (c.networks.empty())
            throw Error(ErrorCode::ConfigError, "config registers no networks");

        c.defaults = ExperimentKnobs{}.with_overrides(j.value("defaults", Json::object()));

        auto svc = j.value("service", Json::object());
        c.service.host = svc.value("host", c.service.host);
        c.service.port = svc.value("port", c.service.port);
        c.service.api_token_env = svc.value("api_token_env", c.service.api_token_env);
        c.service.max_concurrent_runs = svc.value("max_concurrent_runs", c.service.max_concurrent_runs);
        if (c.service.max_concurrent_runs == 0)
            throw Error(ErrorCode::ConfigError, "service.max_concurrent_runs must be >= 1");
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::ConfigError, e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError)
            throw;
        throw Error(ErrorCode::ConfigError, e.what());
    }
    return c;
}

AppConfig AppConfig::load(const fs::path& path) {
    if (!fs::exists(path))
        throw Error(ErrorCode::ConfigError, "config file " + path.string() + " does not exist");
    Json j;
    try {
        j = Json::parse(text::read_file(path));
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
    }
    return from_json(j, fs::absolute(path).parent_path());
}

App::App(AppConfig config) : config_(std::move(config)) {
    auto networks = std::make_shared<NetworkRegistry>();
    for (const auto& n : config_.networks)
        networks->add(n);
    networks_ = networks;

    PipelineAssets assets;
    assets.templates = std::make_shared<PromptTemplates>(PromptTemplates::load(config_.templates_dir));
    assets.harness = std::make_shared<HarnessTemplate>(HarnessTemplate::load(config_.sandbox.harness_template_path));
    assets.embedder = std::shared_ptr<const Embedder>(make_embedder(config_.embedder));
    assets.networks = networks;
    assets.sandbox = std::make_shared<Sandbox>(config_.sandbox_concurrency);
    assets.sandbox_spec = config_.sandbox;

    std::shared_ptr<ChatProvider> generator = make_provider(config_.generator);
    std::shared_ptr<ChatProvider> evaluator = make_provider(config_.evaluator);
    pipeline_ = std::make_unique<Pipeline>(std::move(assets), std::move(generator), std::move(evaluator));

    if (fs::exists(config_.index_path)) {
        try {
            pipeline_->set_index(std::make_shared<const VectorIndex>(load_index(config_.index_path)));
        } catch (const Error& e) {
            spdlog::error("ignoring index at {}: {}", config_.index_path.string(), e.what());
        }
    }
}

BuildResult App::rebuild_index() {
    DocCorpus corpus;
    if (config_.corpus_path.extension() == ".json") {
        corpus = read_corpus_file(config_.corpus_path);
    } else {
        auto result = parse_doc_dump(text::read_file(config_.corpus_path), config_.corpus_path.filename().string(),
                                     text::utc_timestamp());
        for (const auto& d : result.diagnostics)
            spdlog::warn("corpus entry {}: {}", d.entry_index, d.reason);
        corpus = std::move(result.corpus);
    }
    auto result = build_index(corpus, *pipeline_->assets().embedder, text::utc_timestamp());
    fs::create_directories(config_.index_path.parent_path());
    save_index(result.index, config_.index_path);
    pipeline_->set_index(std::make_shared<const VectorIndex>(result.index));
    return result;
}

void App::save_run(const RunRecord& record) const {
    if (!is_valid_run_id(record.run_id))
        throw Error(ErrorCode::InvalidArgument, "refusing to persist run with id '" + record.run_id + "'");
    fs::create_directories(config_.runs_dir());
    text::write_file_atomic(config_.runs_dir() / (record.run_id + ".json"), record.to_json().dump(2) + "\n");
}

std::optional<std::string> App::load_run_document(std::string_view run_id) const {
    if (!is_valid_run_id(run_id))
        return std::nullopt;
    auto path = config_.runs_dir() / (std::string(run_id) + ".json");
    if (!fs::exists(path))
        return std::nullopt;
    return text::read_file(path);
}

} // namespace netquery
