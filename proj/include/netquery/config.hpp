// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netquery/embedding.hpp"
#include "netquery/llm_client.hpp"
#include "netquery/network_registry.hpp"
#include "netquery/pipeline.hpp"
#include "netquery/sandbox.hpp"

namespace netquery {

struct ServiceSettings {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string api_token_env; // empty: no token required
    std::size_t max_concurrent_runs = 8;
};

/// Config file keys: data_dir, corpus, index, templates, embedder, providers
/// {generator, evaluator}, sandbox, networks, defaults, service. Relative
/// paths resolve against the config file's directory; "${VAR}" in paths and
/// executor argv expands from the environment.
struct AppConfig {
    std::filesystem::path base_dir;
    std::filesystem::path data_dir;
    std::filesystem::path corpus_path;
    std::filesystem::path index_path;
    std::filesystem::path templates_dir;
    EmbedderSpec embedder;
    ProviderSpec generator;
    ProviderSpec evaluator;
    SandboxSpec sandbox;
    std::size_t sandbox_concurrency = 0; // 0: hardware concurrency
    std::vector<NetworkRegistryEntry> networks;
    ExperimentKnobs defaults;
    ServiceSettings service;

    /// Throws ConfigError.
    static AppConfig load(const std::filesystem::path& path);
    static AppConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

    std::filesystem::path runs_dir() const { return data_dir / "runs"; }
    std::filesystem::path report_path() const { return data_dir / "bench" / "report.json"; }
};

/// "${NAME}" -> environment value (empty when unset).
std::string expand_env(std::string_view s);

/// Wires config into live components: templates, harness, registry,
/// embedder, providers, sandbox, pipeline, and the index if one is on disk.
class App {
public:
    explicit App(AppConfig config);

    const AppConfig& config() const noexcept { return config_; }
    Pipeline& pipeline() noexcept { return *pipeline_; }
    const Pipeline& pipeline() const noexcept { return *pipeline_; }
    const NetworkRegistry& networks() const noexcept { return *networks_; }

    /// Rebuilds from the configured corpus, saves to the index path and swaps
    /// it into the pipeline.
    BuildResult rebuild_index();

    void save_run(const RunRecord& record) const;
    /// Raw persisted document, if any.
    std::optional<std::string> load_run_document(std::string_view run_id) const;

private:
    AppConfig config_;
    std::shared_ptr<NetworkRegistry> networks_;
    std::unique_ptr<Pipeline> pipeline_;
};

} // namespace netquery
