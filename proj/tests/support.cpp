// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "support.hpp"

#include <cstdlib>
#include <fstream>

#include "netquery/text.hpp"

namespace netquery::testing {

namespace fs = std::filesystem;

fs::path assets_dir() { return NETQUERY_TEST_ASSETS_DIR; }
fs::path tests_dir() { return NETQUERY_TEST_SOURCE_DIR; }

fs::path fake_executor() {
    if (const char* p = std::getenv("NETQUERY_FAKE_EXECUTOR"); p && *p)
        return p;
    return NETQUERY_TEST_FAKE_EXECUTOR;
}

TempDir::TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "netquery-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data()))
        throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

nlohmann::json fixture_config_json(const fs::path& data_dir) {
    auto j = nlohmann::json::parse(text::read_file(assets_dir() / "config" / "fixture.json"));
    j["data_dir"] = data_dir.string();
    return j;
}

AppConfig fixture_config(const fs::path& data_dir) {
    return AppConfig::from_json(fixture_config_json(data_dir), assets_dir() / "config");
}

std::unique_ptr<App> fixture_app(const fs::path& data_dir) {
    auto app = std::make_unique<App>(fixture_config(data_dir));
    app->rebuild_index();
    return app;
}

PipelineAssets fixture_assets() {
    static const auto config = fixture_config(fs::temp_directory_path() / "netquery-unused");
    PipelineAssets a;
    a.templates = std::make_shared<PromptTemplates>(PromptTemplates::load(config.templates_dir));
    a.harness = std::make_shared<HarnessTemplate>(HarnessTemplate::load(config.sandbox.harness_template_path));
    a.embedder = std::shared_ptr<const Embedder>(make_embedder(config.embedder));
    auto networks = std::make_shared<NetworkRegistry>();
    for (const auto& n : config.networks)
        networks->add(n);
    a.networks = networks;
    a.sandbox = std::make_shared<Sandbox>(8);
    a.sandbox_spec = config.sandbox;
    return a;
}

std::shared_ptr<const VectorIndex> fixture_index() {
    static const auto index = [] {
        auto config = fixture_config(fs::temp_directory_path() / "netquery-unused");
        auto corpus = read_corpus_file(config.corpus_path);
        auto embedder = make_embedder(config.embedder);
        return std::make_shared<const VectorIndex>(build_index(corpus, *embedder, "2026-01-01T00:00:00Z").index);
    }();
    return index;
}

SandboxSpec fake_sandbox_spec(double timeout_s) {
    SandboxSpec s;
    s.executor_command = {fake_executor().string(), "{script}"};
    s.harness_template_path = assets_dir() / "harness" / "harness.py.tmpl";
    s.network_file = assets_dir() / "networks" / "Net1.inp";
    s.timeout_s = timeout_s;
    return s;
}

::testing::AssertionResult matches_golden(const std::string& name, const std::string& actual) {
    auto path = tests_dir() / "golden" / name;
    if (const char* update = std::getenv("NETQUERY_UPDATE_GOLDENS"); update && std::string(update) == "1") {
        fs::create_directories(path.parent_path());
        std::ofstream(path, std::ios::binary) << actual;
        return ::testing::AssertionSuccess();
    }
    if (!fs::exists(path))
        return ::testing::AssertionFailure() << "golden " << name << " is missing (set NETQUERY_UPDATE_GOLDENS=1)";
    auto expected = text::read_file(path);
    if (expected == actual)
        return ::testing::AssertionSuccess();
    std::size_t at = 0;
    while (at < expected.size() && at < actual.size() && expected[at] == actual[at])
        ++at;
    return ::testing::AssertionFailure() << "golden " << name << " differs at byte " << at << "\n--- expected ---\n"
                                         << expected << "\n--- actual ---\n"
                                         << actual;
}

StubServer::StubServer() = default;

StubServer::~StubServer() {
    server_.stop();
    if (thread_.joinable())
        thread_.join();
}

void StubServer::start() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
}

std::string StubServer::url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
}

} // namespace netquery::testing
