// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "netquery/config.hpp"
#include "netquery/pipeline.hpp"

namespace netquery::testing {

std::filesystem::path assets_dir();
std::filesystem::path tests_dir();
std::filesystem::path fake_executor();

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// The bundled fixture config with data_dir redirected.
nlohmann::json fixture_config_json(const std::filesystem::path& data_dir);
AppConfig fixture_config(const std::filesystem::path& data_dir);

/// Fixture App with the index built from the bundled corpus.
std::unique_ptr<App> fixture_app(const std::filesystem::path& data_dir);

/// Assets shared by pipeline-level tests: bundled templates, harness,
/// networks, hashed-bow embedder and a fake-executor sandbox.
PipelineAssets fixture_assets();
std::shared_ptr<const VectorIndex> fixture_index();

SandboxSpec fake_sandbox_spec(double timeout_s = 10.0);

/// Compares against tests/golden/<name>; NETQUERY_UPDATE_GOLDENS=1 rewrites it.
::testing::AssertionResult matches_golden(const std::string& name, const std::string& actual);

/// httplib server on an ephemeral port, served from a background thread.
class StubServer {
public:
    StubServer();
    ~StubServer();

    httplib::Server& server() { return server_; }
    void start();
    int port() const noexcept { return port_; }
    std::string url(const std::string& path) const;

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

} // namespace netquery::testing
