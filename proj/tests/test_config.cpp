// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "netquery/config.hpp"
#include "netquery/error.hpp"
#include "netquery/text.hpp"
#include "support.hpp"

using namespace netquery;
using namespace netquery::testing;
namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

std::optional<ErrorCode> config_error(const Json& j) {
    try {
        AppConfig::from_json(j, assets_dir() / "config");
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

} // namespace

TEST(Config, ExpandsEnvironmentReferences) {
    setenv("NETQUERY_TEST_ROOT", "/opt/nq", 1);
    unsetenv("NETQUERY_TEST_UNSET");
    EXPECT_EQ(expand_env("${NETQUERY_TEST_ROOT}/bin"), "/opt/nq/bin");
    EXPECT_EQ(expand_env("a${NETQUERY_TEST_UNSET}b"), "ab");
    EXPECT_EQ(expand_env("${unterminated"), "${unterminated");
    EXPECT_EQ(expand_env("$HOME"), "$HOME");
    EXPECT_EQ(expand_env(""), "");
}

TEST(Config, FixtureConfigResolvesPaths) {
    TempDir data;
    auto c = fixture_config(data.path());
    EXPECT_EQ(c.data_dir, data.path());
    EXPECT_EQ(c.index_path, data.path() / "index.jsonl");
    EXPECT_EQ(c.runs_dir(), data.path() / "runs");
    EXPECT_TRUE(fs::exists(c.corpus_path));
    EXPECT_TRUE(fs::exists(c.templates_dir));
    EXPECT_TRUE(fs::exists(c.sandbox.harness_template_path));
    EXPECT_EQ(c.sandbox.executor_command.front(), fake_executor().string());
    EXPECT_EQ(c.networks.size(), 3u);
    EXPECT_EQ(c.defaults.prompt_level, PromptLevel::Complex);
    EXPECT_EQ(c.defaults.max_retries, 5);
    EXPECT_EQ(c.defaults.top_k, 8u);
    EXPECT_EQ(c.service.port, 0);
}

TEST(Config, BundledProductionConfigLoads) {
    auto c = AppConfig::load(assets_dir() / "config" / "netquery.json");
    EXPECT_EQ(c.generator.api_key_env, "NETQUERY_LLM_API_KEY");
    EXPECT_EQ(c.evaluator.api_key_env, "NETQUERY_LLM_API_KEY");
    EXPECT_EQ(c.sandbox.executor_command, (std::vector<std::string>{"python3", "{script}"}));
    EXPECT_EQ(c.service.api_token_env, "NETQUERY_SERVICE_TOKEN");
    for (const auto& n : c.networks)
        EXPECT_TRUE(fs::exists(n.file_path)) << n.network_id;
}

TEST(Config, RejectsBrokenConfigs) {
    TempDir data;
    auto base = fixture_config_json(data.path());
    auto broken = [&](auto&& mutate) {
        Json j = base;
        mutate(j);
        return config_error(j);
    };
    EXPECT_FALSE(broken([](Json&) {}));
    EXPECT_EQ(broken([](Json& j) { j = Json::array(); }), ErrorCode::ConfigError);
    EXPECT_EQ(broken([](Json& j) { j["providers"].erase("evaluator"); }), ErrorCode::ConfigError);
    EXPECT_EQ(broken([](Json& j) { j["providers"]["generator"]["kind"] = "oracle"; }), ErrorCode::ConfigError);
    EXPECT_EQ(broken([](Json& j) { j["networks"] = Json::array(); }), ErrorCode::ConfigError);
    EXPECT_EQ(broken([](Json& j) { j["sandbox"]["executor_command"] = {"python3"}; }), ErrorCode::ConfigError);
    EXPECT_EQ(broken([](Json& j) { j["sandbox"].erase("harness_template_path"); }), ErrorCode::ConfigError);
    EXPECT_EQ(broken([](Json& j) { j["sandbox"]["timeout_s"] = -1; }), ErrorCode::ConfigError);
    EXPECT_EQ(broken([](Json& j) { j["embedder"]["kind"] = "psychic"; }), ErrorCode::ConfigError);
    EXPECT_EQ(broken([](Json& j) { j["defaults"]["max_retries"] = 20; }), ErrorCode::ConfigError);
    EXPECT_EQ(broken([](Json& j) { j["defaults"]["temperature"] = 1; }), ErrorCode::ConfigError);
    EXPECT_EQ(broken([](Json& j) { j["service"]["max_concurrent_runs"] = 0; }), ErrorCode::ConfigError);
    EXPECT_EQ(broken([](Json& j) { j["service"]["port"] = "eighty"; }), ErrorCode::ConfigError);
}

TEST(Config, NetworkFileMustExistAtRegistration) {
    TempDir data;
    auto j = fixture_config_json(data.path());
    j["networks"][0]["file"] = "../networks/missing.inp";
    auto config = AppConfig::from_json(j, assets_dir() / "config");
    try {
        App app(config);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ConfigError);
    }
}

TEST(Config, LoadErrors) {
    TempDir dir;
    EXPECT_THROW(AppConfig::load(dir / "absent.json"), Error);
    text::write_file_atomic(dir / "bad.json", "{ nope");
    try {
        AppConfig::load(dir / "bad.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ConfigError);
    }
}

TEST(Config, AppStartsWithoutIndexAndBuildsOne) {
    TempDir data;
    App app(fixture_config(data.path()));
    EXPECT_FALSE(app.pipeline().index());
    auto result = app.rebuild_index();
    EXPECT_EQ(result.index.size(), 544u);
    EXPECT_TRUE(fs::exists(data / "index.jsonl"));
    App again(fixture_config(data.path()));
    ASSERT_TRUE(again.pipeline().index());
    EXPECT_EQ(again.pipeline().index()->size(), 544u);
}

TEST(Config, CorruptIndexIsIgnoredOnStartup) {
    TempDir data;
    text::write_file_atomic(data / "index.jsonl", "{\"format_version\": 1}\ngarbage\n");
    App app(fixture_config(data.path()));
    EXPECT_FALSE(app.pipeline().index());
}

TEST(Config, RunPersistenceRejectsBadIds) {
    TempDir data;
    App app(fixture_config(data.path()));
    RunRecord r;
    r.run_id = "../escape";
    EXPECT_THROW(app.save_run(r), Error);
    EXPECT_FALSE(app.load_run_document("../escape"));
    EXPECT_FALSE(app.load_run_document("20260101T000000Z-00000000"));
}
