// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <chrono>
#include <future>
#include <regex>
#include <set>

#include <httplib.h>

#include "netquery/benchmark.hpp"
#include "netquery/service.hpp"
#include "netquery/text.hpp"
#include "support.hpp"

using namespace netquery;
using namespace netquery::testing;
namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

const std::string kPumpQuery = "How many pumps are in the network?";

std::optional<RunRecord> find_fixture_run(const std::function<bool(const RunRecord&)>& pred) {
    std::vector<fs::path> paths;
    for (const auto& e : fs::directory_iterator(assets_dir() / "fixtures" / "runs"))
        paths.push_back(e.path());
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths) {
        auto r = RunRecord::from_json(Json::parse(text::read_file(p)));
        if (pred(r))
            return r;
    }
    return std::nullopt;
}

class Server {
public:
    explicit Server(Json config_json) {
        config_ = AppConfig::from_json(config_json, assets_dir() / "config");
        app_ = std::make_unique<App>(config_);
        if (!app_->pipeline().index())
            app_->rebuild_index();
        service_ = std::make_unique<Service>(*app_);
        port_ = service_->start("127.0.0.1", 0);
        client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
        client_->set_read_timeout(30, 0);
    }
    ~Server() {
        service_->drain();
        service_.reset();
    }

    httplib::Client& client() { return *client_; }
    Service& service() { return *service_; }
    App& app() { return *app_; }

    httplib::Result post(const std::string& path, const Json& body) {
        return client_->Post(path.c_str(), body.dump(), "application/json");
    }

    std::string submit(const std::string& network, const std::string& query, Json overrides = nullptr) {
        Json body{{"network_id", network}, {"query", query}};
        if (!overrides.is_null())
            body["overrides"] = overrides;
        auto res = post("/api/query", body);
        EXPECT_TRUE(res);
        EXPECT_EQ(res->status, 202) << res->body;
        return Json::parse(res->body).at("run_id").get<std::string>();
    }

    // Polls until the run has a final_status; returns every status seen.
    Json wait(const std::string& run_id, std::vector<std::string>* seen = nullptr) {
        auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(60);
        while (std::chrono::steady_clock::now() < deadline) {
            auto res = client_->Get(("/api/runs/" + run_id).c_str());
            EXPECT_TRUE(res);
            EXPECT_EQ(res->status, 200);
            auto j = Json::parse(res->body);
            if (j.contains("final_status") && !j["final_status"].is_null() && !j.contains("status"))
                return j;
            if (seen)
                seen->push_back(j.value("status", ""));
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
        ADD_FAILURE() << "run " << run_id << " did not finish";
        return {};
    }

private:
    AppConfig config_;
    std::unique_ptr<App> app_;
    std::unique_ptr<Service> service_;
    std::unique_ptr<httplib::Client> client_;
    int port_ = 0;
};

// Runs the fake executor after a pause so runs are observable mid-flight.
Json slow_config(const fs::path& data_dir, double delay_s) {
    auto j = fixture_config_json(data_dir);
    j["sandbox"]["executor_command"] = {"/bin/sh", "-c", "sleep " + std::to_string(delay_s) + "; exec \"$0\" \"$1\"",
                                        fake_executor().string(), "{script}"};
    return j;
}

Json error_of(const httplib::Result& res) { return Json::parse(res->body).at("error"); }

} // namespace

TEST(Service, SubmitAndFetchFinishedRun) {
    TempDir data;
    Server s(fixture_config_json(data.path()));
    auto run_id = s.submit("Net1", kPumpQuery, {{"prompt_level", "complex"}, {"max_retries", 5}});
    EXPECT_TRUE(std::regex_match(run_id, std::regex(R"(\d{8}T\d{6}Z-[0-9a-f]{8})")));
    auto record = s.wait(run_id);
    EXPECT_EQ(record["run_id"], run_id);
    EXPECT_EQ(record["final_status"], "answered");
    EXPECT_EQ(record["answer"], 1);
    EXPECT_EQ(record["config"]["knobs"]["prompt_level"], "complex");
    EXPECT_EQ(record["config"]["knobs"]["max_retries"], 5);
    EXPECT_TRUE(record["config"].contains("template_version"));
    EXPECT_FALSE(record["retrievals"].empty());
    EXPECT_EQ(record["attempts"][0]["generation"]["prompt_hash"].get<std::string>().size(), 64u);

    auto res = s.client().Get(("/api/runs/" + run_id).c_str());
    EXPECT_EQ(res->body, text::read_file(data / "runs" / (run_id + ".json")));
}

TEST(Service, RestartKeepsFinishedRuns) {
    TempDir data;
    std::string run_id, body;
    {
        Server s(fixture_config_json(data.path()));
        run_id = s.submit("Net1", kPumpQuery);
        s.wait(run_id);
        body = s.client().Get(("/api/runs/" + run_id).c_str())->body;
    }
    Server again(fixture_config_json(data.path()));
    auto res = again.client().Get(("/api/runs/" + run_id).c_str());
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->body, body);
}

TEST(Service, InProgressRunReportsItsStage) {
    TempDir data;
    Server s(slow_config(data.path(), 0.5));
    auto run_id = s.submit("Net1", kPumpQuery);
    std::vector<std::string> seen;
    auto record = s.wait(run_id, &seen);
    ASSERT_FALSE(seen.empty());
    const std::set<std::string> allowed = {"queued", "retrieving", "generating", "executing", "repairing"};
    for (const auto& st : seen)
        EXPECT_TRUE(allowed.count(st)) << st;
    EXPECT_TRUE(std::count(seen.begin(), seen.end(), "executing") > 0);
    EXPECT_EQ(record["final_status"], "answered");
}

TEST(Service, FailedRunUsesTheWholeRetryBudget) {
    auto failed = find_fixture_run([](const RunRecord& r) {
        return r.final_status == FinalStatus::Failed && r.config["knobs"]["max_retries"] == 5 && !r.failure;
    });
    ASSERT_TRUE(failed);
    TempDir data;
    Server s(fixture_config_json(data.path()));
    auto run_id = s.submit(failed->network_id, failed->query, failed->config["knobs"]);
    auto record = s.wait(run_id);
    EXPECT_EQ(record["final_status"], "failed");
    EXPECT_EQ(record["attempts"].size(), 6u);
}

TEST(Service, SubmissionErrors) {
    TempDir data;
    Server s(fixture_config_json(data.path()));
    auto res = s.post("/api/query", {{"network_id", "NetX"}, {"query", kPumpQuery}});
    EXPECT_EQ(res->status, 404);
    EXPECT_EQ(error_of(res)["code"], "NETWORK_UNKNOWN");

    res = s.post("/api/query", {{"network_id", "Net1"}, {"query", kPumpQuery},
                                {"overrides", {{"executor_command", {"sh"}}}}});
    EXPECT_EQ(res->status, 400);
    EXPECT_EQ(error_of(res)["code"], "OVERRIDE_NOT_ALLOWED");

    res = s.post("/api/query", {{"network_id", "Net1"}, {"query", kPumpQuery}, {"overrides", {{"max_retries", 99}}}});
    EXPECT_EQ(res->status, 400);

    res = s.post("/api/query", {{"network_id", "Net1"}});
    EXPECT_EQ(res->status, 400);
    EXPECT_EQ(error_of(res)["code"], "SCHEMA_INVALID");

    res = s.post("/api/query", {{"network_id", "Net1"}, {"query", "q"}, {"extra", 1}});
    EXPECT_EQ(res->status, 400);

    res = s.client().Post("/api/query", "{not json", "application/json");
    EXPECT_EQ(res->status, 400);

    res = s.post("/api/query", {{"network_id", "Net1"}, {"query", "?!"}});
    EXPECT_EQ(res->status, 400);

    res = s.client().Get("/api/runs/20260101T000000Z-00000000");
    EXPECT_EQ(res->status, 404);
    EXPECT_EQ(error_of(res)["code"], "RUN_UNKNOWN");
    res = s.client().Get("/api/runs/..%2Fconfig");
    EXPECT_EQ(res->status, 404);
}

TEST(Service, IndexMissingIsConflict) {
    TempDir data;
    auto config = AppConfig::from_json(fixture_config_json(data.path()), assets_dir() / "config");
    App app(config);
    Service service(app);
    int port = service.start("127.0.0.1", 0);
    httplib::Client c("127.0.0.1", port);
    auto res = c.Post("/api/query", Json{{"network_id", "Net1"}, {"query", kPumpQuery}}.dump(), "application/json");
    EXPECT_EQ(res->status, 409);
    EXPECT_EQ(error_of(res)["code"], "INDEX_MISSING");
    EXPECT_EQ(c.Get("/api/index")->status, 409);
}

TEST(Service, ConcurrencyCap) {
    TempDir data;
    auto j = slow_config(data.path(), 1.0);
    j["service"]["max_concurrent_runs"] = 1;
    Server s(j);
    s.submit("Net1", kPumpQuery);
    auto res = s.post("/api/query", {{"network_id", "Net1"}, {"query", kPumpQuery}});
    EXPECT_EQ(res->status, 429);
    EXPECT_EQ(error_of(res)["code"], "CONCURRENCY_LIMIT");
}

TEST(Service, NetworksListing) {
    TempDir data;
    Server s(fixture_config_json(data.path()));
    auto res = s.client().Get("/api/networks");
    ASSERT_EQ(res->status, 200);
    auto list = Json::parse(res->body)["networks"];
    std::set<std::string> ids;
    for (const auto& n : list)
        ids.insert(n["network_id"].get<std::string>());
    EXPECT_EQ(ids, (std::set<std::string>{"Net1", "Net3", "LTown"}));
}

TEST(Service, ConcurrentRebuildIsRejected) {
    TempDir data;
    Server s(fixture_config_json(data.path()));
    std::promise<void> entered, release;
    auto release_future = release.get_future().share();
    s.service().set_index_rebuilder([&] {
        entered.set_value();
        release_future.wait();
        return s.app().rebuild_index();
    });
    auto first = std::async(std::launch::async, [&] {
        return s.client().Post("/api/index/rebuild", "", "application/json");
    });
    entered.get_future().wait();
    httplib::Client second_client(s.client().host(), s.client().port());
    auto second = second_client.Post("/api/index/rebuild", "", "application/json");
    EXPECT_EQ(second->status, 409);
    EXPECT_EQ(error_of(second)["code"], "REBUILD_IN_PROGRESS");
    release.set_value();
    auto res = first.get();
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    auto header = Json::parse(res->body);
    EXPECT_EQ(header["entry_count"], 544);
    EXPECT_EQ(header["embedder_id"], "hashed-bow/v1/512");

    s.service().set_index_rebuilder([&] { return s.app().rebuild_index(); });
    EXPECT_EQ(s.client().Post("/api/index/rebuild", "", "application/json")->status, 200);
}

TEST(Service, ReportAfterFixtureBench) {
    TempDir data;
    Server s(fixture_config_json(data.path()));
    auto res = s.client().Get("/api/bench/report");
    EXPECT_EQ(res->status, 404);
    EXPECT_EQ(error_of(res)["code"], "NO_REPORT");

    auto suite = BenchmarkSuite::load(assets_dir() / "bench" / "suite.json");
    SuiteOptions opts;
    opts.concurrency = 8;
    write_report_files(run_suite(s.app().pipeline(), suite, standard_grid(), opts), data / "bench");

    res = s.client().Get("/api/bench/report");
    ASSERT_EQ(res->status, 200);
    auto frozen = Json::parse(text::read_file(assets_dir() / "fixtures" / "report.json"));
    EXPECT_EQ(Json::parse(res->body)["cells"], frozen["cells"]);
}

TEST(Service, StaticTokenGuardsTheApi) {
    setenv("NETQUERY_TEST_SERVICE_TOKEN", "tok-123", 1);
    TempDir data;
    auto j = fixture_config_json(data.path());
    j["service"]["api_token_env"] = "NETQUERY_TEST_SERVICE_TOKEN";
    Server s(j);
    auto res = s.client().Get("/api/networks");
    EXPECT_EQ(res->status, 401);
    EXPECT_EQ(error_of(res)["code"], "UNAUTHORIZED");
    EXPECT_EQ(s.client().Get("/api/networks", {{"Authorization", "Bearer wrong"}})->status, 401);
    EXPECT_EQ(s.client().Get("/api/networks", {{"Authorization", "Bearer tok-123"}})->status, 200);
}

TEST(Service, TraceNeverCarriesCredentials) {
    setenv("NETQUERY_LLM_API_KEY", "sk-trace-SECRET", 1);
    TempDir data;
    Server s(fixture_config_json(data.path()));
    auto run_id = s.submit("Net1", kPumpQuery);
    s.wait(run_id);
    auto body = s.client().Get(("/api/runs/" + run_id).c_str())->body;
    EXPECT_EQ(body.find("sk-trace-SECRET"), std::string::npos);
    EXPECT_EQ(body.find("api_key"), std::string::npos);
}
