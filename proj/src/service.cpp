// SPDX-License-Identifier: Apache-2.0
#include "netquery/service.hpp"

#include <cctype>
#include <cstdlib>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "netquery/error.hpp"
#include "netquery/text.hpp"

namespace netquery {
namespace {

using Json = nlohmann::json;

// "NetworkUnknown" -> "NETWORK_UNKNOWN"
std::string machine_code(ErrorCode code) {
    std::string out;
    for (char c : to_string(code)) {
        if (std::isupper(static_cast<unsigned char>(c)) && !out.empty())
            out.push_back('_');
        out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    return out;
}

int http_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::NetworkUnknown: return 404;
    case ErrorCode::IndexMissing:
    case ErrorCode::IncompatibleEmbedders: return 409;
    case ErrorCode::InvalidArgument:
    case ErrorCode::SchemaError:
    case ErrorCode::DegenerateInput: return 400;
    case ErrorCode::ProviderUnavailable:
    case ErrorCode::RateLimited: return 502;
    default: return 500;
    }
}

void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string code, std::string message) {
    send_json(res, status, {{"error", {{"code", std::move(code)}, {"message", std::move(message)}}}});
}

void send_error(httplib::Response& res, const Error& e) {
    send_error(res, http_status(e.code()), machine_code(e.code()), e.detail());
}

Json index_header_json(const VectorIndex& index) {
    const auto& h = index.header();
    return {{"format_version", h.format_version}, {"embedder_id", h.embedder_id},
            {"dimension", h.dimension},           {"source_label", h.source_label},
            {"built_at", h.built_at},             {"entry_count", index.size()}};
}

} // namespace

class Service::Tracker final : public RunObserver {
public:
    Tracker(Service& service, std::string run_id) : service_(service), run_id_(std::move(run_id)) {}

    void on_stage(RunStage stage) override {
        service_.update_live(run_id_, [&](LiveRun& r) { r.stage = stage; });
    }
    void on_retrievals(const std::vector<Retrieval>& retrievals) override {
        service_.update_live(run_id_, [&](LiveRun& r) { r.partial.retrievals = retrievals; });
    }
    void on_attempt(const Attempt& attempt) override {
        service_.update_live(run_id_, [&](LiveRun& r) { r.partial.attempts.push_back(attempt); });
    }

private:
    Service& service_;
    std::string run_id_;
};

Service::Service(App& app) : app_(app), server_(std::make_unique<httplib::Server>()) {
    const auto& env_name = app_.config().service.api_token_env;
    if (!env_name.empty()) {
        if (const char* token = std::getenv(env_name.c_str()); token && *token)
            api_token_ = token;
    }
    rebuilder_ = [this] { return app_.rebuild_index(); };
    install_routes();
}

Service::~Service() {
    stop();
    drain();
}

void Service::set_index_rebuilder(IndexRebuilder rebuilder) { rebuilder_ = std::move(rebuilder); }

void Service::update_live(const std::string& run_id, const std::function<void(LiveRun&)>& fn) {
    std::lock_guard lock(runs_mutex_);
    if (auto it = live_runs_.find(run_id); it != live_runs_.end())
        fn(it->second);
}

std::optional<Json> Service::live_view(const std::string& run_id) const {
    std::lock_guard lock(runs_mutex_);
    auto it = live_runs_.find(run_id);
    if (it == live_runs_.end())
        return std::nullopt;
    auto j = it->second.partial.to_json();
    j["status"] = std::string(to_string(it->second.stage));
    return j;
}

void Service::launch_run(std::string run_id, std::string query, std::string network_id, ExperimentKnobs knobs) {
    std::thread([this, run_id = std::move(run_id), query = std::move(query), network_id = std::move(network_id),
                 knobs] {
        Tracker tracker(*this, run_id);
        RunRecord record;
        try {
            record = app_.pipeline().run_query(query, network_id, knobs, &tracker, run_id);
        } catch (const std::exception& e) {
            record.run_id = run_id;
            record.query = query;
            record.network_id = network_id;
            record.created_at = text::utc_timestamp();
            record.config = {{"knobs", knobs.to_json()}};
            record.final_status = FinalStatus::Failed;
            const auto* err = dynamic_cast<const Error*>(&e);
            record.failure = RunFailure{err ? std::string(to_string(err->code())) : "Internal",
                                        err ? err->detail() : e.what(), "queued"};
        }
        bool saved = true;
        try {
            app_.save_run(record);
        } catch (const std::exception& e) {
            saved = false;
            spdlog::error("could not persist run {}: {}", run_id, e.what());
        }
        {
            std::lock_guard lock(runs_mutex_);
            if (saved) {
                live_runs_.erase(run_id);
            } else {
                auto& live = live_runs_[run_id];
                live.stage = RunStage::Finished;
                live.partial = std::move(record);
            }
            --active_runs_;
        }
        runs_cv_.notify_all();
    }).detach();
}

void Service::drain() {
    std::unique_lock lock(runs_mutex_);
    runs_cv_.wait(lock, [this] { return active_runs_ == 0; });
}

void Service::install_routes() {
    auto& srv = *server_;

    srv.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
        if (!api_token_ || req.path.rfind("/api/", 0) != 0)
            return httplib::Server::HandlerResponse::Unhandled;
        if (req.get_header_value("Authorization") == "Bearer " + *api_token_)
            return httplib::Server::HandlerResponse::Unhandled;
        send_error(res, 401, "UNAUTHORIZED", "missing or invalid bearer token");
        return httplib::Server::HandlerResponse::Handled;
    });

    srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const Error& e) {
            send_error(res, e);
        } catch (const std::exception& e) {
            send_error(res, 500, "INTERNAL", e.what());
        }
    });

    srv.Post("/api/query", [this](const httplib::Request& req, httplib::Response& res) {
        Json body;
        try {
            body = Json::parse(req.body);
        } catch (const Json::parse_error&) {
            return send_error(res, 400, "SCHEMA_INVALID", "request body is not valid JSON");
        }
        if (!body.is_object())
            return send_error(res, 400, "SCHEMA_INVALID", "request body must be an object");
        for (const auto& [key, value] : body.items()) {
            if (key != "network_id" && key != "query" && key != "overrides")
                return send_error(res, 400, "SCHEMA_INVALID", "unknown field '" + key + "'");
        }
        if (!body.contains("network_id") || !body["network_id"].is_string())
            return send_error(res, 400, "SCHEMA_INVALID", "network_id must be a string");
        if (!body.contains("query") || !body["query"].is_string() || text::is_blank(body["query"].get<std::string>()))
            return send_error(res, 400, "SCHEMA_INVALID", "query must be a non-empty string");
        auto network_id = body["network_id"].get<std::string>();
        auto query = body["query"].get<std::string>();

        ExperimentKnobs knobs;
        try {
            knobs = app_.config().defaults.with_overrides(body.value("overrides", Json()));
        } catch (const Error& e) {
            auto code = e.detail().find("is not allowed") != std::string::npos ? "OVERRIDE_NOT_ALLOWED"
                                                                               : "SCHEMA_INVALID";
            return send_error(res, 400, code, e.detail());
        }
        try {
            app_.pipeline().check_ready(network_id);
            require_non_degenerate(app_.pipeline().assets().embedder->embed(query), "query");
        } catch (const Error& e) {
            return send_error(res, e);
        }

        auto run_id = new_run_id();
        {
            std::lock_guard lock(runs_mutex_);
            if (active_runs_ >= app_.config().service.max_concurrent_runs)
                return send_error(res, 429, "CONCURRENCY_LIMIT",
                                  "too many runs in flight (" + std::to_string(active_runs_) + ")");
            ++active_runs_;
            LiveRun live;
            live.partial.run_id = run_id;
            live.partial.query = query;
            live.partial.network_id = network_id;
            live.partial.created_at = text::utc_timestamp();
            live.partial.config = {{"knobs", knobs.to_json()}};
            live_runs_.emplace(run_id, std::move(live));
        }
        spdlog::info("run {} submitted for {}", run_id, network_id);
        launch_run(run_id, std::move(query), std::move(network_id), knobs);
        send_json(res, 202, {{"run_id", run_id}, {"status", "queued"}});
    });

    srv.Get(R"(/api/runs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        auto run_id = req.matches[1].str();
        if (auto live = live_view(run_id))
            return send_json(res, 200, *live);
        if (auto doc = app_.load_run_document(run_id)) {
            res.status = 200;
            res.set_content(*doc, "application/json");
            return;
        }
        send_error(res, 404, "RUN_UNKNOWN", "no run with id '" + run_id + "'");
    });

    srv.Get("/api/networks", [this](const httplib::Request&, httplib::Response& res) {
        auto list = Json::array();
        for (const auto& n : app_.networks().entries())
            list.push_back(n.to_json());
        send_json(res, 200, {{"networks", list}});
    });

    srv.Post("/api/index/rebuild", [this](const httplib::Request&, httplib::Response& res) {
        if (rebuilding_.exchange(true))
            return send_error(res, 409, "REBUILD_IN_PROGRESS", "an index rebuild is already running");
        struct Reset {
            std::atomic<bool>& flag;
            ~Reset() { flag = false; }
        } reset{rebuilding_};
        try {
            auto result = rebuilder_();
            auto header = index_header_json(result.index);
            auto diagnostics = Json::array();
            for (const auto& d : result.diagnostics)
                diagnostics.push_back({{"doc_id", d.doc_id}, {"reason", d.reason}});
            header["diagnostics"] = diagnostics;
            send_json(res, 200, header);
        } catch (const Error& e) {
            send_error(res, e);
        }
    });

    srv.Get("/api/index", [this](const httplib::Request&, httplib::Response& res) {
        auto idx = app_.pipeline().index();
        if (!idx)
            return send_error(res, 409, "INDEX_MISSING", "no vector index is loaded");
        send_json(res, 200, index_header_json(*idx));
    });

    srv.Get("/api/bench/report", [this](const httplib::Request&, httplib::Response& res) {
        auto path = app_.config().report_path();
        if (!std::filesystem::exists(path))
            return send_error(res, 404, "NO_REPORT", "no benchmark report has been produced yet");
        res.status = 200;
        res.set_content(text::read_file(path), "application/json");
    });
}

int Service::start(const std::string& host, int port) {
    int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound <= 0)
        throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
    server_thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    spdlog::info("serving on {}:{}", host, bound);
    return bound;
}

void Service::listen_blocking(const std::string& host, int port) {
    spdlog::info("serving on {}:{}", host, port);
    if (!server_->listen(host, port))
        throw Error(ErrorCode::IoError, "cannot listen on " + host + ":" + std::to_string(port));
}

void Service::stop() {
    if (server_)
        server_->stop();
    if (server_thread_.joinable())
        server_thread_.join();
}

} // namespace netquery
