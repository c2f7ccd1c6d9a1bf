// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "netquery/config.hpp"
#include "netquery/pipeline.hpp"

namespace httplib {
class Server;
}

namespace netquery {

/// HTTP+JSON front door. Submissions are fire-and-poll: POST /api/query
/// returns a run id immediately and the run proceeds on a worker thread.
///
///   POST /api/query            {network_id, query, overrides?} -> 202 {run_id}
///   GET  /api/runs/{id}        live view or the persisted RunRecord
///   GET  /api/networks         registry listing
///   POST /api/index/rebuild    rebuild + atomic swap -> index header
///   GET  /api/bench/report     last AccuracyReport
///
/// Errors are {"error": {"code", "message"}} with a stable machine code.
class Service {
public:
    using IndexRebuilder = std::function<BuildResult()>;

    explicit Service(App& app);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds (port 0 picks a free one) and serves on a background thread.
    int start(const std::string& host, int port);
    /// Blocks serving on the calling thread.
    void listen_blocking(const std::string& host, int port);
    void stop();

    /// Waits for all in-flight runs to finish (tests, shutdown).
    void drain();

    /// Replaces the default rebuild (App::rebuild_index).
    void set_index_rebuilder(IndexRebuilder rebuilder);

private:
    struct LiveRun {
        RunStage stage = RunStage::Queued;
        RunRecord partial;
    };
    class Tracker;

    void install_routes();
    void launch_run(std::string run_id, std::string query, std::string network_id,
                    ExperimentKnobs knobs);
    void update_live(const std::string& run_id, const std::function<void(LiveRun&)>& fn);
    std::optional<nlohmann::json> live_view(const std::string& run_id) const;

    App& app_;
    std::unique_ptr<httplib::Server> server_;
    std::thread server_thread_;
    std::optional<std::string> api_token_;

    mutable std::mutex runs_mutex_;
    std::condition_variable runs_cv_;
    std::map<std::string, LiveRun> live_runs_;
    std::size_t active_runs_ = 0;

    std::atomic<bool> rebuilding_{false};
    IndexRebuilder rebuilder_;
};

} // namespace netquery
