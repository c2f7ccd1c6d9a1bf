// SPDX-License-Identifier: Apache-2.0
// Routes every spdlog message into a string for the duration of a scope.
#pragma once

#include <memory>
#include <sstream>
#include <string>

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

namespace netquery::testing {

class LogCapture {
public:
    LogCapture() : previous_(spdlog::default_logger()) {
        auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(stream_);
        auto logger = std::make_shared<spdlog::logger>("capture", sink);
        logger->set_level(spdlog::level::trace);
        spdlog::set_default_logger(logger);
        previous_level_ = spdlog::get_level();
        spdlog::set_level(spdlog::level::trace);
    }
    ~LogCapture() {
        spdlog::set_default_logger(previous_);
        spdlog::set_level(previous_level_);
    }

    std::string text() {
        spdlog::default_logger()->flush();
        return stream_.str();
    }

private:
    std::ostringstream stream_;
    std::shared_ptr<spdlog::logger> previous_;
    spdlog::level::level_enum previous_level_;
};

} // namespace netquery::testing
