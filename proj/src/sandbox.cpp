// SPDX-License-Identifier: Apache-2.0
#include "netquery/sandbox.hpp"

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <spdlog/spdlog.h>

#include "netquery/error.hpp"
#include "netquery/text.hpp"

namespace netquery {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr std::size_t kCaptureLimit = 16u << 20;
constexpr std::size_t kRawTail = 2000;

std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + needle.size()))
        ++n;
    return n;
}

std::string cap_bytes(std::string_view s, std::size_t cap) {
    if (s.size() <= cap)
        return std::string(s);
    // Back off to a code point boundary.
    std::size_t cut = cap;
    while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80)
        --cut;
    return std::string(s.substr(0, cut));
}

std::string tail_bytes(std::string_view s, std::size_t n) {
    if (s.size() <= n)
        return std::string(s);
    std::size_t start = s.size() - n;
    while (start < s.size() && (static_cast<unsigned char>(s[start]) & 0xC0) == 0x80)
        ++start;
    return std::string(s.substr(start));
}

std::string parse_failure(std::string_view why, std::string_view out, std::string_view err) {
    std::string tb(kEnvelopeParseFailure);
    tb += ": ";
    tb.append(why);
    tb += "\n--- stdout tail ---\n";
    tb += tail_bytes(out, kRawTail);
    tb += "\n--- stderr tail ---\n";
    tb += tail_bytes(err, kRawTail);
    return tb;
}

bool is_executable(const fs::path& p) {
    struct stat st {};
    return ::stat(p.c_str(), &st) == 0 && S_ISREG(st.st_mode) && ::access(p.c_str(), X_OK) == 0;
}

std::string resolve_executable(const std::string& name) {
    if (name.find('/') != std::string::npos) {
        if (!is_executable(name))
            throw Error(ErrorCode::ExecutorNotFound, "executor '" + name + "' is not an executable file");
        return name;
    }
    const char* path = std::getenv("PATH");
    std::string_view dirs = path ? path : "/usr/local/bin:/usr/bin:/bin";
    while (!dirs.empty()) {
        auto colon = dirs.find(':');
        auto dir = dirs.substr(0, colon);
        dirs = colon == std::string_view::npos ? std::string_view{} : dirs.substr(colon + 1);
        auto candidate = fs::path(dir.empty() ? "." : std::string(dir)) / name;
        if (is_executable(candidate))
            return candidate.string();
    }
    throw Error(ErrorCode::ExecutorNotFound, "executor '" + name + "' not found on PATH");
}

fs::path make_workdir(const fs::path& root) {
    auto base = root.empty() ? fs::temp_directory_path() : root;
    std::error_code ec;
    fs::create_directories(base, ec);
    std::string tmpl = (base / "netquery-run-XXXXXX").string();
    if (!::mkdtemp(tmpl.data()))
        throw Error(ErrorCode::IoError, "cannot create sandbox workdir under " + base.string() + ": " +
                                            std::strerror(errno));
    return tmpl;
}

void set_nonblocking(int fd) { ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK); }

struct Pipe {
    int fd[2] = {-1, -1};
    Pipe() {
        if (::pipe2(fd, O_CLOEXEC) != 0)
            throw Error(ErrorCode::SpawnFailure, std::string("pipe: ") + std::strerror(errno));
    }
    ~Pipe() {
        close_read();
        close_write();
    }
    void close_read() {
        if (fd[0] >= 0)
            ::close(fd[0]);
        fd[0] = -1;
    }
    void close_write() {
        if (fd[1] >= 0)
            ::close(fd[1]);
        fd[1] = -1;
    }
};

// Everything the child needs is prepared before fork; after fork only
// async-signal-safe calls are made.
[[noreturn]] void run_child(const char* cwd, char* const argv[], char* const envp[], int out_fd,
                            int err_fd, int status_fd) {
    ::setpgid(0, 0);
    int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0)
        ::dup2(devnull, STDIN_FILENO);
    ::dup2(out_fd, STDOUT_FILENO);
    ::dup2(err_fd, STDERR_FILENO);
    // Inherited descriptors close at exec; the status pipe reports exec failure.
    ::close_range(3, ~0U, CLOSE_RANGE_CLOEXEC);
    int err = 0;
    if (::chdir(cwd) != 0) {
        err = errno;
    } else {
        ::execve(argv[0], argv, envp);
        err = errno;
    }
    auto ignored = ::write(status_fd, &err, sizeof err);
    (void)ignored;
    ::_exit(127);
}

} // namespace

std::string_view to_string(ExecutionStatus status) {
    switch (status) {
    case ExecutionStatus::Ok: return "ok";
    case ExecutionStatus::Error: return "error";
    case ExecutionStatus::Timeout: return "timeout";
    }
    return "error";
}

nlohmann::json ExecutionEnvelope::to_json() const {
    nlohmann::json j = {{"status", std::string(to_string(status))}};
    if (result)
        j["result"] = *result;
    if (traceback)
        j["traceback"] = *traceback;
    j["stdout_excerpt"] = stdout_excerpt;
    j["wall_time_ms"] = wall_time_ms;
    return j;
}

ExecutionEnvelope ExecutionEnvelope::from_json(const nlohmann::json& j) {
    if (!j.is_object())
        throw Error(ErrorCode::SchemaError, "envelope is not an object");
    ExecutionEnvelope e;
    auto status = j.at("status").get<std::string>();
    if (status == "ok")
        e.status = ExecutionStatus::Ok;
    else if (status == "error")
        e.status = ExecutionStatus::Error;
    else if (status == "timeout")
        e.status = ExecutionStatus::Timeout;
    else
        throw Error(ErrorCode::SchemaError, "unknown envelope status '" + status + "'");
    bool has_result = j.contains("result");
    bool has_tb = j.contains("traceback") && !j["traceback"].is_null();
    if (e.status == ExecutionStatus::Ok) {
        if (!has_result || has_tb)
            throw Error(ErrorCode::SchemaError, "ok envelope needs a result and no traceback");
        e.result = j["result"];
    } else {
        if (!has_tb || !j["traceback"].is_string() || has_result)
            throw Error(ErrorCode::SchemaError, status + " envelope needs a traceback and no result");
        e.traceback = j["traceback"].get<std::string>();
    }
    if (j.contains("stdout_excerpt") && j["stdout_excerpt"].is_string())
        e.stdout_excerpt = j["stdout_excerpt"].get<std::string>();
    if (j.contains("wall_time_ms") && j["wall_time_ms"].is_number())
        e.wall_time_ms = j["wall_time_ms"].get<std::int64_t>();
    return e;
}

ExecutionEnvelope ExecutionEnvelope::error(std::string traceback, std::int64_t wall_time_ms) {
    ExecutionEnvelope e;
    e.status = ExecutionStatus::Error;
    e.traceback = std::move(traceback);
    e.wall_time_ms = wall_time_ms;
    return e;
}

void SandboxSpec::validate() const {
    if (executor_command.empty())
        throw Error(ErrorCode::ConfigError, "executor_command is empty");
    std::size_t placeholders = 0;
    for (const auto& arg : executor_command)
        placeholders += count_occurrences(arg, kScriptPlaceholder);
    if (placeholders != 1)
        throw Error(ErrorCode::ConfigError, "executor_command must contain {script} exactly once, found " +
                                                std::to_string(placeholders));
    if (executor_command.front().find(kScriptPlaceholder) != std::string::npos)
        throw Error(ErrorCode::ConfigError, "executor_command[0] must name the executor");
    if (!(timeout_s > 0))
        throw Error(ErrorCode::ConfigError, "sandbox timeout_s must be positive");
    if (script_name.empty() || script_name.find('/') != std::string::npos)
        throw Error(ErrorCode::ConfigError, "script_name must be a plain file name");
}

SandboxSpec SandboxSpec::from_json(const nlohmann::json& j) {
    SandboxSpec s;
    if (j.contains("executor_command"))
        s.executor_command = j["executor_command"].get<std::vector<std::string>>();
    if (j.contains("harness_template_path"))
        s.harness_template_path = j["harness_template_path"].get<std::string>();
    s.timeout_s = j.value("timeout_s", s.timeout_s);
    if (j.contains("env_allowlist"))
        s.env_allowlist = j["env_allowlist"].get<std::vector<std::string>>();
    if (j.contains("temp_root"))
        s.temp_root = j["temp_root"].get<std::string>();
    s.script_name = j.value("script_name", s.script_name);
    s.keep_workdir = j.value("keep_workdir", s.keep_workdir);
    s.stdout_excerpt_cap = j.value("stdout_excerpt_cap", s.stdout_excerpt_cap);
    s.validate();
    return s;
}

nlohmann::json SandboxSpec::to_json() const {
    return {{"executor_command", executor_command},
            {"harness_template", harness_template_path.filename().string()},
            {"timeout_s", timeout_s},
            {"env_allowlist", env_allowlist}};
}

HarnessTemplate::HarnessTemplate(std::string text) : text_(std::move(text)) {
    for (auto name : {kNetworkPath, kFunctionBlock, kEvalLine}) {
        if (!text::contains_placeholder(text_, name))
            throw Error(ErrorCode::MissingPlaceholder, "harness template lacks {{" + std::string(name) + "}}");
    }
    version_ = hashing::sha256_hex(text_).substr(0, 16);
}

HarnessTemplate HarnessTemplate::load(const fs::path& path) {
    if (!fs::exists(path))
        throw Error(ErrorCode::MissingTemplate, path.string());
    return HarnessTemplate(text::read_file(path));
}

std::string assemble_script(const GeneratedProgram& program, const HarnessTemplate& harness,
                            const fs::path& network_file) {
    return text::substitute(harness.text(), {{std::string(HarnessTemplate::kNetworkPath), network_file.string()},
                                             {std::string(HarnessTemplate::kFunctionBlock), program.function_block},
                                             {std::string(HarnessTemplate::kEvalLine), program.eval_line}});
}

ExecutionEnvelope parse_envelope_output(std::string_view out, std::string_view err,
                                        std::int64_t wall_time_ms, std::size_t excerpt_cap) {
    auto lines = text::split_lines(out);
    std::size_t last = lines.size();
    while (last > 0 && text::is_blank(lines[last - 1]))
        --last;
    if (last == 0)
        return ExecutionEnvelope::error(parse_failure("no output on stdout", out, err), wall_time_ms);

    ExecutionEnvelope env;
    try {
        env = ExecutionEnvelope::from_json(nlohmann::json::parse(text::trim(lines[last - 1])));
    } catch (const nlohmann::json::exception& e) {
        return ExecutionEnvelope::error(parse_failure(std::string("final stdout line: ") + e.what(), out, err),
                                        wall_time_ms);
    } catch (const Error& e) {
        return ExecutionEnvelope::error(parse_failure(e.what(), out, err), wall_time_ms);
    }
    if (env.status == ExecutionStatus::Timeout)
        return ExecutionEnvelope::error(parse_failure("harness may not report a timeout", out, err), wall_time_ms);

    std::string chatter;
    for (std::size_t i = 0; i + 1 < last; ++i) {
        chatter.append(lines[i]);
        chatter.push_back('\n');
    }
    env.stdout_excerpt = cap_bytes(chatter + env.stdout_excerpt, excerpt_cap);
    env.wall_time_ms = wall_time_ms;
    return env;
}

Sandbox::Sandbox(std::size_t max_concurrent)
    : limiter_(max_concurrent ? max_concurrent : std::max(1u, std::thread::hardware_concurrency())) {}

ExecutionEnvelope Sandbox::execute(const std::string& script, const SandboxSpec& spec) {
    spec.validate();
    auto executable = resolve_executable(spec.executor_command.front());

    SlotLimiter::Slot slot(limiter_);
    auto workdir = make_workdir(spec.temp_root);
    auto script_path = workdir / spec.script_name;
    text::write_file_atomic(script_path, script);

    std::vector<std::string> args;
    args.push_back(executable);
    for (std::size_t i = 1; i < spec.executor_command.size(); ++i) {
        auto arg = spec.executor_command[i];
        if (auto pos = arg.find(SandboxSpec::kScriptPlaceholder); pos != std::string::npos)
            arg.replace(pos, SandboxSpec::kScriptPlaceholder.size(), script_path.string());
        args.push_back(std::move(arg));
    }
    std::vector<std::string> env;
    for (const auto& name : spec.env_allowlist) {
        if (const char* v = std::getenv(name.c_str()))
            env.push_back(name + "=" + v);
    }
    env.push_back("HOME=" + workdir.string());
    env.push_back("TMPDIR=" + workdir.string());

    std::vector<char*> argv, envp;
    for (auto& a : args)
        argv.push_back(a.data());
    argv.push_back(nullptr);
    for (auto& e : env)
        envp.push_back(e.data());
    envp.push_back(nullptr);
    auto cwd = workdir.string();

    Pipe out_pipe, err_pipe, status_pipe;
    auto started = Clock::now();
    pid_t pid = ::fork();
    if (pid < 0)
        throw Error(ErrorCode::SpawnFailure, std::string("fork: ") + std::strerror(errno));
    if (pid == 0)
        run_child(cwd.c_str(), argv.data(), envp.data(), out_pipe.fd[1], err_pipe.fd[1], status_pipe.fd[1]);

    ::setpgid(pid, pid); // also done in the child; whichever runs first wins
    out_pipe.close_write();
    err_pipe.close_write();
    status_pipe.close_write();

    int child_errno = 0;
    if (::read(status_pipe.fd[0], &child_errno, sizeof child_errno) == static_cast<ssize_t>(sizeof child_errno)) {
        ::waitpid(pid, nullptr, 0);
        std::error_code ec;
        fs::remove_all(workdir, ec);
        throw Error(ErrorCode::SpawnFailure, "exec " + executable + ": " + std::strerror(child_errno));
    }

    set_nonblocking(out_pipe.fd[0]);
    set_nonblocking(err_pipe.fd[0]);
    std::string out, err;
    auto deadline = started + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(spec.timeout_s));
    bool timed_out = false;
    bool reaped = false;
    int wait_status = 0;

    auto drain = [](int& fd, std::string& sink) {
        char buf[8192];
        for (;;) {
            auto n = ::read(fd, buf, sizeof buf);
            if (n > 0) {
                if (sink.size() < kCaptureLimit)
                    sink.append(buf, static_cast<std::size_t>(std::min<ssize_t>(n, static_cast<ssize_t>(kCaptureLimit - sink.size()))));
                continue;
            }
            if (n == 0) {
                ::close(fd);
                fd = -1;
            }
            return;
        }
    };

    while (out_pipe.fd[0] >= 0 || err_pipe.fd[0] >= 0) {
        auto now = Clock::now();
        if (now >= deadline) {
            timed_out = true;
            break;
        }
        auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
        pollfd fds[2];
        nfds_t n = 0;
        if (out_pipe.fd[0] >= 0)
            fds[n++] = {out_pipe.fd[0], POLLIN, 0};
        if (err_pipe.fd[0] >= 0)
            fds[n++] = {err_pipe.fd[0], POLLIN, 0};
        int rc = ::poll(fds, n, static_cast<int>(std::min<long long>(remaining + 1, 100)));
        if (rc < 0 && errno != EINTR)
            break;
        if (out_pipe.fd[0] >= 0)
            drain(out_pipe.fd[0], out);
        if (err_pipe.fd[0] >= 0)
            drain(err_pipe.fd[0], err);
        if (!reaped && ::waitpid(pid, &wait_status, WNOHANG) == pid) {
            reaped = true;
            // Stragglers in the group would otherwise hold the pipes open.
            ::kill(-pid, SIGKILL);
        }
    }

    ::kill(-pid, SIGKILL);
    if (!reaped) {
        if (timed_out) {
            ::waitpid(pid, &wait_status, 0);
        } else {
            // Pipes closed; the process is exiting on its own.
            while (::waitpid(pid, &wait_status, 0) < 0 && errno == EINTR) {}
        }
    }
    auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started).count();

    ExecutionEnvelope envelope;
    if (timed_out) {
        envelope.status = ExecutionStatus::Timeout;
        char secs[32];
        std::snprintf(secs, sizeof secs, "%g", spec.timeout_s);
        envelope.traceback = std::string("TimeoutError: execution exceeded the ") + secs +
                             " s time limit and was terminated";
        envelope.stdout_excerpt = cap_bytes(out, spec.stdout_excerpt_cap);
        envelope.wall_time_ms = wall_ms;
    } else {
        envelope = parse_envelope_output(out, err, wall_ms, spec.stdout_excerpt_cap);
    }

    if (spec.keep_workdir) {
        envelope.workdir = workdir;
    } else {
        std::error_code ec;
        fs::remove_all(workdir, ec);
        if (ec)
            spdlog::warn("could not remove sandbox workdir {}: {}", workdir.string(), ec.message());
    }
    return envelope;
}

} // namespace netquery
