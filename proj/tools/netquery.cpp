// SPDX-License-Identifier: Apache-2.0
// netquery command-line front door.
#include <cstdlib>
#include <iostream>

#include <algorithm>
#include <cstdio>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "netquery/benchmark.hpp"
#include "netquery/config.hpp"
#include "netquery/error.hpp"
#include "netquery/service.hpp"
#include "netquery/text.hpp"
#include "fixtures.hpp"

namespace fs = std::filesystem;
using namespace netquery;
using Json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::string default_config() {
    if (const char* env = std::getenv("NETQUERY_CONFIG"); env && *env)
        return env;
    return "netquery.json";
}

std::vector<GridConfig> parse_grid(const std::string& spec) {
    if (spec == "standard")
        return standard_grid();
    std::vector<GridConfig> out;
    std::string_view rest = spec;
    while (!rest.empty()) {
        auto comma = rest.find(',');
        auto item = std::string(text::trim(rest.substr(0, comma)));
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        auto slash = item.find('/');
        if (slash == std::string::npos)
            throw Error(ErrorCode::InvalidArgument, "grid entry '" + item + "' is not level/retries");
        GridConfig g;
        g.prompt_level = parse_prompt_level(item.substr(0, slash));
        g.max_retries = std::stoi(item.substr(slash + 1));
        out.push_back(g);
    }
    return out;
}

void print_record_summary(const RunRecord& r) {
    std::cout << "run_id: " << r.run_id << "\n"
              << "status: " << (r.final_status ? to_string(*r.final_status) : "running") << "\n"
              << "attempts: " << r.attempts.size() << "\n";
    if (r.answer)
        std::cout << "answer: " << r.answer->dump() << "\n";
    if (r.failure)
        std::cout << "failure: " << r.failure->code << " at " << r.failure->stage << ": " << r.failure->message
                  << "\n";
    if (!r.attempts.empty() && !r.answer) {
        const auto& last = r.attempts.back().envelope;
        if (last.traceback)
            std::cout << "last traceback:\n" << *last.traceback << "\n";
    }
}

RunRecord read_record(const App& app, const std::string& id_or_path) {
    std::string doc;
    if (fs::exists(id_or_path)) {
        doc = text::read_file(id_or_path);
    } else if (auto stored = app.load_run_document(id_or_path)) {
        doc = *stored;
    } else {
        throw Error(ErrorCode::InvalidArgument, "no run or file '" + id_or_path + "'");
    }
    return RunRecord::from_json(Json::parse(doc));
}

} // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("netquery");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("%Y-%m-%dT%H:%M:%S.%e %^%l%$ %v");

    CLI::App cli{"Natural-language questions about water distribution networks, answered by generated code."};
    cli.require_subcommand(1);
    std::string config_path = default_config();
    std::string log_level = "warn";
    cli.add_option("-c,--config", config_path, "config file (default: $NETQUERY_CONFIG or ./netquery.json)");
    cli.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

    // ingest
    auto* ingest = cli.add_subcommand("ingest", "normalize method documentation into a structured corpus");
    std::string ingest_dump, ingest_json, ingest_out, ingest_label;
    auto* from_dump = ingest->add_option("--from-dump", ingest_dump, "plaintext dump")->check(CLI::ExistingFile);
    auto* from_json = ingest->add_option("--from-json", ingest_json, "structured records")->check(CLI::ExistingFile);
    from_dump->excludes(from_json);
    ingest->add_option("-o,--out", ingest_out, "corpus JSON to write")->required();
    ingest->add_option("--label", ingest_label, "source label (default: input file name)");

    // index
    auto* index = cli.add_subcommand("index", "vector index management");
    index->require_subcommand(1);
    auto* index_build = index->add_subcommand("build", "embed the configured corpus and write the index");
    auto* index_query = index->add_subcommand("query", "show the top-k methods for a text");
    std::string index_text_arg;
    std::size_t index_k = 8;
    index_query->add_option("text", index_text_arg)->required();
    index_query->add_option("-k,--top-k", index_k)->capture_default_str();

    // ask
    auto* ask = cli.add_subcommand("ask", "answer one question");
    std::string ask_network, ask_query, ask_level;
    int ask_retries = -1;
    std::size_t ask_top_k = 0;
    bool ask_json = false;
    ask->add_option("-n,--network", ask_network, "network id")->required();
    ask->add_option("query", ask_query)->required();
    ask->add_option("--level", ask_level, "basic|complex");
    ask->add_option("--retries", ask_retries, "code-repair cycles (0-10)");
    ask->add_option("--top-k", ask_top_k);
    ask->add_flag("--json", ask_json, "print the full RunRecord");

    // runs
    auto* runs = cli.add_subcommand("runs", "inspect persisted runs");
    runs->require_subcommand(1);
    auto* runs_show = runs->add_subcommand("show", "print a RunRecord");
    auto* runs_replay = runs->add_subcommand("replay", "re-run a record with its own transcript");
    std::string runs_id;
    runs_show->add_option("run", runs_id, "run id or path")->required();
    runs_replay->add_option("run", runs_id, "run id or path")->required();

    // networks
    auto* networks = cli.add_subcommand("networks", "list registered networks");

    // bench
    auto* bench = cli.add_subcommand("bench", "benchmark suite");
    bench->require_subcommand(1);
    auto* bench_run = bench->add_subcommand("run", "run the suite over a configuration grid");
    auto* bench_expected = bench->add_subcommand("expected", "fill expected values from oracle programs");
    std::string suite_path, grid_spec = "standard", bench_out, reviews_path;
    std::size_t bench_concurrency = 1;
    bool save_runs = false, refresh = false;
    std::vector<std::string> only_cases;
    bench_run->add_option("-s,--suite", suite_path)->required()->check(CLI::ExistingFile);
    bench_run->add_option("--grid", grid_spec, "'standard' or e.g. basic/0,complex/5")->capture_default_str();
    bench_run->add_option("-o,--out", bench_out, "report directory (default: <data_dir>/bench)");
    bench_run->add_option("-j,--concurrency", bench_concurrency)->capture_default_str();
    bench_run->add_option("--reviews", reviews_path, "manual review book");
    bench_run->add_flag("--save-runs", save_runs, "persist every RunRecord under <data_dir>/runs");
    bench_expected->add_option("-s,--suite", suite_path)->required()->check(CLI::ExistingFile);
    bench_expected->add_option("--case", only_cases, "limit to these case ids");
    bench_expected->add_flag("--refresh", refresh, "overwrite existing expected values");

    // serve
    auto* serve = cli.add_subcommand("serve", "run the HTTP service");
    std::string serve_host;
    int serve_port = -1;
    serve->add_option("--host", serve_host);
    serve->add_option("--port", serve_port);

    // fixtures
    auto* fixtures = cli.add_subcommand("fixtures", "fixture authoring");
    fixtures->require_subcommand(1);
    auto* fixtures_record = fixtures->add_subcommand("record", "record transcripts from a scenario file");
    std::string scenarios_path, transcript_out;
    fixtures_record->add_option("--scenarios", scenarios_path)->required()->check(CLI::ExistingFile);
    fixtures_record->add_option("-s,--suite", suite_path)->required()->check(CLI::ExistingFile);
    fixtures_record->add_option("-o,--out", transcript_out, "transcript JSONL to write")->required();

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return cli.exit(e) == 0 ? kExitOk : kExitUsage;
    }
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        if (*ingest) {
            if (!ingest_json.empty()) {
                auto label = ingest_label.empty() ? fs::path(ingest_json).filename().string() : ingest_label;
                auto corpus = load_corpus_structured(Json::parse(text::read_file(ingest_json)), label);
                write_corpus_file(corpus, ingest_out);
                std::cout << corpus.docs.size() << " methods -> " << ingest_out << "\n";
                return kExitOk;
            }
            if (ingest_dump.empty()) {
                std::cerr << "ingest needs --from-dump or --from-json\n";
                return kExitUsage;
            }
            auto label = ingest_label.empty() ? fs::path(ingest_dump).filename().string() : ingest_label;
            auto result = parse_doc_dump(text::read_file(ingest_dump), label, text::utc_timestamp());
            for (const auto& d : result.diagnostics)
                std::cerr << "entry " << d.entry_index << ": " << d.reason << "\n";
            write_corpus_file(result.corpus, ingest_out);
            std::cout << result.corpus.docs.size() << " methods, " << result.diagnostics.size()
                      << " skipped entries -> " << ingest_out << "\n";
            return kExitOk;
        }

        App app(AppConfig::load(config_path));

        if (*index_build) {
            auto result = app.rebuild_index();
            for (const auto& d : result.diagnostics)
                std::cerr << d.doc_id << ": " << d.reason << "\n";
            const auto& h = result.index.header();
            std::cout << result.index.size() << " entries, " << h.embedder_id << " -> "
                      << app.config().index_path.string() << "\n";
        } else if (*index_query) {
            auto idx = app.pipeline().index();
            if (!idx)
                throw Error(ErrorCode::IndexMissing, "no index at " + app.config().index_path.string());
            auto qv = app.pipeline().assets().embedder->embed(index_text_arg);
            require_non_degenerate(qv, "query");
            for (const auto& r : idx->top_k(qv, index_k)) {
                std::printf("%2zu  %.6f  %s\n", r.rank, r.score, idx->find(r.doc_id)->doc.signature.c_str());
            }
        } else if (*ask) {
            auto knobs = app.config().defaults;
            Json overrides = Json::object();
            if (!ask_level.empty())
                overrides["prompt_level"] = ask_level;
            if (ask_retries >= 0)
                overrides["max_retries"] = ask_retries;
            if (ask_top_k)
                overrides["top_k"] = ask_top_k;
            knobs = knobs.with_overrides(overrides);
            auto record = app.pipeline().run_query(ask_query, ask_network, knobs);
            app.save_run(record);
            if (ask_json)
                std::cout << record.to_json().dump(2) << "\n";
            else
                print_record_summary(record);
        } else if (*runs_show) {
            auto record = read_record(app, runs_id);
            std::cout << record.to_json().dump(2) << "\n";
        } else if (*runs_replay) {
            auto record = read_record(app, runs_id);
            auto replayed = replay_run(record, app.pipeline());
            if (!replay_identical(record, replayed)) {
                auto diff = Json::diff(deterministic_view(record), deterministic_view(replayed));
                std::cerr << "replay differs:\n" << diff.dump(2) << "\n";
                return kExitRuntime;
            }
            std::cout << "replay identical (" << replayed.attempts.size() << " attempts)\n";
        } else if (*networks) {
            for (const auto& n : app.networks().entries()) {
                std::cout << n.network_id << "\t" << n.display_name << "\t" << n.file_path.string()
                          << (n.quality_configured ? "\tquality" : "") << "\n";
            }
        } else if (*bench_run) {
            auto suite = BenchmarkSuite::load(suite_path);
            SuiteOptions options;
            options.concurrency = bench_concurrency;
            options.top_k = app.config().defaults.top_k;
            ReviewBook reviews;
            if (!reviews_path.empty()) {
                reviews = ReviewBook::load(reviews_path);
                options.reviews = &reviews;
            }
            if (save_runs)
                options.on_record = [&app](const GridConfig&, const BenchmarkCase&, const RunRecord& r) {
                    app.save_run(r);
                };
            auto out_dir = bench_out.empty() ? app.config().report_path().parent_path() : fs::path(bench_out);
            try {
                auto report = run_suite(app.pipeline(), suite, parse_grid(grid_spec), options);
                write_report_files(report, out_dir);
                std::cout << report.to_markdown();
            } catch (const SuiteAborted& e) {
                write_report_files(e.partial_report(), out_dir);
                throw;
            }
        } else if (*bench_expected) {
            auto suite = BenchmarkSuite::load(suite_path, true);
            std::size_t updated = 0;
            for (auto& c : suite.cases) {
                if (!only_cases.empty() && std::find(only_cases.begin(), only_cases.end(), c.case_id) == only_cases.end())
                    continue;
                if (c.expected && !refresh)
                    continue;
                c.expected = generate_expected(c, suite, app.pipeline().assets(), refresh);
                std::cout << c.case_id << ": " << c.expected->dump() << std::endl;
                ++updated;
                text::write_file_atomic(suite_path, suite.to_json().dump(2) + "\n");
            }
            std::cout << updated << " expected value(s) written\n";
        } else if (*serve) {
            Service service(app);
            auto host = serve_host.empty() ? app.config().service.host : serve_host;
            auto port = serve_port >= 0 ? serve_port : app.config().service.port;
            service.listen_blocking(host, port);
        } else if (*fixtures_record) {
            auto suite = BenchmarkSuite::load(suite_path);
            auto entries = record_fixture_transcripts(app.pipeline(), suite, Json::parse(text::read_file(scenarios_path)));
            write_transcript(entries, transcript_out);
            std::cout << entries.size() << " transcript entries -> " << transcript_out << "\n";
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == ErrorCode::ConfigError || e.code() == ErrorCode::MissingTemplate ? kExitConfig
                                                                                           : kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
