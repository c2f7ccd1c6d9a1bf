// SPDX-License-Identifier: Apache-2.0
#include "netquery/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "netquery/text.hpp"

namespace netquery {
namespace {

using Json = nlohmann::json;

bool is_number(const Json& v) { return v.is_number(); }

// Lists and map values, recursively, down to scalar leaves.
void flatten(const Json& v, std::vector<const Json*>& out) {
    if (v.is_array()) {
        for (const auto& x : v)
            flatten(x, out);
    } else if (v.is_object()) {
        for (const auto& [k, x] : v.items())
            flatten(x, out);
    } else {
        out.push_back(&v);
    }
}

bool numeric_close(double a, double e, double tol) {
    return std::fabs(a - e) <= tol * std::max(1.0, std::fabs(e));
}

bool values_equal(const Json& a, const Json& e, double tol) {
    if (is_number(a) && is_number(e))
        return numeric_close(a.get<double>(), e.get<double>(), tol);
    if (a.is_array() && e.is_array()) {
        if (a.size() != e.size())
            return false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (!values_equal(a[i], e[i], tol))
                return false;
        }
        return true;
    }
    if (a.is_object() && e.is_object()) {
        if (a.size() != e.size())
            return false;
        for (const auto& [k, x] : e.items()) {
            if (!a.contains(k) || !values_equal(a[k], x, tol))
                return false;
        }
        return true;
    }
    return a == e;
}

std::string show(const Json& v) {
    auto s = v.dump();
    if (text::utf8_length(s) > 200)
        s = std::string(text::utf8_prefix(s, 200)) + "...";
    return s;
}

std::optional<double> numeric_sum(const Json& v, std::string& why) {
    std::vector<const Json*> leaves;
    flatten(v, leaves);
    double sum = 0.0;
    for (const auto* leaf : leaves) {
        if (!is_number(*leaf)) {
            why = "NonNumericAnswer: element " + show(*leaf) + " is not a number";
            return std::nullopt;
        }
        sum += leaf->get<double>();
    }
    return sum;
}

std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

[[noreturn]] void schema(const std::string& why) { throw Error(ErrorCode::SuiteSchemaError, why); }

const char* checker_name(CheckerKind::Type t) {
    switch (t) {
    case CheckerKind::Type::ExactNumeric: return "exact_numeric";
    case CheckerKind::Type::ExactValue: return "exact_value";
    case CheckerKind::Type::AggregateSum: return "aggregate_sum";
    case CheckerKind::Type::ContainsValue: return "contains_value";
    case CheckerKind::Type::ManualReview: return "manual_review";
    }
    return "exact_numeric";
}

std::string display_name(QueryCategory c) {
    switch (c) {
    case QueryCategory::Static: return "Static";
    case QueryCategory::Hydraulics: return "Hydraulics";
    case QueryCategory::Quality: return "Quality";
    case QueryCategory::HydraulicsScenario: return "Hydraulics Scenario";
    }
    return "Static";
}

GridConfig parse_grid_label(const std::string& label) {
    auto slash = label.find('/');
    if (slash == std::string::npos)
        throw Error(ErrorCode::SchemaError, "grid label '" + label + "' is not level/retries");
    GridConfig g;
    g.prompt_level = parse_prompt_level(label.substr(0, slash));
    try {
        g.max_retries = std::stoi(label.substr(slash + 1));
    } catch (const std::exception&) {
        throw Error(ErrorCode::SchemaError, "grid label '" + label + "' has a bad retry count");
    }
    return g;
}

bool is_infra_failure(const RunRecord& r) {
    if (!r.failure)
        return false;
    const auto& c = r.failure->code;
    return c == to_string(ErrorCode::TranscriptMiss) || c == to_string(ErrorCode::ExecutorNotFound) ||
           c == to_string(ErrorCode::SpawnFailure) || c == to_string(ErrorCode::IoError);
}

} // namespace

std::string_view to_string(QueryCategory category) {
    switch (category) {
    case QueryCategory::Static: return "static";
    case QueryCategory::Hydraulics: return "hydraulics";
    case QueryCategory::Quality: return "quality";
    case QueryCategory::HydraulicsScenario: return "hydraulics_scenario";
    }
    return "static";
}

QueryCategory parse_query_category(std::string_view s) {
    for (auto c : kAllCategories) {
        if (to_string(c) == s)
            return c;
    }
    schema("unknown category '" + std::string(s) + "'");
}

std::string_view to_string(Verdict verdict) {
    switch (verdict) {
    case Verdict::Correct: return "correct";
    case Verdict::Incorrect: return "incorrect";
    case Verdict::NeedsReview: return "needs_review";
    }
    return "incorrect";
}

Verdict parse_verdict(std::string_view s) {
    if (s == "correct")
        return Verdict::Correct;
    if (s == "incorrect")
        return Verdict::Incorrect;
    if (s == "needs_review")
        return Verdict::NeedsReview;
    throw Error(ErrorCode::SchemaError, "unknown verdict '" + std::string(s) + "'");
}

Json CheckerKind::to_json() const {
    Json j = {{"type", checker_name(type)}};
    if (type == Type::ExactNumeric || type == Type::AggregateSum || type == Type::ExactValue ||
        type == Type::ContainsValue)
        j["tolerance"] = tolerance;
    return j;
}

CheckerKind CheckerKind::from_json(const Json& j) {
    CheckerKind c;
    std::string name;
    if (j.is_string()) {
        name = j.get<std::string>();
    } else if (j.is_object() && j.contains("type") && j["type"].is_string()) {
        name = j["type"].get<std::string>();
        if (j.contains("tolerance")) {
            if (!j["tolerance"].is_number())
                schema("checker tolerance must be a number");
            c.tolerance = j["tolerance"].get<double>();
        }
    } else {
        schema("checker must be a name or {type, tolerance}");
    }
    bool found = false;
    for (auto t : {Type::ExactNumeric, Type::ExactValue, Type::AggregateSum, Type::ContainsValue,
                   Type::ManualReview}) {
        if (name == checker_name(t)) {
            c.type = t;
            found = true;
        }
    }
    if (!found)
        schema("unknown checker '" + name + "'");
    if (!(c.tolerance >= 0))
        schema("checker tolerance must be >= 0");
    return c;
}

Json BenchmarkCase::to_json() const {
    Json j = {{"case_id", case_id},
              {"category", std::string(to_string(category))},
              {"network_id", network_id},
              {"query", query}};
    if (expected)
        j["expected"] = *expected;
    j["checker"] = checker.to_json();
    j["oracle_ref"] = oracle_ref;
    return j;
}

BenchmarkCase BenchmarkCase::from_json(const Json& j, bool draft) {
    if (!j.is_object())
        schema("case is not an object");
    auto str = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_string() || text::is_blank(j[key].get<std::string>()))
            schema(std::string("case field '") + key + "' must be a non-empty string");
        return j[key].get<std::string>();
    };
    BenchmarkCase c;
    c.case_id = str("case_id");
    try {
        c.category = parse_query_category(str("category"));
        c.network_id = str("network_id");
        c.query = str("query");
        c.oracle_ref = str("oracle_ref");
        if (j.contains("expected") && !j["expected"].is_null())
            c.expected = j["expected"];
        c.checker = j.contains("checker") ? CheckerKind::from_json(j["checker"]) : CheckerKind{};
    } catch (const Error& e) {
        schema("case '" + c.case_id + "': " + e.detail());
    }
    if (!draft && c.checker.type != CheckerKind::Type::ManualReview && !c.expected)
        schema("case '" + c.case_id + "' has no expected value");
    if (c.expected && (c.checker.type == CheckerKind::Type::ExactNumeric) && !c.expected->is_number())
        schema("case '" + c.case_id + "': exact_numeric needs a numeric expected value");
    return c;
}

BenchmarkSuite BenchmarkSuite::load(const std::filesystem::path& path, bool draft) {
    Json j;
    try {
        j = Json::parse(text::read_file(path));
    } catch (const Json::parse_error& e) {
        schema(path.string() + ": " + e.what());
    } catch (const Error& e) {
        schema(e.what());
    }
    return from_json(j, path.parent_path(), draft);
}

BenchmarkSuite BenchmarkSuite::from_json(const Json& j, std::filesystem::path base_dir, bool draft) {
    if (!j.is_array())
        schema("suite must be a JSON array of cases");
    BenchmarkSuite suite;
    suite.base_dir = std::move(base_dir);
    std::set<std::string> ids;
    for (const auto& x : j) {
        auto c = BenchmarkCase::from_json(x, draft);
        if (!ids.insert(c.case_id).second)
            schema("case id '" + c.case_id + "' repeated");
        suite.cases.push_back(std::move(c));
    }
    if (suite.cases.empty())
        schema("suite has no cases");
    return suite;
}

Json BenchmarkSuite::to_json() const {
    auto j = Json::array();
    for (const auto& c : cases)
        j.push_back(c.to_json());
    return j;
}

void BenchmarkSuite::validate_against(const NetworkRegistry& networks) const {
    for (const auto& c : cases) {
        const auto* net = networks.find(c.network_id);
        if (!net)
            schema("case '" + c.case_id + "' uses unregistered network '" + c.network_id + "'");
        if (c.category == QueryCategory::Quality && !net->quality_configured)
            schema("quality case '" + c.case_id + "' targets '" + c.network_id +
                   "', which has no water quality configured");
    }
}

std::size_t BenchmarkSuite::count(QueryCategory category) const {
    return static_cast<std::size_t>(
        std::count_if(cases.begin(), cases.end(), [&](const auto& c) { return c.category == category; }));
}

CheckResult check_answer(const Json& answer, const BenchmarkCase& bench_case) {
    using T = CheckerKind::Type;
    const auto& checker = bench_case.checker;
    if (checker.type == T::ManualReview) {
        return {Verdict::NeedsReview, "manual review: answer " + show(answer) + ", reference " +
                                          (bench_case.expected ? show(*bench_case.expected) : "none")};
    }
    if (!bench_case.expected)
        return {Verdict::Incorrect, "case has no expected value"};
    const auto& expected = *bench_case.expected;
    const double tol = checker.tolerance;

    switch (checker.type) {
    case T::ExactNumeric: {
        if (!is_number(answer))
            return {Verdict::Incorrect, "NonNumericAnswer: " + show(answer) + " is not a number"};
        double a = answer.get<double>(), e = expected.get<double>();
        bool ok = numeric_close(a, e, tol);
        return {ok ? Verdict::Correct : Verdict::Incorrect,
                format_number(a) + (ok ? " matches " : " differs from ") + format_number(e)};
    }
    case T::AggregateSum: {
        std::string why;
        auto a = numeric_sum(answer, why);
        if (!a)
            return {Verdict::Incorrect, why};
        auto e = numeric_sum(expected, why);
        if (!e)
            return {Verdict::Incorrect, "expected value is not numeric: " + why};
        bool ok = numeric_close(*a, *e, tol);
        return {ok ? Verdict::Correct : Verdict::Incorrect,
                "sum " + format_number(*a) + (ok ? " matches " : " differs from ") + format_number(*e)};
    }
    case T::ExactValue: {
        bool ok = values_equal(answer, expected, tol);
        return {ok ? Verdict::Correct : Verdict::Incorrect,
                show(answer) + (ok ? " equals " : " does not equal ") + show(expected)};
    }
    case T::ContainsValue: {
        // Every expected leaf must appear among the answer's leaves.
        std::vector<const Json*> leaves, wanted;
        flatten(answer, leaves);
        flatten(expected, wanted);
        bool ok = !wanted.empty() && std::all_of(wanted.begin(), wanted.end(), [&](const Json* w) {
            return std::any_of(leaves.begin(), leaves.end(), [&](const Json* x) { return values_equal(*x, *w, tol); });
        });
        return {ok ? Verdict::Correct : Verdict::Incorrect,
                show(expected) + (ok ? " found in " : " not found in ") + show(answer)};
    }
    case T::ManualReview: break;
    }
    return {Verdict::Incorrect, "unknown checker"};
}

ReviewBook ReviewBook::load(const std::filesystem::path& path) {
    ReviewBook book;
    if (!std::filesystem::exists(path))
        return book;
    auto j = Json::parse(text::read_file(path));
    if (!j.is_array())
        throw Error(ErrorCode::SchemaError, path.string() + ": review book must be an array");
    for (const auto& e : j) {
        if (!e.contains("case_id") || !e.contains("answer") || !e.contains("verdict"))
            throw Error(ErrorCode::SchemaError, path.string() + ": entry needs case_id, answer, verdict");
        parse_verdict(e["verdict"].get<std::string>());
    }
    book.entries_ = std::move(j);
    return book;
}

void ReviewBook::save(const std::filesystem::path& path) const {
    text::write_file_atomic(path, entries_.dump(2) + "\n");
}

std::optional<Verdict> ReviewBook::lookup(std::string_view case_id, const Json& answer) const {
    for (const auto& e : entries_) {
        if (e["case_id"] == case_id && e["answer"] == answer)
            return parse_verdict(e["verdict"].get<std::string>());
    }
    return std::nullopt;
}

void ReviewBook::record(std::string case_id, Json answer, Verdict verdict) {
    for (auto& e : entries_) {
        if (e["case_id"] == case_id && e["answer"] == answer) {
            e["verdict"] = std::string(to_string(verdict));
            return;
        }
    }
    entries_.push_back({{"case_id", std::move(case_id)},
                        {"answer", std::move(answer)},
                        {"verdict", std::string(to_string(verdict))}});
}

std::string GridConfig::label() const {
    return std::string(to_string(prompt_level)) + "/" + std::to_string(max_retries);
}

std::vector<GridConfig> standard_grid() {
    return {{PromptLevel::Basic, 0}, {PromptLevel::Basic, 5}, {PromptLevel::Complex, 0}, {PromptLevel::Complex, 5}};
}

AccuracyReport AccuracyReport::from_verdicts(std::vector<GridConfig> grid, std::vector<CaseVerdict> verdicts,
                                             bool partial) {
    AccuracyReport r;
    r.grid = std::move(grid);
    r.verdicts = std::move(verdicts);
    r.partial = partial;
    for (const auto& g : r.grid) {
        auto label = g.label();
        for (auto category : kAllCategories) {
            AccuracyCell cell;
            cell.config = label;
            cell.category = category;
            for (const auto& v : r.verdicts) {
                if (v.config != label || v.category != category)
                    continue;
                ++cell.n_cases;
                if (v.verdict == Verdict::Correct)
                    ++cell.n_correct;
            }
            cell.accuracy = cell.n_cases ? static_cast<double>(cell.n_correct) / static_cast<double>(cell.n_cases) : 0.0;
            r.cells.push_back(cell);
        }
    }
    return r;
}

const AccuracyCell* AccuracyReport::cell(std::string_view config, QueryCategory category) const {
    for (const auto& c : cells) {
        if (c.config == config && c.category == category)
            return &c;
    }
    return nullptr;
}

Json AccuracyReport::to_json() const {
    auto grid_labels = Json::array();
    for (const auto& g : grid)
        grid_labels.push_back(g.label());
    auto cell_list = Json::array();
    for (const auto& c : cells)
        cell_list.push_back({{"config", c.config},
                             {"category", std::string(to_string(c.category))},
                             {"n_cases", c.n_cases},
                             {"n_correct", c.n_correct},
                             {"accuracy", c.accuracy}});
    auto verdict_list = Json::array();
    for (const auto& v : verdicts) {
        Json j = {{"config", v.config},
                  {"case_id", v.case_id},
                  {"category", std::string(to_string(v.category))},
                  {"run_id", v.run_id},
                  {"final_status", std::string(to_string(v.final_status))},
                  {"attempts", v.attempts},
                  {"verdict", std::string(to_string(v.verdict))},
                  {"explanation", v.explanation}};
        if (v.answer)
            j["answer"] = *v.answer;
        verdict_list.push_back(std::move(j));
    }
    return {{"partial", partial}, {"grid", grid_labels}, {"cells", cell_list}, {"verdicts", verdict_list}};
}

AccuracyReport AccuracyReport::from_json(const Json& j) {
    try {
        std::vector<GridConfig> grid;
        for (const auto& g : j.at("grid"))
            grid.push_back(parse_grid_label(g.get<std::string>()));
        std::vector<CaseVerdict> verdicts;
        for (const auto& x : j.at("verdicts")) {
            CaseVerdict v;
            v.config = x.at("config").get<std::string>();
            v.case_id = x.at("case_id").get<std::string>();
            v.category = parse_query_category(x.at("category").get<std::string>());
            v.run_id = x.value("run_id", std::string{});
            v.final_status = x.at("final_status") == "answered" ? FinalStatus::Answered : FinalStatus::Failed;
            v.attempts = x.value("attempts", std::size_t{0});
            v.verdict = parse_verdict(x.at("verdict").get<std::string>());
            v.explanation = x.value("explanation", std::string{});
            if (x.contains("answer"))
                v.answer = x["answer"];
            verdicts.push_back(std::move(v));
        }
        auto r = from_verdicts(std::move(grid), std::move(verdicts), j.value("partial", false));
        if (r.to_json().at("cells") != j.at("cells"))
            throw Error(ErrorCode::SchemaError, "report cells do not match its verdict log");
        return r;
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::SchemaError, std::string("accuracy report: ") + e.what());
    }
}

std::string AccuracyReport::to_markdown() const {
    std::string out;
    if (partial)
        out += "**PARTIAL REPORT: the suite run was aborted before completion.**\n\n";
    out += "| Category |";
    for (const auto& g : grid)
        out += " " + g.label() + " |";
    out += "\n|---|";
    for (std::size_t i = 0; i < grid.size(); ++i)
        out += "---|";
    out += "\n";
    for (auto category : kAllCategories) {
        out += "| " + display_name(category) + " |";
        for (const auto& g : grid) {
            const auto* c = cell(g.label(), category);
            char buf[64];
            if (c && c->n_cases)
                std::snprintf(buf, sizeof buf, " %.1f%% (%zu/%zu) |", 100.0 * c->accuracy, c->n_correct, c->n_cases);
            else
                std::snprintf(buf, sizeof buf, " n/a |");
            out += buf;
        }
        out += "\n";
    }
    return out;
}

AccuracyReport run_suite(const Pipeline& pipeline, const BenchmarkSuite& suite,
                         const std::vector<GridConfig>& grid, const SuiteOptions& options) {
    if (grid.empty())
        throw Error(ErrorCode::InvalidArgument, "empty configuration grid");
    suite.validate_against(*pipeline.assets().networks);

    struct Job {
        const GridConfig* config;
        const BenchmarkCase* bench_case;
    };
    std::vector<Job> jobs;
    for (const auto& g : grid) {
        for (const auto& c : suite.cases)
            jobs.push_back({&g, &c});
    }
    std::vector<std::optional<CaseVerdict>> results(jobs.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::mutex error_mutex;
    std::optional<Error> first_error;

    auto worker = [&] {
        for (;;) {
            if (abort.load())
                return;
            auto i = next.fetch_add(1);
            if (i >= jobs.size())
                return;
            const auto& job = jobs[i];
            ExperimentKnobs knobs;
            knobs.prompt_level = job.config->prompt_level;
            knobs.max_retries = job.config->max_retries;
            knobs.top_k = options.top_k;
            try {
                auto record = pipeline.run_query(job.bench_case->query, job.bench_case->network_id, knobs);
                if (options.on_record)
                    options.on_record(*job.config, *job.bench_case, record);
                if (is_infra_failure(record))
                    throw Error(ErrorCode::IoError, "case '" + job.bench_case->case_id + "' under " +
                                                        job.config->label() + ": " + record.failure->code +
                                                        ": " + record.failure->message);
                CaseVerdict v;
                v.config = job.config->label();
                v.case_id = job.bench_case->case_id;
                v.category = job.bench_case->category;
                v.run_id = record.run_id;
                v.final_status = *record.final_status;
                v.attempts = record.attempts.size();
                v.answer = record.answer;
                if (record.final_status == FinalStatus::Answered) {
                    auto check = check_answer(*record.answer, *job.bench_case);
                    v.verdict = check.verdict;
                    v.explanation = check.explanation;
                    if (check.verdict == Verdict::NeedsReview && options.reviews) {
                        if (auto reviewed = options.reviews->lookup(v.case_id, *record.answer)) {
                            v.verdict = *reviewed;
                            v.explanation = "human review: " + std::string(to_string(*reviewed));
                        }
                    }
                } else {
                    v.verdict = Verdict::Incorrect;
                    v.explanation = record.failure ? "no answer: " + record.failure->code + ": " + record.failure->message
                                                   : "no answer after " + std::to_string(v.attempts) + " attempt(s)";
                }
                results[i] = std::move(v);
            } catch (const Error& e) {
                std::lock_guard lock(error_mutex);
                if (!first_error)
                    first_error = e;
                abort = true;
                return;
            }
        }
    };

    auto n_threads = std::max<std::size_t>(1, std::min(options.concurrency, jobs.size()));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t t = 0; t < n_threads; ++t)
            threads.emplace_back(worker);
        for (auto& t : threads)
            t.join();
    }

    std::vector<CaseVerdict> verdicts;
    for (auto& r : results) {
        if (r)
            verdicts.push_back(std::move(*r));
    }
    if (first_error) {
        spdlog::error("suite aborted: {}", first_error->what());
        throw SuiteAborted(*first_error, AccuracyReport::from_verdicts(grid, std::move(verdicts), true));
    }
    return AccuracyReport::from_verdicts(grid, std::move(verdicts));
}

Json generate_expected(const BenchmarkCase& bench_case, const BenchmarkSuite& suite,
                       const PipelineAssets& assets, bool refresh) {
    if (bench_case.expected && !refresh)
        throw Error(ErrorCode::ExpectedExists,
                    "case '" + bench_case.case_id + "' already has an expected value; pass --refresh to replace it");
    auto oracle_path = suite.base_dir / bench_case.oracle_ref;
    if (!std::filesystem::exists(oracle_path))
        throw Error(ErrorCode::OracleFailure, "oracle program " + oracle_path.string() + " does not exist");
    auto source = text::read_file(oracle_path);

    // The oracle is a function definition followed by one `result = ...` line.
    auto lines = text::split_lines(source);
    std::size_t last = lines.size();
    while (last > 0 && text::is_blank(lines[last - 1]))
        --last;
    if (last == 0 || text::trim(lines[last - 1]).substr(0, kResultVariable.size()) != kResultVariable)
        throw Error(ErrorCode::OracleFailure, oracle_path.string() + " must end with a 'result = ...' line");
    GeneratedProgram program;
    program.eval_line = std::string(text::trim(lines[last - 1]));
    for (std::size_t i = 0; i + 1 < last; ++i) {
        program.function_block.append(lines[i]);
        program.function_block.push_back('\n');
    }
    while (!program.function_block.empty() && program.function_block.back() == '\n')
        program.function_block.pop_back();

    const auto& network = assets.networks->at(bench_case.network_id);
    auto spec = assets.sandbox_spec;
    spec.network_file = network.file_path;
    auto script = assemble_script(program, *assets.harness, network.file_path);
    auto envelope = assets.sandbox->execute(script, spec);
    if (envelope.status != ExecutionStatus::Ok)
        throw Error(ErrorCode::OracleFailure, "oracle for '" + bench_case.case_id + "' did not succeed (" +
                                                  std::string(to_string(envelope.status)) + "):\n" +
                                                  envelope.traceback.value_or(""));
    return *envelope.result;
}

void write_report_files(const AccuracyReport& report, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    text::write_file_atomic(out_dir / "report.json", report.to_json().dump(2) + "\n");
    text::write_file_atomic(out_dir / "report.md", report.to_markdown());
}

} // namespace netquery
