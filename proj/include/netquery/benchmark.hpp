// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "netquery/error.hpp"
#include "netquery/pipeline.hpp"

namespace netquery {

enum class QueryCategory { Static, Hydraulics, Quality, HydraulicsScenario };

std::string_view to_string(QueryCategory category);
QueryCategory parse_query_category(std::string_view s);
inline constexpr QueryCategory kAllCategories[] = {
    QueryCategory::Static, QueryCategory::Hydraulics, QueryCategory::Quality,
    QueryCategory::HydraulicsScenario};

struct CheckerKind {
    enum class Type { ExactNumeric, ExactValue, AggregateSum, ContainsValue, ManualReview };
    static constexpr double kDefaultTolerance = 1e-6;

    Type type = Type::ExactNumeric;
    double tolerance = kDefaultTolerance; // relative: |a - e| <= tol * max(1, |e|)

    nlohmann::json to_json() const;
    static CheckerKind from_json(const nlohmann::json& j);
};

struct BenchmarkCase {
    std::string case_id;
    QueryCategory category = QueryCategory::Static;
    std::string network_id;
    std::string query;
    std::optional<nlohmann::json> expected;
    CheckerKind checker;
    std::string oracle_ref; // relative to the suite file

    nlohmann::json to_json() const;
    /// draft: expected values may still be missing (authoring before `bench expected`).
    static BenchmarkCase from_json(const nlohmann::json& j, bool draft = false);
};

struct BenchmarkSuite {
    std::vector<BenchmarkCase> cases;
    std::filesystem::path base_dir; // where oracle_ref paths resolve

    /// Throws SuiteSchemaError.
    static BenchmarkSuite load(const std::filesystem::path& path, bool draft = false);
    static BenchmarkSuite from_json(const nlohmann::json& j, std::filesystem::path base_dir = {}, bool draft = false);
    nlohmann::json to_json() const;

    /// Networks must be registered; Quality cases need quality_configured.
    void validate_against(const NetworkRegistry& networks) const;

    std::size_t count(QueryCategory category) const;
};

enum class Verdict { Correct, Incorrect, NeedsReview };
std::string_view to_string(Verdict verdict);
Verdict parse_verdict(std::string_view s);

struct CheckResult {
    Verdict verdict = Verdict::Incorrect;
    std::string explanation;
};

CheckResult check_answer(const nlohmann::json& answer, const BenchmarkCase& bench_case);

/// Persisted human dispositions for ManualReview cases, keyed by case id and
/// the exact answer judged.
class ReviewBook {
public:
    static ReviewBook load(const std::filesystem::path& path); // missing file: empty book
    void save(const std::filesystem::path& path) const;

    std::optional<Verdict> lookup(std::string_view case_id, const nlohmann::json& answer) const;
    void record(std::string case_id, nlohmann::json answer, Verdict verdict);

private:
    nlohmann::json entries_ = nlohmann::json::array();
};

struct GridConfig {
    PromptLevel prompt_level = PromptLevel::Basic;
    int max_retries = 0;

    std::string label() const; // "basic/0"
    bool operator==(const GridConfig&) const = default;
};

/// {Basic, Complex} x {0, 5}.
std::vector<GridConfig> standard_grid();

struct CaseVerdict {
    std::string config;
    std::string case_id;
    QueryCategory category = QueryCategory::Static;
    std::string run_id;
    FinalStatus final_status = FinalStatus::Failed;
    std::size_t attempts = 0;
    Verdict verdict = Verdict::Incorrect;
    std::string explanation;
    std::optional<nlohmann::json> answer;
};

struct AccuracyCell {
    std::string config;
    QueryCategory category = QueryCategory::Static;
    std::size_t n_cases = 0;
    std::size_t n_correct = 0;
    double accuracy = 0.0;
};

struct AccuracyReport {
    std::vector<GridConfig> grid;
    std::vector<AccuracyCell> cells;      // grid-major, categories in fixed order
    std::vector<CaseVerdict> verdicts;    // grid-major, suite order
    bool partial = false;

    /// Recomputes every cell from the verdict log.
    static AccuracyReport from_verdicts(std::vector<GridConfig> grid,
                                        std::vector<CaseVerdict> verdicts, bool partial = false);

    const AccuracyCell* cell(std::string_view config, QueryCategory category) const;

    nlohmann::json to_json() const;
    static AccuracyReport from_json(const nlohmann::json& j);
    /// Categories x configs table of accuracies in percent.
    std::string to_markdown() const;
};

struct SuiteOptions {
    std::size_t concurrency = 1;
    std::size_t top_k = 8;
    const ReviewBook* reviews = nullptr;
    /// Called once per finished run (any thread), e.g. to persist records.
    std::function<void(const GridConfig&, const BenchmarkCase&, const RunRecord&)> on_record;
};

/// Thrown when infrastructure fails mid-suite; carries what was completed.
class SuiteAborted : public Error {
public:
    SuiteAborted(const Error& cause, AccuracyReport partial)
        : Error(cause.code(), cause.detail()), partial_(std::move(partial)) {}
    const AccuracyReport& partial_report() const noexcept { return partial_; }

private:
    AccuracyReport partial_;
};

AccuracyReport run_suite(const Pipeline& pipeline, const BenchmarkSuite& suite,
                         const std::vector<GridConfig>& grid, const SuiteOptions& options = {});

/// Runs the case's reference program in the sandbox and returns its result.
/// Throws OracleFailure if the reference program errors, ExpectedExists when
/// the case already has an expected value and `refresh` is false.
nlohmann::json generate_expected(const BenchmarkCase& bench_case, const BenchmarkSuite& suite,
                                 const PipelineAssets& assets, bool refresh);

void write_report_files(const AccuracyReport& report, const std::filesystem::path& out_dir);

} // namespace netquery
