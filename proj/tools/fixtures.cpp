// SPDX-License-Identifier: Apache-2.0
#include "fixtures.hpp"

#include <unordered_map>

#include "netquery/error.hpp"
#include "netquery/text.hpp"

namespace netquery {
namespace {

using Json = nlohmann::json;

struct Oracle {
    std::string function_block;
    std::string function_name;
    std::string eval_line;
};

Oracle read_oracle(const BenchmarkSuite& suite, const BenchmarkCase& c) {
    auto source = text::read_file(suite.base_dir / c.oracle_ref);
    auto lines = text::split_lines(source);
    while (!lines.empty() && text::is_blank(lines.back()))
        lines.pop_back();
    Oracle o;
    o.eval_line = std::string(text::trim(lines.back()));
    lines.pop_back();
    while (!lines.empty() && text::is_blank(lines.back()))
        lines.pop_back();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i)
            o.function_block += '\n';
        o.function_block.append(lines[i]);
    }
    o.function_name = defined_function_name(o.function_block);
    return o;
}

// Inserts a fake-executor directive as the first statement of the body.
std::string with_directive(const std::string& block, const std::string& directive) {
    auto lines = text::split_lines(block);
    std::string out;
    bool inserted = false;
    for (auto line : lines) {
        out.append(line);
        out.push_back('\n');
        if (!inserted && text::trim_right(line).size() && text::trim_right(line).back() == ':' &&
            line.find("def ") != std::string_view::npos) {
            out += "    #@" + directive + "\n";
            inserted = true;
        }
    }
    if (!inserted)
        throw Error(ErrorCode::InvalidArgument, "cannot place a directive in:\n" + block);
    out.pop_back();
    return out;
}

std::string renamed(const std::string& block, const std::string& from, const std::string& to) {
    auto out = block;
    auto at = out.find("def " + from + "(");
    if (at != std::string::npos)
        out.replace(at + 4, from.size(), to);
    return out;
}

std::string fenced(const std::string& code) { return "```python\n" + code + "\n```"; }

std::string simple_function(const std::string& name, const std::string& directive, const std::string& body) {
    return "def " + name + "(en):\n    #@" + directive + "\n" + body;
}

std::string indent_body(const std::string& body) {
    std::string out;
    for (auto line : text::split_lines(body)) {
        out += "    ";
        out.append(line);
        out += '\n';
    }
    if (!out.empty())
        out.pop_back();
    return out;
}

} // namespace

std::vector<TranscriptEntry> record_fixture_transcripts(const Pipeline& pipeline, const BenchmarkSuite& suite,
                                                        const Json& scenarios) {
    std::unordered_map<std::string, const BenchmarkCase*> cases;
    for (const auto& c : suite.cases)
        cases.emplace(c.case_id, &c);

    std::vector<TranscriptEntry> all;
    std::unordered_map<std::string, std::size_t> seen;

    for (const auto& sc : scenarios.at("scenarios")) {
        auto case_id = sc.at("case_id").get<std::string>();
        auto level = parse_prompt_level(sc.at("level").get<std::string>());
        auto it = cases.find(case_id);
        if (it == cases.end())
            throw Error(ErrorCode::InvalidArgument, "scenario for unknown case '" + case_id + "'");
        const auto& bc = *it->second;
        auto oracle = read_oracle(suite, bc);
        auto label = case_id + "/" + std::string(to_string(level));

        auto recorder = std::make_shared<RecordingProvider>();
        std::size_t n = 0;
        for (const auto& a : sc.at("attempts")) {
            auto outcome = a.at("outcome").get<std::string>();
            auto note = label + " attempt " + std::to_string(n++) + " " + outcome;
            auto defined = [&](const std::string& fallback) { return a.value("defined", fallback); };
            auto generate = [&](const std::string& code) { recorder->enqueue(ModelRole::Generator, fenced(code), note); };
            auto evaluate = [&](const std::string& line) { recorder->enqueue(ModelRole::Evaluator, fenced(line), note); };
            auto call_of = [](const std::string& name) { return "result = " + name + "(en)"; };
            if (outcome == "ok") {
                auto name = defined(oracle.function_name);
                generate(with_directive(renamed(oracle.function_block, oracle.function_name, name),
                                        "result " + bc.expected->dump()));
                evaluate(call_of(name));
            } else if (outcome == "wrong") {
                auto name = defined(oracle.function_name + "_estimate");
                generate(with_directive(renamed(oracle.function_block, oracle.function_name, name),
                                        "result " + a.at("value").dump()));
                evaluate(call_of(name));
            } else if (outcome == "raise") {
                std::string error, body;
                if (a.contains("call")) {
                    auto call = a["call"].get<std::string>();
                    error = "AttributeError: 'epanet' object has no attribute '" + call + "'";
                    body = a.value("body", "return en." + call + "()");
                } else {
                    error = a.at("error").get<std::string>();
                    body = a.at("body").get<std::string>();
                }
                auto name = defined(oracle.function_name);
                generate(simple_function(name, "raise " + error, indent_body(body)));
                evaluate(call_of(name));
            } else if (outcome == "malformed") {
                recorder->enqueue(ModelRole::Generator, a.at("text").get<std::string>(), note);
            } else if (outcome == "name_error") {
                auto name = defined("solve");
                generate(with_directive(renamed(oracle.function_block, oracle.function_name, name),
                                        "result " + bc.expected->dump()));
                evaluate(call_of(a.value("called", oracle.function_name)));
            } else if (outcome == "bad_eval") {
                auto name = defined("answer_query");
                generate(with_directive(renamed(oracle.function_block, oracle.function_name, name),
                                        "result " + bc.expected->dump()));
                recorder->enqueue(ModelRole::Evaluator, a.at("text").get<std::string>(), note);
            } else {
                throw Error(ErrorCode::InvalidArgument, label + ": unknown outcome '" + outcome + "'");
            }
        }

        ExperimentKnobs knobs;
        knobs.prompt_level = level;
        knobs.max_retries = sc.value("max_retries", 5);
        auto record = pipeline.with_providers(recorder, recorder).run_query(bc.query, bc.network_id, knobs);
        if (record.failure)
            throw Error(ErrorCode::InvalidArgument, label + ": " + record.failure->code + ": " + record.failure->message);
        if (recorder->pending(ModelRole::Generator) || recorder->pending(ModelRole::Evaluator))
            throw Error(ErrorCode::InvalidArgument, label + ": run ended after " + std::to_string(record.attempts.size()) +
                                                        " attempt(s) with responses left over");
        for (auto& e : recorder->entries()) {
            auto [pos, inserted] = seen.emplace(e.prompt_hash, all.size());
            if (inserted)
                all.push_back(std::move(e));
            else if (all[pos->second].response_text != e.response_text)
                throw Error(ErrorCode::InvalidArgument, label + ": prompt " + e.prompt_hash +
                                                            " already answered differently by " + all[pos->second].note);
        }
    }
    return all;
}

} // namespace netquery
