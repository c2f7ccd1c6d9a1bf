// SPDX-License-Identifier: Apache-2.0
// Prompt inputs frozen into golden files, shared by unit tests and acceptance.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "netquery/embedding.hpp"
#include "netquery/prompting.hpp"
#include "support.hpp"

namespace netquery::testing {

inline const std::string kQuotedBasicPrompt =
    "You are a code assistant for a water engineer.\n\n"
    "Your task is to write code snippets that interact with the EPyT python package based on its "
    "documentation, and perform the task needed";

inline const PromptTemplates& templates() {
    static const auto t = PromptTemplates::load(assets_dir() / "templates");
    return t;
}

inline std::vector<RetrievedDoc> retrieve(const std::string& query, std::size_t k = 8) {
    auto index = fixture_index();
    HashedBowEmbedder embedder(512);
    std::vector<RetrievedDoc> out;
    for (const auto& r : index->top_k(embedder.embed(query), k))
        out.push_back({index->find(r.doc_id)->doc, r.score});
    return out;
}

inline std::string render(const PromptBundle& b) {
    return "=== system ===\n" + b.system_text + "\n=== user ===\n" + b.user_text + "\n";
}

struct GoldenInput {
    std::string name;
    std::string query;
    std::string function_block;
    std::string eval_line;
    std::string traceback;
};

inline const std::vector<GoldenInput>& golden_inputs() {
    static const std::vector<GoldenInput> inputs = {
        {"static_pumps", "How many pumps are in the network?",
         "def count_pumps(en):\n    return en.getLinkPumpCount()", "result = count_pumps(en)",
         "Traceback (most recent call last):\n  File \"<evaluation>\", line 1, in <module>\n"
         "NameError: name 'count_pump' is not defined\n"},
        {"hydraulics_max_pressure", "What is the maximum pressure across all nodes during the simulation?",
         "def max_pressure(en):\n    hyd = en.getComputedHydraulicTimeSeries()\n    return float(hyd.Pressure.max())",
         "result = max_pressure(en)",
         "Traceback (most recent call last):\n  File \"<function>\", line 2, in max_pressure\n"
         "AttributeError: 'epanet' object has no attribute 'getComputedTimeSeries'\n"},
        {"quality_water_age", "What is the water age at node n1 at the end of the simulation?",
         "def final_age_at_node(en):\n    qual = en.getComputedQualityTimeSeries()\n"
         "    column = en.getNodeIndex(\"n1\") - 1\n    return float(qual.NodeQuality[-1, column])",
         "result = final_age_at_node(en)",
         "Traceback (most recent call last):\n  File \"<function>\", line 3, in final_age_at_node\n"
         "IndexError: index 785 is out of bounds for axis 1 with size 785\n"},
        {"scenario_closed_pipe", "If pipe 10 is closed, what is the maximum pressure across all nodes?",
         "def max_pressure_with_pipe_closed(en):\n    en.setLinkInitialStatus(en.getLinkIndex(\"10\"), 0)\n"
         "    hyd = en.getComputedHydraulicTimeSeries()\n    return float(hyd.Pressure.max())",
         "result = max_pressure_with_pipe_closed(en)",
         "Traceback (most recent call last):\n  File \"<function>\", line 2, in max_pressure_with_pipe_closed\n"
         "TypeError: setLinkInitialStatus() missing 1 required positional argument: 'value'\n"},
        {"static_aggregate", "How many pumps and valves does the network have?",
         "def count_pumps_and_valves(en):\n    return en.getLinkPumpCount() + en.getLinkValveCount()",
         "result = count_pumps_and_valves(en)",
         "Traceback (most recent call last):\n  File \"<function>\", line 2, in count_pumps_and_valves\n"
         "TypeError: unsupported operand type(s) for +: 'int' and 'NoneType'\n"},
    };
    return inputs;
}

/// "prompts/<input>.<kind>.txt" -> rendered prompt, for all four kinds.
inline std::map<std::string, std::string> render_golden_prompts() {
    std::map<std::string, std::string> out;
    for (const auto& in : golden_inputs()) {
        auto docs = retrieve(in.query);
        auto key = [&](const char* kind) { return "prompts/" + in.name + "." + kind + ".txt"; };
        out[key("generate_basic")] = render(build_generation_prompt(templates(), in.query, docs, PromptLevel::Basic));
        out[key("generate_complex")] =
            render(build_generation_prompt(templates(), in.query, docs, PromptLevel::Complex));
        out[key("evaluate")] = render(build_eval_prompt(templates(), in.query, in.function_block));
        out[key("repair")] = render(build_repair_prompt(templates(), in.query, in.function_block, in.eval_line,
                                                        in.traceback, PromptLevel::Complex));
    }
    return out;
}

} // namespace netquery::testing
