// SPDX-License-Identifier: Apache-2.0
#include "netquery/prompting.hpp"

#include <algorithm>

#include "netquery/error.hpp"
#include "netquery/text.hpp"

namespace netquery {
namespace {

constexpr std::string_view kAllTemplates[] = {
    PromptTemplates::kSystemBasic,   PromptTemplates::kComplexTips,
    PromptTemplates::kGenerateUser,  PromptTemplates::kEvaluateSystem,
    PromptTemplates::kEvaluateUser,  PromptTemplates::kRepairUser,
};

bool starts_with(std::string_view s, std::string_view prefix) {
    return s.substr(0, prefix.size()) == prefix;
}

bool is_indented(std::string_view line) {
    return !line.empty() && (line.front() == ' ' || line.front() == '\t');
}

bool is_def_line(std::string_view line) {
    return starts_with(line, "def ") || starts_with(line, "async def ");
}

std::size_t count_triple_quotes(std::string_view line) {
    std::size_t n = 0;
    for (std::string_view q : {std::string_view("\"\"\""), std::string_view("'''")}) {
        for (auto pos = line.find(q); pos != std::string_view::npos; pos = line.find(q, pos + 3))
            ++n;
    }
    return n;
}

std::string dedent(const std::vector<std::string_view>& lines) {
    std::size_t common = std::string_view::npos;
    for (auto line : lines) {
        if (text::is_blank(line))
            continue;
        std::size_t indent = 0;
        while (indent < line.size() && (line[indent] == ' ' || line[indent] == '\t'))
            ++indent;
        common = std::min(common, indent);
    }
    if (common == std::string_view::npos)
        common = 0;
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i)
            out += '\n';
        auto line = lines[i];
        out.append(text::is_blank(line) ? std::string_view{} : text::trim_right(line.substr(common)));
    }
    return out;
}

std::string strip_blank_edges(std::string_view s) {
    auto lines = text::split_lines(s);
    std::size_t b = 0;
    while (b < lines.size() && text::is_blank(lines[b]))
        ++b;
    std::size_t e = lines.size();
    while (e > b && text::is_blank(lines[e - 1]))
        --e;
    return dedent({lines.begin() + static_cast<std::ptrdiff_t>(b),
                   lines.begin() + static_cast<std::ptrdiff_t>(e)});
}

std::string format_docs(std::span<const RetrievedDoc> retrievals) {
    std::string out;
    for (std::size_t i = 0; i < retrievals.size(); ++i) {
        if (i)
            out += "\n\n";
        out += "[" + std::to_string(i + 1) + "] ";
        out += retrievals[i].doc.signature;
        out += '\n';
        out += truncate_description(retrievals[i].doc.description);
    }
    return out;
}

} // namespace

std::string_view to_string(PromptLevel level) {
    return level == PromptLevel::Basic ? "basic" : "complex";
}

std::string_view to_string(PromptKind kind) {
    switch (kind) {
    case PromptKind::Generate: return "generate";
    case PromptKind::Evaluate: return "evaluate";
    case PromptKind::Repair: return "repair";
    }
    return "generate";
}

PromptLevel parse_prompt_level(std::string_view s) {
    auto lowered = text::to_lower_ascii(s);
    if (lowered == "basic")
        return PromptLevel::Basic;
    if (lowered == "complex")
        return PromptLevel::Complex;
    throw Error(ErrorCode::InvalidArgument, "prompt level must be 'basic' or 'complex', got '" +
                                                std::string(s) + "'");
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
    std::map<std::string, std::string> texts;
    for (auto name : kAllTemplates) {
        auto path = dir / name;
        if (!std::filesystem::exists(path))
            throw Error(ErrorCode::MissingTemplate, path.string());
        texts.emplace(std::string(name), text::read_file(path));
    }
    return from_texts(std::move(texts));
}

PromptTemplates PromptTemplates::from_texts(std::map<std::string, std::string> texts) {
    PromptTemplates t;
    std::string hashed;
    for (auto name : kAllTemplates) {
        auto it = texts.find(std::string(name));
        if (it == texts.end())
            throw Error(ErrorCode::MissingTemplate, std::string(name));
        auto body = std::move(it->second);
        if (!body.empty() && body.back() == '\n')
            body.pop_back();
        if (!body.empty() && body.back() == '\r')
            body.pop_back();
        hashed += std::string(name) + '\0' + std::to_string(body.size()) + '\0' + body;
        t.texts_.emplace(std::string(name), std::move(body));
    }
    t.version_ = hashing::sha256_hex(hashed).substr(0, 16);

    auto require = [&](std::string_view file, std::string_view placeholder) {
        if (!text::contains_placeholder(t.text(file), placeholder))
            throw Error(ErrorCode::MissingTemplate, std::string(file) + " lacks {{" +
                                                        std::string(placeholder) + "}}");
    };
    require(kGenerateUser, "DOCS");
    require(kGenerateUser, "QUERY");
    require(kEvaluateUser, "CODE");
    require(kEvaluateUser, "QUERY");
    require(kRepairUser, "QUERY");
    require(kRepairUser, "CODE");
    require(kRepairUser, "TRACEBACK");
    return t;
}

const std::string& PromptTemplates::text(std::string_view name) const {
    auto it = texts_.find(name);
    if (it == texts_.end())
        throw Error(ErrorCode::MissingTemplate, std::string(name));
    return it->second;
}

std::string PromptTemplates::generation_system(PromptLevel level) const {
    if (level == PromptLevel::Basic)
        return text(kSystemBasic);
    return text(kSystemBasic) + "\n\n" + text(kComplexTips);
}

std::string truncate_description(std::string_view description) {
    if (text::utf8_length(description) <= kDescriptionLimit)
        return std::string(description);
    return std::string(text::utf8_prefix(description, kDescriptionLimit)) + std::string(kTruncationMarker);
}

std::string truncate_traceback(std::string_view traceback) {
    if (text::utf8_length(traceback) <= kTracebackLimit)
        return std::string(traceback);
    return std::string(kTruncationMarker) + "\n" + std::string(text::utf8_suffix(traceback, kTracebackLimit));
}

PromptBundle build_generation_prompt(const PromptTemplates& templates, std::string_view query,
                                     std::span<const RetrievedDoc> retrievals, PromptLevel level) {
    if (retrievals.empty())
        throw Error(ErrorCode::NoRetrievals, "generation prompt needs at least one retrieved method");
    PromptBundle b;
    b.kind = PromptKind::Generate;
    b.template_version = templates.version();
    b.system_text = templates.generation_system(level);
    b.user_text = text::substitute(templates.text(PromptTemplates::kGenerateUser),
                                   {{"DOCS", format_docs(retrievals)}, {"QUERY", std::string(query)}});
    return b;
}

PromptBundle build_eval_prompt(const PromptTemplates& templates, std::string_view query,
                               std::string_view function_block) {
    validate_function_block(function_block);
    PromptBundle b;
    b.kind = PromptKind::Evaluate;
    b.template_version = templates.version();
    b.system_text = templates.text(PromptTemplates::kEvaluateSystem);
    b.user_text = text::substitute(templates.text(PromptTemplates::kEvaluateUser),
                                   {{"CODE", std::string(function_block)}, {"QUERY", std::string(query)}});
    return b;
}

PromptBundle build_repair_prompt(const PromptTemplates& templates, std::string_view query,
                                 std::string_view function_block, std::string_view eval_line,
                                 std::string_view traceback, PromptLevel level) {
    if (text::is_blank(traceback))
        throw Error(ErrorCode::InvalidArgument, "repair prompt needs a traceback");
    PromptBundle b;
    b.kind = PromptKind::Repair;
    b.template_version = templates.version();
    b.system_text = templates.generation_system(level);
    b.user_text = text::substitute(templates.text(PromptTemplates::kRepairUser),
                                   {{"QUERY", std::string(query)},
                                    {"CODE", std::string(function_block)},
                                    {"EVAL_LINE", std::string(eval_line)},
                                    {"TRACEBACK", truncate_traceback(traceback)}});
    return b;
}

// Net bracket depth change over one line, skipping quoted text and comments.
int bracket_delta(std::string_view line) {
    int delta = 0;
    char quote = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quote) {
            if (c == '\\')
                ++i;
            else if (c == quote)
                quote = 0;
            continue;
        }
        if (c == '#')
            break;
        if (c == '\'' || c == '"')
            quote = c;
        else if (c == '(' || c == '[' || c == '{')
            ++delta;
        else if (c == ')' || c == ']' || c == '}')
            --delta;
    }
    return delta;
}

void validate_function_block(std::string_view block) {
    auto fail = [](const std::string& why) { throw Error(ErrorCode::MalformedFunctionBlock, why); };

    std::size_t defs = 0;
    bool seen_def = false;
    bool in_string = false;
    int depth = 0;
    for (auto line : text::split_lines(block)) {
        bool was_in_string = in_string;
        int depth_before = depth;
        if (count_triple_quotes(line) % 2 == 1)
            in_string = !in_string;
        else if (!was_in_string)
            depth = std::max(0, depth + bracket_delta(line));
        // Continuation lines of a bracketed expression may sit at column 0.
        if (was_in_string || depth_before > 0 || text::is_blank(line) || is_indented(line) || line.front() == '#')
            continue;
        if (is_def_line(line)) {
            if (++defs > 1)
                fail("more than one top-level function definition");
            seen_def = true;
            continue;
        }
        if (line.front() == '@' && !seen_def)
            continue;
        if (!seen_def)
            fail("block must begin with 'def', found: " + std::string(text::trim(line)).substr(0, 60));
        fail("top-level statement after the function definition: " +
             std::string(text::trim(line)).substr(0, 60));
    }
    if (defs == 0)
        fail("no function definition found");
}

std::string defined_function_name(std::string_view block) {
    for (auto line : text::split_lines(block)) {
        if (!is_def_line(line))
            continue;
        auto start = line.find("def ") + 4;
        auto paren = line.find('(', start);
        if (paren == std::string_view::npos)
            break;
        return std::string(text::trim(line.substr(start, paren - start)));
    }
    throw Error(ErrorCode::MalformedFunctionBlock, "no function definition found");
}

std::string extract_code_block(std::string_view output) {
    auto lines = text::split_lines(output);
    std::size_t open = lines.size();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (starts_with(text::trim(lines[i]), "```")) {
            open = i;
            break;
        }
    }
    std::string code;
    if (open == lines.size()) {
        code = strip_blank_edges(output);
    } else {
        std::size_t close = open + 1;
        while (close < lines.size() && !starts_with(text::trim(lines[close]), "```"))
            ++close;
        std::string body;
        for (std::size_t i = open + 1; i < close; ++i) {
            body.append(lines[i]);
            body.push_back('\n');
        }
        code = strip_blank_edges(body);
    }
    if (text::is_blank(code))
        throw Error(ErrorCode::EmptyGeneration, "model output contains no code");
    return code;
}

std::string extract_eval_line(std::string_view output) {
    std::string code;
    try {
        code = extract_code_block(output);
    } catch (const Error&) {
        throw Error(ErrorCode::MalformedEvalLine, "evaluator returned nothing");
    }
    for (auto line : text::split_lines(code)) {
        auto t = text::trim(line);
        if (t.empty() || t.front() == '#')
            continue;
        if (!starts_with(t, kResultVariable))
            break;
        auto rest = text::trim(t.substr(kResultVariable.size()));
        if (rest.size() >= 2 && rest[0] == '=' && rest[1] != '=')
            return std::string(t);
        break;
    }
    throw Error(ErrorCode::MalformedEvalLine,
                "expected a single 'result = ...' line, got: " + code.substr(0, 80));
}

} // namespace netquery
