#include "agents/agents.hpp"

#include "core/error.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <sstream>

namespace plotpath::agents {

using gateway::ChatMessage;
using gateway::ChatRequest;
using gateway::Speaker;

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool is_fence(std::string_view line)
{
    return trim(line).substr(0, 3) == "```";
}

bool looks_like_code(std::string_view text)
{
    static const std::regex kImport(R"(^\s*(import\s+[A-Za-z_]|from\s+[A-Za-z_][\w.]*\s+import\s))");
    static const std::regex kAssign(
        R"(^\s*[A-Za-z_][\w.]*(\s*\[[^\]\n]*\])?(\s*,\s*[A-Za-z_][\w.]*)*\s*(\+|-|\*|/)?=(?!=))");
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            continue;
        }
        return std::regex_search(line, kImport) || std::regex_search(line, kAssign);
    }
    return false;
}

std::string outcome_text(const ExecutionOutcome& outcome, Mode mode)
{
    const std::string error = outcome.error_text.value_or("");
    if (mode == Mode::binary_feedback) {
        if (outcome.ok) {
            return "Execution flag: 1 (the script ran and produced a figure).";
        }
        return "Execution flag: 0 (the script failed).\nError output:\n" + error;
    }
    if (outcome.ok) {
        return "The script ran successfully and rendered " + std::to_string(outcome.figures.size()) +
               (outcome.figures.size() == 1 ? " figure" : " figures") + ". The first figure is attached.";
    }
    return std::string(outcome.timed_out ? "The script timed out." : "The script failed.") +
           "\nError output:\n" + error;
}

} // namespace

std::optional<std::string> extract_code(std::string_view text)
{
    std::vector<std::string> blocks;
    std::istringstream in{std::string(text)};
    std::string line;
    bool inside = false;
    std::string current;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (is_fence(line)) {
            if (inside) {
                blocks.push_back(current);
                current.clear();
            }
            inside = !inside;
            continue;
        }
        if (inside) {
            current += line;
            current += '\n';
        }
    }
    if (inside) {
        blocks.push_back(current); // unterminated fence runs to the end
    }
    std::string joined;
    for (auto& block : blocks) {
        while (!block.empty() && (block.back() == '\n' || block.back() == ' ' || block.back() == '\t')) {
            block.pop_back();
        }
        if (trim(block).empty()) {
            continue;
        }
        if (!joined.empty()) {
            joined += "\n\n";
        }
        joined += block;
    }
    if (!joined.empty()) {
        return joined;
    }
    if (blocks.empty() && looks_like_code(text)) {
        return std::string(trim(text));
    }
    return std::nullopt;
}

std::optional<std::vector<std::string>> split_plans(std::string_view text, int k)
{
    static const std::regex kDelim(R"((^|\n)[ \t#*>_-]*plan[ \t]*(\d+)[ \t*_]*[:.)][ \t*_]*)", std::regex::icase);
    const std::string s(text);
    std::vector<std::pair<std::size_t, std::size_t>> marks; // (match begin, body begin)
    for (auto it = std::sregex_iterator(s.begin(), s.end(), kDelim); it != std::sregex_iterator(); ++it) {
        marks.emplace_back(static_cast<std::size_t>(it->position(0)),
                           static_cast<std::size_t>(it->position(0) + it->length(0)));
    }
    std::vector<std::string> plans;
    if (marks.empty()) {
        const auto whole = trim(text);
        if (k == 1 && !whole.empty()) {
            plans.emplace_back(whole);
            return plans;
        }
        return std::nullopt;
    }
    for (std::size_t i = 0; i < marks.size(); ++i) {
        const auto end = i + 1 < marks.size() ? marks[i + 1].first : s.size();
        const auto body = trim(std::string_view(s).substr(marks[i].second, end - marks[i].second));
        if (!body.empty()) {
            plans.emplace_back(body);
        }
    }
    if (static_cast<int>(plans.size()) < k) {
        return std::nullopt;
    }
    plans.resize(static_cast<std::size_t>(k));
    return plans;
}

std::optional<std::string> chart_intent(std::string_view plan)
{
    static const std::regex kChart(R"(chart[ \t]*type[ \t*]*:[ \t*]*([^\n]+))", std::regex::icase);
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(plan.begin(), plan.end(), m, kChart)) {
        return std::nullopt;
    }
    auto tag = lower(trim(std::string_view(&*m[1].first, static_cast<std::size_t>(m[1].length()))));
    const auto cut = tag.find_first_of("(,;.");
    if (cut != std::string::npos) {
        tag.resize(cut);
    }
    tag = std::string(trim(tag));
    while (!tag.empty() && (tag.back() == '*' || tag.back() == '_')) {
        tag.pop_back();
    }
    if (tag.size() > 40) {
        tag.resize(40);
    }
    if (tag.empty()) {
        return std::nullopt;
    }
    return tag;
}

std::optional<FeedbackSections> parse_feedback(std::string_view text)
{
    static const std::regex kHeader(
        R"((^|\n)[ \t#*>\d.)-]*(semantic[ \t]+alignment|data[ \t]+correctness|visual[ \t]+quality|verdict)[ \t*_]*:[ \t*_]*)",
        std::regex::icase);
    const std::string s(text);
    struct Mark {
        std::string key;
        std::size_t begin;
        std::size_t body;
    };
    std::vector<Mark> marks;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), kHeader); it != std::sregex_iterator(); ++it) {
        auto key = lower((*it)[2].str());
        key.erase(std::remove_if(key.begin(), key.end(), [](char c) { return c == ' ' || c == '\t'; }), key.end());
        marks.push_back(Mark{key, static_cast<std::size_t>(it->position(0)),
                             static_cast<std::size_t>(it->position(0) + it->length(0))});
    }
    FeedbackSections out;
    bool any = false;
    for (std::size_t i = 0; i < marks.size(); ++i) {
        const auto end = i + 1 < marks.size() ? marks[i + 1].begin : s.size();
        const auto body = std::string(trim(std::string_view(s).substr(marks[i].body, end - marks[i].body)));
        if (marks[i].key == "semanticalignment" && out.semantic_alignment.empty()) {
            out.semantic_alignment = body;
            any = any || !body.empty();
        } else if (marks[i].key == "datacorrectness" && out.data_correctness.empty()) {
            out.data_correctness = body;
            any = any || !body.empty();
        } else if (marks[i].key == "visualquality" && out.visual_quality.empty()) {
            out.visual_quality = body;
            any = any || !body.empty();
        } else if (marks[i].key == "verdict" && !out.verdict) {
            const auto v = lower(body);
            for (auto candidate : {Verdict::usable, Verdict::fixable, Verdict::discard}) {
                if (v.find(to_string(candidate)) != std::string::npos) {
                    out.verdict = candidate;
                    break;
                }
            }
        }
    }
    if (!any) {
        return std::nullopt;
    }
    return out;
}

std::string render_candidate_bundle(std::span<const SynthesisInput> inputs, bool with_feedback)
{
    std::vector<const SynthesisInput*> ordered;
    for (const auto& in : inputs) {
        ordered.push_back(&in);
    }
    std::stable_sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
        return a->script.path_index < b->script.path_index;
    });
    std::string out;
    int n = 0;
    for (const auto* in : ordered) {
        ++n;
        out += "### Candidate " + std::to_string(n) + "\n```python\n" + in->script.source + "\n```\n";
        if (in->error_text) {
            out += "Execution: failed with error:\n" + *in->error_text + "\n";
        } else {
            out += "Execution: rendered a figure.\n";
        }
        if (with_feedback && in->feedback) {
            const auto& f = *in->feedback;
            out += "Review:\n";
            if (f.structured) {
                out += "SEMANTIC ALIGNMENT: " + f.semantic_alignment + "\n";
                out += "DATA CORRECTNESS: " + f.data_correctness + "\n";
                out += "VISUAL QUALITY: " + f.visual_quality + "\n";
                out += "VERDICT: " + std::string(to_string(f.verdict)) + "\n";
            } else {
                out += f.raw_text + "\n";
            }
        }
        out += "\n";
    }
    return out;
}

Agents::Agents(gateway::Gateway& gateway, const PromptSet& prompts, PipelineConfig config)
    : gateway_(gateway), prompts_(prompts), config_(std::move(config))
{
}

ChatRequest Agents::make_request(RoleTag role, const PromptTemplate& prompt, const Bindings& bindings,
                                 double temperature) const
{
    ChatRequest request;
    request.role = role;
    request.model_id = config_.models.for_role(role);
    request.temperature = temperature;
    request.messages.push_back(ChatMessage{Speaker::system, prompt.system_text, {}});
    request.messages.push_back(ChatMessage{Speaker::user, prompt.render(bindings), {}});
    return request;
}

std::string Agents::request_code(ChatRequest request, gateway::Transcript* log)
{
    const auto reply = gateway_.complete(request, log);
    if (auto code = extract_code(reply.text)) {
        return *code;
    }
    request.reprompt = true;
    request.messages.push_back(ChatMessage{
        Speaker::user,
        "Your previous reply contained no code:\n\n" + reply.text +
            "\n\nReply again with the complete script in a single ```python fenced block.",
        {}});
    const auto retry = gateway_.complete(request, log);
    if (auto code = extract_code(retry.text)) {
        return *code;
    }
    throw Error(ErrorCode::empty_code,
                "no code block in " + std::string(to_string(request.role)) + " reply after one reprompt");
}

std::vector<ReasoningPath> Agents::expand_paths(const TaskInput& input, int k, gateway::Transcript* log)
{
    if (k < 1) {
        throw Error(ErrorCode::invalid_argument, "k must be ≥ 1");
    }
    auto request = make_request(RoleTag::mpa, prompts_.get("mpa"),
                                {{"query", input.query}, {"dataset", input.dataset_description}, {"k", std::to_string(k)}},
                                config_.gen_temperature);
    auto reply = gateway_.complete(request, log);
    auto plans = split_plans(reply.text, k);
    if (!plans) {
        request.reprompt = true;
        request.messages.push_back(ChatMessage{
            Speaker::user,
            "Your previous reply did not contain " + std::to_string(k) + " plans:\n\n" + reply.text +
                "\n\nWrite exactly " + std::to_string(k) + " plans, each starting on its own line with \"PLAN <n>:\".",
            {}});
        reply = gateway_.complete(request, log);
        plans = split_plans(reply.text, k);
        if (!plans) {
            throw Error(ErrorCode::parse_failure,
                        "could not split the planning reply into " + std::to_string(k) + " plans");
        }
    }
    std::vector<ReasoningPath> paths;
    for (std::size_t i = 0; i < plans->size(); ++i) {
        auto& text = (*plans)[i];
        auto intent = chart_intent(text);
        paths.push_back(ReasoningPath{static_cast<int>(i + 1), std::move(text), std::move(intent)});
    }
    return paths;
}

CandidateScript Agents::generate_code(const std::string& dataset, const ReasoningPath& path, double temperature,
                                      gateway::Transcript* log)
{
    if (trim(path.plan_text).empty()) {
        throw Error(ErrorCode::invalid_argument, "reasoning path " + std::to_string(path.index) + " is empty");
    }
    auto request =
        make_request(RoleTag::code, prompts_.get("code"), {{"dataset", dataset}, {"plan", path.plan_text}}, temperature);
    request.path_index = path.index;
    return CandidateScript{path.index, request_code(std::move(request), log), Origin::multi_path};
}

FeedbackReport Agents::evaluate_candidate(const std::string& query, const CandidateScript& script,
                                          const ExecutionOutcome& outcome, Mode mode, gateway::Transcript* log)
{
    const bool binary = mode == Mode::binary_feedback;
    auto request = make_request(RoleTag::fb, prompts_.get(binary ? "fb_binary" : "fb"),
                                {{"query", query}, {"code", script.source}, {"outcome", outcome_text(outcome, mode)}},
                                config_.judge_temperature);
    request.path_index = script.path_index;
    if (!binary && outcome.ok && !outcome.figures.empty()) {
        request.messages.back().images.push_back(outcome.figures.front().png);
    }
    const auto reply = gateway_.complete(request, log);

    FeedbackReport report;
    report.path_index = script.path_index;
    report.raw_text = reply.text;
    const auto fallback_verdict = outcome.ok ? Verdict::fixable : Verdict::discard;
    if (auto sections = parse_feedback(reply.text)) {
        report.semantic_alignment = sections->semantic_alignment;
        report.data_correctness = sections->data_correctness;
        report.visual_quality = sections->visual_quality;
        report.verdict = sections->verdict.value_or(fallback_verdict);
        report.structured = !report.semantic_alignment.empty() && !report.data_correctness.empty() &&
                            !report.visual_quality.empty();
    } else {
        report.structured = false;
        report.verdict = fallback_verdict;
    }
    for (auto* field : {&report.semantic_alignment, &report.data_correctness, &report.visual_quality}) {
        if (field->empty()) {
            *field = reply.text;
        }
    }
    return report;
}

CandidateScript Agents::synthesize(const std::string& query, const std::string& dataset,
                                   std::span<const SynthesisInput> inputs, gateway::Transcript* log)
{
    if (inputs.empty()) {
        throw Error(ErrorCode::invalid_argument, "synthesis needs at least one candidate");
    }
    const bool with_feedback =
        std::any_of(inputs.begin(), inputs.end(), [](const SynthesisInput& in) { return in.feedback.has_value(); });
    Bindings bindings{{"query", query}, {"dataset", dataset}, {"k", std::to_string(inputs.size())}};
    const auto bundle = render_candidate_bundle(inputs, with_feedback);
    if (with_feedback) {
        bindings.emplace("feedback_bundle", bundle);
    } else {
        bindings.emplace("code", bundle);
    }
    auto request = make_request(RoleTag::syn, prompts_.get(with_feedback ? "syn" : "syn_nofb"), bindings,
                                config_.gen_temperature);
    return CandidateScript{0, request_code(std::move(request), log), Origin::synthesized};
}

CandidateScript Agents::zero_shot_generate(const std::string& query, const std::string& dataset,
                                           gateway::Transcript* log)
{
    auto request = make_request(RoleTag::baseline, prompts_.get("zero_shot"), {{"query", query}, {"dataset", dataset}},
                                config_.gen_temperature);
    return CandidateScript{1, request_code(std::move(request), log), Origin::zero_shot};
}

CandidateScript Agents::cot_generate(const std::string& query, const std::string& dataset, gateway::Transcript* log)
{
    auto request = make_request(RoleTag::baseline, prompts_.get("cot"), {{"query", query}, {"dataset", dataset}},
                                config_.gen_temperature);
    return CandidateScript{1, request_code(std::move(request), log), Origin::cot};
}

} // namespace plotpath::agents
