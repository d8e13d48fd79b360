#pragma once

#include "agents/prompts.hpp"
#include "core/types.hpp"
#include "gateway/gateway.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace plotpath::agents {

/// Concatenation of every fenced code block in `text` (language tag ignored),
/// blocks separated by one blank line. Without fences, the whole text is
/// returned when its first non-blank line is an import or an assignment.
std::optional<std::string> extract_code(std::string_view text);

/// Splits on "PLAN <n>:" delimiters. Returns the first `k` plan bodies, or
/// nullopt when fewer than `k` non-empty plans are present. With k == 1 and
/// no delimiter, the whole text is the plan.
std::optional<std::vector<std::string>> split_plans(std::string_view text, int k);

/// Short lowercase tag from a "Chart type: ..." line, if any.
std::optional<std::string> chart_intent(std::string_view plan);

/// Sections of a feedback reply. nullopt when none of the three criteria
/// sections can be found.
struct FeedbackSections {
    std::string semantic_alignment;
    std::string data_correctness;
    std::string visual_quality;
    std::optional<Verdict> verdict;
};
std::optional<FeedbackSections> parse_feedback(std::string_view text);

/// One candidate as handed to the synthesis agent.
struct SynthesisInput {
    CandidateScript script;
    std::optional<FeedbackReport> feedback;
    // error text of a failed execution, quoted next to the script
    std::optional<std::string> error_text;
};

/// The agent roles over a shared gateway. Stateless apart from the config;
/// every method may be called from several threads.
class Agents {
public:
    Agents(gateway::Gateway& gateway, const PromptSet& prompts, PipelineConfig config);

    /// One call for all K plans, plus one reprompt if the reply holds fewer
    /// than K. Throws Error{parse_failure} when the reprompt is short too.
    std::vector<ReasoningPath> expand_paths(const TaskInput& input, int k, gateway::Transcript* log = nullptr);

    /// Throws Error{empty_code} when no code survives one reprompt.
    CandidateScript generate_code(const std::string& dataset, const ReasoningPath& path, double temperature,
                                  gateway::Transcript* log = nullptr);

    /// Full mode attaches the first figure of a successful outcome; a failed
    /// outcome sends its error text instead. Binary mode never attaches
    /// images. Unparseable replies are kept with section-less copies.
    FeedbackReport evaluate_candidate(const std::string& query, const CandidateScript& script,
                                      const ExecutionOutcome& outcome, Mode mode,
                                      gateway::Transcript* log = nullptr);

    /// Feedback sections are rendered only for inputs that carry feedback;
    /// with none at all the no-feedback prompt is used.
    CandidateScript synthesize(const std::string& query, const std::string& dataset,
                               std::span<const SynthesisInput> inputs, gateway::Transcript* log = nullptr);

    CandidateScript zero_shot_generate(const std::string& query, const std::string& dataset,
                                       gateway::Transcript* log = nullptr);
    CandidateScript cot_generate(const std::string& query, const std::string& dataset,
                                 gateway::Transcript* log = nullptr);

private:
    gateway::ChatRequest make_request(RoleTag role, const PromptTemplate& prompt, const Bindings& bindings,
                                      double temperature) const;
    std::string request_code(gateway::ChatRequest request, gateway::Transcript* log);

    gateway::Gateway& gateway_;
    const PromptSet& prompts_;
    PipelineConfig config_;
};

/// Renders candidates (with feedback when present) in path-index order.
std::string render_candidate_bundle(std::span<const SynthesisInput> inputs, bool with_feedback);

} // namespace plotpath::agents
