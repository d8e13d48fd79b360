#pragma once

#include "agents/agents.hpp"
#include "core/types.hpp"
#include "executor/executor.hpp"
#include "gateway/gateway.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

namespace plotpath::pipeline {

struct BranchResult {
    CandidateScript candidate;
    ExecutionOutcome outcome;
    std::optional<FeedbackReport> feedback;
    // successful stage completions, counted in the ledger
    bool code_generated = false;
    bool feedback_received = false;
    std::vector<TranscriptEntry> transcript;
};

/// Runs `count` independent tasks with at most `parallelism` at a time.
/// Task i is invoked exactly once; exceptions are the task's business.
void parallel_for(std::size_t count, std::size_t parallelism, const std::function<void(std::size_t)>& task);

/// One pipeline run end to end: plan, fan out K branches (generate, execute,
/// review), synthesize, and execute the synthesized program once.
class Pipeline {
public:
    Pipeline(gateway::Gateway& gateway, executor::RunnerTransport& transport, const agents::PromptSet& prompts,
             PipelineConfig config, std::filesystem::path scratch_root = executor::default_scratch_root());

    /// Never throws for model or script failures: a hard failure of the
    /// planning or synthesis stage yields a record with status failed and the
    /// reason in `failure`. Throws Error{config} for an invalid config and
    /// Error{invalid_argument} for an invalid task.
    RunRecord run(const TaskInput& input);

    /// Branches ordered by path index regardless of completion order.
    std::vector<BranchResult> run_branches(const TaskInput& input, const std::vector<ReasoningPath>& paths);

    [[nodiscard]] const PipelineConfig& config() const noexcept { return config_; }

private:
    BranchResult run_branch(const TaskInput& input, const ReasoningPath& path);
    void run_baseline(const TaskInput& input, RunRecord& record);
    void check_budget() const;

    gateway::Gateway& gateway_;
    PipelineConfig config_;
    agents::Agents agents_;
    executor::Sandbox sandbox_;
    std::chrono::steady_clock::time_point deadline_{};
};

} // namespace plotpath::pipeline
