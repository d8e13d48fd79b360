#include "pipeline/pipeline.hpp"

#include "core/error.hpp"

#include <atomic>
#include <exception>
#include <thread>

namespace plotpath::pipeline {

using std::chrono::steady_clock;

namespace {

std::int64_t ms_since(steady_clock::time_point t0)
{
    return std::chrono::duration_cast<std::chrono::milliseconds>(steady_clock::now() - t0).count();
}

// Errors that end a whole run rather than a single branch.
bool fatal(const Error& e)
{
    switch (e.code()) {
    case ErrorCode::transport_unavailable:
    case ErrorCode::budget_exceeded:
    case ErrorCode::storage_unavailable:
    case ErrorCode::invalid_argument:
    case ErrorCode::config:
        return true;
    default:
        return false;
    }
}

std::string describe(const Error& e)
{
    return std::string(to_string(e.code())) + ": " + e.what();
}

FeedbackReport placeholder_feedback(int path_index, const std::string& why, const ExecutionOutcome& outcome)
{
    FeedbackReport f;
    f.path_index = path_index;
    f.raw_text = why;
    f.semantic_alignment = why;
    f.data_correctness = why;
    f.visual_quality = why;
    f.verdict = outcome.ok ? Verdict::fixable : Verdict::discard;
    f.structured = false;
    return f;
}

void append(std::vector<TranscriptEntry>& to, const std::vector<TranscriptEntry>& from)
{
    to.insert(to.end(), from.begin(), from.end());
}

} // namespace

void parallel_for(std::size_t count, std::size_t parallelism, const std::function<void(std::size_t)>& task)
{
    if (parallelism <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            task(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const auto n = std::min(parallelism, count);
    workers.reserve(n);
    for (std::size_t w = 0; w < n; ++w) {
        workers.emplace_back([&] {
            for (auto i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                task(i);
            }
        });
    }
    for (auto& worker : workers) {
        worker.join();
    }
}

Pipeline::Pipeline(gateway::Gateway& gateway, executor::RunnerTransport& transport, const agents::PromptSet& prompts,
                   PipelineConfig config, std::filesystem::path scratch_root)
    : gateway_(gateway),
      config_(std::move(config)),
      agents_(gateway, prompts, config_),
      sandbox_(std::move(scratch_root), transport,
               std::chrono::milliseconds(static_cast<std::int64_t>(config_.exec_timeout_s * 1000.0)),
               static_cast<std::size_t>(std::max(config_.max_error_chars, 1)))
{
}

void Pipeline::check_budget() const
{
    if (steady_clock::now() > deadline_) {
        throw Error(ErrorCode::budget_exceeded, "run exceeded its wall-clock budget of " +
                                                    std::to_string(static_cast<long>(config_.run_budget_s)) + "s");
    }
}

BranchResult Pipeline::run_branch(const TaskInput& input, const ReasoningPath& path)
{
    gateway::Transcript log;
    BranchResult branch;
    check_budget();
    try {
        branch.candidate = agents_.generate_code(input.dataset_description, path, config_.gen_temperature, &log);
        branch.code_generated = true;
    } catch (const Error& e) {
        if (fatal(e)) {
            throw;
        }
        branch.candidate = CandidateScript{path.index, "# code generation failed: " + std::string(e.what()),
                                           Origin::multi_path};
        branch.outcome = ExecutionOutcome::failed("code generation failed: " + describe(e), 0);
    }
    if (branch.code_generated) {
        check_budget();
        branch.outcome = sandbox_.run(branch.candidate, input.data_files);
    }
    if (config_.mode != Mode::no_feedback) {
        if (!branch.code_generated) {
            branch.feedback = placeholder_feedback(path.index, "no candidate script was generated", branch.outcome);
        } else {
            try {
                branch.feedback =
                    agents_.evaluate_candidate(input.query, branch.candidate, branch.outcome, config_.mode, &log);
                branch.feedback_received = true;
            } catch (const Error& e) {
                if (fatal(e)) {
                    throw;
                }
                branch.feedback =
                    placeholder_feedback(path.index, "feedback unavailable (" + describe(e) + ")", branch.outcome);
            }
        }
    }
    branch.transcript = log.entries();
    return branch;
}

std::vector<BranchResult> Pipeline::run_branches(const TaskInput& input, const std::vector<ReasoningPath>& paths)
{
    std::vector<std::optional<BranchResult>> slots(paths.size());
    std::vector<std::exception_ptr> errors(paths.size());
    const auto cap = config_.parallelism > 0 ? config_.parallelism : config_.k;
    parallel_for(paths.size(), static_cast<std::size_t>(cap), [&](std::size_t i) {
        try {
            slots[i] = run_branch(input, paths[i]);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    });
    for (const auto& error : errors) {
        if (error) {
            std::rethrow_exception(error);
        }
    }
    std::vector<BranchResult> out;
    out.reserve(slots.size());
    for (auto& slot : slots) {
        out.push_back(std::move(*slot));
    }
    return out;
}

void Pipeline::run_baseline(const TaskInput& input, RunRecord& record)
{
    gateway::Transcript log;
    const auto t0 = steady_clock::now();
    CandidateScript script;
    try {
        script = config_.mode == Mode::cot ? agents_.cot_generate(input.query, input.dataset_description, &log)
                                           : agents_.zero_shot_generate(input.query, input.dataset_description, &log);
    } catch (const Error& e) {
        record.transcripts = log.entries();
        if (fatal(e)) {
            throw;
        }
        record.status = RunStatus::failed;
        record.failure = describe(e);
        record.final_outcome = ExecutionOutcome::failed("code generation failed: " + describe(e), 0);
        return;
    }
    record.ledger.code_generation = 1;
    record.transcripts = log.entries();
    record.timings.branches_ms = ms_since(t0);
    check_budget();
    const auto t1 = steady_clock::now();
    auto outcome = sandbox_.run(script, input.data_files);
    record.timings.final_exec_ms = ms_since(t1);
    record.candidates.push_back(script);
    record.outcomes.push_back(outcome);
    record.final = std::move(script);
    record.final_outcome = std::move(outcome);
}

RunRecord Pipeline::run(const TaskInput& input)
{
    if (const auto problems = validate_config(config_); !problems.empty()) {
        throw Error(ErrorCode::config, problems.front());
    }
    if (const auto problems = validate_task(input); !problems.empty()) {
        throw Error(ErrorCode::invalid_argument, problems.front());
    }

    RunRecord record;
    record.input = input;
    record.config = config_;
    record.started = Clock::now();
    deadline_ = steady_clock::now() + std::chrono::milliseconds(static_cast<std::int64_t>(config_.run_budget_s * 1000));

    try {
        if (!is_multi_path(config_.mode)) {
            run_baseline(input, record);
        } else {
            gateway::Transcript plan_log;
            auto t0 = steady_clock::now();
            try {
                record.paths = agents_.expand_paths(input, config_.k, &plan_log);
            } catch (...) {
                record.transcripts = plan_log.entries();
                throw;
            }
            record.ledger.query_expansion = 1;
            record.transcripts = plan_log.entries();
            record.timings.expand_ms = ms_since(t0);

            t0 = steady_clock::now();
            auto branches = run_branches(input, record.paths);
            record.timings.branches_ms = ms_since(t0);

            std::vector<agents::SynthesisInput> inputs;
            for (auto& branch : branches) {
                record.candidates.push_back(branch.candidate);
                record.outcomes.push_back(branch.outcome);
                if (branch.code_generated) {
                    ++record.ledger.code_generation;
                }
                if (branch.feedback_received) {
                    ++record.ledger.visual_feedback;
                }
                if (branch.feedback) {
                    record.feedback.push_back(*branch.feedback);
                }
                append(record.transcripts, branch.transcript);
                inputs.push_back(agents::SynthesisInput{
                    branch.candidate, config_.mode == Mode::no_feedback ? std::nullopt : branch.feedback,
                    branch.outcome.ok ? std::nullopt : branch.outcome.error_text});
            }

            check_budget();
            t0 = steady_clock::now();
            gateway::Transcript syn_log;
            try {
                record.final = agents_.synthesize(input.query, input.dataset_description, inputs, &syn_log);
            } catch (...) {
                append(record.transcripts, syn_log.entries());
                throw;
            }
            append(record.transcripts, syn_log.entries());
            record.ledger.editor = 1;
            record.timings.synthesis_ms = ms_since(t0);

            check_budget();
            t0 = steady_clock::now();
            record.final_outcome = sandbox_.run(*record.final, input.data_files);
            record.timings.final_exec_ms = ms_since(t0);
        }
    } catch (const Error& e) {
        record.status = RunStatus::failed;
        record.failure = describe(e);
    }
    record.finished = Clock::now();
    return record;
}

} // namespace plotpath::pipeline
