#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace plotpath {

using Bytes = std::vector<std::uint8_t>;

enum class Origin { multi_path, zero_shot, cot, synthesized };
enum class Mode { full, no_feedback, binary_feedback, zero_shot, cot };
enum class Verdict { usable, fixable, discard };
enum class RoleTag { mpa, code, fb, syn, judge, baseline };
enum class RunStatus { completed, failed };

std::string_view to_string(Origin v) noexcept;
std::string_view to_string(Mode v) noexcept;
std::string_view to_string(Verdict v) noexcept;
std::string_view to_string(RoleTag v) noexcept;
std::string_view to_string(RunStatus v) noexcept;

// Parsers throw Error{invalid_argument} on unknown names.
Origin parse_origin(std::string_view s);
Mode parse_mode(std::string_view s);
Verdict parse_verdict(std::string_view s);
RoleTag parse_role_tag(std::string_view s);
RunStatus parse_run_status(std::string_view s);

/// True for the modes that fan out over K reasoning paths.
constexpr bool is_multi_path(Mode m) noexcept
{
    return m == Mode::full || m == Mode::no_feedback || m == Mode::binary_feedback;
}

struct DataFile {
    std::string name;
    std::filesystem::path path;

    bool operator==(const DataFile&) const = default;
};

struct TaskInput {
    std::string task_id;
    std::string query;
    std::string dataset_description;
    std::vector<DataFile> data_files;

    bool operator==(const TaskInput&) const = default;
};

/// Problems with the input, empty when it can be run. Checks that every data
/// file exists, so call it at run start.
std::vector<std::string> validate_task(const TaskInput& input);

struct ReasoningPath {
    int index = 0;
    std::string plan_text;
    std::optional<std::string> chart_intent;

    bool operator==(const ReasoningPath&) const = default;
};

struct CandidateScript {
    int path_index = 0;
    std::string source;
    Origin origin = Origin::multi_path;

    bool operator==(const CandidateScript&) const = default;
};

struct Figure {
    std::string name;
    Bytes png;

    bool operator==(const Figure&) const = default;
};

/// The routed execution tuple: either a rendered figure list or an error
/// message, never both. Build through the factories to keep that true.
struct ExecutionOutcome {
    bool ok = false;
    std::vector<Figure> figures;
    std::optional<std::string> error_text;
    std::int64_t wall_time_ms = 0;
    bool timed_out = false;

    static ExecutionOutcome rendered(std::vector<Figure> figures, std::int64_t wall_ms);
    static ExecutionOutcome failed(std::string error_text, std::int64_t wall_ms, bool timed_out = false);

    /// ok XOR error, ok iff figures, timed_out implies !ok.
    [[nodiscard]] bool well_formed() const noexcept;
};

struct FeedbackReport {
    int path_index = 0;
    std::string semantic_alignment;
    std::string data_correctness;
    std::string visual_quality;
    Verdict verdict = Verdict::fixable;
    std::string raw_text;
    // false when the reply had no recognizable sections and the fields hold
    // copies of the raw text
    bool structured = true;

    bool operator==(const FeedbackReport&) const = default;
};

struct ModelIds {
    std::string mpa = "gpt-4o-mini";
    std::string code = "gpt-4o-mini";
    std::string fb = "gpt-4o";
    std::string syn = "gpt-4o-mini";
    std::string judge = "gpt-4o";
    std::string baseline = "gpt-4o-mini";

    [[nodiscard]] const std::string& for_role(RoleTag role) const noexcept;
    bool operator==(const ModelIds&) const = default;
};

struct PipelineConfig {
    int k = 3;
    Mode mode = Mode::full;
    double gen_temperature = 0.2;
    double judge_temperature = 0.0;
    double exec_timeout_s = 60.0;
    int max_error_chars = 4000;
    ModelIds models;
    // concurrent branches; 0 means k
    int parallelism = 0;
    double run_budget_s = 600.0;

    bool operator==(const PipelineConfig&) const = default;
};

/// Each entry names one violated field. Empty means the config is usable.
std::vector<std::string> validate_config(const PipelineConfig& config);

/// Per-run call counts in the four stage categories. Only successful stage
/// completions are counted; reprompts live in the transcript.
struct StageLedger {
    int query_expansion = 0;
    int code_generation = 0;
    int visual_feedback = 0;
    int editor = 0;

    StageLedger& operator+=(const StageLedger& other) noexcept;
    bool operator==(const StageLedger&) const = default;
};

int ledger_total(const StageLedger& ledger) noexcept;

struct TranscriptEntry {
    std::string id;
    RoleTag role = RoleTag::mpa;
    std::optional<int> path_index;
    int attachments = 0;
    bool reprompt = false;
    int attempts = 1;
    bool ok = true;

    bool operator==(const TranscriptEntry&) const = default;
};

struct StageTimings {
    std::int64_t expand_ms = 0;
    std::int64_t branches_ms = 0;
    std::int64_t synthesis_ms = 0;
    std::int64_t final_exec_ms = 0;
};

using Clock = std::chrono::system_clock;

struct RunRecord {
    TaskInput input;
    PipelineConfig config;
    std::vector<ReasoningPath> paths;
    std::vector<CandidateScript> candidates;
    std::vector<ExecutionOutcome> outcomes;
    std::vector<FeedbackReport> feedback;
    std::optional<CandidateScript> final;
    std::optional<ExecutionOutcome> final_outcome;
    StageLedger ledger;
    std::vector<TranscriptEntry> transcripts;
    RunStatus status = RunStatus::completed;
    std::string failure;
    StageTimings timings;
    Clock::time_point started;
    Clock::time_point finished;

    [[nodiscard]] bool final_ok() const noexcept { return final_outcome && final_outcome->ok; }
};

} // namespace plotpath
