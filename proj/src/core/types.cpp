#include "core/types.hpp"

#include "core/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

namespace plotpath {

const char* to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::config: return "config";
    case ErrorCode::provider: return "provider-error";
    case ErrorCode::cassette_miss: return "cassette-miss";
    case ErrorCode::no_rule: return "no-rule";
    case ErrorCode::parse_failure: return "parse-failure";
    case ErrorCode::empty_code: return "empty-code";
    case ErrorCode::transport_unavailable: return "transport-unavailable";
    case ErrorCode::storage_unavailable: return "storage-unavailable";
    case ErrorCode::corrupt_record: return "corrupt-record";
    case ErrorCode::suite: return "suite";
    case ErrorCode::scoring_failure: return "scoring-failure";
    case ErrorCode::budget_exceeded: return "budget-exceeded";
    }
    return "unknown";
}

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<std::string_view, E>, N>& names,
             std::string_view what)
{
    for (const auto& [name, value] : names) {
        if (name == s) {
            return value;
        }
    }
    throw Error(ErrorCode::invalid_argument, "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

template <typename E, std::size_t N>
std::string_view name_of(E value, const std::array<std::pair<std::string_view, E>, N>& names) noexcept
{
    for (const auto& [name, v] : names) {
        if (v == value) {
            return name;
        }
    }
    return "?";
}

constexpr std::array<std::pair<std::string_view, Origin>, 4> kOrigins{{
    {"multi_path", Origin::multi_path},
    {"zero_shot", Origin::zero_shot},
    {"cot", Origin::cot},
    {"synthesized", Origin::synthesized},
}};

constexpr std::array<std::pair<std::string_view, Mode>, 5> kModes{{
    {"full", Mode::full},
    {"no_feedback", Mode::no_feedback},
    {"binary_feedback", Mode::binary_feedback},
    {"zero_shot", Mode::zero_shot},
    {"cot", Mode::cot},
}};

constexpr std::array<std::pair<std::string_view, Verdict>, 3> kVerdicts{{
    {"usable", Verdict::usable},
    {"fixable", Verdict::fixable},
    {"discard", Verdict::discard},
}};

constexpr std::array<std::pair<std::string_view, RoleTag>, 6> kRoles{{
    {"mpa", RoleTag::mpa},
    {"code", RoleTag::code},
    {"fb", RoleTag::fb},
    {"syn", RoleTag::syn},
    {"judge", RoleTag::judge},
    {"baseline", RoleTag::baseline},
}};

constexpr std::array<std::pair<std::string_view, RunStatus>, 2> kStatuses{{
    {"completed", RunStatus::completed},
    {"failed", RunStatus::failed},
}};

bool blank(std::string_view s)
{
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

} // namespace

std::string_view to_string(Origin v) noexcept { return name_of(v, kOrigins); }
std::string_view to_string(Mode v) noexcept { return name_of(v, kModes); }
std::string_view to_string(Verdict v) noexcept { return name_of(v, kVerdicts); }
std::string_view to_string(RoleTag v) noexcept { return name_of(v, kRoles); }
std::string_view to_string(RunStatus v) noexcept { return name_of(v, kStatuses); }

Origin parse_origin(std::string_view s) { return parse_enum(s, kOrigins, "origin"); }
Mode parse_mode(std::string_view s) { return parse_enum(s, kModes, "mode"); }
Verdict parse_verdict(std::string_view s) { return parse_enum(s, kVerdicts, "verdict"); }
RoleTag parse_role_tag(std::string_view s) { return parse_enum(s, kRoles, "role tag"); }
RunStatus parse_run_status(std::string_view s) { return parse_enum(s, kStatuses, "run status"); }

std::vector<std::string> validate_task(const TaskInput& input)
{
    std::vector<std::string> problems;
    if (blank(input.query)) {
        problems.emplace_back("query must be non-empty");
    }
    std::set<std::string> names;
    for (const auto& file : input.data_files) {
        if (!names.insert(file.name).second) {
            problems.push_back("duplicate data file name '" + file.name + "'");
        }
        std::error_code ec;
        if (!std::filesystem::is_regular_file(file.path, ec)) {
            problems.push_back("data file '" + file.name + "' not found at " + file.path.string());
        }
    }
    return problems;
}

ExecutionOutcome ExecutionOutcome::rendered(std::vector<Figure> figures, std::int64_t wall_ms)
{
    if (figures.empty()) {
        throw Error(ErrorCode::invalid_argument, "a rendered outcome needs at least one figure");
    }
    ExecutionOutcome out;
    out.ok = true;
    out.figures = std::move(figures);
    out.wall_time_ms = wall_ms;
    return out;
}

ExecutionOutcome ExecutionOutcome::failed(std::string error_text, std::int64_t wall_ms, bool timed_out)
{
    if (error_text.empty()) {
        error_text = "unknown execution failure";
    }
    ExecutionOutcome out;
    out.ok = false;
    out.error_text = std::move(error_text);
    out.wall_time_ms = wall_ms;
    out.timed_out = timed_out;
    return out;
}

bool ExecutionOutcome::well_formed() const noexcept
{
    const bool has_error = error_text.has_value() && !error_text->empty();
    if (ok == has_error) {
        return false;
    }
    if (ok != !figures.empty()) {
        return false;
    }
    return !(timed_out && ok);
}

const std::string& ModelIds::for_role(RoleTag role) const noexcept
{
    switch (role) {
    case RoleTag::mpa: return mpa;
    case RoleTag::code: return code;
    case RoleTag::fb: return fb;
    case RoleTag::syn: return syn;
    case RoleTag::judge: return judge;
    case RoleTag::baseline: return baseline;
    }
    return code;
}

std::vector<std::string> validate_config(const PipelineConfig& config)
{
    std::vector<std::string> errors;
    if (config.k < 1) {
        errors.emplace_back("k must be ≥ 1");
    }
    if (!(config.gen_temperature >= 0.0 && config.gen_temperature <= 2.0)) {
        errors.emplace_back("gen_temperature must be in [0, 2]");
    }
    if (!(config.judge_temperature >= 0.0 && config.judge_temperature <= 2.0)) {
        errors.emplace_back("judge_temperature must be in [0, 2]");
    }
    if (!(config.exec_timeout_s > 0.0)) {
        errors.emplace_back("exec_timeout must be > 0");
    }
    if (config.max_error_chars <= 0) {
        errors.emplace_back("max_error_chars must be > 0");
    }
    if (config.parallelism < 0) {
        errors.emplace_back("parallelism must be ≥ 0");
    }
    if (!(config.run_budget_s > 0.0)) {
        errors.emplace_back("run_budget must be > 0");
    }
    const std::array<std::pair<const char*, const std::string*>, 6> models{{
        {"mpa", &config.models.mpa},
        {"code", &config.models.code},
        {"fb", &config.models.fb},
        {"syn", &config.models.syn},
        {"judge", &config.models.judge},
        {"baseline", &config.models.baseline},
    }};
    for (const auto& [role, id] : models) {
        if (id->empty()) {
            errors.push_back(std::string("models.") + role + " must be non-empty");
        }
    }
    return errors;
}

StageLedger& StageLedger::operator+=(const StageLedger& other) noexcept
{
    query_expansion += other.query_expansion;
    code_generation += other.code_generation;
    visual_feedback += other.visual_feedback;
    editor += other.editor;
    return *this;
}

int ledger_total(const StageLedger& ledger) noexcept
{
    return ledger.query_expansion + ledger.code_generation + ledger.visual_feedback + ledger.editor;
}

} // namespace plotpath
