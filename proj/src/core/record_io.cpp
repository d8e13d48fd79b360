#include "core/record_io.hpp"

#include "core/bytes.hpp"
#include "core/error.hpp"

namespace plotpath {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
void read_key(const json& j, const char* key, T& out)
{
    if (!j.contains(key)) {
        return;
    }
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::config, std::string("config key '") + key + "' has the wrong type");
    }
}

json optional_string(const std::optional<std::string>& s)
{
    return s ? json(*s) : json(nullptr);
}

std::optional<std::string> string_or_null(const json& j, const char* key)
{
    if (!j.contains(key) || j.at(key).is_null()) {
        return std::nullopt;
    }
    return j.at(key).get<std::string>();
}

std::int64_t to_epoch_ms(Clock::time_point t)
{
    return std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
}

Clock::time_point from_epoch_ms(std::int64_t ms)
{
    return Clock::time_point(std::chrono::duration_cast<Clock::duration>(std::chrono::milliseconds(ms)));
}

json path_to_json(const ReasoningPath& p)
{
    return {{"index", p.index}, {"plan_text", p.plan_text}, {"chart_intent", optional_string(p.chart_intent)}};
}

json candidate_to_json(const CandidateScript& c)
{
    return {{"path_index", c.path_index}, {"source", c.source}, {"origin", std::string(to_string(c.origin))}};
}

CandidateScript candidate_from_json(const json& j)
{
    return CandidateScript{j.at("path_index").get<int>(), j.at("source").get<std::string>(),
                           parse_origin(j.at("origin").get<std::string>())};
}

json feedback_to_json(const FeedbackReport& f)
{
    return {{"path_index", f.path_index},
            {"semantic_alignment", f.semantic_alignment},
            {"data_correctness", f.data_correctness},
            {"visual_quality", f.visual_quality},
            {"verdict", std::string(to_string(f.verdict))},
            {"raw_text", f.raw_text},
            {"structured", f.structured}};
}

FeedbackReport feedback_from_json(const json& j)
{
    FeedbackReport f;
    f.path_index = j.at("path_index").get<int>();
    f.semantic_alignment = j.at("semantic_alignment").get<std::string>();
    f.data_correctness = j.at("data_correctness").get<std::string>();
    f.visual_quality = j.at("visual_quality").get<std::string>();
    f.verdict = parse_verdict(j.at("verdict").get<std::string>());
    f.raw_text = j.at("raw_text").get<std::string>();
    f.structured = j.at("structured").get<bool>();
    return f;
}

json transcript_to_json(const TranscriptEntry& t)
{
    return {{"id", t.id},
            {"role_tag", std::string(to_string(t.role))},
            {"path_index", t.path_index ? json(*t.path_index) : json(nullptr)},
            {"attachments", t.attachments},
            {"reprompt", t.reprompt},
            {"attempts", t.attempts},
            {"ok", t.ok}};
}

TranscriptEntry transcript_from_json(const json& j)
{
    TranscriptEntry t;
    t.id = j.at("id").get<std::string>();
    t.role = parse_role_tag(j.at("role_tag").get<std::string>());
    if (!j.at("path_index").is_null()) {
        t.path_index = j.at("path_index").get<int>();
    }
    t.attachments = j.at("attachments").get<int>();
    t.reprompt = j.at("reprompt").get<bool>();
    t.attempts = j.at("attempts").get<int>();
    t.ok = j.at("ok").get<bool>();
    return t;
}

json ledger_to_json(const StageLedger& l)
{
    return {{"query_expansion", l.query_expansion},
            {"code_generation", l.code_generation},
            {"visual_feedback", l.visual_feedback},
            {"editor", l.editor}};
}

StageLedger ledger_from_json(const json& j)
{
    return StageLedger{j.at("query_expansion").get<int>(), j.at("code_generation").get<int>(),
                       j.at("visual_feedback").get<int>(), j.at("editor").get<int>()};
}

std::string figure_path(const std::string& slot, std::size_t n)
{
    return std::string(kFigureDir) + "/" + slot + "_" + std::to_string(n + 1) + ".png";
}

// Figures are referenced by relative path; `with_timing` toggles the
// non-structural fields.
json outcome_to_json(const ExecutionOutcome& o, const std::string& slot, bool with_timing)
{
    json figures = json::array();
    for (std::size_t i = 0; i < o.figures.size(); ++i) {
        figures.push_back({{"name", o.figures[i].name},
                           {"path", figure_path(slot, i)},
                           {"sha256", sha256_hex(o.figures[i].png)}});
    }
    json j{{"ok", o.ok},
           {"figures", figures},
           {"error_text", optional_string(o.error_text)},
           {"timed_out", o.timed_out}};
    if (with_timing) {
        j["wall_time_ms"] = o.wall_time_ms;
    }
    return j;
}

ExecutionOutcome outcome_from_json(const json& j, const fs::path& dir)
{
    ExecutionOutcome o;
    o.ok = j.at("ok").get<bool>();
    o.error_text = string_or_null(j, "error_text");
    o.timed_out = j.at("timed_out").get<bool>();
    o.wall_time_ms = j.value("wall_time_ms", std::int64_t{0});
    for (const auto& f : j.at("figures")) {
        const auto rel = f.at("path").get<std::string>();
        Bytes png;
        try {
            png = read_file(dir / rel);
        } catch (const Error&) {
            throw Error(ErrorCode::corrupt_record, "figure file missing: " + rel);
        }
        if (sha256_hex(png) != f.at("sha256").get<std::string>()) {
            throw Error(ErrorCode::corrupt_record, "figure checksum mismatch: " + rel);
        }
        o.figures.push_back(Figure{f.at("name").get<std::string>(), std::move(png)});
    }
    return o;
}

json record_to_json(const RunRecord& r, bool with_timing)
{
    json paths = json::array();
    for (const auto& p : r.paths) {
        paths.push_back(path_to_json(p));
    }
    json candidates = json::array();
    for (const auto& c : r.candidates) {
        candidates.push_back(candidate_to_json(c));
    }
    json outcomes = json::array();
    for (std::size_t i = 0; i < r.outcomes.size(); ++i) {
        outcomes.push_back(outcome_to_json(r.outcomes[i], "branch" + std::to_string(i + 1), with_timing));
    }
    json feedback = json::array();
    for (const auto& f : r.feedback) {
        feedback.push_back(feedback_to_json(f));
    }
    json transcripts = json::array();
    for (const auto& t : r.transcripts) {
        transcripts.push_back(transcript_to_json(t));
    }
    json j{
        {"schema", std::string(kSchemaVersion)},
        {"status", std::string(to_string(r.status))},
        {"failure", r.failure},
        {"input", task_to_json(r.input)},
        {"config", config_to_json(r.config)},
        {"paths", paths},
        {"candidates", candidates},
        {"outcomes", outcomes},
        {"feedback", feedback},
        {"final", r.final ? candidate_to_json(*r.final) : json(nullptr)},
        {"final_outcome", r.final_outcome ? outcome_to_json(*r.final_outcome, "final", with_timing) : json(nullptr)},
        {"ledger", ledger_to_json(r.ledger)},
        {"transcripts", transcripts},
    };
    if (with_timing) {
        j["started_ms"] = to_epoch_ms(r.started);
        j["finished_ms"] = to_epoch_ms(r.finished);
        j["timings"] = {{"expand_ms", r.timings.expand_ms},
                        {"branches_ms", r.timings.branches_ms},
                        {"synthesis_ms", r.timings.synthesis_ms},
                        {"final_exec_ms", r.timings.final_exec_ms}};
    }
    return j;
}

RunRecord record_from_json(const json& j, const fs::path& dir)
{
    if (j.at("schema").get<std::string>() != kSchemaVersion) {
        throw Error(ErrorCode::corrupt_record, "unsupported schema " + j.at("schema").dump());
    }
    RunRecord r;
    r.status = parse_run_status(j.at("status").get<std::string>());
    r.failure = j.at("failure").get<std::string>();
    r.input = task_from_json(j.at("input"));
    r.config = config_from_json(j.at("config"));
    for (const auto& p : j.at("paths")) {
        r.paths.push_back(ReasoningPath{p.at("index").get<int>(), p.at("plan_text").get<std::string>(),
                                        string_or_null(p, "chart_intent")});
    }
    for (const auto& c : j.at("candidates")) {
        r.candidates.push_back(candidate_from_json(c));
    }
    for (const auto& o : j.at("outcomes")) {
        r.outcomes.push_back(outcome_from_json(o, dir));
    }
    for (const auto& f : j.at("feedback")) {
        r.feedback.push_back(feedback_from_json(f));
    }
    if (!j.at("final").is_null()) {
        r.final = candidate_from_json(j.at("final"));
    }
    if (!j.at("final_outcome").is_null()) {
        r.final_outcome = outcome_from_json(j.at("final_outcome"), dir);
    }
    r.ledger = ledger_from_json(j.at("ledger"));
    for (const auto& t : j.at("transcripts")) {
        r.transcripts.push_back(transcript_from_json(t));
    }
    r.started = from_epoch_ms(j.value("started_ms", std::int64_t{0}));
    r.finished = from_epoch_ms(j.value("finished_ms", std::int64_t{0}));
    if (j.contains("timings")) {
        const auto& t = j.at("timings");
        r.timings = StageTimings{t.value("expand_ms", std::int64_t{0}), t.value("branches_ms", std::int64_t{0}),
                                 t.value("synthesis_ms", std::int64_t{0}), t.value("final_exec_ms", std::int64_t{0})};
    }
    return r;
}

void write_figures(const ExecutionOutcome& o, const std::string& slot, const fs::path& dir)
{
    for (std::size_t i = 0; i < o.figures.size(); ++i) {
        write_file_atomic(dir / figure_path(slot, i), o.figures[i].png);
    }
}

} // namespace

json config_to_json(const PipelineConfig& c)
{
    return {
        {"k", c.k},
        {"mode", std::string(to_string(c.mode))},
        {"gen_temperature", c.gen_temperature},
        {"judge_temperature", c.judge_temperature},
        {"exec_timeout", c.exec_timeout_s},
        {"max_error_chars", c.max_error_chars},
        {"parallelism", c.parallelism},
        {"run_budget", c.run_budget_s},
        {"models",
         {{"mpa", c.models.mpa},
          {"code", c.models.code},
          {"fb", c.models.fb},
          {"syn", c.models.syn},
          {"judge", c.models.judge},
          {"baseline", c.models.baseline}}},
    };
}

PipelineConfig config_from_json(const json& j, PipelineConfig c)
{
    if (!j.is_object()) {
        throw Error(ErrorCode::config, "pipeline config must be a JSON object");
    }
    read_key(j, "k", c.k);
    if (j.contains("mode")) {
        std::string mode;
        read_key(j, "mode", mode);
        try {
            c.mode = parse_mode(mode);
        } catch (const Error& e) {
            throw Error(ErrorCode::config, e.what());
        }
    }
    read_key(j, "gen_temperature", c.gen_temperature);
    read_key(j, "judge_temperature", c.judge_temperature);
    read_key(j, "exec_timeout", c.exec_timeout_s);
    read_key(j, "max_error_chars", c.max_error_chars);
    read_key(j, "parallelism", c.parallelism);
    read_key(j, "run_budget", c.run_budget_s);
    if (j.contains("models")) {
        const auto& m = j.at("models");
        read_key(m, "mpa", c.models.mpa);
        read_key(m, "code", c.models.code);
        read_key(m, "fb", c.models.fb);
        read_key(m, "syn", c.models.syn);
        read_key(m, "judge", c.models.judge);
        read_key(m, "baseline", c.models.baseline);
    }
    return c;
}

json task_to_json(const TaskInput& t)
{
    json files = json::array();
    for (const auto& f : t.data_files) {
        files.push_back({{"name", f.name}, {"path", f.path.string()}});
    }
    return {{"task_id", t.task_id},
            {"query", t.query},
            {"dataset_description", t.dataset_description},
            {"data_files", files}};
}

TaskInput task_from_json(const json& j)
{
    TaskInput t;
    try {
        t.task_id = j.value("task_id", std::string{});
        t.query = j.at("query").get<std::string>();
        t.dataset_description = j.value("dataset_description", std::string{});
        if (j.contains("data_files")) {
            for (const auto& f : j.at("data_files")) {
                t.data_files.push_back(DataFile{f.at("name").get<std::string>(), f.at("path").get<std::string>()});
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::invalid_argument, std::string("malformed task: ") + e.what());
    }
    return t;
}

std::string canonical_json(const RunRecord& record)
{
    return record_to_json(record, false).dump(-1, ' ', false, json::error_handler_t::replace);
}

bool structurally_equal(const RunRecord& a, const RunRecord& b)
{
    return canonical_json(a) == canonical_json(b);
}

std::string record_digest(const RunRecord& record)
{
    return sha256_hex(canonical_json(record));
}

void persist_run(const RunRecord& record, const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw Error(ErrorCode::storage_unavailable, "cannot create record directory " + dir.string());
    }
    fs::remove_all(dir / kFigureDir, ec);
    for (std::size_t i = 0; i < record.outcomes.size(); ++i) {
        write_figures(record.outcomes[i], "branch" + std::to_string(i + 1), dir);
    }
    if (record.final_outcome) {
        write_figures(*record.final_outcome, "final", dir);
    }
    auto doc = record_to_json(record, true);
    doc["checksum"] = record_digest(record);
    write_text_atomic(dir / kRecordFile, doc.dump(2, ' ', false, json::error_handler_t::replace) + "\n");
}

RunRecord load_run(const fs::path& dir)
{
    const auto file = dir / kRecordFile;
    if (!fs::is_regular_file(file)) {
        throw Error(ErrorCode::storage_unavailable, "no record at " + file.string());
    }
    const auto text = read_text(file);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::corrupt_record, file.string() + ": " + e.what());
    }
    RunRecord record;
    try {
        record = record_from_json(doc, dir);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::corrupt_record, file.string() + ": " + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::corrupt_record) {
            throw;
        }
        throw Error(ErrorCode::corrupt_record, file.string() + ": " + e.what());
    }
    const auto stored = doc.value("checksum", std::string{});
    if (stored != record_digest(record)) {
        throw Error(ErrorCode::corrupt_record, "checksum mismatch in " + file.string());
    }
    return record;
}

bool has_record(const fs::path& dir)
{
    std::error_code ec;
    return fs::is_regular_file(dir / kRecordFile, ec);
}

} // namespace plotpath
