#include "plotpath/plotpath.h"

#include "agents/prompts.hpp"
#include "bench/bench.hpp"
#include "core/bytes.hpp"
#include "core/error.hpp"
#include "core/record_io.hpp"
#include "executor/executor.hpp"
#include "gateway/backends.hpp"
#include "pipeline/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

using nlohmann::json;
namespace fs = std::filesystem;
using namespace plotpath;

struct pp_engine {
    PipelineConfig config;
    std::shared_ptr<gateway::Gateway> gateway;
    std::unique_ptr<executor::RunnerTransport> transport;
    agents::PromptSet prompts;
    fs::path work_dir;
    std::size_t bench_parallelism = 1;
    bool correctness_check = false;
};

struct pp_record {
    RunRecord record;
};

namespace {

thread_local std::string g_last_error;

pp_status status_for(ErrorCode code)
{
    switch (code) {
    case ErrorCode::invalid_argument: return PP_E_INVALID_ARGUMENT;
    case ErrorCode::config: return PP_E_CONFIG;
    case ErrorCode::provider: return PP_E_PROVIDER;
    case ErrorCode::cassette_miss: return PP_E_CASSETTE_MISS;
    case ErrorCode::no_rule: return PP_E_NO_RULE;
    case ErrorCode::parse_failure: return PP_E_PARSE_FAILURE;
    case ErrorCode::empty_code: return PP_E_EMPTY_CODE;
    case ErrorCode::transport_unavailable: return PP_E_TRANSPORT_UNAVAILABLE;
    case ErrorCode::storage_unavailable: return PP_E_STORAGE_UNAVAILABLE;
    case ErrorCode::corrupt_record: return PP_E_CORRUPT_RECORD;
    case ErrorCode::suite: return PP_E_SUITE;
    case ErrorCode::scoring_failure: return PP_E_SCORING_FAILURE;
    case ErrorCode::budget_exceeded: return PP_E_BUDGET_EXCEEDED;
    }
    return PP_E_INTERNAL;
}

template <typename F>
pp_status guarded(F&& body)
{
    g_last_error.clear();
    try {
        return body();
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_for(e.code());
    } catch (const json::exception& e) {
        g_last_error = e.what();
        return PP_E_INVALID_ARGUMENT;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return PP_E_INTERNAL;
    } catch (...) {
        g_last_error = "unknown exception";
        return PP_E_INTERNAL;
    }
}

char* dup_string(const std::string& s)
{
    auto* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) {
        throw std::bad_alloc();
    }
    std::memcpy(out, s.data(), s.size() + 1);
    return out;
}

void require(const void* p, const char* name)
{
    if (p == nullptr) {
        throw Error(ErrorCode::invalid_argument, std::string(name) + " must not be NULL");
    }
}

json parse_object(const char* text, const char* what)
{
    if (text == nullptr || *text == '\0') {
        return json::object();
    }
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::config, std::string(what) + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) {
        throw Error(ErrorCode::config, std::string(what) + " must be a JSON object");
    }
    return j;
}

std::string str_or(const json& j, const char* key, const std::string& fallback)
{
    if (!j.contains(key)) {
        return fallback;
    }
    if (!j.at(key).is_string()) {
        throw Error(ErrorCode::config, std::string(key) + " must be a string");
    }
    return j.at(key).get<std::string>();
}

// Problems found without constructing anything.
std::vector<std::string> config_problems(const json& j)
{
    std::vector<std::string> problems;
    PipelineConfig pipeline;
    try {
        pipeline = config_from_json(j.value("pipeline", json::object()));
        const auto v = validate_config(pipeline);
        problems.insert(problems.end(), v.begin(), v.end());
    } catch (const Error& e) {
        problems.emplace_back(e.what());
    }

    const auto backend = j.value("backend", json::object());
    const auto mode = backend.value("mode", std::string("scripted"));
    if (mode != "live" && mode != "record" && mode != "replay" && mode != "scripted") {
        problems.push_back("backend.mode must be one of live, record, replay, scripted");
    }
    const auto cassette = backend.value("cassette", std::string());
    if (mode == "replay") {
        if (cassette.empty()) {
            problems.emplace_back("replay mode requires a cassette path");
        } else if (!fs::exists(cassette)) {
            problems.push_back("cassette not found: " + cassette);
        }
    }
    if (mode == "record" && cassette.empty()) {
        problems.emplace_back("record mode requires a cassette path");
    }
    const auto inner = backend.value("inner", std::string("live"));
    const bool uses_rules = mode == "scripted" || (mode == "record" && inner == "scripted");
    if (mode == "record" && inner != "live" && inner != "scripted") {
        problems.emplace_back("backend.inner must be live or scripted");
    }
    if (uses_rules) {
        const auto rules = backend.value("rules", std::string());
        if (rules.empty()) {
            problems.emplace_back("scripted backend requires a rules file");
        } else if (!fs::exists(rules)) {
            problems.push_back("rules file not found: " + rules);
        }
    }

    const auto transport = j.value("transport", json::object());
    const auto kind = transport.value("kind", std::string("stub"));
    if (kind != "stub" && kind != "process") {
        problems.emplace_back("transport.kind must be stub or process");
    }
    if (kind == "process") {
        const auto runner = transport.value("runner", json::array());
        if (!runner.is_array() || runner.empty()) {
            problems.emplace_back("process transport requires a runner command");
        }
    }
    if (j.contains("prompts_dir") && !fs::is_directory(j.at("prompts_dir").get<std::string>())) {
        problems.push_back("prompts_dir is not a directory: " + j.at("prompts_dir").get<std::string>());
    }
    return problems;
}

std::shared_ptr<gateway::ChatBackend> scripted_from(const std::string& rules_path)
{
    json rules;
    try {
        rules = json::parse(read_text(rules_path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::config, "rules file " + rules_path + " is not valid JSON: " + e.what());
    }
    return gateway::ScriptedBackend::from_json(rules);
}

std::shared_ptr<gateway::ChatBackend> make_backend(const json& backend)
{
    const auto mode = backend.value("mode", std::string("scripted"));
    const auto cassette = backend.value("cassette", std::string());
    const auto rules = backend.value("rules", std::string());
    if (mode == "scripted") {
        return scripted_from(rules);
    }
    if (mode == "replay") {
        return std::make_shared<gateway::ReplayBackend>(fs::path(cassette));
    }
    if (mode == "live") {
        return std::make_shared<gateway::OpenAiBackend>(gateway::live_options_from_env());
    }
    std::shared_ptr<gateway::ChatBackend> inner;
    if (backend.value("inner", std::string("live")) == "scripted") {
        inner = scripted_from(rules);
    } else {
        inner = std::make_shared<gateway::OpenAiBackend>(gateway::live_options_from_env());
    }
    return std::make_shared<gateway::RecordingBackend>(std::move(inner), cassette);
}

std::string timing_line(const char* stage, std::int64_t ms)
{
    std::ostringstream out;
    out << "  " << stage << std::string(16 - std::strlen(stage), ' ') << ms << " ms\n";
    return out.str();
}

std::string summarize(const RunRecord& r)
{
    std::ostringstream out;
    out << "task:     " << (r.input.task_id.empty() ? "(unnamed)" : r.input.task_id) << "\n";
    out << "query:    " << r.input.query << "\n";
    out << "mode:     " << to_string(r.config.mode) << "  k=" << r.config.k << "\n";
    out << "status:   " << to_string(r.status);
    if (!r.failure.empty()) {
        out << " (" << r.failure << ")";
    }
    out << "\n";
    out << "candidates: " << r.candidates.size() << "\n";
    for (std::size_t i = 0; i < r.candidates.size(); ++i) {
        const auto& c = r.candidates[i];
        out << "  [" << c.path_index << "] " << to_string(c.origin) << ", ";
        if (i < r.outcomes.size()) {
            const auto& o = r.outcomes[i];
            if (o.ok) {
                out << "rendered " << o.figures.size() << " figure(s)";
            } else {
                out << (o.timed_out ? "timed out" : "failed");
            }
        }
        for (const auto& f : r.feedback) {
            if (f.path_index == c.path_index) {
                out << ", verdict " << to_string(f.verdict);
            }
        }
        out << "\n";
    }
    out << "final:    ";
    if (!r.final_outcome) {
        out << "none\n";
    } else if (r.final_outcome->ok) {
        out << "ok, " << r.final_outcome->figures.size() << " figure(s)\n";
    } else {
        auto err = r.final_outcome->error_text.value_or("");
        if (const auto nl = err.find_last_not_of('\n'); nl != std::string::npos) {
            err = err.substr(0, nl + 1);
        }
        if (const auto pos = err.rfind('\n'); pos != std::string::npos) {
            err = err.substr(pos + 1);
        }
        out << "failed: " << err << "\n";
    }
    const auto& l = r.ledger;
    out << "ledger:   query_expansion=" << l.query_expansion << " code_generation=" << l.code_generation
        << " visual_feedback=" << l.visual_feedback << " editor=" << l.editor << " total=" << ledger_total(l) << "\n";
    out << "exchanges: " << r.transcripts.size() << "\n";
    out << "timings:\n";
    out << timing_line("expand", r.timings.expand_ms);
    out << timing_line("branches", r.timings.branches_ms);
    out << timing_line("synthesis", r.timings.synthesis_ms);
    out << timing_line("final exec", r.timings.final_exec_ms);
    const auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(r.finished - r.started).count();
    out << timing_line("wall", wall);
    return out.str();
}

json sweep_rows_json(const std::vector<bench::SweepRow>& rows)
{
    json out = json::array();
    for (const auto& r : rows) {
        out.push_back({{"k", r.k},
                       {"mean_plot_score", r.mean_plot_score ? json(*r.mean_plot_score) : json(nullptr)},
                       {"executable_rate", r.executable_rate},
                       {"calls_per_row", r.calls_per_row},
                       {"ledger_total", ledger_total(r.ledger_totals)}});
    }
    return out;
}

} // namespace

extern "C" {

const char* pp_version(void)
{
    return "0.1.0";
}

const char* pp_status_string(pp_status status)
{
    switch (status) {
    case PP_OK: return "ok";
    case PP_E_INVALID_ARGUMENT: return "invalid_argument";
    case PP_E_CONFIG: return "config";
    case PP_E_PROVIDER: return "provider";
    case PP_E_CASSETTE_MISS: return "cassette_miss";
    case PP_E_NO_RULE: return "no_rule";
    case PP_E_PARSE_FAILURE: return "parse_failure";
    case PP_E_EMPTY_CODE: return "empty_code";
    case PP_E_TRANSPORT_UNAVAILABLE: return "transport_unavailable";
    case PP_E_STORAGE_UNAVAILABLE: return "storage_unavailable";
    case PP_E_CORRUPT_RECORD: return "corrupt_record";
    case PP_E_SUITE: return "suite";
    case PP_E_SCORING_FAILURE: return "scoring_failure";
    case PP_E_BUDGET_EXCEEDED: return "budget_exceeded";
    case PP_E_RUN_FAILED: return "run_failed";
    case PP_E_INTERNAL: return "internal";
    }
    return "unknown";
}

const char* pp_last_error(void)
{
    return g_last_error.c_str();
}

void pp_string_free(char* s)
{
    std::free(s);
}

pp_status pp_validate_config(const char* config_json, char** errors_json)
{
    return guarded([&] {
        require(errors_json, "errors_json");
        *errors_json = nullptr;
        json problems = json::array();
        try {
            for (auto& p : config_problems(parse_object(config_json, "config"))) {
                problems.push_back(std::move(p));
            }
        } catch (const Error& e) {
            problems.push_back(e.what());
        }
        *errors_json = dup_string(problems.dump());
        if (!problems.empty()) {
            g_last_error = problems.front().get<std::string>();
            return PP_E_CONFIG;
        }
        return PP_OK;
    });
}

pp_status pp_engine_create(const char* config_json, pp_engine** out)
{
    return guarded([&] {
        require(out, "out");
        *out = nullptr;
        const auto j = parse_object(config_json, "config");
        if (const auto problems = config_problems(j); !problems.empty()) {
            throw Error(ErrorCode::config, problems.front());
        }
        auto engine = std::make_unique<pp_engine>();
        engine->config = config_from_json(j.value("pipeline", json::object()));

        gateway::RetryPolicy retry;
        if (j.contains("retry")) {
            const auto& r = j.at("retry");
            retry.max_attempts = r.value("max_attempts", retry.max_attempts);
            retry.base_delay = std::chrono::milliseconds(r.value("base_delay_ms", retry.base_delay.count()));
            if (retry.max_attempts < 1 || retry.base_delay.count() < 0) {
                throw Error(ErrorCode::config, "retry.max_attempts must be >= 1 and base_delay_ms >= 0");
            }
        }
        engine->gateway = std::make_shared<gateway::Gateway>(make_backend(j.value("backend", json::object())), retry);

        const auto transport = j.value("transport", json::object());
        if (transport.value("kind", std::string("stub")) == "process") {
            engine->transport =
                std::make_unique<executor::ProcessTransport>(transport.at("runner").get<std::vector<std::string>>());
        } else {
            engine->transport = std::make_unique<executor::StubTransport>();
        }

        engine->prompts = j.contains("prompts_dir")
                              ? agents::PromptSet::with_overrides(str_or(j, "prompts_dir", ""))
                              : agents::PromptSet::builtin();
        engine->work_dir = j.contains("work_dir") ? fs::path(str_or(j, "work_dir", "")) : executor::default_scratch_root();
        const auto b = j.value("bench", json::object());
        engine->bench_parallelism = static_cast<std::size_t>(std::max(1, b.value("parallelism", 1)));
        engine->correctness_check = b.value("correctness_check", false);
        *out = engine.release();
        return PP_OK;
    });
}

void pp_engine_destroy(pp_engine* engine)
{
    delete engine;
}

pp_status pp_engine_run(pp_engine* engine, const char* task_json, const char* out_dir, pp_record** out)
{
    return guarded([&] {
        require(engine, "engine");
        require(out, "out");
        *out = nullptr;
        const auto task = task_from_json(parse_object(task_json, "task"));
        pipeline::Pipeline pipe(*engine->gateway, *engine->transport, engine->prompts, engine->config,
                                engine->work_dir);
        auto rec = std::make_unique<pp_record>();
        rec->record = pipe.run(task);
        if (out_dir != nullptr) {
            persist_run(rec->record, out_dir);
            if (rec->record.final) {
                write_text_atomic(fs::path(out_dir) / "final.py", rec->record.final->source);
            }
        }
        const bool failed = rec->record.status == RunStatus::failed;
        if (failed) {
            g_last_error = rec->record.failure;
        }
        *out = rec.release();
        return failed ? PP_E_RUN_FAILED : PP_OK;
    });
}

pp_status pp_engine_bench(pp_engine* engine, const char* suite_path, const char* out_dir, int resume,
                          const char* strategy_label, char** scorecard_json)
{
    return guarded([&] {
        require(engine, "engine");
        require(suite_path, "suite_path");
        require(out_dir, "out_dir");
        const auto suite = bench::load_suite(suite_path);
        bench::BenchRunner runner(*engine->gateway, *engine->transport, engine->prompts, engine->work_dir);
        bench::SuiteOptions options;
        options.out_dir = out_dir;
        options.resume = resume != 0;
        options.parallelism = engine->bench_parallelism;
        options.correctness_check = engine->correctness_check;
        options.strategy_label = strategy_label != nullptr ? strategy_label : "";
        const auto card = runner.run_suite(suite, engine->config, options);
        if (scorecard_json != nullptr) {
            *scorecard_json = dup_string(bench::scorecard_json(card).dump(2));
        }
        return PP_OK;
    });
}

pp_status pp_engine_sweep(pp_engine* engine, const char* suite_path, const int* k_values, size_t k_count,
                          const char* out_dir, int resume, char** rows_json)
{
    return guarded([&] {
        require(engine, "engine");
        require(suite_path, "suite_path");
        require(out_dir, "out_dir");
        if (k_count == 0) {
            throw Error(ErrorCode::invalid_argument, "at least one k value is required");
        }
        require(k_values, "k_values");
        const auto suite = bench::load_suite(suite_path);
        bench::BenchRunner runner(*engine->gateway, *engine->transport, engine->prompts, engine->work_dir);
        bench::SuiteOptions options;
        options.out_dir = out_dir;
        options.resume = resume != 0;
        options.parallelism = engine->bench_parallelism;
        options.correctness_check = engine->correctness_check;
        const std::vector<int> ks(k_values, k_values + k_count);
        const auto rows = runner.k_sweep(suite, ks, engine->config, options);
        if (rows_json != nullptr) {
            *rows_json = dup_string(sweep_rows_json(rows).dump(2));
        }
        return PP_OK;
    });
}

pp_status pp_record_load(const char* dir, pp_record** out)
{
    return guarded([&] {
        require(dir, "dir");
        require(out, "out");
        *out = nullptr;
        auto rec = std::make_unique<pp_record>();
        rec->record = load_run(dir);
        *out = rec.release();
        return PP_OK;
    });
}

void pp_record_destroy(pp_record* record)
{
    delete record;
}

int pp_record_final_ok(const pp_record* record)
{
    return record != nullptr && record->record.final_ok() ? 1 : 0;
}

pp_status pp_record_to_json(const pp_record* record, char** out)
{
    return guarded([&] {
        require(record, "record");
        require(out, "out");
        *out = dup_string(canonical_json(record->record));
        return PP_OK;
    });
}

pp_status pp_record_summary(const pp_record* record, char** text)
{
    return guarded([&] {
        require(record, "record");
        require(text, "text");
        *text = dup_string(summarize(record->record));
        return PP_OK;
    });
}

pp_status pp_cassette_info(const char* path, char** info_json)
{
    return guarded([&] {
        require(path, "path");
        require(info_json, "info_json");
        const auto cassette = gateway::Cassette::load(path);
        std::map<std::string, int> roles;
        for (const auto& e : cassette.entries()) {
            ++roles[std::string(to_string(e.role))];
        }
        const json info{{"path", path}, {"entries", cassette.entries().size()}, {"roles", roles}};
        *info_json = dup_string(info.dump(2));
        return PP_OK;
    });
}

pp_status pp_cassette_verify(const char* path, char** report_json)
{
    return guarded([&] {
        require(path, "path");
        require(report_json, "report_json");
        std::ifstream in(path);
        if (!in) {
            throw Error(ErrorCode::storage_unavailable, std::string("cannot open cassette ") + path);
        }
        json problems = json::array();
        std::map<std::string, std::string> seen;
        std::string line;
        std::size_t lineno = 0;
        std::size_t entries = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) {
                continue;
            }
            try {
                const auto j = json::parse(line);
                const auto fp = j.at("fingerprint").get<std::string>();
                parse_role_tag(j.at("role_tag").get<std::string>());
                const auto text = j.at("response_text").get<std::string>();
                if (fp.size() != 64 || fp.find_first_not_of("0123456789abcdef") != std::string::npos) {
                    problems.push_back("line " + std::to_string(lineno) + ": fingerprint is not a sha256 hex digest");
                }
                if (const auto it = seen.find(fp); it != seen.end()) {
                    problems.push_back("line " + std::to_string(lineno) + ": duplicate fingerprint" +
                                       (it->second == text ? "" : " with a different response"));
                } else {
                    seen.emplace(fp, text);
                }
                ++entries;
            } catch (const std::exception& e) {
                problems.push_back("line " + std::to_string(lineno) + ": " + e.what());
            }
        }
        const json report{{"path", path}, {"entries", entries}, {"ok", problems.empty()}, {"problems", problems}};
        *report_json = dup_string(report.dump(2));
        if (!problems.empty()) {
            g_last_error = problems.front().get<std::string>();
            return PP_E_CORRUPT_RECORD;
        }
        return PP_OK;
    });
}

} // extern "C"
