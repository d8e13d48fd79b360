// Command-line front end over the plotpath C API.

#include "plotpath/plotpath.h"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitConfig = 2;

struct Owned {
    char* p = nullptr;
    ~Owned() { pp_string_free(p); }
    std::string str() const { return p ? p : ""; }
};

struct EngineDeleter {
    void operator()(pp_engine* e) const { pp_engine_destroy(e); }
};
struct RecordDeleter {
    void operator()(pp_record* r) const { pp_record_destroy(r); }
};
using EnginePtr = std::unique_ptr<pp_engine, EngineDeleter>;
using RecordPtr = std::unique_ptr<pp_record, RecordDeleter>;

struct Common {
    std::string config_file;
    std::string backend;
    std::string cassette;
    std::string rules;
    std::string inner;
    std::string transport;
    std::vector<std::string> runner;
    std::string prompts_dir;
    std::string mode;
    std::optional<int> k;
    std::optional<double> timeout;
    std::optional<int> parallelism;
    bool verbose = false;
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("--config", c.config_file, "JSON config file");
    cmd->add_option("--backend", c.backend, "live | record | replay | scripted")
        ->check(CLI::IsMember({"live", "record", "replay", "scripted"}));
    cmd->add_option("--cassette", c.cassette, "Cassette file for record/replay");
    cmd->add_option("--rules", c.rules, "Rules file for the scripted backend");
    cmd->add_option("--inner", c.inner, "Backend wrapped by record mode: live | scripted");
    cmd->add_option("--transport", c.transport, "stub | process")->check(CLI::IsMember({"stub", "process"}));
    cmd->add_option("--runner", c.runner, "Runner command for the process transport")->expected(1, -1);
    cmd->add_option("--prompts", c.prompts_dir, "Directory of prompt overrides");
    cmd->add_option("--mode", c.mode, "full | no_feedback | binary_feedback | zero_shot | cot");
    cmd->add_option("--k", c.k, "Number of reasoning paths");
    cmd->add_option("--timeout", c.timeout, "Execution timeout in seconds");
    cmd->add_option("--parallelism", c.parallelism, "Concurrent items (bench) or branches (run)");
    cmd->add_flag("-v,--verbose", c.verbose, "Print the effective configuration");
}

json load_config_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read config file " + path);
    }
    std::stringstream buf;
    buf << in.rdbuf();
    auto j = json::parse(buf.str(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw std::runtime_error("config file " + path + " is not a JSON object");
    }
    return j;
}

// flags > config file > built-in defaults
json effective_config(const Common& c, bool bench_scope)
{
    json j = c.config_file.empty() ? json::object() : load_config_file(c.config_file);
    auto& pipeline = j["pipeline"];
    if (!pipeline.is_object()) {
        pipeline = json::object();
    }
    if (!c.mode.empty()) {
        pipeline["mode"] = c.mode;
    }
    if (c.k) {
        pipeline["k"] = *c.k;
    }
    if (c.timeout) {
        pipeline["exec_timeout"] = *c.timeout;
    }
    if (c.parallelism) {
        if (bench_scope) {
            j["bench"]["parallelism"] = *c.parallelism;
        } else {
            pipeline["parallelism"] = *c.parallelism;
        }
    }
    auto& backend = j["backend"];
    if (!backend.is_object()) {
        backend = json::object();
    }
    if (!c.backend.empty()) {
        backend["mode"] = c.backend;
    }
    if (!c.cassette.empty()) {
        backend["cassette"] = c.cassette;
    }
    if (!c.rules.empty()) {
        backend["rules"] = c.rules;
    }
    if (!c.inner.empty()) {
        backend["inner"] = c.inner;
    }
    if (!c.transport.empty()) {
        j["transport"]["kind"] = c.transport;
    }
    if (!c.runner.empty()) {
        j["transport"]["runner"] = c.runner;
        if (c.transport.empty()) {
            j["transport"]["kind"] = "process";
        }
    }
    if (!c.prompts_dir.empty()) {
        j["prompts_dir"] = c.prompts_dir;
    }
    return j;
}

// Returns nullptr after reporting on stderr.
EnginePtr open_engine(const Common& c, bool bench_scope, int& exit_code)
{
    json config;
    try {
        config = effective_config(c, bench_scope);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        exit_code = kExitConfig;
        return nullptr;
    }
    if (c.verbose) {
        std::cerr << "effective configuration (flags > config file > defaults):\n" << config.dump(2) << "\n";
    }
    const auto text = config.dump();
    Owned problems;
    if (pp_validate_config(text.c_str(), &problems.p) != PP_OK) {
        for (const auto& p : json::parse(problems.str())) {
            std::cerr << "config error: " << p.get<std::string>() << "\n";
        }
        exit_code = kExitConfig;
        return nullptr;
    }
    pp_engine* raw = nullptr;
    const auto st = pp_engine_create(text.c_str(), &raw);
    if (st != PP_OK) {
        std::cerr << pp_status_string(st) << ": " << pp_last_error() << "\n";
        exit_code = st == PP_E_CONFIG || st == PP_E_INVALID_ARGUMENT || st == PP_E_STORAGE_UNAVAILABLE ||
                            st == PP_E_CORRUPT_RECORD
                        ? kExitConfig
                        : kExitFailed;
        return nullptr;
    }
    return EnginePtr(raw);
}

void print_summary(const pp_record* record, std::ostream& out)
{
    Owned text;
    if (pp_record_summary(record, &text.p) == PP_OK) {
        out << text.str();
    }
}

std::vector<int> parse_k_values(const std::string& text)
{
    std::vector<int> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (const auto dash = part.find(".."); dash != std::string::npos) {
            const int lo = std::stoi(part.substr(0, dash));
            const int hi = std::stoi(part.substr(dash + 2));
            for (int k = lo; k <= hi; ++k) {
                out.push_back(k);
            }
        } else if (!part.empty()) {
            out.push_back(std::stoi(part));
        }
    }
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multi-path chart program synthesis with execution feedback"};
    app.require_subcommand(1);
    app.set_version_flag("--version", pp_version());

    // run
    Common run_opts;
    std::string query;
    std::string dataset;
    std::vector<std::string> data_args;
    std::string task_id;
    std::string run_out = "plotpath-run";
    auto* run = app.add_subcommand("run", "Run one query through the pipeline");
    add_common(run, run_opts);
    run->add_option("--query", query, "Visualization request")->required();
    run->add_option("--dataset", dataset, "Dataset description");
    run->add_option("--data", data_args, "Data file as name=path (repeatable)");
    run->add_option("--id", task_id, "Task id stored in the record");
    run->add_option("--out", run_out, "Output directory for the record")->capture_default_str();

    // bench
    Common bench_opts;
    std::string suite;
    std::string strategy;
    std::string bench_out = "plotpath-bench";
    bool resume = true;
    auto* bench = app.add_subcommand("bench", "Run a benchmark suite and write a scorecard");
    add_common(bench, bench_opts);
    bench->add_option("suite", suite, "Suite file (JSON lines)")->required();
    bench->add_option("--strategy", strategy, "Label for the scorecard's Methods column");
    bench->add_option("--out", bench_out, "Output directory")->capture_default_str();
    bench->add_flag("--resume,!--no-resume", resume, "Reuse persisted item records (default on)");

    // sweep
    Common sweep_opts;
    std::string sweep_suite;
    std::string k_values = "2..8";
    std::string sweep_out = "plotpath-sweep";
    bool sweep_resume = true;
    auto* sweep = app.add_subcommand("sweep", "Run a suite once per K and chart the results");
    add_common(sweep, sweep_opts);
    sweep->add_option("suite", sweep_suite, "Suite file (JSON lines)")->required();
    sweep->add_option("--k-values", k_values, "Comma list or range, e.g. 2,3,4 or 2..8")->capture_default_str();
    sweep->add_option("--out", sweep_out, "Output directory")->capture_default_str();
    sweep->add_flag("--resume,!--no-resume", sweep_resume, "Reuse persisted item records (default on)");

    // inspect
    std::string inspect_dir;
    bool inspect_json = false;
    auto* inspect = app.add_subcommand("inspect", "Pretty-print a persisted run record");
    inspect->add_option("record", inspect_dir, "Record directory")->required();
    inspect->add_flag("--json", inspect_json, "Print canonical JSON to stdout instead");

    // cassette
    std::string cassette_path;
    auto* cassette = app.add_subcommand("cassette", "Inspect recorded cassettes");
    cassette->require_subcommand(1);
    auto* info = cassette->add_subcommand("info", "Entry counts per role");
    info->add_option("file", cassette_path, "Cassette file")->required();
    auto* verify = cassette->add_subcommand("verify", "Check every line and fingerprint");
    verify->add_option("file", cassette_path, "Cassette file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    int exit_code = kExitOk;

    if (run->parsed()) {
        auto engine = open_engine(run_opts, false, exit_code);
        if (!engine) {
            return exit_code;
        }
        json task{{"task_id", task_id}, {"query", query}, {"dataset_description", dataset}};
        json files = json::array();
        for (const auto& d : data_args) {
            const auto eq = d.find('=');
            if (eq == std::string::npos || eq == 0) {
                std::cerr << "config error: --data expects name=path, got '" << d << "'\n";
                return kExitConfig;
            }
            files.push_back({{"name", d.substr(0, eq)}, {"path", d.substr(eq + 1)}});
        }
        task["data_files"] = files;
        pp_record* raw = nullptr;
        const auto st = pp_engine_run(engine.get(), task.dump().c_str(), run_out.c_str(), &raw);
        RecordPtr record(raw);
        if (record) {
            print_summary(record.get(), std::cerr);
            std::cerr << "record:   " << run_out << "/record.json\n";
            std::cerr << "script:   " << run_out << "/final.py\n";
        }
        if (st == PP_E_INVALID_ARGUMENT || st == PP_E_CONFIG) {
            std::cerr << "config error: " << pp_last_error() << "\n";
            return kExitConfig;
        }
        if (st != PP_OK) {
            std::cerr << "run failed: " << pp_status_string(st) << ": " << pp_last_error() << "\n";
            return kExitFailed;
        }
        return pp_record_final_ok(record.get()) ? kExitOk : kExitFailed;
    }

    if (bench->parsed()) {
        auto engine = open_engine(bench_opts, true, exit_code);
        if (!engine) {
            return exit_code;
        }
        Owned card;
        const auto st = pp_engine_bench(engine.get(), suite.c_str(), bench_out.c_str(), resume ? 1 : 0,
                                        strategy.empty() ? nullptr : strategy.c_str(), &card.p);
        if (st != PP_OK) {
            std::cerr << pp_status_string(st) << ": " << pp_last_error() << "\n";
            return st == PP_E_SUITE || st == PP_E_CONFIG ? kExitConfig : kExitFailed;
        }
        const auto j = json::parse(card.str());
        std::cerr << "items:            " << j["items"].size() << " (" << j["new_runs"] << " run, rest resumed)\n";
        std::cerr << "plot score:       " << (j["mean_plot_score"].is_null() ? std::string("n/a")
                                                                                 : j["mean_plot_score"].dump())
                  << "\n";
        std::cerr << "executable rate:  " << j["executable_rate"] << "%\n";
        std::cerr << "calls per row:    " << j["calls_per_row"] << "\n";
        std::cerr << "scorecard:        " << bench_out << "/scorecard.csv\n";
        return kExitOk;
    }

    if (sweep->parsed()) {
        std::vector<int> ks;
        try {
            ks = parse_k_values(k_values);
        } catch (const std::exception&) {
            std::cerr << "config error: cannot parse --k-values '" << k_values << "'\n";
            return kExitConfig;
        }
        auto engine = open_engine(sweep_opts, true, exit_code);
        if (!engine) {
            return exit_code;
        }
        Owned rows;
        const auto st = pp_engine_sweep(engine.get(), sweep_suite.c_str(), ks.data(), ks.size(), sweep_out.c_str(),
                                        sweep_resume ? 1 : 0, &rows.p);
        if (st != PP_OK) {
            std::cerr << pp_status_string(st) << ": " << pp_last_error() << "\n";
            return st == PP_E_SUITE || st == PP_E_CONFIG || st == PP_E_INVALID_ARGUMENT ? kExitConfig : kExitFailed;
        }
        for (const auto& r : json::parse(rows.str())) {
            std::cerr << "k=" << r["k"] << "  plot score " << r["mean_plot_score"].dump() << "  executable "
                      << r["executable_rate"] << "%  calls/row " << r["calls_per_row"] << "\n";
        }
        std::cerr << "chart: " << sweep_out << "/sweep.svg\n";
        return kExitOk;
    }

    if (inspect->parsed()) {
        pp_record* raw = nullptr;
        const auto st = pp_record_load(inspect_dir.c_str(), &raw);
        RecordPtr record(raw);
        if (st != PP_OK) {
            std::cerr << pp_status_string(st) << ": " << pp_last_error() << "\n";
            return kExitFailed;
        }
        if (inspect_json) {
            Owned j;
            pp_record_to_json(record.get(), &j.p);
            std::cout << j.str() << "\n";
        } else {
            print_summary(record.get(), std::cerr);
        }
        return kExitOk;
    }

    if (info->parsed()) {
        Owned j;
        const auto st = pp_cassette_info(cassette_path.c_str(), &j.p);
        if (st != PP_OK) {
            std::cerr << pp_status_string(st) << ": " << pp_last_error() << "\n";
            return kExitFailed;
        }
        std::cout << j.str() << "\n";
        return kExitOk;
    }

    if (verify->parsed()) {
        Owned j;
        const auto st = pp_cassette_verify(cassette_path.c_str(), &j.p);
        if (j.p != nullptr) {
            std::cout << j.str() << "\n";
        } else {
            std::cerr << pp_status_string(st) << ": " << pp_last_error() << "\n";
        }
        return st == PP_OK ? kExitOk : kExitFailed;
    }
    return kExitOk;
}
