#include "bench/bench.hpp"

#include "core/bytes.hpp"
#include "core/error.hpp"
#include "core/record_io.hpp"
#include "pipeline/pipeline.hpp"

#include <cctype>
#include <fstream>
#include <regex>
#include <set>

namespace plotpath::bench {

namespace fs = std::filesystem;
using nlohmann::json;
using gateway::ChatMessage;
using gateway::ChatRequest;
using gateway::Speaker;

TaskInput BenchItem::task() const
{
    return TaskInput{item_id, query, dataset_description, data_files};
}

std::vector<BenchItem> load_suite(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::suite, "cannot open suite " + path.string());
    }
    const auto base = path.has_parent_path() ? path.parent_path() : fs::path(".");
    const auto resolve = [&](const std::string& p) {
        const fs::path candidate(p);
        return candidate.is_absolute() ? candidate : base / candidate;
    };
    std::vector<BenchItem> items;
    std::set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const auto where = path.string() + ":" + std::to_string(lineno) + ": ";
        BenchItem item;
        try {
            const auto j = json::parse(line);
            item.item_id = j.at("id").get<std::string>();
            item.query = j.at("query").get<std::string>();
            item.dataset_description = j.value("dataset_description", std::string{});
            if (j.contains("data_files")) {
                for (const auto& f : j.at("data_files")) {
                    item.data_files.push_back(
                        DataFile{f.at("name").get<std::string>(), resolve(f.at("path").get<std::string>())});
                }
            }
            if (j.contains("gt_image") && !j.at("gt_image").is_null()) {
                item.ground_truth_image = resolve(j.at("gt_image").get<std::string>());
            }
        } catch (const json::exception& e) {
            throw Error(ErrorCode::suite, where + e.what());
        }
        if (item.query.find_first_not_of(" \t\r\n") == std::string::npos) {
            throw Error(ErrorCode::suite, where + "item '" + item.item_id + "' has an empty query");
        }
        if (!ids.insert(item.item_id).second) {
            throw Error(ErrorCode::suite, where + "duplicate item id '" + item.item_id + "'");
        }
        for (const auto& f : item.data_files) {
            if (!fs::is_regular_file(f.path)) {
                throw Error(ErrorCode::suite, where + "missing data file " + f.path.string());
            }
        }
        if (item.ground_truth_image && !fs::is_regular_file(*item.ground_truth_image)) {
            throw Error(ErrorCode::suite, where + "missing ground-truth image " + item.ground_truth_image->string());
        }
        items.push_back(std::move(item));
    }
    return items;
}

std::optional<int> parse_score(std::string_view reply)
{
    static const std::regex kNumber(R"(-?\d+(\.\d+)?)");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(reply.begin(), reply.end(), m, kNumber) || m[1].matched) {
        return std::nullopt;
    }
    const auto token = m.str(0);
    if (token.front() == '-' || token.size() > 3) {
        return std::nullopt;
    }
    const int value = std::stoi(token);
    if (value < 0 || value > 100) {
        return std::nullopt;
    }
    return value;
}

std::optional<bool> parse_yes_no(std::string_view reply)
{
    std::size_t i = 0;
    while (i < reply.size() && !std::isalpha(static_cast<unsigned char>(reply[i]))) {
        ++i;
    }
    std::string word;
    while (i < reply.size() && std::isalpha(static_cast<unsigned char>(reply[i]))) {
        word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(reply[i]))));
        ++i;
    }
    if (word == "yes") {
        return true;
    }
    if (word == "no") {
        return false;
    }
    return std::nullopt;
}

Judge::Judge(gateway::Gateway& gateway, const agents::PromptSet& prompts, PipelineConfig config)
    : gateway_(gateway), prompts_(prompts), config_(std::move(config))
{
}

int Judge::score_plot(const Bytes& candidate_png, const Bytes& ground_truth_png, const std::string& query,
                      gateway::Transcript* log)
{
    const auto& prompt = prompts_.get("judge");
    ChatRequest request;
    request.role = RoleTag::judge;
    request.model_id = config_.models.judge;
    request.temperature = config_.judge_temperature;
    request.messages.push_back(ChatMessage{Speaker::system, prompt.system_text, {}});
    request.messages.push_back(ChatMessage{Speaker::user, prompt.render({{"query", query}}), {candidate_png, ground_truth_png}});
    const auto reply = gateway_.complete(request, log);
    if (auto score = parse_score(reply.text)) {
        return *score;
    }
    request.reprompt = true;
    request.messages.push_back(ChatMessage{
        Speaker::user,
        "Your previous reply was \"" + reply.text + "\". Reply with a single integer from 0 to 100 and nothing else.",
        {}});
    const auto retry = gateway_.complete(request, log);
    if (auto score = parse_score(retry.text)) {
        return *score;
    }
    throw Error(ErrorCode::scoring_failure, "judge reply is not a score in [0, 100]: " + retry.text.substr(0, 80));
}

std::optional<bool> Judge::judge_correct(const Bytes& candidate_png, const Bytes* ground_truth_png,
                                         const std::string& query, gateway::Transcript* log)
{
    const auto& prompt = prompts_.get("judge");
    ChatRequest request;
    request.role = RoleTag::judge;
    request.model_id = config_.models.judge;
    request.temperature = config_.judge_temperature;
    request.messages.push_back(ChatMessage{Speaker::system, prompt.system_text, {}});
    ChatMessage user{Speaker::user, prompt.render({{"query", query}}), {candidate_png}};
    if (ground_truth_png) {
        user.images.push_back(*ground_truth_png);
    }
    request.messages.push_back(std::move(user));
    request.messages.push_back(ChatMessage{
        Speaker::user,
        "Instead of a score, answer only yes or no: does the generated chart correctly fulfil the request?",
        {}});
    try {
        return parse_yes_no(gateway_.complete(request, log).text);
    } catch (const Error&) {
        return std::nullopt;
    }
}

double executable_rate(std::span<const RunRecord> records)
{
    if (records.empty()) {
        throw Error(ErrorCode::invalid_argument, "executable rate of an empty record list");
    }
    std::size_t ok = 0;
    for (const auto& r : records) {
        if (r.final_ok()) {
            ++ok;
        }
    }
    return 100.0 * static_cast<double>(ok) / static_cast<double>(records.size());
}

void Scorecard::aggregate()
{
    ledger_totals = {};
    std::size_t executable = 0;
    std::size_t judged = 0;
    std::size_t correct_count = 0;
    double sum = 0.0;
    scored_items = 0;
    for (const auto& item : items) {
        ledger_totals += item.ledger;
        if (item.executable) {
            ++executable;
        }
        if (item.plot_score) {
            sum += *item.plot_score;
            ++scored_items;
        }
        if (item.correct) {
            ++judged;
            if (*item.correct) {
                ++correct_count;
            }
        }
    }
    const auto n = static_cast<double>(items.size());
    executable_rate = items.empty() ? 0.0 : 100.0 * static_cast<double>(executable) / n;
    mean_plot_score = scored_items == 0 ? std::nullopt : std::optional(sum / static_cast<double>(scored_items));
    correctness_rate =
        judged == 0 ? std::nullopt : std::optional(100.0 * static_cast<double>(correct_count) / static_cast<double>(judged));
    calls_per_row = items.empty() ? 0.0 : static_cast<double>(ledger_total(ledger_totals)) / n;
}

std::string default_strategy_label(const PipelineConfig& config)
{
    const auto k = std::to_string(config.k);
    switch (config.mode) {
    case Mode::full: return "Multi-path (K=" + k + ")";
    case Mode::no_feedback: return "Multi-path w/o visual feedback (K=" + k + ")";
    case Mode::binary_feedback: return "Multi-path binary-only feedback (K=" + k + ")";
    case Mode::zero_shot: return "Zero-Shot";
    case Mode::cot: return "CoT Prompting";
    }
    return "unknown";
}

json item_score_json(const ItemScore& s)
{
    return {{"item_id", s.item_id},
            {"executable", s.executable},
            {"plot_score", s.plot_score ? json(*s.plot_score) : json(nullptr)},
            {"correct", s.correct ? json(*s.correct) : json(nullptr)},
            {"ledger",
             {{"query_expansion", s.ledger.query_expansion},
              {"code_generation", s.ledger.code_generation},
              {"visual_feedback", s.ledger.visual_feedback},
              {"editor", s.ledger.editor}}},
            {"run_status", s.run_status},
            {"warning", s.warning}};
}

ItemScore item_score_from_json(const json& j)
{
    ItemScore s;
    s.item_id = j.at("item_id").get<std::string>();
    s.executable = j.at("executable").get<bool>();
    if (!j.at("plot_score").is_null()) {
        s.plot_score = j.at("plot_score").get<int>();
    }
    if (!j.at("correct").is_null()) {
        s.correct = j.at("correct").get<bool>();
    }
    const auto& l = j.at("ledger");
    s.ledger = StageLedger{l.at("query_expansion").get<int>(), l.at("code_generation").get<int>(),
                           l.at("visual_feedback").get<int>(), l.at("editor").get<int>()};
    s.run_status = j.value("run_status", std::string{});
    s.warning = j.value("warning", std::string{});
    return s;
}

BenchRunner::BenchRunner(gateway::Gateway& gateway, executor::RunnerTransport& transport,
                         const agents::PromptSet& prompts, fs::path scratch_root)
    : gateway_(gateway), transport_(transport), prompts_(prompts), scratch_root_(std::move(scratch_root))
{
}

ItemScore BenchRunner::score_item(const BenchItem& item, const RunRecord& record, const PipelineConfig& config,
                                  bool correctness_check)
{
    ItemScore score;
    score.item_id = item.item_id;
    score.executable = record.final_ok();
    score.ledger = record.ledger;
    score.run_status = std::string(to_string(record.status));
    if (!item.ground_truth_image && !correctness_check) {
        return score;
    }
    Judge judge(gateway_, prompts_, config);
    std::optional<Bytes> gt;
    if (item.ground_truth_image) {
        gt = read_file(*item.ground_truth_image);
    }
    if (!score.executable) {
        // nothing rendered: the plot cannot resemble the reference
        if (gt) {
            score.plot_score = 0;
        }
        return score;
    }
    const auto& figure = record.final_outcome->figures.front().png;
    if (gt) {
        try {
            score.plot_score = judge.score_plot(figure, *gt, item.query);
        } catch (const Error& e) {
            score.warning = std::string(to_string(e.code())) + ": " + e.what();
        }
    }
    if (correctness_check) {
        score.correct = judge.judge_correct(figure, gt ? &*gt : nullptr, item.query);
    }
    return score;
}

Scorecard BenchRunner::run_suite(std::span<const BenchItem> suite, const PipelineConfig& config,
                                 const SuiteOptions& options)
{
    if (const auto problems = validate_config(config); !problems.empty()) {
        throw Error(ErrorCode::config, problems.front());
    }
    std::error_code ec;
    fs::create_directories(options.out_dir, ec);
    if (ec) {
        throw Error(ErrorCode::storage_unavailable, "cannot create " + options.out_dir.string());
    }

    Scorecard card;
    card.strategy = options.strategy_label.empty() ? default_strategy_label(config) : options.strategy_label;
    card.model = is_multi_path(config.mode) ? config.models.code : config.models.baseline;
    card.mode = config.mode;
    card.k = is_multi_path(config.mode) ? config.k : 0;
    card.items.resize(suite.size());
    std::vector<char> fresh(suite.size(), 0);

    pipeline::parallel_for(suite.size(), options.parallelism, [&](std::size_t i) {
        const auto& item = suite[i];
        const auto dir = options.out_dir / safe_file_name(item.item_id);
        std::optional<RunRecord> record;
        if (options.resume && has_record(dir)) {
            try {
                record = load_run(dir);
                if (fs::is_regular_file(dir / kScoreFile)) {
                    card.items[i] = item_score_from_json(json::parse(read_text(dir / kScoreFile)));
                    return;
                }
            } catch (const std::exception&) {
                record.reset(); // unreadable: run again
            }
        }
        if (!record) {
            try {
                pipeline::Pipeline pipe(gateway_, transport_, prompts_, config, scratch_root_);
                record = pipe.run(item.task());
            } catch (const Error& e) {
                RunRecord failed;
                failed.input = item.task();
                failed.config = config;
                failed.status = RunStatus::failed;
                failed.failure = std::string(to_string(e.code())) + ": " + e.what();
                failed.started = failed.finished = Clock::now();
                record = std::move(failed);
            }
            persist_run(*record, dir);
            fresh[i] = 1;
        }
        auto score = score_item(item, *record, config, options.correctness_check);
        if (record->status == RunStatus::failed && score.warning.empty()) {
            score.warning = record->failure;
        }
        write_text_atomic(dir / kScoreFile, item_score_json(score).dump(2, ' ', false, json::error_handler_t::replace) + "\n");
        card.items[i] = std::move(score);
    });

    card.new_runs = static_cast<std::size_t>(std::count(fresh.begin(), fresh.end(), 1));
    card.aggregate();
    write_scorecard(card, options.out_dir);
    return card;
}

std::vector<SweepRow> BenchRunner::k_sweep(std::span<const BenchItem> suite, std::span<const int> k_values,
                                           const PipelineConfig& config, const SuiteOptions& options)
{
    if (!is_multi_path(config.mode)) {
        throw Error(ErrorCode::config, "a K sweep needs a multi-path mode");
    }
    for (int k : k_values) {
        if (k < 1 || k > 8) {
            throw Error(ErrorCode::config, "sweep values must lie in [1, 8], got " + std::to_string(k));
        }
    }
    std::vector<SweepRow> rows;
    for (int k : k_values) {
        auto cfg = config;
        cfg.k = k;
        auto opts = options;
        opts.out_dir = options.out_dir / ("k" + std::to_string(k));
        opts.strategy_label = options.strategy_label.empty() ? std::string{} : options.strategy_label + " K=" + std::to_string(k);
        const auto card = run_suite(suite, cfg, opts);
        rows.push_back(SweepRow{k, card.mean_plot_score, card.executable_rate, card.calls_per_row, card.ledger_totals});
    }
    write_text_atomic(options.out_dir / "sweep.csv", sweep_csv(rows));
    write_text_atomic(options.out_dir / "sweep.md", sweep_markdown(rows));
    write_text_atomic(options.out_dir / "sweep.svg", sweep_svg(rows));
    return rows;
}

} // namespace plotpath::bench
