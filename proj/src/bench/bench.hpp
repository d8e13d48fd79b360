#pragma once

#include "agents/prompts.hpp"
#include "core/types.hpp"
#include "executor/executor.hpp"
#include "gateway/gateway.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace plotpath::bench {

struct BenchItem {
    std::string item_id;
    std::string query;
    std::string dataset_description;
    std::vector<DataFile> data_files;
    std::optional<std::filesystem::path> ground_truth_image;

    [[nodiscard]] TaskInput task() const;
};

/// JSON lines, one item per line:
///   {"id", "query", "dataset_description", "data_files": [{"name","path"}], "gt_image"}
/// Relative paths resolve against the suite file's directory. Throws
/// Error{suite} with the line number on malformed lines, duplicate ids, or
/// referenced files that do not exist.
std::vector<BenchItem> load_suite(const std::filesystem::path& path);

/// The first number in `reply` if it is an integer in [0, 100].
std::optional<int> parse_score(std::string_view reply);

/// "yes"/"no" at the start of the reply, case-insensitive.
std::optional<bool> parse_yes_no(std::string_view reply);

/// Vision-model judge for generated plots.
class Judge {
public:
    Judge(gateway::Gateway& gateway, const agents::PromptSet& prompts, PipelineConfig config);

    /// Sends both images (candidate first) and the query to the judge role.
    /// One reprompt on an unparseable or out-of-range reply, then
    /// Error{scoring_failure}.
    int score_plot(const Bytes& candidate_png, const Bytes& ground_truth_png, const std::string& query,
                   gateway::Transcript* log = nullptr);

    /// Yes/no correctness question over the same judge prompt. This stands in
    /// for an external correctness checker and is only an approximation.
    std::optional<bool> judge_correct(const Bytes& candidate_png, const Bytes* ground_truth_png,
                                      const std::string& query, gateway::Transcript* log = nullptr);

private:
    gateway::Gateway& gateway_;
    const agents::PromptSet& prompts_;
    PipelineConfig config_;
};

/// Percentage of records whose final program rendered. Throws
/// Error{invalid_argument} on an empty list.
double executable_rate(std::span<const RunRecord> records);

struct ItemScore {
    std::string item_id;
    bool executable = false;
    std::optional<int> plot_score;
    std::optional<bool> correct;
    StageLedger ledger;
    std::string run_status;
    std::string warning;

    bool operator==(const ItemScore&) const = default;
};

struct Scorecard {
    std::string strategy;
    std::string model;
    Mode mode = Mode::full;
    int k = 0;
    std::vector<ItemScore> items;
    std::optional<double> mean_plot_score;
    std::size_t scored_items = 0;
    double executable_rate = 0.0;
    std::optional<double> correctness_rate;
    StageLedger ledger_totals;
    double calls_per_row = 0.0;
    std::size_t new_runs = 0; // items actually run (not resumed)

    /// Recomputes the aggregates from `items`.
    void aggregate();
};

struct SuiteOptions {
    std::filesystem::path out_dir;
    bool resume = true;
    std::size_t parallelism = 1;
    bool correctness_check = false;
    std::string strategy_label; // derived from the config when empty
};

std::string default_strategy_label(const PipelineConfig& config);

struct SweepRow {
    int k = 0;
    std::optional<double> mean_plot_score;
    double executable_rate = 0.0;
    double calls_per_row = 0.0;
    StageLedger ledger_totals;
};

class BenchRunner {
public:
    BenchRunner(gateway::Gateway& gateway, executor::RunnerTransport& transport, const agents::PromptSet& prompts,
                std::filesystem::path scratch_root = executor::default_scratch_root());

    /// One persisted record per item under <out_dir>/<item>/; already
    /// persisted items are loaded instead of rerun when resuming. Writes
    /// scorecard.{csv,md,json} into out_dir.
    Scorecard run_suite(std::span<const BenchItem> suite, const PipelineConfig& config, const SuiteOptions& options);

    /// One suite run per k under <out_dir>/k<k>/, plus sweep.csv, sweep.md
    /// and sweep.svg in out_dir.
    std::vector<SweepRow> k_sweep(std::span<const BenchItem> suite, std::span<const int> k_values,
                                  const PipelineConfig& config, const SuiteOptions& options);

private:
    ItemScore score_item(const BenchItem& item, const RunRecord& record, const PipelineConfig& config,
                         bool correctness_check);

    gateway::Gateway& gateway_;
    executor::RunnerTransport& transport_;
    const agents::PromptSet& prompts_;
    std::filesystem::path scratch_root_;
};

// ---- reports -------------------------------------------------------------

inline constexpr std::string_view kScoreFile = "score.json";

std::string scorecard_csv(const Scorecard& card);
std::string scorecard_markdown(const Scorecard& card);
nlohmann::json scorecard_json(const Scorecard& card);
void write_scorecard(const Scorecard& card, const std::filesystem::path& dir);

std::string sweep_csv(std::span<const SweepRow> rows);
std::string sweep_markdown(std::span<const SweepRow> rows);
/// Two-panel line chart (plot score and executable rate against K).
std::string sweep_svg(std::span<const SweepRow> rows);

nlohmann::json item_score_json(const ItemScore& score);
ItemScore item_score_from_json(const nlohmann::json& j);

} // namespace plotpath::bench
