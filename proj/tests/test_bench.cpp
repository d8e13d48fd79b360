#include "bench/bench.hpp"
#include "core/bytes.hpp"
#include "core/error.hpp"
#include "core/record_io.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

using namespace plotpath;
using namespace plotpath::bench;
using gateway::ChatRequest;
namespace fs = std::filesystem;

namespace {

fs::path desk_suite()
{
    return testing::source_dir() / "suites" / "desk" / "suite.jsonl";
}

PipelineConfig config_for(int k, Mode mode = Mode::full)
{
    PipelineConfig c;
    c.k = k;
    c.mode = mode;
    c.exec_timeout_s = 5.0;
    return c;
}

// Judge score derived from the query alone, so a test can predict it.
int expected_score(const std::string& query)
{
    unsigned h = 0;
    for (const unsigned char ch : query) {
        h = h * 31 + ch;
    }
    return static_cast<int>(h % 101);
}

std::string query_of(const ChatRequest& r)
{
    return r.messages[1].text;
}

// Items whose query mentions `broken_word` get a synthesized script that
// fails; the judge scores by expected_score over the query it finds.
std::shared_ptr<gateway::ChatBackend> suite_backend(const std::vector<BenchItem>& suite, std::string broken_word)
{
    auto base = testing::standard_backend();
    auto syn = std::make_shared<testing::RoleOverride>(base, RoleTag::syn, [suite, broken_word](const ChatRequest& r) {
        const bool broken = std::any_of(suite.begin(), suite.end(), [&](const BenchItem& item) {
            return item.query.find(broken_word) != std::string::npos &&
                   query_of(r).find(item.query) != std::string::npos;
        });
        return testing::fenced(std::string(broken ? "# stub: error ValueError: bad\n" : "") + "plt.plot([1])");
    });
    return std::make_shared<testing::RoleOverride>(syn, RoleTag::judge, [suite](const ChatRequest& r) {
        if (r.messages.back().text.find("yes or no") != std::string::npos) {
            return std::string("yes");
        }
        for (const auto& item : suite) {
            if (query_of(r).find(item.query) != std::string::npos) {
                return std::to_string(expected_score(item.query));
            }
        }
        return std::string("50");
    });
}

struct Bench {
    explicit Bench(std::shared_ptr<gateway::ChatBackend> backend)
        : gateway(std::move(backend), testing::fast_retry()), runner(gateway, transport, prompts, scratch.path())
    {
    }

    testing::TempDir scratch;
    testing::TempDir out;
    gateway::Gateway gateway;
    executor::StubTransport transport;
    agents::PromptSet prompts = agents::PromptSet::builtin();
    BenchRunner runner;
};

SuiteOptions options_in(const fs::path& dir)
{
    SuiteOptions o;
    o.out_dir = dir;
    return o;
}

std::string suite_error(const std::string& content, const testing::TempDir& dir)
{
    const auto path = dir / "suite.jsonl";
    std::ofstream(path) << content;
    try {
        (void)load_suite(path);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::suite);
        return e.what();
    }
    FAIL("suite loaded");
    return {};
}

} // namespace

TEST_CASE("the desk suite loads with resolved paths")
{
    const auto suite = load_suite(desk_suite());
    REQUIRE(suite.size() == 10);
    for (const auto& item : suite) {
        CHECK_FALSE(item.query.empty());
        for (const auto& f : item.data_files) {
            CHECK(fs::is_regular_file(f.path));
        }
    }
    CHECK_FALSE(suite.back().ground_truth_image.has_value());
    CHECK(suite.front().task().task_id == suite.front().item_id);
}

TEST_CASE("suite errors name the line and the offending value")
{
    testing::TempDir dir;
    const std::string ok = R"({"id":"a","query":"q"})";
    auto msg = suite_error(ok + "\n" + ok + "\n", dir);
    CHECK(msg.find(":2:") != std::string::npos);
    CHECK(msg.find("'a'") != std::string::npos);

    msg = suite_error(R"({"id":"b","query":"q","gt_image":"nowhere.png"})", dir);
    CHECK(msg.find("nowhere.png") != std::string::npos);

    msg = suite_error(R"({"id":"c","query":"q","data_files":[{"name":"d","path":"gone.csv"}]})", dir);
    CHECK(msg.find("gone.csv") != std::string::npos);

    msg = suite_error("{\"id\":\"d\"}\n", dir);
    CHECK(msg.find(":1:") != std::string::npos);
    msg = suite_error(R"({"id":"e","query":"  "})", dir);
    CHECK(msg.find("empty query") != std::string::npos);
    CHECK_THROWS_AS((void)load_suite(dir / "absent.jsonl"), Error);
}

TEST_CASE("judge replies parse into scores in range or not at all")
{
    CHECK(parse_score("87") == 87);
    CHECK(parse_score("Score: 0") == 0);
    CHECK(parse_score("100/100") == 100);
    CHECK(parse_score(" I'd say 42, maybe 43") == 42);
    CHECK_FALSE(parse_score("Score: 101").has_value());
    CHECK_FALSE(parse_score("-5").has_value());
    CHECK_FALSE(parse_score("87.5").has_value());
    CHECK_FALSE(parse_score("great").has_value());
    CHECK(parse_yes_no("Yes.") == true);
    CHECK(parse_yes_no("**no**, because") == false);
    CHECK_FALSE(parse_yes_no("maybe").has_value());
}

TEST_CASE("the judge reprompts once and then reports a scoring failure")
{
    auto backend = std::make_shared<gateway::ScriptedBackend>();
    int calls = 0;
    backend->add_rule(RoleTag::judge, "", [&calls](const ChatRequest&) { return ++calls == 1 ? "Score: 101" : "64"; });
    gateway::Gateway gw(backend, testing::fast_retry());
    const auto prompts = agents::PromptSet::builtin();
    Judge judge(gw, prompts, PipelineConfig{});
    const Bytes png{1, 2, 3};
    gateway::Transcript log;
    CHECK(judge.score_plot(png, png, "q", &log) == 64);
    CHECK(log.size() == 2);
    CHECK(log.entries()[1].reprompt);
    CHECK(log.entries()[0].attachments == 2);

    auto stubborn = std::make_shared<gateway::ScriptedBackend>();
    stubborn->add_rule(RoleTag::judge, "", std::string("Score: 101"));
    gateway::Gateway gw2(stubborn, testing::fast_retry());
    Judge strict(gw2, prompts, PipelineConfig{});
    try {
        (void)strict.score_plot(png, png, "q");
        FAIL("expected scoring_failure");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::scoring_failure);
    }
    CHECK(stubborn->requests().size() == 2);
    CHECK(stubborn->requests()[0].temperature == PipelineConfig{}.judge_temperature);
}

TEST_CASE("scoring an image against itself stays in range")
{
    const auto gt = read_file(testing::source_dir() / "suites" / "desk" / "gt" / "sales_trend.png");
    auto backend = std::make_shared<gateway::ScriptedBackend>();
    backend->add_rule(RoleTag::judge, "", std::string("100"));
    gateway::Gateway gw(backend, testing::fast_retry());
    const auto prompts = agents::PromptSet::builtin();
    Judge judge(gw, prompts, PipelineConfig{});
    const auto s = judge.score_plot(gt, gt, "q");
    CHECK(s >= 0);
    CHECK(s <= 100);
    CHECK(backend->requests()[0].messages[1].images[0] == gt);
}

TEST_CASE("executable rate counts rendered finals")
{
    std::vector<RunRecord> records(5);
    for (std::size_t i = 0; i < records.size(); ++i) {
        records[i].final_outcome = i < 3 ? ExecutionOutcome::rendered({Figure{"a.png", {1}}}, 1)
                                         : ExecutionOutcome::failed("boom", 1);
    }
    CHECK(executable_rate(records) == doctest::Approx(60.0));
    records.resize(1);
    CHECK(executable_rate(records) == doctest::Approx(100.0));
    records[0].final_outcome.reset();
    CHECK(executable_rate(records) == doctest::Approx(0.0));
    CHECK_THROWS_AS(executable_rate(std::span<const RunRecord>{}), Error);
}

TEST_CASE("scorecard aggregates follow the item scores")
{
    Scorecard card;
    card.items = {
        ItemScore{"a", true, 80, true, StageLedger{1, 3, 3, 1}, "completed", ""},
        ItemScore{"b", false, 0, std::nullopt, StageLedger{1, 3, 3, 1}, "completed", ""},
        ItemScore{"c", true, std::nullopt, false, StageLedger{1, 3, 3, 1}, "completed", "scoring-failure: x"},
        ItemScore{"d", true, 70, std::nullopt, StageLedger{1, 3, 3, 1}, "completed", ""},
    };
    card.aggregate();
    CHECK(card.scored_items == 3);
    CHECK(*card.mean_plot_score == doctest::Approx(50.0));
    CHECK(card.executable_rate == doctest::Approx(75.0));
    CHECK(*card.correctness_rate == doctest::Approx(50.0));
    CHECK(card.ledger_totals == StageLedger{4, 12, 12, 4});
    CHECK(card.calls_per_row == doctest::Approx(8.0));

    Scorecard empty;
    empty.aggregate();
    CHECK_FALSE(empty.mean_plot_score.has_value());
    CHECK(empty.executable_rate == 0.0);

    for (const auto& item : card.items) {
        CHECK(item_score_from_json(item_score_json(item)) == item);
    }
}

TEST_CASE("a full suite run persists every item and meets the call ledger")
{
    const auto suite = load_suite(desk_suite());
    Bench bench(suite_backend(suite, "rain"));
    const auto card = bench.runner.run_suite(suite, config_for(3), options_in(bench.out.path()));
    CHECK(card.items.size() == 10);
    CHECK(card.new_runs == 10);
    CHECK(card.ledger_totals == StageLedger{10, 30, 30, 10});
    CHECK(ledger_total(card.ledger_totals) == 80);
    CHECK(card.calls_per_row == doctest::Approx(8.0));
    CHECK(card.strategy == "Multi-path (K=3)");
    for (const auto& item : suite) {
        CHECK(has_record(bench.out / safe_file_name(item.item_id)));
    }
    for (const auto* name : {"scorecard.csv", "scorecard.md", "scorecard.json"}) {
        CHECK(fs::is_regular_file(bench.out / name));
    }

    const auto csv = read_text(bench.out / "scorecard.csv");
    CHECK(csv.rfind("item_id,executable,plot_score,correct,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
    const auto md = read_text(bench.out / "scorecard.md");
    CHECK(md.find("| Multi-path (K=3) |") != std::string::npos);
    CHECK(md.find("Total Iterations") != std::string::npos);
}

TEST_CASE("persisted results reproduce the reported metrics")
{
    const auto suite = load_suite(desk_suite());
    Bench bench(suite_backend(suite, "rain"));
    (void)bench.runner.run_suite(suite, config_for(2), options_in(bench.out.path()));

    // Recomputed from record.json files and the judge rule, not from score.json.
    double score_sum = 0.0;
    int scored = 0;
    int executable = 0;
    for (const auto& item : suite) {
        const auto record = nlohmann::json::parse(read_text(bench.out / safe_file_name(item.item_id) / "record.json"));
        const bool ok = !record["final_outcome"].is_null() && record["final_outcome"]["ok"].get<bool>();
        executable += ok ? 1 : 0;
        CHECK(ok == (item.query.find("rain") == std::string::npos));
        if (item.ground_truth_image) {
            score_sum += ok ? expected_score(item.query) : 0;
            ++scored;
        }
    }
    const auto card = nlohmann::json::parse(read_text(bench.out / "scorecard.json"));
    CHECK(std::abs(card["mean_plot_score"].get<double>() - score_sum / scored) < 1e-9);
    CHECK(std::abs(card["executable_rate"].get<double>() - 100.0 * executable / suite.size()) < 1e-9);
    CHECK(card["scored_items"] == scored);
    CHECK(executable < 10);
}

TEST_CASE("baselines in a suite run cost one call per item")
{
    const auto suite = load_suite(desk_suite());
    Bench bench(suite_backend(suite, "rain"));
    const auto card = bench.runner.run_suite(suite, config_for(3, Mode::zero_shot), options_in(bench.out.path()));
    CHECK(card.ledger_totals == StageLedger{0, 10, 0, 0});
    CHECK(card.k == 0);
    CHECK(card.strategy == "Zero-Shot");
    CHECK(card.executable_rate == doctest::Approx(100.0));
}

TEST_CASE("resuming runs only the items without a record")
{
    const auto suite = load_suite(desk_suite());
    Bench bench(suite_backend(suite, "rain"));
    const std::span<const BenchItem> first4(suite.data(), 4);
    CHECK(bench.runner.run_suite(first4, config_for(3), options_in(bench.out.path())).new_runs == 4);
    const auto resumed = bench.runner.run_suite(suite, config_for(3), options_in(bench.out.path()));
    CHECK(resumed.new_runs == 6);
    CHECK(resumed.ledger_totals == StageLedger{10, 30, 30, 10});
    CHECK(bench.runner.run_suite(suite, config_for(3), options_in(bench.out.path())).new_runs == 0);

    fs::remove(bench.out / safe_file_name(suite[5].item_id) / "record.json");
    auto fresh = options_in(bench.out.path());
    CHECK(bench.runner.run_suite(suite, config_for(3), fresh).new_runs == 1);
    fresh.resume = false;
    CHECK(bench.runner.run_suite(suite, config_for(3), fresh).new_runs == 10);
}

TEST_CASE("a K sweep writes one scorecard per K plus the sweep reports")
{
    const auto all = load_suite(desk_suite());
    const std::span<const BenchItem> suite(all.data(), 3);
    Bench bench(suite_backend(all, "rain"));
    const std::vector<int> ks{2, 3, 4};
    const auto rows = bench.runner.k_sweep(suite, ks, config_for(3), options_in(bench.out.path()));
    REQUIRE(rows.size() == 3);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].k == ks[i]);
        CHECK(rows[i].calls_per_row == doctest::Approx(2.0 * ks[i] + 2.0));
        CHECK(fs::is_regular_file(bench.out / ("k" + std::to_string(ks[i])) / "scorecard.json"));
    }
    for (const auto* name : {"sweep.csv", "sweep.md", "sweep.svg"}) {
        CHECK(fs::is_regular_file(bench.out / name));
    }
    CHECK(read_text(bench.out / "sweep.svg").find("<svg") != std::string::npos);
    const auto sweep = read_text(bench.out / "sweep.csv");
    CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 4);

    const std::vector<int> eight{8};
    const auto big = bench.runner.k_sweep(suite.first(1), eight, config_for(3), options_in(bench.out / "big"));
    CHECK(big[0].calls_per_row == doctest::Approx(18.0));

    const std::vector<int> nine{9};
    CHECK_THROWS_AS(bench.runner.k_sweep(suite, nine, config_for(3), options_in(bench.out / "bad")), Error);
    CHECK_THROWS_AS(bench.runner.k_sweep(suite, ks, config_for(3, Mode::cot), options_in(bench.out / "bad")), Error);
}

TEST_CASE("the optional correctness check asks the judge a yes or no question")
{
    const auto all = load_suite(desk_suite());
    const std::span<const BenchItem> suite(all.data() + 8, 2);
    Bench bench(suite_backend(all, "nothing matches this"));
    auto options = options_in(bench.out.path());
    options.correctness_check = true;
    const auto card = bench.runner.run_suite(suite, config_for(2), options);
    REQUIRE(card.correctness_rate.has_value());
    CHECK(*card.correctness_rate == doctest::Approx(100.0));
    // the item without a reference image is judged for correctness but not scored
    CHECK(card.scored_items == 1);
    CHECK(card.items[1].correct == true);
    CHECK_FALSE(card.items[1].plot_score.has_value());
}
