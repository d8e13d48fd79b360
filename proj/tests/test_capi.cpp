// Exercises the shared library through its C interface only.
#include <plotpath/plotpath.h>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kSource = PLOTPATH_SOURCE_DIR;

struct Scratch {
    Scratch()
    {
        std::random_device rd;
        path = fs::temp_directory_path() / ("plotpath-capi-" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~Scratch()
    {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    fs::path path;
};

std::string take(char* s)
{
    std::string out = s ? s : "";
    pp_string_free(s);
    return out;
}

struct EngineDeleter {
    void operator()(pp_engine* e) const { pp_engine_destroy(e); }
};
struct RecordDeleter {
    void operator()(pp_record* r) const { pp_record_destroy(r); }
};
using EnginePtr = std::unique_ptr<pp_engine, EngineDeleter>;
using RecordPtr = std::unique_ptr<pp_record, RecordDeleter>;

json base_config(const Scratch& s)
{
    return {{"backend", {{"mode", "scripted"}, {"rules", (kSource / "demo" / "rules.json").string()}}},
            {"transport", {{"kind", "stub"}}},
            {"retry", {{"max_attempts", 2}, {"base_delay_ms", 1}}},
            {"work_dir", (s.path / "work").string()}};
}

EnginePtr make_engine(const json& config)
{
    pp_engine* e = nullptr;
    const auto st = pp_engine_create(config.dump().c_str(), &e);
    INFO(pp_last_error());
    REQUIRE(st == PP_OK);
    return EnginePtr(e);
}

const std::string kTask =
    R"({"task_id":"demo","query":"Plot revenue per month","dataset_description":"sales.csv: month, revenue"})";

std::string canonical(const pp_record* r)
{
    char* text = nullptr;
    REQUIRE(pp_record_to_json(r, &text) == PP_OK);
    return take(text);
}

} // namespace

TEST_CASE("version and status strings are available")
{
    CHECK(std::string(pp_version()).size() >= 5);
    CHECK(std::string(pp_status_string(PP_OK)) == "ok");
    CHECK(std::string(pp_status_string(PP_E_CONFIG)) == "config");
    CHECK(std::string(pp_status_string(static_cast<pp_status>(77))) == "unknown");
}

TEST_CASE("config validation lists every problem")
{
    char* errors = nullptr;
    CHECK(pp_validate_config(R"({"pipeline":{"k":0,"exec_timeout":-1}})", &errors) == PP_E_CONFIG);
    const auto problems = json::parse(take(errors));
    CHECK(problems.size() >= 2);
    CHECK(std::string(pp_last_error()).find("k") != std::string::npos);

    CHECK(pp_validate_config("{not json", &errors) == PP_E_CONFIG);
    take(errors);
    CHECK(pp_validate_config(R"({"backend":{"mode":"replay","cassette":"/nonexistent.jsonl"}})", &errors) ==
          PP_E_CONFIG);
    CHECK(take(errors).find("cassette") != std::string::npos);

    Scratch s;
    CHECK(pp_validate_config(base_config(s).dump().c_str(), &errors) == PP_OK);
    CHECK(take(errors) == "[]");

    pp_engine* e = nullptr;
    CHECK(pp_engine_create(R"({"transport":{"kind":"process"}})", &e) == PP_E_CONFIG);
    CHECK(e == nullptr);
}

TEST_CASE("null arguments are rejected with a message")
{
    CHECK(pp_engine_run(nullptr, kTask.c_str(), nullptr, nullptr) == PP_E_INVALID_ARGUMENT);
    CHECK(std::string(pp_last_error()).size() > 0);
    CHECK(pp_record_load(nullptr, nullptr) == PP_E_INVALID_ARGUMENT);
    CHECK(pp_record_final_ok(nullptr) == 0);
    pp_engine_destroy(nullptr);
    pp_record_destroy(nullptr);
    pp_string_free(nullptr);
}

TEST_CASE("a run persists a record that loads back identically")
{
    Scratch s;
    auto engine = make_engine(base_config(s));
    pp_record* raw = nullptr;
    const auto out = s.path / "run";
    REQUIRE(pp_engine_run(engine.get(), kTask.c_str(), out.string().c_str(), &raw) == PP_OK);
    RecordPtr record(raw);
    CHECK(pp_record_final_ok(record.get()) == 1);
    CHECK(fs::is_regular_file(out / "record.json"));
    CHECK(fs::is_regular_file(out / "final.py"));

    const auto j = json::parse(canonical(record.get()));
    CHECK(j["schema"] == "vispath/1");
    CHECK(j["ledger"]["query_expansion"] == 1);
    CHECK(j["candidates"].size() == 3);
    CHECK_FALSE(j.contains("timings"));

    pp_record* loaded = nullptr;
    REQUIRE(pp_record_load(out.string().c_str(), &loaded) == PP_OK);
    RecordPtr back(loaded);
    CHECK(canonical(back.get()) == canonical(record.get()));

    char* text = nullptr;
    REQUIRE(pp_record_summary(back.get(), &text) == PP_OK);
    const auto summary = take(text);
    CHECK(summary.find("candidates: 3") != std::string::npos);
    CHECK(summary.find("total=8") != std::string::npos);
    CHECK(summary.find("wall") != std::string::npos);

    CHECK(pp_record_load((s.path / "nowhere").string().c_str(), &loaded) != PP_OK);
    CHECK(pp_engine_run(engine.get(), "{\"query\":\"\"}", nullptr, &raw) == PP_E_INVALID_ARGUMENT);
}

TEST_CASE("recorded runs replay to identical records without the scripted backend")
{
    Scratch s;
    const auto cassette = (s.path / "demo.jsonl").string();
    auto record_config = base_config(s);
    record_config["backend"] = {{"mode", "record"},
                                {"inner", "scripted"},
                                {"rules", (kSource / "demo" / "rules.json").string()},
                                {"cassette", cassette}};
    std::string recorded;
    {
        auto engine = make_engine(record_config);
        pp_record* raw = nullptr;
        REQUIRE(pp_engine_run(engine.get(), kTask.c_str(), nullptr, &raw) == PP_OK);
        RecordPtr r(raw);
        recorded = canonical(r.get());
    }

    char* info = nullptr;
    REQUIRE(pp_cassette_info(cassette.c_str(), &info) == PP_OK);
    const auto j = json::parse(take(info));
    // identical review requests share one fingerprint, so 8 calls leave 6 entries
    CHECK(j["entries"] == 6);
    CHECK(j["roles"]["mpa"] == 1);
    CHECK(j["roles"]["code"] == 3);
    CHECK(j["roles"]["fb"] == 1);
    CHECK(j["roles"]["syn"] == 1);
    char* report = nullptr;
    REQUIRE(pp_cassette_verify(cassette.c_str(), &report) == PP_OK);
    CHECK(json::parse(take(report))["ok"] == true);

    auto replay_config = base_config(s);
    replay_config["backend"] = {{"mode", "replay"}, {"cassette", cassette}};
    auto engine = make_engine(replay_config);
    for (int i = 0; i < 2; ++i) {
        pp_record* raw = nullptr;
        REQUIRE(pp_engine_run(engine.get(), kTask.c_str(), nullptr, &raw) == PP_OK);
        RecordPtr r(raw);
        CHECK(canonical(r.get()) == recorded);
    }

    pp_record* raw = nullptr;
    const std::string other = R"({"task_id":"x","query":"Something never recorded"})";
    CHECK(pp_engine_run(engine.get(), other.c_str(), nullptr, &raw) == PP_E_RUN_FAILED);
    RecordPtr missed(raw);
    REQUIRE(missed);
    CHECK(json::parse(canonical(missed.get()))["failure"].get<std::string>().find("cassette") != std::string::npos);

    std::ofstream(cassette, std::ios::app) << "{\"fingerprint\":\"XYZ\",\"role_tag\":\"mpa\",\"response_text\":\"\"}\n";
    REQUIRE(pp_cassette_verify(cassette.c_str(), &report) == PP_E_CORRUPT_RECORD);
    const auto bad = json::parse(take(report));
    CHECK(bad["ok"] == false);
    CHECK(bad["problems"].size() == 1);
}

TEST_CASE("bench and sweep run through the engine")
{
    Scratch s;
    auto engine = make_engine(base_config(s));
    const auto suite = (kSource / "suites" / "desk" / "suite.jsonl").string();
    char* card_text = nullptr;
    REQUIRE(pp_engine_bench(engine.get(), suite.c_str(), (s.path / "bench").string().c_str(), 1, nullptr,
                            &card_text) == PP_OK);
    const auto card = json::parse(take(card_text));
    CHECK(card["items"].size() == 10);
    CHECK(card["ledger_totals"]["total"] == 80);
    CHECK(card["calls_per_row"].get<double>() == doctest::Approx(8.0));
    CHECK(fs::is_regular_file(s.path / "bench" / "scorecard.csv"));

    const int ks[] = {2, 3};
    char* rows_text = nullptr;
    REQUIRE(pp_engine_sweep(engine.get(), suite.c_str(), ks, 2, (s.path / "sweep").string().c_str(), 1,
                            &rows_text) == PP_OK);
    const auto rows = json::parse(take(rows_text));
    REQUIRE(rows.size() == 2);
    CHECK(rows[0]["calls_per_row"].get<double>() == doctest::Approx(6.0));
    CHECK(rows[1]["calls_per_row"].get<double>() == doctest::Approx(8.0));
    CHECK(fs::is_regular_file(s.path / "sweep" / "sweep.svg"));

    CHECK(pp_engine_sweep(engine.get(), suite.c_str(), nullptr, 0, (s.path / "x").string().c_str(), 1,
                          &rows_text) == PP_E_INVALID_ARGUMENT);
    CHECK(pp_engine_bench(engine.get(), "/nonexistent/suite.jsonl", (s.path / "y").string().c_str(), 1, nullptr,
                          &card_text) == PP_E_SUITE);
}
