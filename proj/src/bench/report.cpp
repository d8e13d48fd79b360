#include "bench/bench.hpp"

#include "core/bytes.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace plotpath::bench {

using nlohmann::json;

namespace {

std::string fixed(double v, int digits = 2)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

std::string md_cell(std::string s)
{
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::string out;
    for (char c : s) {
        if (c == '|') {
            out += '\\';
        }
        out += c;
    }
    return out;
}

std::string optional_fixed(const std::optional<double>& v)
{
    return v ? fixed(*v) : std::string("n/a");
}

} // namespace

std::string scorecard_csv(const Scorecard& card)
{
    std::ostringstream out;
    out << "item_id,executable,plot_score,correct,query_expansion,code_generation,visual_feedback,editor,run_status,"
           "warning\n";
    for (const auto& item : card.items) {
        out << csv_field(item.item_id) << ',' << (item.executable ? 1 : 0) << ','
            << (item.plot_score ? std::to_string(*item.plot_score) : "") << ','
            << (item.correct ? (*item.correct ? "1" : "0") : "") << ',' << item.ledger.query_expansion << ','
            << item.ledger.code_generation << ',' << item.ledger.visual_feedback << ',' << item.ledger.editor << ','
            << csv_field(item.run_status) << ',' << csv_field(item.warning) << '\n';
    }
    return out.str();
}

std::string scorecard_markdown(const Scorecard& card)
{
    std::ostringstream out;
    out << "| Model | Methods | Plot Score | Executable Rate (%) | Correctness (approx., %) |\n";
    out << "|---|---|---|---|---|\n";
    out << "| " << md_cell(card.model) << " | " << md_cell(card.strategy) << " | " << optional_fixed(card.mean_plot_score)
        << " | " << fixed(card.executable_rate) << " | " << optional_fixed(card.correctness_rate) << " |\n\n";

    out << "| Stage | Calls |\n|---|---|\n";
    out << "| Query Expansion | " << card.ledger_totals.query_expansion << " |\n";
    out << "| Code Generation | " << card.ledger_totals.code_generation << " |\n";
    out << "| Visual Feedback | " << card.ledger_totals.visual_feedback << " |\n";
    out << "| Editor | " << card.ledger_totals.editor << " |\n";
    out << "| **Total Iterations** | " << ledger_total(card.ledger_totals) << " |\n";
    out << "| **Avg Iterations / Row** | " << fixed(card.calls_per_row) << " |\n\n";

    out << "Items: " << card.items.size() << ", scored: " << card.scored_items << ".\n";
    for (const auto& item : card.items) {
        if (!item.warning.empty()) {
            out << "\n- `" << item.item_id << "`: " << md_cell(item.warning);
        }
    }
    out << "\n";
    return out.str();
}

json scorecard_json(const Scorecard& card)
{
    json items = json::array();
    for (const auto& item : card.items) {
        items.push_back(item_score_json(item));
    }
    const auto& l = card.ledger_totals;
    return {{"strategy", card.strategy},
            {"model", card.model},
            {"mode", std::string(to_string(card.mode))},
            {"k", card.k},
            {"items", items},
            {"mean_plot_score", card.mean_plot_score ? json(*card.mean_plot_score) : json(nullptr)},
            {"scored_items", card.scored_items},
            {"executable_rate", card.executable_rate},
            {"correctness_rate", card.correctness_rate ? json(*card.correctness_rate) : json(nullptr)},
            {"ledger_totals",
             {{"query_expansion", l.query_expansion},
              {"code_generation", l.code_generation},
              {"visual_feedback", l.visual_feedback},
              {"editor", l.editor},
              {"total", ledger_total(l)}}},
            {"calls_per_row", card.calls_per_row},
            {"new_runs", card.new_runs}};
}

void write_scorecard(const Scorecard& card, const std::filesystem::path& dir)
{
    write_text_atomic(dir / "scorecard.csv", scorecard_csv(card));
    write_text_atomic(dir / "scorecard.md", scorecard_markdown(card));
    write_text_atomic(dir / "scorecard.json", scorecard_json(card).dump(2, ' ', false, json::error_handler_t::replace) + "\n");
}

std::string sweep_csv(std::span<const SweepRow> rows)
{
    std::ostringstream out;
    out << "k,mean_plot_score,executable_rate,calls_per_row,query_expansion,code_generation,visual_feedback,editor\n";
    for (const auto& r : rows) {
        out << r.k << ',' << (r.mean_plot_score ? fixed(*r.mean_plot_score, 4) : "") << ','
            << fixed(r.executable_rate, 4) << ',' << fixed(r.calls_per_row, 4) << ',' << r.ledger_totals.query_expansion
            << ',' << r.ledger_totals.code_generation << ',' << r.ledger_totals.visual_feedback << ','
            << r.ledger_totals.editor << '\n';
    }
    return out.str();
}

std::string sweep_markdown(std::span<const SweepRow> rows)
{
    std::ostringstream out;
    out << "| K | Plot Score | Executable Rate (%) | Avg Iterations / Row |\n|---|---|---|---|\n";
    for (const auto& r : rows) {
        out << "| " << r.k << " | " << optional_fixed(r.mean_plot_score) << " | " << fixed(r.executable_rate) << " | "
            << fixed(r.calls_per_row) << " |\n";
    }
    return out.str();
}

std::string sweep_svg(std::span<const SweepRow> rows)
{
    constexpr int kPanelW = 360;
    constexpr int kPanelH = 240;
    constexpr int kMargin = 48;
    constexpr int kWidth = 2 * kPanelW + 40;
    constexpr int kHeight = kPanelH + 40;

    int k_min = 1;
    int k_max = 8;
    if (!rows.empty()) {
        k_min = rows.front().k;
        k_max = rows.front().k;
        for (const auto& r : rows) {
            k_min = std::min(k_min, r.k);
            k_max = std::max(k_max, r.k);
        }
    }
    if (k_max == k_min) {
        ++k_max;
    }

    std::ostringstream svg;
    svg << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << kWidth << R"(" height=")" << kHeight
        << R"(" font-family="sans-serif" font-size="11">)" << '\n';
    svg << R"(<rect width="100%" height="100%" fill="white"/>)" << '\n';

    const auto panel = [&](int x0, const char* title, auto value_of) {
        const double plot_w = kPanelW - kMargin - 12;
        const double plot_h = kPanelH - kMargin - 12;
        const double left = x0 + kMargin;
        const double top = 24;
        const auto px = [&](int k) { return left + plot_w * (k - k_min) / double(k_max - k_min); };
        const auto py = [&](double v) { return top + plot_h * (1.0 - v / 100.0); };

        svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"14\" text-anchor=\"middle\" font-weight=\"bold\">"
            << title << "</text>\n";
        svg << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
            << top + plot_h << "\" stroke=\"black\"/>\n";
        svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
            << "\" stroke=\"black\"/>\n";
        for (int v = 0; v <= 100; v += 25) {
            svg << "<text x=\"" << left - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
            svg << "<line x1=\"" << left << "\" y1=\"" << py(v) << "\" x2=\"" << left + plot_w << "\" y2=\"" << py(v)
                << "\" stroke=\"#ddd\"/>\n";
        }
        for (int k = k_min; k <= k_max; ++k) {
            svg << "<text x=\"" << px(k) << "\" y=\"" << top + plot_h + 16 << "\" text-anchor=\"middle\">" << k
                << "</text>\n";
        }
        svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << top + plot_h + 32
            << "\" text-anchor=\"middle\">K (reasoning paths)</text>\n";
        std::string points;
        for (const auto& r : rows) {
            const auto v = value_of(r);
            if (!v) {
                continue;
            }
            points += fixed(px(r.k), 1) + "," + fixed(py(*v), 1) + " ";
            svg << "<circle cx=\"" << px(r.k) << "\" cy=\"" << py(*v) << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
        }
        svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"" << points << "\"/>\n";
    };

    panel(0, "Plot Score", [](const SweepRow& r) { return r.mean_plot_score; });
    panel(kPanelW + 40, "Executable Rate (%)",
          [](const SweepRow& r) { return std::optional<double>(r.executable_rate); });
    svg << "</svg>\n";
    return svg.str();
}

} // namespace plotpath::bench
