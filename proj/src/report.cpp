#include "deteval/report.hpp"

#include <array>
#include <fstream>

#include <fmt/format.h>

#include "deteval/csv.hpp"
#include "deteval/errors.hpp"

namespace deteval::report {

namespace {

constexpr std::array<std::string_view, 10> kCostRows = {
    "Initial Cost",
    "Annual Malware Resource Cost",
    "Annual Benignware Resource Cost",
    "Annual Ambient Endpoint Resource Cost",
    "Annual Appliance Resource Cost",
    "Annual Resource Cost",
    "Annual Malware Detect Cost",
    "Annual Benignware Detect Cost",
    "Annual Detect Cost",
    "Total Cost",
};

constexpr std::array<std::string_view, 4> kStatRows = {
    "Recall",
    "Precision",
    "F1 Score",
    "Median Time to Detect (s)",
};

std::string money(double v) { return fmt::format("{:.2f}", v); }
std::string stat(const std::optional<double>& v) {
  return v ? fmt::format("{:.5f}", *v) : std::string();
}
std::string seconds(const std::optional<double>& v) {
  return v ? fmt::format("{:.3f}", *v) : std::string();
}
std::string percent(const std::optional<double>& v, int digits) {
  return v ? fmt::format("{:.{}f}%", *v * 100.0, digits) : std::string();
}

std::vector<double> cost_values(const cost::AnnualCostBreakdown& b) {
  return {b.initial,
          b.annual_malware_resource,
          b.annual_benign_resource,
          b.annual_ambient_resource,
          b.annual_appliance_resource,
          b.annual_resource(),
          b.annual_malware_detect,
          b.annual_benign_detect,
          b.annual_detect(),
          b.total};
}

std::string header(std::string first, const std::vector<std::string>& tools) {
  std::vector<std::string> h{std::move(first)};
  h.insert(h.end(), tools.begin(), tools.end());
  return csv::format_row(h);
}

std::vector<std::string> tool_ids(std::span<const cost::ToolScore> scores) {
  std::vector<std::string> ids;
  for (const auto& s : scores) ids.push_back(s.tool_id);
  return ids;
}

std::string cost_rows(std::span<const cost::ToolScore> scores) {
  std::string out;
  if (scores.empty()) return out;
  std::vector<std::vector<double>> cols;
  for (const auto& s : scores) cols.push_back(cost_values(s.annual));
  for (std::size_t r = 0; r < kCostRows.size(); ++r) {
    std::vector<std::string> row{std::string(kCostRows[r])};
    for (const auto& c : cols) row.push_back(money(c[r]));
    out += csv::format_row(row);
  }
  return out;
}

}  // namespace

std::span<const std::string_view> cost_row_labels() { return kCostRows; }
std::span<const std::string_view> stat_row_labels() { return kStatRows; }

std::string breakdown_csv(std::span<const cost::ToolScore> scores) {
  return header("Metric", tool_ids(scores)) + cost_rows(scores);
}

std::string sweep_csv(const cost::SweepResult& sweep) {
  std::string out = header("zero_day_M", sweep.tools);
  for (const auto& p : sweep.points) {
    std::vector<std::string> row{money(p.zero_day_M)};
    for (double t : p.totals) row.push_back(money(t));
    out += csv::format_row(row);
  }
  return out;
}

ReportDocuments render_report(std::span<const cost::ToolScore> scores,
                              const stats::StatsBundle& st, const cost::SweepResult* sweep) {
  ReportDocuments d;
  const auto tools = tool_ids(scores);

  d.average_costs_csv = header("Metric", tools);
  if (!scores.empty()) {
    const std::pair<std::string_view, double cost::AverageCosts::*> rows[] = {
        {"Ave Benignware Resource Cost", &cost::AverageCosts::benign_resource},
        {"Ave Malware Resource Cost", &cost::AverageCosts::malware_resource},
        {"Ave Benignware Detect Cost", &cost::AverageCosts::benign_detect},
        {"Ave Malware Detect Cost", &cost::AverageCosts::malware_detect},
    };
    for (const auto& [label, field] : rows) {
      std::vector<std::string> row{std::string(label)};
      for (const auto& s : scores) row.push_back(fmt::format("{:.6f}", s.averages.*field));
      d.average_costs_csv += csv::format_row(row);
    }
  }

  d.results_csv = header("Metric", tools) + cost_rows(scores);
  if (!st.tools.empty()) {
    std::vector<std::vector<std::string>> rows(kStatRows.size());
    for (std::size_t r = 0; r < kStatRows.size(); ++r) rows[r].emplace_back(kStatRows[r]);
    for (const auto& t : st.tools) {
      rows[0].push_back(stat(t.overall.recall));
      rows[1].push_back(stat(t.overall.precision));
      rows[2].push_back(stat(t.overall.f1));
      rows[3].push_back(seconds(t.median_ttd));
    }
    for (const auto& r : rows) d.results_csv += csv::format_row(r);
  }

  {
    std::vector<std::string> h{"Statistic", "Samples"};
    h.insert(h.end(), st.zero_day.tools.begin(), st.zero_day.tools.end());
    d.zero_day_csv = csv::format_row(h);
    if (!st.zero_day.tools.empty()) {
      auto emit = [&](std::string_view statistic, std::string_view samples,
                      const std::vector<stats::CohortSummary>& cohort, auto&& fmt_cell) {
        std::vector<std::string> row{std::string(statistic), std::string(samples)};
        for (const auto& c : cohort) row.push_back(fmt_cell(c));
        d.zero_day_csv += csv::format_row(row);
      };
      const auto rec = [](const stats::CohortSummary& c) { return percent(c.recall, 1); };
      const auto ttd = [](const stats::CohortSummary& c) { return seconds(c.median_ttd); };
      const auto uniq = [](const stats::CohortSummary& c) { return std::to_string(c.unique); };
      emit("Recall (% Malware Detected)", "Zero-day PEs", st.zero_day.zero_day, rec);
      emit("Recall (% Malware Detected)", "Public PEs", st.zero_day.public_pe, rec);
      emit("Time to Detect Median (s)", "Zero-day PEs", st.zero_day.zero_day, ttd);
      emit("Time to Detect Median (s)", "Public PEs", st.zero_day.public_pe, ttd);
      emit("Malware no other tool detected (#)", "Zero-day PEs", st.zero_day.zero_day, uniq);
      emit("Malware no other tool detected (#)", "Public PEs", st.zero_day.public_pe, uniq);
    }
  }

  d.filetype_csv = header("Filetype (# malware)", st.filetypes.tools);
  for (const auto& r : st.filetypes.rows) {
    std::vector<std::string> row{r.label()};
    for (const auto& v : r.recall) row.push_back(percent(v, 2));
    d.filetype_csv += csv::format_row(row);
  }

  if (sweep) d.sweep_csv = sweep_csv(*sweep);

  std::string& s = d.summary_txt;
  s += fmt::format("Tools scored: {}\n", scores.size());
  const cost::ToolScore* best = nullptr;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& sc = scores[i];
    if (!best || sc.annual.total < best->annual.total) best = &sc;
    s += fmt::format("  {}: total ${:.2f} (initial {:.2f}, resource {:.2f}, detect {:.2f})",
                     sc.tool_id, sc.annual.total, sc.annual.initial, sc.annual.annual_resource(),
                     sc.annual.annual_detect());
    if (i < st.tools.size()) {
      const auto& t = st.tools[i];
      auto opt = [](const std::optional<double>& v) {
        return v ? fmt::format("{:.5f}", *v) : std::string("n/a");
      };
      s += fmt::format(", recall {}, precision {}, F1 {}, median TTD {}", opt(t.overall.recall),
                       opt(t.overall.precision), opt(t.overall.f1),
                       t.median_ttd ? fmt::format("{:.3f} s", *t.median_ttd) : "n/a");
    }
    s += '\n';
  }
  if (best) s += fmt::format("Lowest total cost: {}\n", best->tool_id);
  if (sweep) {
    if (sweep->crossover_interpolated) {
      s += fmt::format(
          "Zero-day sweep: {} drops below {} at zero_day_M ~ ${:.2f} (grid point ${:.2f})\n",
          sweep->ml_tool, sweep->signature_tool, *sweep->crossover_interpolated,
          *sweep->crossover_grid);
    } else {
      s += fmt::format("Zero-day sweep: {} stays above {} on the whole grid\n", sweep->ml_tool,
                       sweep->signature_tool);
    }
  }
  std::size_t aborted = 0;
  std::string per_tool;
  for (const auto& sc : scores) {
    aborted += sc.aborted;
    per_tool += fmt::format("{}{} {}", per_tool.empty() ? "" : ", ", sc.tool_id, sc.aborted);
  }
  s += fmt::format("Aborted trials excluded from statistics: {}", aborted);
  if (!per_tool.empty()) s += fmt::format(" ({})", per_tool);
  s += '\n';
  return d;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoFailure(fmt::format("cannot create {}: {}", path.parent_path().string(), ec.message()));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure(fmt::format("cannot open {} for writing", path.string()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw IoFailure(fmt::format("write to {} failed", path.string()));
}

void write_report(const ReportDocuments& docs, const std::filesystem::path& dir) {
  write_text_file(dir / "average_costs.csv", docs.average_costs_csv);
  write_text_file(dir / "results.csv", docs.results_csv);
  write_text_file(dir / "zero_day.csv", docs.zero_day_csv);
  write_text_file(dir / "filetype_recall.csv", docs.filetype_csv);
  if (!docs.sweep_csv.empty()) write_text_file(dir / "sweep.csv", docs.sweep_csv);
  write_text_file(dir / "summary.txt", docs.summary_txt);
}

}  // namespace deteval::report
