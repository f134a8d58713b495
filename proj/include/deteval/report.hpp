#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "deteval/costmodel.hpp"
#include "deteval/stats.hpp"

namespace deteval::report {

struct ReportDocuments {
  std::string average_costs_csv;  // per-file averages
  std::string results_csv;        // annual breakdown and detection statistics
  std::string zero_day_csv;       // zero-day versus public PE
  std::string filetype_csv;       // recall per file type
  std::string sweep_csv;          // empty unless a sweep was given
  std::string summary_txt;
};

/// Cost rows of the results table, in order.
std::span<const std::string_view> cost_row_labels();
/// Statistic rows of the results table, in order.
std::span<const std::string_view> stat_row_labels();

/// Annual breakdown only, with the cost rows of the results table.
std::string breakdown_csv(std::span<const cost::ToolScore> scores);

std::string sweep_csv(const cost::SweepResult& sweep);

ReportDocuments render_report(std::span<const cost::ToolScore> scores,
                              const stats::StatsBundle& stats,
                              const cost::SweepResult* sweep = nullptr);

/// Writes the documents as average_costs.csv, results.csv, zero_day.csv,
/// filetype_recall.csv, sweep.csv (when present) and summary.txt. Throws
/// IoFailure.
void write_report(const ReportDocuments& docs, const std::filesystem::path& dir);

/// Writes `text` to `path`, creating parent directories. Throws IoFailure.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace deteval::report
