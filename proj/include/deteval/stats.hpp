#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deteval/costmodel.hpp"
#include "deteval/model.hpp"

namespace deteval::stats {

using FileIndex = std::map<std::string, FileSample, std::less<>>;

FileIndex index_files(std::span<const FileSample> files);

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
};

struct ConfusionStats {
  ConfusionCounts counts;
  std::optional<double> recall;     // absent without malware in the cohort
  std::optional<double> precision;  // absent without any detection
  std::optional<double> f1;         // absent when tp + fp + fn == 0
};

using CohortFilter = std::function<bool(const FileSample&)>;

CohortFilter all_files();
CohortFilter malware_only();
CohortFilter zero_day_pe();
CohortFilter public_pe();  // malicious, PE, not zero-day
CohortFilter of_type(FileType type);

/// Harmonic mean of precision and recall; 0 when both are 0.
double f1_score(double precision, double recall);

/// A detection is any phase other than Never. Throws ValidationError when an
/// outcome's file is not in the index.
ConfusionStats confusion_stats(std::span<const DetectionOutcome> outcomes,
                               const FileIndex& files,
                               const CohortFilter& cohort = all_files());

/// Lower median of ttd over detections in the cohort.
std::optional<double> median_ttd(std::span<const DetectionOutcome> outcomes,
                                 const FileIndex& files,
                                 const CohortFilter& cohort = all_files());

struct ToolOutcomes {
  std::string tool_id;
  std::vector<DetectionOutcome> outcomes;  // non-aborted trials only
};

struct FiletypeRow {
  FileType type = FileType::Other;
  std::size_t malware = 0;  // in the corpus
  std::vector<std::optional<double>> recall;  // per tool

  std::string label() const;  // e.g. "PE (26,930)"
};

struct FiletypeTable {
  std::vector<std::string> tools;
  std::vector<FiletypeRow> rows;  // types with malware, "Other" excluded
};

FiletypeTable per_filetype_recall(std::span<const ToolOutcomes> tools, const FileIndex& files);

struct CohortSummary {
  std::optional<double> recall;
  std::optional<double> median_ttd;
  std::size_t unique = 0;  // detected by this tool and no other
};

struct ZeroDayTable {
  std::vector<std::string> tools;
  std::vector<CohortSummary> zero_day;
  std::vector<CohortSummary> public_pe;
};

ZeroDayTable zero_day_comparison(std::span<const ToolOutcomes> tools, const FileIndex& files);

/// Malware files in the cohort detected by exactly one tool, per tool.
std::vector<std::size_t> unique_detections(std::span<const ToolOutcomes> tools,
                                           const FileIndex& files, const CohortFilter& cohort);

struct ToolStats {
  std::string tool_id;
  ConfusionStats overall;
  std::optional<double> median_ttd;  // over detected malware
  std::size_t aborted = 0;
};

struct StatsBundle {
  std::vector<ToolStats> tools;
  ZeroDayTable zero_day;
  FiletypeTable filetypes;
};

std::vector<ToolOutcomes> outcomes_of(std::span<const cost::ToolScore> scores);

StatsBundle compute_stats(std::span<const cost::ToolScore> scores, const FileIndex& files);

}  // namespace deteval::stats
