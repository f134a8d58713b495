#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "deteval/model.hpp"

namespace deteval::io {

struct TablePaths {
  std::filesystem::path files;
  std::filesystem::path trials;
  std::filesystem::path resources;  // optional on load: absent means no series
  std::filesystem::path alerts;
  std::filesystem::path ambient;

  /// files.csv, trials.csv, resources.jsonl, alerts.csv, ambient.csv in dir.
  static TablePaths in(const std::filesystem::path& dir);
};

struct RowCounts {
  std::size_t files = 0;
  std::size_t trials = 0;
  std::size_t resource_samples = 0;
  std::size_t alerts = 0;
  std::size_t ambients = 0;
};

/// Parses and validates the raw tables. Throws IoFailure, ParseError (with
/// file, line and column), SchemaError for a missing or unknown header, and
/// ValidationError when the integrity report is not empty.
Dataset load_tables(const TablePaths& paths, RowCounts* counts = nullptr);

std::string files_csv(std::span<const FileSample> files);
std::string trials_csv(std::span<const TrialRecord> trials);
std::string resources_jsonl(std::span<const TrialRecord> trials);
std::string alerts_csv(std::span<const AlertEvent> alerts);
std::string ambient_csv(std::span<const AmbientProfile> ambients);

/// Throws IoFailure.
void write_tables(const Dataset& ds, const TablePaths& paths);

}  // namespace deteval::io
