#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace deteval {

enum class FileType {
  Compressed,
  HTML,
  Image,
  JAR,
  MSOffice,
  PDF,
  PE,
  SourceCode,
  Text,
  XML,
  Other,
};

inline constexpr std::array<FileType, 11> kAllFileTypes = {
    FileType::Compressed, FileType::HTML,       FileType::Image,
    FileType::JAR,        FileType::MSOffice,   FileType::PDF,
    FileType::PE,         FileType::SourceCode, FileType::Text,
    FileType::XML,        FileType::Other,
};

/// Serialized token, e.g. "MSOffice".
std::string_view to_string(FileType type);
/// Human label used in per-filetype tables, e.g. "MS-Office".
std::string_view display_label(FileType type);
std::optional<FileType> parse_file_type(std::string_view text);

enum class Label { Malicious, Benign };

std::string_view to_string(Label label);
std::optional<Label> parse_label(std::string_view text);

struct FileSample {
  std::string file_id;
  std::string display_name;
  FileType file_type = FileType::Other;
  Label label = Label::Benign;
  bool zero_day = false;
  std::uint64_t size_bytes = 0;

  bool malicious() const { return label == Label::Malicious; }
};

/// One per-second observation of the detector's processes.
struct ResourceSample {
  double t = 0.0;
  double cpu_fraction = 0.0;  // of one full CPU
  std::uint64_t ram_bytes = 0;
  std::uint64_t hdd_read_bytes = 0;
  std::uint64_t hdd_write_bytes = 0;
};

enum class StageDisposition { Completed, Skipped, Aborted };

std::string_view to_string(StageDisposition d);

struct StageAttempt {
  std::string stage;
  int attempts = 0;
  StageDisposition disposition = StageDisposition::Completed;
};

struct TrialRecord {
  std::string tool_id;
  std::string file_id;
  double t_download = 0.0;
  double t_execute = 0.0;
  double t_close = 0.0;
  std::vector<ResourceSample> resource_series;  // empty means not collected
  std::vector<StageAttempt> stage_history;
  bool aborted = false;

  bool timestamps_ordered() const {
    return t_download < t_execute && t_execute < t_close;
  }
};

struct AmbientProfile {
  std::string tool_id;
  double duration_s = 300.0;
  double mean_cpu_fraction = 0.0;
  double mean_ram_bytes = 0.0;
  double mean_hdd_read_bytes_per_s = 0.0;
  double mean_hdd_write_bytes_per_s = 0.0;
};

struct AlertEvent {
  std::string tool_id;
  std::string file_id;
  double t_alert = 0.0;
};

enum class Phase { PreExecution, InWindow, PostClose, Never };

std::string_view to_string(Phase phase);

struct DetectionOutcome {
  std::string tool_id;
  std::string file_id;
  Phase phase = Phase::Never;
  std::optional<double> ttd_s;  // absent iff phase == Never

  bool detected() const { return phase != Phase::Never; }
};

/// Classifies when (if ever) the tool alerted on the trial's file.
///
/// Multiple alerts collapse to the earliest one. Throws MismatchedIdentity
/// when an alert belongs to another (tool, file), InvalidTimestamps when the
/// trial is not ordered or an alert predates the download, and
/// AbortedTrialError for aborted trials.
DetectionOutcome derive_outcome(const TrialRecord& trial,
                                std::span<const AlertEvent> alerts);

/// The four raw documents consumed by scoring.
struct Dataset {
  std::vector<FileSample> files;
  std::vector<TrialRecord> trials;
  std::vector<AlertEvent> alerts;
  std::vector<AmbientProfile> ambients;
};

enum class IssueKind {
  DuplicateId,
  DanglingReference,
  OrderingViolation,
  RangeViolation,
  InvariantViolation,
  MissingAmbient,
};

std::string_view to_string(IssueKind kind);

struct ValidationIssue {
  IssueKind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const { return issues.empty(); }
  std::size_t count(IssueKind kind) const;
  std::string summary() const;
};

/// Reports every integrity problem found; never throws.
ValidationReport validate_dataset(std::span<const FileSample> files,
                                  std::span<const TrialRecord> trials,
                                  std::span<const AlertEvent> alerts,
                                  std::span<const AmbientProfile> ambients);

inline ValidationReport validate_dataset(const Dataset& ds) {
  return validate_dataset(ds.files, ds.trials, ds.alerts, ds.ambients);
}

}  // namespace deteval
