#include "deteval/model.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <utility>

#include <fmt/format.h>

#include "deteval/errors.hpp"

namespace deteval {

namespace {

struct FileTypeNames {
  FileType type;
  std::string_view token;
  std::string_view label;
};

constexpr std::array<FileTypeNames, 11> kFileTypeNames = {{
    {FileType::Compressed, "Compressed", "Compressed"},
    {FileType::HTML, "HTML", "HTML"},
    {FileType::Image, "Image", "Image"},
    {FileType::JAR, "JAR", "JAR"},
    {FileType::MSOffice, "MSOffice", "MS-Office"},
    {FileType::PDF, "PDF", "PDF"},
    {FileType::PE, "PE", "PE"},
    {FileType::SourceCode, "SourceCode", "Source-code"},
    {FileType::Text, "Text", "Text"},
    {FileType::XML, "XML", "XML"},
    {FileType::Other, "Other", "Other"},
}};

}  // namespace

std::string_view to_string(FileType type) {
  return kFileTypeNames[static_cast<std::size_t>(type)].token;
}

std::string_view display_label(FileType type) {
  return kFileTypeNames[static_cast<std::size_t>(type)].label;
}

std::optional<FileType> parse_file_type(std::string_view text) {
  for (const auto& n : kFileTypeNames) {
    if (n.token == text || n.label == text) return n.type;
  }
  return std::nullopt;
}

std::string_view to_string(Label label) {
  return label == Label::Malicious ? "Malicious" : "Benign";
}

std::optional<Label> parse_label(std::string_view text) {
  if (text == "Malicious") return Label::Malicious;
  if (text == "Benign") return Label::Benign;
  return std::nullopt;
}

std::string_view to_string(StageDisposition d) {
  switch (d) {
    case StageDisposition::Completed: return "Completed";
    case StageDisposition::Skipped: return "Skipped";
    case StageDisposition::Aborted: return "Aborted";
  }
  return "?";
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::PreExecution: return "PreExecution";
    case Phase::InWindow: return "InWindow";
    case Phase::PostClose: return "PostClose";
    case Phase::Never: return "Never";
  }
  return "?";
}

std::string_view to_string(IssueKind kind) {
  switch (kind) {
    case IssueKind::DuplicateId: return "duplicate-id";
    case IssueKind::DanglingReference: return "dangling-reference";
    case IssueKind::OrderingViolation: return "ordering-violation";
    case IssueKind::RangeViolation: return "range-violation";
    case IssueKind::InvariantViolation: return "invariant-violation";
    case IssueKind::MissingAmbient: return "missing-ambient";
  }
  return "?";
}

DetectionOutcome derive_outcome(const TrialRecord& trial,
                                std::span<const AlertEvent> alerts) {
  if (trial.aborted) {
    throw AbortedTrialError(fmt::format("trial {}/{} was aborted",
                                        trial.tool_id, trial.file_id));
  }
  if (!trial.timestamps_ordered()) {
    throw InvalidTimestamps(fmt::format(
        "trial {}/{}: expected t_download < t_execute < t_close, got {} {} {}",
        trial.tool_id, trial.file_id, trial.t_download, trial.t_execute,
        trial.t_close));
  }

  DetectionOutcome out{trial.tool_id, trial.file_id, Phase::Never, {}};
  std::optional<double> earliest;
  for (const auto& a : alerts) {
    if (a.tool_id != trial.tool_id || a.file_id != trial.file_id) {
      throw MismatchedIdentity(fmt::format("alert {}/{} offered to trial {}/{}",
                                           a.tool_id, a.file_id, trial.tool_id,
                                           trial.file_id));
    }
    if (a.t_alert < trial.t_download) {
      throw InvalidTimestamps(fmt::format(
          "alert for {}/{} at {} precedes download at {}", a.tool_id,
          a.file_id, a.t_alert, trial.t_download));
    }
    if (!earliest || a.t_alert < *earliest) earliest = a.t_alert;
  }
  if (!earliest) return out;

  const double t = *earliest;
  if (t < trial.t_execute) {
    out.phase = Phase::PreExecution;
  } else if (t <= trial.t_close) {
    out.phase = Phase::InWindow;
  } else {
    out.phase = Phase::PostClose;
  }
  out.ttd_s = t - trial.t_download;
  return out;
}

std::size_t ValidationReport::count(IssueKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(issues.begin(), issues.end(),
                    [kind](const ValidationIssue& i) { return i.kind == kind; }));
}

std::string ValidationReport::summary() const {
  std::string out;
  for (const auto& i : issues) {
    out += fmt::format("{}: {}\n", to_string(i.kind), i.message);
  }
  return out;
}

ValidationReport validate_dataset(std::span<const FileSample> files,
                                  std::span<const TrialRecord> trials,
                                  std::span<const AlertEvent> alerts,
                                  std::span<const AmbientProfile> ambients) {
  ValidationReport report;
  auto add = [&report](IssueKind kind, std::string msg) {
    report.issues.push_back({kind, std::move(msg)});
  };

  std::set<std::string_view> file_ids;
  for (const auto& f : files) {
    if (!file_ids.insert(f.file_id).second) {
      add(IssueKind::DuplicateId, fmt::format("file_id '{}' repeated", f.file_id));
    }
    if (f.zero_day &&
        (f.label != Label::Malicious || f.file_type != FileType::PE)) {
      add(IssueKind::InvariantViolation,
          fmt::format("file '{}' is zero-day but not a malicious PE", f.file_id));
    }
  }

  std::set<std::string_view> ambient_tools;
  for (const auto& a : ambients) {
    if (!ambient_tools.insert(a.tool_id).second) {
      add(IssueKind::DuplicateId,
          fmt::format("ambient profile for tool '{}' repeated", a.tool_id));
    }
    if (!(a.duration_s > 0.0)) {
      add(IssueKind::RangeViolation,
          fmt::format("ambient profile for '{}' has duration {}", a.tool_id,
                      a.duration_s));
    }
    if (a.mean_cpu_fraction < 0.0 || a.mean_ram_bytes < 0.0 ||
        a.mean_hdd_read_bytes_per_s < 0.0 || a.mean_hdd_write_bytes_per_s < 0.0) {
      add(IssueKind::RangeViolation,
          fmt::format("ambient profile for '{}' has a negative mean", a.tool_id));
    }
  }

  using Key = std::pair<std::string_view, std::string_view>;
  std::map<Key, const TrialRecord*> trial_index;
  std::set<std::string_view> tools_missing_ambient;
  for (const auto& t : trials) {
    const Key key{t.tool_id, t.file_id};
    if (!trial_index.emplace(key, &t).second) {
      add(IssueKind::DuplicateId,
          fmt::format("trial {}/{} repeated", t.tool_id, t.file_id));
    }
    if (!file_ids.contains(t.file_id)) {
      add(IssueKind::DanglingReference,
          fmt::format("trial {}/{} references unknown file", t.tool_id,
                      t.file_id));
    }
    if (!ambient_tools.contains(t.tool_id) &&
        tools_missing_ambient.insert(t.tool_id).second) {
      add(IssueKind::MissingAmbient,
          fmt::format("tool '{}' has trials but no ambient profile", t.tool_id));
    }
    if (t.aborted) continue;
    if (!t.timestamps_ordered()) {
      add(IssueKind::OrderingViolation,
          fmt::format("trial {}/{}: t_download={} t_execute={} t_close={}",
                      t.tool_id, t.file_id, t.t_download, t.t_execute,
                      t.t_close));
    }
    for (const auto& s : t.resource_series) {
      if (s.cpu_fraction < 0.0 || s.cpu_fraction > 1.0 ||
          s.t < t.t_download || s.t > t.t_close) {
        add(IssueKind::RangeViolation,
            fmt::format("trial {}/{}: resource sample at t={} cpu={} out of range",
                        t.tool_id, t.file_id, s.t, s.cpu_fraction));
        break;
      }
    }
  }

  for (const auto& a : alerts) {
    if (!file_ids.contains(a.file_id)) {
      add(IssueKind::DanglingReference,
          fmt::format("alert {}/{} references unknown file", a.tool_id, a.file_id));
      continue;
    }
    auto it = trial_index.find(Key{a.tool_id, a.file_id});
    if (it == trial_index.end()) {
      add(IssueKind::DanglingReference,
          fmt::format("alert {}/{} has no trial", a.tool_id, a.file_id));
      continue;
    }
    if (!it->second->aborted && a.t_alert < it->second->t_download) {
      add(IssueKind::OrderingViolation,
          fmt::format("alert {}/{} at {} precedes download", a.tool_id,
                      a.file_id, a.t_alert));
    }
  }
  return report;
}

}  // namespace deteval
