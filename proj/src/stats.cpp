#include "deteval/stats.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "deteval/errors.hpp"

namespace deteval::stats {

FileIndex index_files(std::span<const FileSample> files) {
  FileIndex idx;
  for (const auto& f : files) idx.emplace(f.file_id, f);
  return idx;
}

CohortFilter all_files() {
  return [](const FileSample&) { return true; };
}

CohortFilter malware_only() {
  return [](const FileSample& f) { return f.malicious(); };
}

CohortFilter zero_day_pe() {
  return [](const FileSample& f) {
    return f.malicious() && f.file_type == FileType::PE && f.zero_day;
  };
}

CohortFilter public_pe() {
  return [](const FileSample& f) {
    return f.malicious() && f.file_type == FileType::PE && !f.zero_day;
  };
}

CohortFilter of_type(FileType type) {
  return [type](const FileSample& f) { return f.file_type == type; };
}

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

namespace {

const FileSample& lookup(const FileIndex& files, const DetectionOutcome& o) {
  auto it = files.find(o.file_id);
  if (it == files.end()) {
    throw ValidationError(fmt::format("outcome for unknown file '{}'", o.file_id));
  }
  return it->second;
}

std::string thousands(std::size_t n) {
  auto s = std::to_string(n);
  for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(i, ",");
  return s;
}

}  // namespace

ConfusionStats confusion_stats(std::span<const DetectionOutcome> outcomes,
                               const FileIndex& files, const CohortFilter& cohort) {
  ConfusionStats st;
  auto& c = st.counts;
  for (const auto& o : outcomes) {
    const auto& f = lookup(files, o);
    if (!cohort(f)) continue;
    if (f.malicious()) {
      ++(o.detected() ? c.tp : c.fn);
    } else {
      ++(o.detected() ? c.fp : c.tn);
    }
  }
  const auto tp = static_cast<double>(c.tp);
  if (c.tp + c.fn > 0) st.recall = tp / static_cast<double>(c.tp + c.fn);
  if (c.tp + c.fp > 0) st.precision = tp / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fp + c.fn > 0) {
    st.f1 = 2.0 * tp / static_cast<double>(2 * c.tp + c.fp + c.fn);
  }
  return st;
}

std::optional<double> median_ttd(std::span<const DetectionOutcome> outcomes,
                                 const FileIndex& files, const CohortFilter& cohort) {
  std::vector<double> ttd;
  for (const auto& o : outcomes) {
    if (o.ttd_s && cohort(lookup(files, o))) ttd.push_back(*o.ttd_s);
  }
  if (ttd.empty()) return std::nullopt;
  const auto mid = ttd.begin() + static_cast<std::ptrdiff_t>((ttd.size() - 1) / 2);
  std::nth_element(ttd.begin(), mid, ttd.end());
  return *mid;
}

std::string FiletypeRow::label() const {
  return fmt::format("{} ({})", display_label(type), thousands(malware));
}

FiletypeTable per_filetype_recall(std::span<const ToolOutcomes> tools, const FileIndex& files) {
  FiletypeTable t;
  for (const auto& tool : tools) t.tools.push_back(tool.tool_id);
  std::map<FileType, std::size_t> counts;
  for (const auto& [id, f] : files) {
    if (f.malicious() && f.file_type != FileType::Other) ++counts[f.file_type];
  }
  for (const auto type : kAllFileTypes) {
    auto it = counts.find(type);
    if (it == counts.end()) continue;
    FiletypeRow row;
    row.type = type;
    row.malware = it->second;
    for (const auto& tool : tools) {
      row.recall.push_back(confusion_stats(tool.outcomes, files, of_type(type)).recall);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::vector<std::size_t> unique_detections(std::span<const ToolOutcomes> tools,
                                           const FileIndex& files, const CohortFilter& cohort) {
  std::map<std::string, std::set<std::size_t>> detectors;
  for (std::size_t i = 0; i < tools.size(); ++i) {
    for (const auto& o : tools[i].outcomes) {
      if (!o.detected()) continue;
      const auto& f = lookup(files, o);
      if (f.malicious() && cohort(f)) detectors[o.file_id].insert(i);
    }
  }
  std::vector<std::size_t> unique(tools.size(), 0);
  for (const auto& [id, who] : detectors) {
    if (who.size() == 1) ++unique[*who.begin()];
  }
  return unique;
}

ZeroDayTable zero_day_comparison(std::span<const ToolOutcomes> tools, const FileIndex& files) {
  ZeroDayTable t;
  const auto zd = zero_day_pe();
  const auto pub = public_pe();
  const auto zd_unique = unique_detections(tools, files, zd);
  const auto pub_unique = unique_detections(tools, files, pub);
  for (std::size_t i = 0; i < tools.size(); ++i) {
    const auto& tool = tools[i];
    t.tools.push_back(tool.tool_id);
    t.zero_day.push_back({confusion_stats(tool.outcomes, files, zd).recall,
                          median_ttd(tool.outcomes, files, zd), zd_unique[i]});
    t.public_pe.push_back({confusion_stats(tool.outcomes, files, pub).recall,
                           median_ttd(tool.outcomes, files, pub), pub_unique[i]});
  }
  return t;
}

std::vector<ToolOutcomes> outcomes_of(std::span<const cost::ToolScore> scores) {
  std::vector<ToolOutcomes> out;
  for (const auto& s : scores) {
    ToolOutcomes t;
    t.tool_id = s.tool_id;
    for (const auto& f : s.files) t.outcomes.push_back(f.outcome);
    out.push_back(std::move(t));
  }
  return out;
}

StatsBundle compute_stats(std::span<const cost::ToolScore> scores, const FileIndex& files) {
  StatsBundle b;
  const auto tools = outcomes_of(scores);
  for (std::size_t i = 0; i < tools.size(); ++i) {
    ToolStats ts;
    ts.tool_id = tools[i].tool_id;
    ts.overall = confusion_stats(tools[i].outcomes, files);
    ts.median_ttd = median_ttd(tools[i].outcomes, files, malware_only());
    ts.aborted = scores[i].aborted;
    b.tools.push_back(std::move(ts));
  }
  b.zero_day = zero_day_comparison(tools, files);
  b.filetypes = per_filetype_recall(tools, files);
  return b;
}

}  // namespace deteval::stats
