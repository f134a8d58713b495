#pragma once

// Small hand-built datasets shared by the report, io and cli suites.

#include <string>

#include "deteval/model.hpp"

namespace fixture {

inline deteval::FileSample file(std::string id, deteval::Label label,
                                deteval::FileType type = deteval::FileType::PE,
                                bool zero_day = false) {
  deteval::FileSample f;
  f.file_id = std::move(id);
  f.display_name = "sample " + f.file_id + ".bin";
  f.label = label;
  f.file_type = type;
  f.zero_day = zero_day;
  f.size_bytes = 1234;
  return f;
}

inline deteval::TrialRecord trial(std::string tool, std::string file, double te, double tc) {
  deteval::TrialRecord t;
  t.tool_id = std::move(tool);
  t.file_id = std::move(file);
  t.t_download = 0.0;
  t.t_execute = te;
  t.t_close = tc;
  for (double s = 0.0; s < tc; s += 30.0) {
    t.resource_series.push_back({s, 0.25, 200'000'000, 4096, 1024});
  }
  return t;
}

/// Two tools, five files (one zero-day PE, one PDF, two benign), a few alerts.
inline deteval::Dataset small() {
  using deteval::FileType;
  using deteval::Label;
  deteval::Dataset ds;
  ds.files = {file("m1", Label::Malicious), file("m2", Label::Malicious, FileType::PDF),
              file("z1", Label::Malicious, FileType::PE, true), file("b1", Label::Benign),
              file("b2", Label::Benign, FileType::Text)};
  for (const std::string tool : {"ml", "sig"}) {
    for (const auto& f : ds.files) ds.trials.push_back(trial(tool, f.file_id, 90.0, 200.0));
    ds.ambients.push_back({tool, 300.0, 0.05, 2e8, 1e4, 1e4});
  }
  ds.alerts = {{"ml", "m1", 5.0}, {"ml", "z1", 100.0}, {"ml", "b1", 3.0},
               {"sig", "m1", 4.0}, {"sig", "m2", 4.0}, {"sig", "m2", 9.5}};
  return ds;
}

}  // namespace fixture
