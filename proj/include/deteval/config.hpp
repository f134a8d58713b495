#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "deteval/costmodel.hpp"
#include "deteval/orchestrator.hpp"
#include "deteval/sim.hpp"
#include "deteval/warden.hpp"

namespace deteval::io {

/// Flat "key = value" file. '#' starts a comment; blank lines are ignored.
class ConfigFile {
 public:
  /// Throws ParseError on lines without '=' or repeated keys.
  static ConfigFile parse(std::istream& in, const std::string& source);
  /// Throws IoFailure when the file cannot be read.
  static ConfigFile load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value);
  bool has(const std::string& key) const { return values_.contains(key); }
  /// Marks the key as consumed.
  std::optional<std::string> take(const std::string& key);
  /// Keys starting with prefix, unconsumed ones included.
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;
  /// Throws ConfigError naming every key nobody consumed.
  void require_all_consumed() const;
  const std::string& source() const { return source_; }

 private:
  std::string source_;
  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

struct SweepSettings {
  std::string ml_tool;         // empty: first ML-static tool
  std::string signature_tool;  // empty: first signature tool
  double lo = 1000.0;
  double hi = 100'000.0;
  std::size_t points = 100;
};

struct ExperimentConfig {
  int workers = 10;
  int trials_per_worker = 20;
  std::uint64_t seed = 1;
  ExecutionMode mode = ExecutionMode::Deterministic;
  double time_scale = 0.001;
  int poll_interval_us = 200;

  sim::CorpusConfig corpus;
  std::vector<std::string> tools;
  sim::SimConfig sim;
  RemediationPolicy remediation = RemediationPolicy::standard();
  std::vector<ResourceClass> resources{{"snapshot-restore", 4}};
  cost::ScoringConfig scoring;
  SweepSettings sweep;

  /// Throws ConfigError.
  void validate() const;
};

/// Desk-scale defaults: five tools, 200 files, 10 workers x 20 trials,
/// snapshot-restore limited to 4.
ExperimentConfig default_experiment_config();

/// Applies the file on top of the defaults. Throws ConfigError for unknown
/// keys and malformed values.
ExperimentConfig experiment_config_from(ConfigFile file);

/// Resolves empty sweep tool names against the configured tool kinds.
SweepSettings resolved_sweep(const ExperimentConfig& cfg);

/// "lo:hi:n". Throws ConfigError.
SweepSettings parse_grid(std::string_view text, SweepSettings base = {});

}  // namespace deteval::io
