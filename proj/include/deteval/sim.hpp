#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "deteval/model.hpp"
#include "deteval/orchestrator.hpp"

namespace deteval::sim {

using Rng = std::mt19937_64;

/// Stable seed for a random stream owned by one (tool, file) pair. The salt
/// separates independent streams of the same trial.
std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view tool_id,
                          std::string_view file_id, std::string_view salt);

/// Nonnegative scalar distribution, written in config files as
/// "const:30", "uniform:0,60", "lognormal:<median>,<sigma>" or "exp:<mean>".
class Distribution {
 public:
  enum class Kind { Constant, Uniform, LogNormal, Exponential };

  static Distribution constant(double v);
  static Distribution uniform(double lo, double hi);
  static Distribution lognormal(double median, double sigma);
  static Distribution exponential(double mean);
  /// Throws ConfigError on malformed text.
  static Distribution parse(std::string_view text);

  double sample(Rng& rng) const;
  double mean() const;
  Kind kind() const { return kind_; }
  std::string to_string() const;

 private:
  Distribution(Kind k, double a, double b) : kind_(k), a_(a), b_(b) {}
  Kind kind_ = Kind::Constant;
  double a_ = 0.0;
  double b_ = 0.0;
};

enum class DetectorKind { Signature, MLStatic, DynamicOnly };

std::string_view to_string(DetectorKind k);
std::optional<DetectorKind> parse_detector_kind(std::string_view text);

struct ApplianceModel {
  double post_close_fraction = 0.0;
  Distribution post_close_delay = Distribution::uniform(1.0, 600.0);
};

struct DetectorModel {
  DetectorKind kind = DetectorKind::MLStatic;
  double known_hash_fraction = 1.0;  // Signature only: zero-day hashes on file
  std::map<FileType, double> recall_by_filetype;
  double zero_day_recall = 0.0;
  double false_positive_rate = 0.001;
  Distribution static_latency = Distribution::constant(0.0);
  Distribution dynamic_latency = Distribution::constant(0.0);
  std::optional<ApplianceModel> appliance;

  double detection_probability(const FileSample& file) const;
  /// Throws ConfigError when a probability leaves [0, 1].
  void validate() const;
};

/// Named detector presets. "signature", "ml" and "dynamic-only" are generic;
/// "tool1".."tool4", "baseline1", "baseline2" are calibrated to published
/// per-tool recalls, false-positive costs and median detection times.
DetectorModel detector_preset(std::string_view name);
std::vector<std::string> detector_preset_names();

struct TrialTimes {
  double t_download = 0.0;
  double t_execute = 0.0;
  double t_close = 0.0;
};

/// Draws whether and when the tool alerts on the file. Static kinds alert
/// relative to the download, DynamicOnly relative to execution; an appliance
/// pushes its share of alerts past the close.
std::optional<AlertEvent> detector_verdict(std::string_view tool_id,
                                           const DetectorModel& model,
                                           const FileSample& file,
                                           const TrialTimes& times, Rng& rng);

struct ResourceProfile {
  Distribution cpu_fraction = Distribution::constant(0.0);
  Distribution ram_bytes = Distribution::constant(0.0);
  Distribution hdd_read_bytes_per_s = Distribution::constant(0.0);
  Distribution hdd_write_bytes_per_s = Distribution::constant(0.0);
};

/// One sample per whole second in [t_begin, t_end).
std::vector<ResourceSample> sample_resources(const ResourceProfile& profile,
                                             double t_begin, double t_end, Rng& rng);

/// Idle run of `duration_s` seconds summarized into per-second means.
AmbientProfile sample_ambient(std::string_view tool_id, const ResourceProfile& idle,
                              double duration_s, Rng& rng);

struct ToolModel {
  DetectorModel detector;
  ResourceProfile active;
  ResourceProfile idle;
};

/// Per-tool defaults for the resource side of a preset.
ToolModel tool_preset(std::string_view name);

struct StageTiming {
  Distribution restore = Distribution::uniform(15.0, 25.0);
  Distribution upload = Distribution::uniform(2.0, 4.0);
  Distribution deliver = Distribution::uniform(1.0, 3.0);
  double static_wait_s = 60.0;
  Distribution static_overshoot = Distribution::uniform(0.0, 60.0);
  double dynamic_wait_s = 60.0;
  Distribution dynamic_overshoot = Distribution::uniform(0.0, 60.0);
  Distribution collect = Distribution::uniform(3.0, 6.0);
};

struct FaultConfig {
  double transient_probability = 0.0;  // per stage attempt
  std::map<StageKind, double> transient_by_stage;
  // chance that a trial carries a persistent fault on one of its stages
  double persistent_probability = 0.0;
  std::set<std::tuple<std::string, std::string, StageKind>> injected_persistent;

  double transient_for(StageKind stage) const;
  void validate() const;
};

enum class Lifecycle { Off, Restoring, Ready, ScriptLoaded, FileDelivered, Executing, Collected };

std::string_view to_string(Lifecycle l);

struct VmState {
  Lifecycle lifecycle = Lifecycle::Off;
  SimMillis clock = 0;
  bool static_done = false;
};

struct StageOutcome {
  SimMillis duration = 0;
  Lifecycle during = Lifecycle::Off;
  Lifecycle after = Lifecycle::Off;
};

struct StageParams {
  double static_wait_s = 60.0;
  double dynamic_wait_s = 60.0;
};

/// Latency draw and lifecycle transition of one stage. Throws
/// IllegalTransition when the VM is not in a state that admits the stage.
StageOutcome simulate_stage(const VmState& vm, StageKind stage, const StageTiming& timing,
                            const StageParams& params, Rng& rng);

struct SimConfig {
  StageTiming timing;
  FaultConfig faults;
  std::map<std::string, ToolModel> tools;
};

/// Discrete-event stand-in for the VM farm.
class SimBackend final : public Backend {
 public:
  SimBackend(SimConfig config, std::vector<FileSample> catalog);

  std::unique_ptr<TrialSession> open(const TrialContext& ctx) override;

  /// Five-minute idle measurement for a tool.
  AmbientProfile ambient(const std::string& tool_id, std::uint64_t master_seed,
                         double duration_s = 300.0) const;

  const SimConfig& config() const { return config_; }
  const FileSample& file(const std::string& file_id) const;

 private:
  SimConfig config_;
  std::map<std::string, FileSample, std::less<>> catalog_;
};

struct CorpusConfig {
  std::size_t files = 200;
  double malware_fraction = 0.5;
  double zero_day_fraction_of_malware_pe = 0.04;
  std::map<FileType, double> malware_mix;  // empty: published malware mix
  std::map<FileType, double> benign_mix;   // empty: PE/Text/HTML/PDF/Compressed heavy
};

std::map<FileType, double> default_malware_mix();
std::map<FileType, double> default_benign_mix();

/// Synthetic labelled corpus with exact (largest-remainder) type counts.
std::vector<FileSample> generate_corpus(const CorpusConfig& cfg, std::uint64_t seed);

}  // namespace deteval::sim
