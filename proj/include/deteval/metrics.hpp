#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace deteval {

enum class MetricsKind {
  StageStart,
  StageDone,
  Exception,
  Remediation,
  PermitGrant,
  PermitRelease,
  TrialDone,
};

std::string_view to_string(MetricsKind kind);
std::optional<MetricsKind> parse_metrics_kind(std::string_view text);

struct MetricsEvent {
  double t = 0.0;  // seconds on the experiment clock
  int worker_id = 0;
  std::uint64_t seq = 0;  // per-worker sequence number
  MetricsKind kind = MetricsKind::StageStart;
  nlohmann::json payload = nlohmann::json::object();
};

nlohmann::json to_json(const MetricsEvent& ev);
/// Returns nullopt for anything that is not a well-formed event object.
std::optional<MetricsEvent> metrics_event_from_json(const nlohmann::json& j);

/// Append-only destination for metrics events. Implementations must accept
/// concurrent appends.
class MetricsSink {
 public:
  virtual ~MetricsSink() = default;
  virtual void append(MetricsEvent ev) = 0;
};

class MemorySink final : public MetricsSink {
 public:
  void append(MetricsEvent ev) override;
  std::vector<MetricsEvent> events() const;

 private:
  mutable std::mutex mu_;
  std::vector<MetricsEvent> events_;
};

/// Writes one JSON object per line.
class JsonlSink final : public MetricsSink {
 public:
  explicit JsonlSink(std::ostream& out) : out_(&out) {}
  void append(MetricsEvent ev) override;

 private:
  std::mutex mu_;
  std::ostream* out_;
};

struct LatencyStats {
  std::size_t count = 0;
  double p50 = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
  double max = 0.0;
};

struct MetricsSummary {
  std::size_t events = 0;
  std::size_t malformed = 0;
  std::size_t trials_done = 0;
  std::size_t trials_aborted = 0;
  // trial-done events in the trailing 60 s window ending at the last event
  double files_per_minute = 0.0;
  // most trial-done events in any 60 s window
  double peak_files_per_minute = 0.0;
  std::map<std::string, LatencyStats> stage_latency_s;
  std::size_t exceptions = 0;
  std::map<std::string, std::size_t> remediations;
  std::map<std::string, int> max_concurrency;
  std::map<std::string, int> limits;
  std::size_t limit_violations = 0;
};

MetricsSummary aggregate_metrics(std::span<const MetricsEvent> events);
/// Parses a JSON Lines stream; unparseable lines are counted as malformed.
MetricsSummary aggregate_metrics(std::istream& jsonl);

nlohmann::json to_json(const MetricsSummary& s);

}  // namespace deteval
