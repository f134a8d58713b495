#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "deteval/metrics.hpp"
#include "deteval/model.hpp"
#include "deteval/remediation.hpp"
#include "deteval/warden.hpp"

namespace deteval {

/// Experiment clock in integer milliseconds. Virtual in deterministic mode,
/// scaled wall time in threaded mode.
using SimMillis = std::int64_t;

inline double to_seconds(SimMillis ms) { return static_cast<double>(ms) / 1000.0; }
inline SimMillis from_seconds(double s) {
  return static_cast<SimMillis>(s * 1000.0 + (s >= 0 ? 0.5 : -0.5));
}

enum class StageKind {
  RestoreSnapshot,
  UploadScript,
  DeliverFile,
  StaticWait,
  ExecuteDynamic,
  CollectPowerOff,
};

inline constexpr std::size_t kStageCount = 6;

std::string_view stage_name(StageKind kind);
std::optional<StageKind> parse_stage(std::string_view name);

struct PermitDemand {
  std::string resource;
  int permits = 1;
};

struct StageCheck {
  bool done = false;
  std::optional<SimMillis> wake_at;  // when a re-check may change the answer
};

struct StageLog {
  std::string stage;
  int exit_code = 0;
  std::string stdout_text;
  std::string stderr_text;
};

/// Everything a backend hands back when a trial finishes. Times are on the
/// trial clock with t_download = 0.
struct TrialOutput {
  TrialRecord record;
  std::vector<StageLog> logs;
  std::vector<AlertEvent> alerts;
};

/// Backend side of one trial attempt (one VM). Start and check may throw
/// StageError; the orchestrator routes those through remediation.
class TrialSession {
 public:
  virtual ~TrialSession() = default;
  virtual void start(StageKind stage, SimMillis now) = 0;
  virtual StageCheck check(StageKind stage, SimMillis now) = 0;
  virtual void skip(StageKind stage, SimMillis now) = 0;
  virtual TrialOutput finish(SimMillis now) = 0;
};

struct TrialSpec {
  std::string tool_id;
  std::string file_id;
  std::map<std::string, std::string> params;
};

struct TrialContext {
  const TrialSpec* spec = nullptr;
  std::size_t spec_index = 0;
  int attempt = 1;  // trial attempt, 1-based
  std::uint64_t master_seed = 0;
};

/// Provides stage side effects. `open` must be safe to call concurrently in
/// threaded mode.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::unique_ptr<TrialSession> open(const TrialContext& ctx) = 0;
};

/// One step of a trial. Immutable: all per-trial data lives in the session.
class Stage {
 public:
  Stage(StageKind kind, std::vector<PermitDemand> demands = {});

  StageKind kind() const { return kind_; }
  std::string_view name() const { return stage_name(kind_); }
  const std::vector<PermitDemand>& demands() const { return demands_; }

  void start(TrialSession& s, SimMillis now) const { s.start(kind_, now); }
  StageCheck check(TrialSession& s, SimMillis now) const { return s.check(kind_, now); }

 private:
  StageKind kind_;
  std::vector<PermitDemand> demands_;  // sorted by resource name
};

/// restore snapshot, upload script, deliver file, static wait, execute with
/// dynamic wait, collect and power off. Restores hold one
/// "snapshot-restore" permit.
std::vector<Stage> standard_stages();

enum class ExecutionMode { Deterministic, Threaded };

struct ExperimentPlan {
  std::vector<TrialSpec> trial_specs;
  int worker_count = 10;
  int trials_per_worker = 20;
  std::uint64_t master_seed = 0;
  RemediationPolicy remediation = RemediationPolicy::standard();
  std::vector<Stage> stages = standard_stages();
  ExecutionMode mode = ExecutionMode::Deterministic;
  // Threaded mode only: wall seconds per experiment second, and the pause
  // between polling passes that made no progress.
  double time_scale = 0.001;
  std::chrono::microseconds poll_interval{200};

  /// Throws ConfigError.
  void validate() const;
};

struct TrialResults {
  std::size_t spec_index = 0;
  TrialRecord record;
  std::vector<StageLog> logs;
  std::vector<AlertEvent> alerts;
  int trial_attempts = 1;
  std::string abort_reason;

  bool aborted() const { return record.aborted; }
};

struct ExperimentResults {
  std::vector<TrialResults> trials;  // ordered by spec index
  SimMillis elapsed = 0;

  std::size_t completed() const;
  std::size_t aborted() const;
};

enum class TrialStatusKind {
  Idle,
  Unchanged,
  Waiting,  // queued on the warden
  Advanced,
  Completed,
  Aborted,
  RestartOrchestrator,
};

struct TrialStatus {
  TrialStatusKind kind = TrialStatusKind::Idle;
  std::string stage;  // stage now current, for Advanced

  bool progressed() const {
    return kind != TrialStatusKind::Idle && kind != TrialStatusKind::Unchanged &&
           kind != TrialStatusKind::Waiting;
  }
};

using EventEmitter = std::function<void(SimMillis, MetricsKind, nlohmann::json)>;

/// A reusable trial slot: runs one spec at a time through every stage, then
/// accepts the next spec.
class Trial {
 public:
  Trial(const ExperimentPlan& plan, Backend& backend, ResourceWarden& warden,
        int worker_id, int* orchestrator_budget, EventEmitter emit);
  ~Trial();
  Trial(const Trial&) = delete;
  Trial& operator=(const Trial&) = delete;

  void assign(std::size_t spec_index);
  bool busy() const { return spec_index_.has_value(); }
  std::optional<std::size_t> spec_index() const { return spec_index_; }

  TrialStatus poll(SimMillis now);
  std::optional<SimMillis> wake_at() const { return wake_at_; }
  std::optional<TrialResults> take_results();
  /// Drops the current spec without results and returns its index.
  std::optional<std::size_t> reset();

 private:
  enum class Step { Acquiring, Ready, Running };

  const Stage& stage() const { return plan_->stages[stage_idx_]; }
  std::string trial_label() const;
  nlohmann::json base_payload() const;
  void open_session();
  bool acquire_permits();
  void release_stage_permits();
  TrialStatus start_stage(SimMillis now);
  TrialStatus advance(SimMillis now, StageDisposition disposition);
  TrialStatus handle_exception(SimMillis now, const std::exception& ex,
                               bool persistent);
  TrialStatus abort(SimMillis now, std::string reason);

  const ExperimentPlan* plan_;
  Backend* backend_;
  ResourceWarden* warden_;
  int worker_id_;
  int* orchestrator_budget_;
  EventEmitter emit_;

  std::optional<std::size_t> spec_index_;
  std::unique_ptr<ResourceContainer> container_;
  std::unique_ptr<TrialSession> session_;
  std::optional<RemediationState> remediation_;
  std::vector<Ticket> tickets_;
  std::size_t stage_idx_ = 0;
  Step step_ = Step::Acquiring;
  int trial_attempt_ = 1;
  std::vector<int> stage_attempts_;
  std::vector<StageAttempt> history_;
  std::optional<SimMillis> wake_at_;
  std::optional<TrialResults> results_;
};

inline TrialStatus poll_trial(Trial& trial, SimMillis now) { return trial.poll(now); }

/// Runs every spec to completion or abort. Throws ExperimentAborted when the
/// remediation ladder escalates to the experiment, ConfigError on an invalid
/// plan.
ExperimentResults run_experiment(const ExperimentPlan& plan, Backend& backend,
                                 ResourceWarden& warden, MetricsSink* sink = nullptr);

}  // namespace deteval
