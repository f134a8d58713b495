#pragma once

#include <exception>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace deteval {

enum class RemediationAction {
  IgnoreContinue,
  RestartStage,
  SkipStage,
  RestartTrial,
  AbortTrialNoResults,
  RestartOrchestrator,
  AbortExperiment,
};

std::string_view to_string(RemediationAction a);
std::optional<RemediationAction> parse_remediation_action(std::string_view text);

/// Ordered responses to stage exceptions and how often each may be used.
struct RemediationPolicy {
  int ignore_budget = 3;
  std::map<std::string, int, std::less<>> stage_retry_budget;  // each in [0, 2]
  int default_stage_retry_budget = 0;
  int stage_skip_budget = 0;
  int trial_restart_budget = 3;
  int orchestrator_restart_budget = 0;
  std::vector<RemediationAction> ladder;
  // Used when every budgeted rung is spent and the ladder has no terminal rung.
  RemediationAction terminal = RemediationAction::AbortTrialNoResults;

  int stage_retries(std::string_view stage) const;
  /// Throws ConfigError on negative budgets, out-of-range stage budgets or an
  /// empty ladder.
  void validate() const;

  /// Ignore three times, restart the stage zero to two times depending on
  /// the stage, restart the trial three times, then drop the trial.
  static RemediationPolicy standard();
};

struct RemediationBudgets {
  int ignore = 0;
  int stage_restart = 0;
  int stage_skip = 0;
  int trial_restart = 0;
};

struct RemediationContext {
  std::string stage;
  std::string trial;  // "tool/file"
};

/// Remaining budgets for one trial. Stage-level budgets refill when the
/// stage completes (or the trial restarts); the trial budget refills only
/// when the trial completes, which ends the state's life.
class RemediationState {
 public:
  RemediationState(const RemediationPolicy& policy, int* orchestrator_budget);

  void enter_stage(std::string_view stage);
  void stage_completed(std::string_view next_stage);
  void trial_restarted(std::string_view first_stage);

  RemediationAction apply(const RemediationContext& ctx, const std::exception& ex);

  const RemediationBudgets& remaining() const { return left_; }
  int orchestrator_remaining() const {
    return orchestrator_budget_ ? *orchestrator_budget_ : 0;
  }

 private:
  const RemediationPolicy* policy_;
  int* orchestrator_budget_;
  RemediationBudgets left_;
};

/// Picks the first rung of the ladder whose budget is unspent and consumes
/// one unit of it.
inline RemediationAction apply_remediation(RemediationState& state,
                                           const RemediationContext& ctx,
                                           const std::exception& ex) {
  return state.apply(ctx, ex);
}

}  // namespace deteval
