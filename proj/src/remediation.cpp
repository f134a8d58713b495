#include "deteval/remediation.hpp"

#include <fmt/format.h>

#include "deteval/errors.hpp"

namespace deteval {

namespace {

constexpr std::pair<RemediationAction, std::string_view> kActionNames[] = {
    {RemediationAction::IgnoreContinue, "ignore"},
    {RemediationAction::RestartStage, "restart-stage"},
    {RemediationAction::SkipStage, "skip-stage"},
    {RemediationAction::RestartTrial, "restart-trial"},
    {RemediationAction::AbortTrialNoResults, "abort-trial"},
    {RemediationAction::RestartOrchestrator, "restart-orchestrator"},
    {RemediationAction::AbortExperiment, "abort-experiment"},
};

}  // namespace

std::string_view to_string(RemediationAction a) {
  for (const auto& [k, name] : kActionNames) {
    if (k == a) return name;
  }
  return "?";
}

std::optional<RemediationAction> parse_remediation_action(std::string_view text) {
  for (const auto& [k, name] : kActionNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

int RemediationPolicy::stage_retries(std::string_view stage) const {
  auto it = stage_retry_budget.find(stage);
  return it == stage_retry_budget.end() ? default_stage_retry_budget : it->second;
}

void RemediationPolicy::validate() const {
  if (ignore_budget < 0 || stage_skip_budget < 0 || trial_restart_budget < 0 ||
      orchestrator_restart_budget < 0) {
    throw ConfigError("remediation budgets must be >= 0");
  }
  auto check_stage = [](std::string_view name, int b) {
    if (b < 0 || b > 2) {
      throw ConfigError(
          fmt::format("stage retry budget for '{}' must be in [0, 2], got {}", name, b));
    }
  };
  check_stage("<default>", default_stage_retry_budget);
  for (const auto& [name, b] : stage_retry_budget) check_stage(name, b);
  if (ladder.empty()) throw ConfigError("remediation ladder is empty");
  if (terminal != RemediationAction::AbortTrialNoResults &&
      terminal != RemediationAction::AbortExperiment) {
    throw ConfigError("terminal remediation must abort the trial or the experiment");
  }
}

RemediationPolicy RemediationPolicy::standard() {
  RemediationPolicy p;
  p.ignore_budget = 3;
  p.stage_retry_budget = {
      {"restore-snapshot", 2}, {"upload-script", 2}, {"deliver-file", 1},
      {"static-wait", 0},      {"execute", 0},       {"collect", 2},
  };
  p.default_stage_retry_budget = 0;
  p.trial_restart_budget = 3;
  p.ladder = {RemediationAction::IgnoreContinue, RemediationAction::RestartStage,
              RemediationAction::RestartTrial,
              RemediationAction::AbortTrialNoResults};
  return p;
}

RemediationState::RemediationState(const RemediationPolicy& policy,
                                   int* orchestrator_budget)
    : policy_(&policy), orchestrator_budget_(orchestrator_budget) {
  left_.trial_restart = policy.trial_restart_budget;
  left_.ignore = policy.ignore_budget;
  left_.stage_skip = policy.stage_skip_budget;
}

void RemediationState::enter_stage(std::string_view stage) {
  left_.stage_restart = policy_->stage_retries(stage);
  left_.stage_skip = policy_->stage_skip_budget;
}

void RemediationState::stage_completed(std::string_view next_stage) {
  left_.ignore = policy_->ignore_budget;
  enter_stage(next_stage);
}

void RemediationState::trial_restarted(std::string_view first_stage) {
  left_.ignore = policy_->ignore_budget;
  enter_stage(first_stage);
}

RemediationAction RemediationState::apply(const RemediationContext&,
                                          const std::exception&) {
  auto take = [](int& budget) {
    if (budget <= 0) return false;
    --budget;
    return true;
  };
  for (const auto action : policy_->ladder) {
    switch (action) {
      case RemediationAction::IgnoreContinue:
        if (take(left_.ignore)) return action;
        break;
      case RemediationAction::RestartStage:
        if (take(left_.stage_restart)) return action;
        break;
      case RemediationAction::SkipStage:
        if (take(left_.stage_skip)) return action;
        break;
      case RemediationAction::RestartTrial:
        if (take(left_.trial_restart)) return action;
        break;
      case RemediationAction::RestartOrchestrator:
        if (orchestrator_budget_ && take(*orchestrator_budget_)) return action;
        break;
      case RemediationAction::AbortTrialNoResults:
      case RemediationAction::AbortExperiment:
        return action;
    }
  }
  return policy_->terminal;
}

}  // namespace deteval
