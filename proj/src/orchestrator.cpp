#include "deteval/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "deteval/errors.hpp"

namespace deteval {

namespace {

constexpr std::pair<StageKind, std::string_view> kStageNames[] = {
    {StageKind::RestoreSnapshot, "restore-snapshot"},
    {StageKind::UploadScript, "upload-script"},
    {StageKind::DeliverFile, "deliver-file"},
    {StageKind::StaticWait, "static-wait"},
    {StageKind::ExecuteDynamic, "execute"},
    {StageKind::CollectPowerOff, "collect"},
};

// Passes at one instant before the engine declares a livelock.
constexpr int kMaxPassesPerInstant = 1'000'000;

}  // namespace

std::string_view stage_name(StageKind kind) {
  return kStageNames[static_cast<std::size_t>(kind)].second;
}

std::optional<StageKind> parse_stage(std::string_view name) {
  for (const auto& [k, n] : kStageNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

Stage::Stage(StageKind kind, std::vector<PermitDemand> demands)
    : kind_(kind), demands_(std::move(demands)) {
  // A single global acquisition order keeps multi-class demands deadlock free.
  std::sort(demands_.begin(), demands_.end(),
            [](const PermitDemand& a, const PermitDemand& b) {
              return a.resource < b.resource;
            });
}

std::vector<Stage> standard_stages() {
  return {
      Stage(StageKind::RestoreSnapshot, {{"snapshot-restore", 1}}),
      Stage(StageKind::UploadScript),
      Stage(StageKind::DeliverFile),
      Stage(StageKind::StaticWait),
      Stage(StageKind::ExecuteDynamic),
      Stage(StageKind::CollectPowerOff),
  };
}

void ExperimentPlan::validate() const {
  if (worker_count < 1) throw ConfigError("worker_count must be >= 1");
  if (trials_per_worker < 1) throw ConfigError("trials_per_worker must be >= 1");
  if (stages.empty()) throw ConfigError("plan has no stages");
  for (std::size_t i = 1; i < stages.size(); ++i) {
    if (stages[i].kind() <= stages[i - 1].kind()) {
      throw ConfigError("stages must appear once each, in canonical order");
    }
  }
  for (const auto& st : stages) {
    for (const auto& d : st.demands()) {
      if (d.permits < 1) {
        throw ConfigError(fmt::format("stage '{}' demands {} permits of '{}'",
                                      st.name(), d.permits, d.resource));
      }
    }
  }
  if (mode == ExecutionMode::Threaded && !(time_scale > 0.0)) {
    throw ConfigError("time_scale must be > 0 in threaded mode");
  }
  remediation.validate();
  std::set<std::pair<std::string_view, std::string_view>> seen;
  for (const auto& s : trial_specs) {
    if (!seen.emplace(s.tool_id, s.file_id).second) {
      throw ConfigError(
          fmt::format("trial spec {}/{} appears more than once", s.tool_id, s.file_id));
    }
  }
}

std::size_t ExperimentResults::completed() const {
  return static_cast<std::size_t>(std::count_if(
      trials.begin(), trials.end(), [](const TrialResults& r) { return !r.aborted(); }));
}

std::size_t ExperimentResults::aborted() const { return trials.size() - completed(); }

// ---------------------------------------------------------------------------
// Trial

Trial::Trial(const ExperimentPlan& plan, Backend& backend, ResourceWarden& warden,
             int worker_id, int* orchestrator_budget, EventEmitter emit)
    : plan_(&plan),
      backend_(&backend),
      warden_(&warden),
      worker_id_(worker_id),
      orchestrator_budget_(orchestrator_budget),
      emit_(std::move(emit)) {}

Trial::~Trial() = default;

std::string Trial::trial_label() const {
  const auto& spec = plan_->trial_specs[*spec_index_];
  return spec.tool_id + "/" + spec.file_id;
}

nlohmann::json Trial::base_payload() const {
  const auto& spec = plan_->trial_specs[*spec_index_];
  return {{"trial", *spec_index_}, {"tool", spec.tool_id}, {"file", spec.file_id}};
}

void Trial::open_session() {
  TrialContext ctx;
  ctx.spec = &plan_->trial_specs[*spec_index_];
  ctx.spec_index = *spec_index_;
  ctx.attempt = trial_attempt_;
  ctx.master_seed = plan_->master_seed;
  session_ = backend_->open(ctx);
}

void Trial::assign(std::size_t spec_index) {
  spec_index_ = spec_index;
  trial_attempt_ = 1;
  results_.reset();
  container_ = std::make_unique<ResourceContainer>(*warden_, worker_id_);
  remediation_.emplace(plan_->remediation, orchestrator_budget_);
  stage_idx_ = 0;
  step_ = Step::Acquiring;
  stage_attempts_.assign(plan_->stages.size(), 0);
  history_.clear();
  tickets_.clear();
  wake_at_.reset();
  remediation_->enter_stage(stage().name());
  open_session();
}

bool Trial::acquire_permits() {
  const auto& demands = stage().demands();
  for (std::size_t i = 0; i < demands.size(); ++i) {
    if (tickets_.size() <= i) {
      tickets_.push_back(container_->request(demands[i].resource, demands[i].permits));
    }
    if (!container_->poll(tickets_[i])) return false;
  }
  return true;
}

void Trial::release_stage_permits() {
  for (const auto& t : tickets_) {
    if (container_->poll(t)) {
      container_->release(t->resource(), t->permits());
    } else {
      container_->cancel(t);
    }
  }
  tickets_.clear();
}

TrialStatus Trial::start_stage(SimMillis now) {
  ++stage_attempts_[stage_idx_];
  auto payload = base_payload();
  payload["stage"] = stage().name();
  payload["attempt"] = stage_attempts_[stage_idx_];
  emit_(now, MetricsKind::StageStart, std::move(payload));
  wake_at_.reset();
  stage().start(*session_, now);
  step_ = Step::Running;
  return {TrialStatusKind::Advanced, std::string(stage().name())};
}

TrialStatus Trial::advance(SimMillis now, StageDisposition disposition) {
  release_stage_permits();
  {
    auto payload = base_payload();
    payload["stage"] = stage().name();
    payload["disposition"] = to_string(disposition);
    emit_(now, MetricsKind::StageDone, std::move(payload));
  }
  history_.push_back(
      {std::string(stage().name()), stage_attempts_[stage_idx_], disposition});
  ++stage_idx_;
  wake_at_.reset();

  if (stage_idx_ < plan_->stages.size()) {
    if (disposition == StageDisposition::Completed) {
      remediation_->stage_completed(stage().name());
    } else {
      remediation_->enter_stage(stage().name());
    }
    step_ = Step::Acquiring;
    return {TrialStatusKind::Advanced, std::string(stage().name())};
  }

  auto out = session_->finish(now);
  TrialResults r;
  r.spec_index = *spec_index_;
  r.record = std::move(out.record);
  r.record.stage_history = history_;
  r.record.aborted = false;
  r.logs = std::move(out.logs);
  r.alerts = std::move(out.alerts);
  r.trial_attempts = trial_attempt_;
  if (!r.record.timestamps_ordered()) {
    r.record.aborted = true;
    r.abort_reason = "record incomplete after a skipped stage";
    r.alerts.clear();
  }
  const bool aborted = r.record.aborted;
  {
    auto payload = base_payload();
    payload["status"] = aborted ? "aborted" : "completed";
    payload["attempts"] = trial_attempt_;
    emit_(now, MetricsKind::TrialDone, std::move(payload));
  }
  results_ = std::move(r);
  session_.reset();
  container_.reset();
  spec_index_.reset();
  return {aborted ? TrialStatusKind::Aborted : TrialStatusKind::Completed, {}};
}

TrialStatus Trial::abort(SimMillis now, std::string reason) {
  release_stage_permits();
  const auto& spec = plan_->trial_specs[*spec_index_];
  TrialResults r;
  r.spec_index = *spec_index_;
  r.record.tool_id = spec.tool_id;
  r.record.file_id = spec.file_id;
  r.record.aborted = true;
  r.record.stage_history = history_;
  r.record.stage_history.push_back(
      {std::string(stage().name()), stage_attempts_[stage_idx_],
       StageDisposition::Aborted});
  r.trial_attempts = trial_attempt_;
  r.abort_reason = std::move(reason);
  {
    auto payload = base_payload();
    payload["status"] = "aborted";
    payload["attempts"] = trial_attempt_;
    emit_(now, MetricsKind::TrialDone, std::move(payload));
  }
  results_ = std::move(r);
  session_.reset();
  container_.reset();
  spec_index_.reset();
  wake_at_.reset();
  return {TrialStatusKind::Aborted, {}};
}

TrialStatus Trial::handle_exception(SimMillis now, const std::exception& ex,
                                    bool persistent) {
  const std::string stage_nm(stage().name());
  {
    auto payload = base_payload();
    payload["stage"] = stage_nm;
    payload["message"] = ex.what();
    payload["persistent"] = persistent;
    emit_(now, MetricsKind::Exception, std::move(payload));
  }
  const auto action = remediation_->apply({stage_nm, trial_label()}, ex);
  {
    auto payload = base_payload();
    payload["stage"] = stage_nm;
    payload["action"] = to_string(action);
    emit_(now, MetricsKind::Remediation, std::move(payload));
  }

  switch (action) {
    case RemediationAction::IgnoreContinue:
      // Re-poll at the same instant: retry the start or re-check.
      wake_at_ = now;
      return {TrialStatusKind::Unchanged, stage_nm};
    case RemediationAction::RestartStage:
      release_stage_permits();
      step_ = Step::Acquiring;
      wake_at_ = now;
      return {TrialStatusKind::Advanced, stage_nm};
    case RemediationAction::SkipStage:
      try {
        session_->skip(stage().kind(), now);
      } catch (const StageError& e) {
        return abort(now, fmt::format("skip of {} failed: {}", stage_nm, e.what()));
      }
      return advance(now, StageDisposition::Skipped);
    case RemediationAction::RestartTrial:
      release_stage_permits();
      container_->release_all();
      ++trial_attempt_;
      stage_idx_ = 0;
      step_ = Step::Acquiring;
      std::fill(stage_attempts_.begin(), stage_attempts_.end(), 0);
      history_.clear();
      remediation_->trial_restarted(stage().name());
      open_session();
      wake_at_ = now;
      return {TrialStatusKind::Advanced, std::string(stage().name())};
    case RemediationAction::AbortTrialNoResults:
      return abort(now, fmt::format("remediation exhausted at {}: {}", stage_nm, ex.what()));
    case RemediationAction::RestartOrchestrator:
      return {TrialStatusKind::RestartOrchestrator, stage_nm};
    case RemediationAction::AbortExperiment:
      throw ExperimentAborted(fmt::format("experiment aborted by {} at {}: {}",
                                          trial_label(), stage_nm, ex.what()));
  }
  return {TrialStatusKind::Unchanged, stage_nm};
}

TrialStatus Trial::poll(SimMillis now) {
  if (!spec_index_) return {TrialStatusKind::Idle, {}};
  TrialStatus status{TrialStatusKind::Unchanged, std::string(stage().name())};
  try {
    for (;;) {
      switch (step_) {
        case Step::Acquiring:
          if (!acquire_permits()) {
            // woken by a release, not by the clock
            wake_at_.reset();
            if (status.kind == TrialStatusKind::Unchanged) status.kind = TrialStatusKind::Waiting;
            return status;
          }
          step_ = Step::Ready;
          [[fallthrough]];
        case Step::Ready:
          status = start_stage(now);
          [[fallthrough]];
        case Step::Running: {
          const auto c = stage().check(*session_, now);
          if (!c.done) {
            wake_at_ = c.wake_at;
            return status;
          }
          auto next = advance(now, StageDisposition::Completed);
          if (next.kind != TrialStatusKind::Advanced) return next;
          status = std::move(next);
          break;
        }
      }
    }
  } catch (const StageFault& f) {
    return handle_exception(now, f, f.persistent());
  } catch (const StageError& e) {
    return handle_exception(now, e, false);
  }
}

std::optional<TrialResults> Trial::take_results() {
  auto r = std::move(results_);
  results_.reset();
  return r;
}

std::optional<std::size_t> Trial::reset() {
  if (!spec_index_) return std::nullopt;
  const auto idx = *spec_index_;
  release_stage_permits();
  session_.reset();
  container_.reset();
  spec_index_.reset();
  wake_at_.reset();
  results_.reset();
  return idx;
}

// ---------------------------------------------------------------------------
// Engine

namespace {

class Worker {
 public:
  Worker(int id, const ExperimentPlan& plan, Backend& backend, ResourceWarden& warden,
         EventEmitter emit, std::vector<std::optional<TrialResults>>& results)
      : id_(id), results_(&results) {
    orchestrator_budget_ = plan.remediation.orchestrator_restart_budget;
    for (int i = 0; i < plan.trials_per_worker; ++i) {
      slots_.push_back(std::make_unique<Trial>(plan, backend, warden, id,
                                               &orchestrator_budget_, emit));
    }
  }

  void enqueue(std::size_t spec_index) { queue_.push_back(spec_index); }

  bool done() const {
    return queue_.empty() &&
           std::none_of(slots_.begin(), slots_.end(),
                        [](const auto& t) { return t->busy(); });
  }

  std::optional<SimMillis> next_wake() const {
    std::optional<SimMillis> best;
    for (const auto& t : slots_) {
      if (!t->busy()) continue;
      if (auto w = t->wake_at(); w && (!best || *w < *best)) best = w;
    }
    return best;
  }

  // One polling pass over every slot. Returns whether anything changed.
  bool pass(SimMillis now) {
    bool progress = false;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      auto& slot = *slots_[i];
      if (!slot.busy() && !queue_.empty()) {
        slot.assign(queue_.front());
        queue_.pop_front();
        progress = true;
      }
      const auto st = slot.poll(now);
      if (st.kind == TrialStatusKind::RestartOrchestrator) {
        restart();
        return true;
      }
      if (st.kind == TrialStatusKind::Completed || st.kind == TrialStatusKind::Aborted) {
        auto r = slot.take_results();
        (*results_)[r->spec_index] = std::move(r);
      }
      progress = progress || st.progressed();
    }
    return progress;
  }

 private:
  // Puts every in-flight spec back at the head of the queue, in slot order,
  // to start over from fresh trial state.
  void restart() {
    std::vector<std::size_t> inflight;
    for (auto& t : slots_) {
      if (auto idx = t->reset()) inflight.push_back(*idx);
    }
    queue_.insert(queue_.begin(), inflight.begin(), inflight.end());
  }

  int id_;
  int orchestrator_budget_ = 0;
  std::vector<std::unique_ptr<Trial>> slots_;
  std::deque<std::size_t> queue_;
  std::vector<std::optional<TrialResults>>* results_;
};

class ListenerGuard {
 public:
  ListenerGuard(ResourceWarden& w, ResourceWarden::Listener l) : w_(&w) {
    w_->set_listener(std::move(l));
  }
  ~ListenerGuard() { w_->set_listener(nullptr); }
  ListenerGuard(const ListenerGuard&) = delete;
  ListenerGuard& operator=(const ListenerGuard&) = delete;

 private:
  ResourceWarden* w_;
};

}  // namespace

ExperimentResults run_experiment(const ExperimentPlan& plan, Backend& backend,
                                 ResourceWarden& warden, MetricsSink* sink) {
  plan.validate();
  std::map<std::string, int> limits;
  for (const auto& c : warden.classes()) limits[c.name] = c.limit;
  for (const auto& st : plan.stages) {
    for (const auto& d : st.demands()) {
      auto it = limits.find(d.resource);
      if (it == limits.end()) {
        throw ConfigError(fmt::format("stage '{}' demands unknown resource '{}'",
                                      st.name(), d.resource));
      }
      if (d.permits > it->second) {
        throw ConfigError(fmt::format("stage '{}' demands {} permits of '{}' (limit {})",
                                      st.name(), d.permits, d.resource, it->second));
      }
    }
  }

  const auto workers_n = static_cast<std::size_t>(plan.worker_count);
  auto seqs = std::make_unique<std::atomic<std::uint64_t>[]>(workers_n);
  for (std::size_t i = 0; i < workers_n; ++i) seqs[i] = 0;

  std::atomic<SimMillis> virtual_now{0};
  const auto wall_start = std::chrono::steady_clock::now();
  auto clock = [&]() -> SimMillis {
    if (plan.mode == ExecutionMode::Deterministic) return virtual_now.load();
    const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - wall_start;
    return static_cast<SimMillis>(wall.count() / plan.time_scale * 1000.0);
  };

  auto emit_for = [&](int worker, SimMillis at, MetricsKind kind, nlohmann::json payload) {
    if (!sink) return;
    MetricsEvent ev;
    ev.t = to_seconds(at);
    ev.worker_id = worker;
    ev.seq = seqs[static_cast<std::size_t>(worker)]++;
    ev.kind = kind;
    ev.payload = std::move(payload);
    sink->append(std::move(ev));
  };

  ListenerGuard guard(warden, [&](const WardenEvent& we) {
    nlohmann::json payload = {{"class", we.resource},
                              {"n", we.permits},
                              {"held", we.held_after},
                              {"limit", limits[we.resource]},
                              {"container", we.container}};
    emit_for(we.owner,  clock(),
             we.kind == WardenEvent::Kind::Grant ? MetricsKind::PermitGrant
                                                 : MetricsKind::PermitRelease,
             std::move(payload));
  });

  std::vector<std::optional<TrialResults>> collected(plan.trial_specs.size());
  std::vector<std::unique_ptr<Worker>> workers;
  for (int w = 0; w < plan.worker_count; ++w) {
    workers.push_back(std::make_unique<Worker>(
        w, plan, backend, warden,
        [&emit_for, w](SimMillis at, MetricsKind k, nlohmann::json p) {
          emit_for(w, at, k, std::move(p));
        },
        collected));
  }
  for (std::size_t i = 0; i < plan.trial_specs.size(); ++i) {
    workers[i % workers_n]->enqueue(i);
  }

  SimMillis end_time = 0;
  if (plan.mode == ExecutionMode::Deterministic) {
    int passes_here = 0;
    for (;;) {
      const SimMillis now = virtual_now.load();
      bool progress = false;
      for (auto& w : workers) progress = w->pass(now) || progress;
      if (std::all_of(workers.begin(), workers.end(),
                      [](const auto& w) { return w->done(); })) {
        end_time = now;
        break;
      }
      if (++passes_here > kMaxPassesPerInstant) {
        throw std::logic_error(fmt::format("orchestrator livelock at t={} ms", now));
      }
      if (progress) continue;
      std::optional<SimMillis> next;
      for (const auto& w : workers) {
        if (auto t = w->next_wake(); t && (!next || *t < *next)) next = t;
      }
      if (!next) {
        throw std::logic_error(
            fmt::format("orchestrator stalled at t={} ms: trials wait on permits "
                        "that nothing will release",
                        now));
      }
      if (*next > now) {
        virtual_now = *next;
        passes_here = 0;
      }
    }
  } else {
    std::atomic<bool> stop{false};
    std::mutex err_mu;
    std::exception_ptr first_error;
    std::vector<std::thread> threads;
    for (auto& w : workers) {
      threads.emplace_back([&, wp = w.get()] {
        try {
          while (!stop.load() && !wp->done()) {
            if (!wp->pass(clock())) std::this_thread::sleep_for(plan.poll_interval);
          }
        } catch (...) {
          std::lock_guard lock(err_mu);
          if (!first_error) first_error = std::current_exception();
          stop = true;
        }
      });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
    end_time = clock();
  }

  ExperimentResults out;
  out.elapsed = end_time;
  out.trials.reserve(collected.size());
  for (auto& r : collected) {
    if (!r) throw std::logic_error("trial finished without results");
    out.trials.push_back(std::move(*r));
  }
  return out;
}

}  // namespace deteval
