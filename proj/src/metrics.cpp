#include "deteval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

namespace deteval {

namespace {

constexpr std::pair<MetricsKind, std::string_view> kKindNames[] = {
    {MetricsKind::StageStart, "stage-start"},
    {MetricsKind::StageDone, "stage-done"},
    {MetricsKind::Exception, "exception"},
    {MetricsKind::Remediation, "remediation"},
    {MetricsKind::PermitGrant, "permit-grant"},
    {MetricsKind::PermitRelease, "permit-release"},
    {MetricsKind::TrialDone, "trial-done"},
};

// Nearest-rank percentile over sorted data.
double percentile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size())));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

bool has_string(const nlohmann::json& p, const char* key) {
  return p.is_object() && p.contains(key) && p[key].is_string();
}

bool has_int(const nlohmann::json& p, const char* key) {
  return p.is_object() && p.contains(key) && p[key].is_number_integer();
}

}  // namespace

std::string_view to_string(MetricsKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<MetricsKind> parse_metrics_kind(std::string_view text) {
  for (const auto& [k, name] : kKindNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

nlohmann::json to_json(const MetricsEvent& ev) {
  nlohmann::json j;
  j["t"] = ev.t;
  j["worker"] = ev.worker_id;
  j["seq"] = ev.seq;
  j["kind"] = to_string(ev.kind);
  j["payload"] = ev.payload;
  return j;
}

std::optional<MetricsEvent> metrics_event_from_json(const nlohmann::json& j) {
  if (!j.is_object()) return std::nullopt;
  if (!j.contains("t") || !j["t"].is_number()) return std::nullopt;
  if (!j.contains("worker") || !j["worker"].is_number_integer()) return std::nullopt;
  if (!j.contains("kind") || !j["kind"].is_string()) return std::nullopt;
  auto kind = parse_metrics_kind(j["kind"].get<std::string>());
  if (!kind) return std::nullopt;
  MetricsEvent ev;
  ev.t = j["t"].get<double>();
  ev.worker_id = j["worker"].get<int>();
  ev.seq = j.contains("seq") && j["seq"].is_number_unsigned()
               ? j["seq"].get<std::uint64_t>()
               : 0;
  ev.kind = *kind;
  if (j.contains("payload")) ev.payload = j["payload"];
  return ev;
}

void MemorySink::append(MetricsEvent ev) {
  std::lock_guard lock(mu_);
  events_.push_back(std::move(ev));
}

std::vector<MetricsEvent> MemorySink::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

void JsonlSink::append(MetricsEvent ev) {
  const auto line = to_json(ev).dump();
  std::lock_guard lock(mu_);
  *out_ << line << '\n';
}

MetricsSummary aggregate_metrics(std::span<const MetricsEvent> events) {
  MetricsSummary s;
  std::vector<double> done_times;
  std::map<std::pair<std::int64_t, std::string>, double> open_stages;
  std::map<std::string, std::vector<double>> latencies;
  std::map<std::string, int> held;

  for (const auto& ev : events) {
    const auto& p = ev.payload;
    switch (ev.kind) {
      case MetricsKind::StageStart:
        if (!has_int(p, "trial") || !has_string(p, "stage")) {
          ++s.malformed;
          continue;
        }
        open_stages[{p["trial"].get<std::int64_t>(), p["stage"].get<std::string>()}] = ev.t;
        break;
      case MetricsKind::StageDone: {
        if (!has_int(p, "trial") || !has_string(p, "stage")) {
          ++s.malformed;
          continue;
        }
        const auto stage = p["stage"].get<std::string>();
        auto it = open_stages.find({p["trial"].get<std::int64_t>(), stage});
        if (it != open_stages.end()) {
          latencies[stage].push_back(ev.t - it->second);
          open_stages.erase(it);
        }
        break;
      }
      case MetricsKind::Exception:
        ++s.exceptions;
        break;
      case MetricsKind::Remediation:
        if (!has_string(p, "action")) {
          ++s.malformed;
          continue;
        }
        ++s.remediations[p["action"].get<std::string>()];
        break;
      case MetricsKind::PermitGrant:
      case MetricsKind::PermitRelease: {
        if (!has_string(p, "class") || !has_int(p, "n")) {
          ++s.malformed;
          continue;
        }
        const auto cls = p["class"].get<std::string>();
        const int n = p["n"].get<int>();
        int& h = held[cls];
        h += ev.kind == MetricsKind::PermitGrant ? n : -n;
        int& peak = s.max_concurrency[cls];
        peak = std::max(peak, h);
        if (has_int(p, "limit")) {
          const int lim = p["limit"].get<int>();
          s.limits[cls] = lim;
          if (h > lim) ++s.limit_violations;
        }
        break;
      }
      case MetricsKind::TrialDone:
        ++s.trials_done;
        if (has_string(p, "status") && p["status"].get<std::string>() == "aborted") {
          ++s.trials_aborted;
        }
        done_times.push_back(ev.t);
        break;
    }
    ++s.events;
  }

  for (auto& [stage, xs] : latencies) {
    std::sort(xs.begin(), xs.end());
    s.stage_latency_s[stage] = {xs.size(), percentile(xs, 0.50), percentile(xs, 0.90),
                                percentile(xs, 0.99), xs.back()};
  }

  if (!done_times.empty()) {
    std::sort(done_times.begin(), done_times.end());
    const double last = done_times.back();
    s.files_per_minute = static_cast<double>(std::count_if(
        done_times.begin(), done_times.end(),
        [last](double t) { return t > last - 60.0; }));
    std::size_t hi = 0;
    std::size_t best = 0;
    for (std::size_t lo = 0; lo < done_times.size(); ++lo) {
      while (hi < done_times.size() && done_times[hi] < done_times[lo] + 60.0) ++hi;
      best = std::max(best, hi - lo);
    }
    s.peak_files_per_minute = static_cast<double>(best);
  }
  return s;
}

MetricsSummary aggregate_metrics(std::istream& jsonl) {
  std::vector<MetricsEvent> events;
  std::size_t bad_lines = 0;
  std::string line;
  while (std::getline(jsonl, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    auto ev = metrics_event_from_json(j);
    if (!ev) {
      ++bad_lines;
      continue;
    }
    events.push_back(std::move(*ev));
  }
  auto s = aggregate_metrics(events);
  s.malformed += bad_lines;
  return s;
}

nlohmann::json to_json(const MetricsSummary& s) {
  nlohmann::json j;
  j["events"] = s.events;
  j["malformed"] = s.malformed;
  j["trials_done"] = s.trials_done;
  j["trials_aborted"] = s.trials_aborted;
  j["files_per_minute"] = s.files_per_minute;
  j["peak_files_per_minute"] = s.peak_files_per_minute;
  j["exceptions"] = s.exceptions;
  j["remediations"] = s.remediations;
  j["max_concurrency"] = s.max_concurrency;
  j["limits"] = s.limits;
  j["limit_violations"] = s.limit_violations;
  auto& lat = j["stage_latency_s"];
  lat = nlohmann::json::object();
  for (const auto& [stage, l] : s.stage_latency_s) {
    lat[stage] = {{"count", l.count}, {"p50", l.p50}, {"p90", l.p90},
                  {"p99", l.p99}, {"max", l.max}};
  }
  return j;
}

}  // namespace deteval
