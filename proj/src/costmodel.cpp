#include "deteval/costmodel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>

#include "deteval/errors.hpp"
#include "deteval/gamma.hpp"

namespace deteval::cost {

namespace {

constexpr double kMinutesPerYear = 365.0 * 24.0 * 60.0;
constexpr double kBytesPerGB = 1e9;

}  // namespace

std::string_view to_string(CurveMode mode) {
  return mode == CurveMode::PaperPrinted ? "paper-printed" : "constraint-derived";
}

std::optional<CurveMode> parse_curve_mode(std::string_view text) {
  if (text == "paper-printed") return CurveMode::PaperPrinted;
  if (text == "constraint-derived") return CurveMode::ConstraintDerived;
  return std::nullopt;
}

CurveParams attack_cost_params(double te_rel, CurveMode mode) {
  if (!(te_rel > 0.0) || !std::isfinite(te_rel)) {
    throw NonpositiveTe(fmt::format("execution offset must be positive, got {}", te_rel));
  }
  if (mode == CurveMode::PaperPrinted) {
    const double s = 1.0 + 60.0 / te_rel;
    const double alpha = s * s + 1.0;
    return {alpha, (alpha - 1.0) * (alpha - 1.0) / 60.0};
  }
  const double s = 1.0 + te_rel / 60.0;
  return {s * s + 1.0, s / 60.0};
}

AttackCostCurve AttackCostCurve::fit(double t0, double te, CurveMode mode, double M) {
  const auto p = attack_cost_params(te - t0, mode);
  return {t0, te, p.alpha, p.beta, M};
}

double AttackCostCurve::normalizer() const {
  return std::exp(alpha * std::log(beta) - std::lgamma(alpha));
}

void AttackCostCurve::validate() const {
  if (!(alpha > 1.0) || !(beta > 0.0) || !(te > t0) || !(M >= 0.0)) {
    throw std::invalid_argument(
        fmt::format("invalid attack cost curve (alpha {}, beta {}, t0 {}, te {}, M {})",
                    alpha, beta, t0, te, M));
  }
}

double attack_cost(double t, const AttackCostCurve& curve) {
  if (t <= curve.t0) return 0.0;
  return curve.M * regularized_gamma_p(curve.alpha, curve.beta * (t - curve.t0));
}

void CostConstants::validate() const {
  for (double v : {triage, ir, labor_rate, siem_fee, cpu_rate, ram_rate, hdd_rate_month, M}) {
    if (!(v >= 0.0)) throw ConfigError("cost constants must be nonnegative");
  }
  if (!(days_per_month > 0.0)) throw ConfigError("days per month must be positive");
  if (std::fabs(triage - (0.5 * labor_rate + siem_fee)) > 1e-9) {
    throw ConfigError(fmt::format("triage {} != half an hour of labor {} plus SIEM fee {}",
                                  triage, labor_rate, siem_fee));
  }
}

void AnnualConfig::validate() const {
  if (files_per_year <= 0) throw ConfigError("files_per_year must be positive");
  if (!(malware_fraction >= 0.0 && malware_fraction <= 1.0) ||
      !(zero_day_fraction_of_malware >= 0.0 && zero_day_fraction_of_malware <= 1.0)) {
    throw ConfigError("annual fractions must be within [0, 1]");
  }
  if (zero_day_M && !(*zero_day_M >= 0.0)) throw ConfigError("zero_day_M must be >= 0");
  if (network_size_hosts <= 0) throw ConfigError("network size must be positive");
  if (!(free_setup_hours >= 0.0)) throw ConfigError("free setup hours must be >= 0");
}

AttackCostCurve curve_for_trial(const TrialRecord& trial, CurveMode mode, double M) {
  return AttackCostCurve::fit(trial.t_download, trial.t_execute, mode, M);
}

double malware_detection_cost(const FileSample& file, const DetectionOutcome& outcome,
                              const AttackCostCurve& curve, const CostConstants& k) {
  if (!file.malicious()) {
    throw LabelMismatch(fmt::format("{} is benign; malware cost requested", file.file_id));
  }
  const double t_alert = curve.t0 + outcome.ttd_s.value_or(0.0);
  switch (outcome.phase) {
    case Phase::PreExecution:
      return attack_cost(t_alert, curve);
    case Phase::InWindow:
      return attack_cost(t_alert, curve) + k.triage + k.ir;
    case Phase::PostClose: {
      const double c = 0.5 * (attack_cost(curve.te + 60.0, curve) + curve.M - k.triage - k.ir);
      return c + k.triage + k.ir;
    }
    case Phase::Never:
      return curve.M;
  }
  return curve.M;
}

double benign_detection_cost(const FileSample& file, const DetectionOutcome& outcome,
                             const CostConstants& k) {
  if (file.malicious()) {
    throw LabelMismatch(fmt::format("{} is malicious; benign cost requested", file.file_id));
  }
  return outcome.detected() ? k.triage : 0.0;
}

double ambient_rate(const AmbientProfile& p, const CostConstants& k) {
  const double io_gb = (p.mean_hdd_read_bytes_per_s + p.mean_hdd_write_bytes_per_s) / kBytesPerGB;
  const double per_hour = p.mean_cpu_fraction * k.cpu_rate +
                          p.mean_ram_bytes / kBytesPerGB * k.ram_rate + io_gb * k.hdd_rate();
  return per_hour / 60.0;
}

double file_resource_cost(std::span<const ResourceSample> series, const TrialRecord& trial,
                          double ambient_rate_per_min, const DetectionOutcome& outcome,
                          const CostConstants& k) {
  double end = trial.t_close;
  if (outcome.ttd_s) end = std::min(end, trial.t_download + *outcome.ttd_s);

  if (series.empty()) {
    return ambient_rate_per_min * std::max(0.0, end - trial.t_download) / 60.0;
  }

  std::vector<const ResourceSample*> window;
  for (const auto& s : series) {
    if (s.t >= trial.t_download && s.t < trial.t_execute) window.push_back(&s);
  }
  std::sort(window.begin(), window.end(),
            [](const auto* a, const auto* b) { return a->t < b->t; });

  double cost = 0.0;
  for (std::size_t i = 0; i < window.size(); ++i) {
    const auto& s = *window[i];
    const double next = i + 1 < window.size() ? window[i + 1]->t : trial.t_execute;
    const double hours = (next - s.t) / 3600.0;
    const double io_gb =
        static_cast<double>(s.hdd_read_bytes + s.hdd_write_bytes) / kBytesPerGB;
    const double per_hour = s.cpu_fraction * k.cpu_rate +
                            static_cast<double>(s.ram_bytes) / kBytesPerGB * k.ram_rate +
                            io_gb * k.hdd_rate();
    cost += per_hour * hours;
  }
  cost += ambient_rate_per_min * std::max(0.0, end - trial.t_execute) / 60.0;
  return cost;
}

double initial_cost(double setup_hours, double appliance_total, const AnnualConfig& annual,
                    const CostConstants& k) {
  return std::max(0.0, setup_hours - annual.free_setup_hours) * k.labor_rate +
         appliance_total / static_cast<double>(annual.network_size_hosts);
}

AnnualCostBreakdown annualize(const AverageCosts& avg, double ambient_rate_per_min,
                              double mean_trial_minutes, double appliance_annual,
                              const AnnualConfig& annual, double initial) {
  const double n_mal = annual.malware_count();
  const double n_ben = annual.benign_count();
  const double remaining =
      kMinutesPerYear - static_cast<double>(annual.files_per_year) * mean_trial_minutes;
  if (remaining < 0.0) {
    throw NegativeRemainingTime(fmt::format(
        "{} files of {:.3f} min exceed the minutes in a year", annual.files_per_year,
        mean_trial_minutes));
  }
  AnnualCostBreakdown b;
  b.initial = initial;
  b.annual_malware_resource = avg.malware_resource * n_mal;
  b.annual_benign_resource = avg.benign_resource * n_ben;
  b.annual_ambient_resource = ambient_rate_per_min * remaining;
  b.annual_appliance_resource = appliance_annual;
  b.annual_malware_detect = avg.malware_detect * n_mal;
  b.annual_benign_detect = avg.benign_detect * n_ben;
  b.total = b.initial + b.annual_resource() + b.annual_detect();
  return b;
}

namespace {

struct Mean {
  Nanodollars sum = 0;
  std::size_t n = 0;

  void add(double dollars) {
    sum += to_nanodollars(dollars);
    ++n;
  }
  double value() const { return n == 0 ? 0.0 : to_dollars(sum) / static_cast<double>(n); }
};

// Average malware detection cost used for annualization. With a zero-day
// share configured, public and zero-day cohorts are weighted explicitly and
// zero-day files are charged against a curve of maximum zero_day_M.
double malware_detect_average(const ToolScore& score, const ScoringConfig& cfg,
                              double zero_day_M) {
  const double zdf = cfg.annual.zero_day_fraction_of_malware;
  Mean all, pub, zero;
  for (const auto& f : score.files) {
    if (f.label != Label::Malicious) continue;
    all.add(f.detect_cost);
    if (!f.zero_day) {
      pub.add(f.detect_cost);
      continue;
    }
    if (zdf <= 0.0) continue;
    FileSample fs;
    fs.file_id = f.file_id;
    fs.label = Label::Malicious;
    const auto curve =
        AttackCostCurve::fit(f.t_download, f.t_execute, cfg.mode, zero_day_M);
    zero.add(malware_detection_cost(fs, f.outcome, curve, cfg.constants));
  }
  if (zdf <= 0.0 || zero.n == 0) return all.value();
  if (pub.n == 0) return zero.value();
  return (1.0 - zdf) * pub.value() + zdf * zero.value();
}

void finish_score(ToolScore& s, const ScoringConfig& cfg, double zero_day_M) {
  Mean mal_res, ben_res, ben_det;
  double minutes = 0.0;
  for (const auto& f : s.files) {
    if (f.label == Label::Malicious) {
      mal_res.add(f.resource_cost);
    } else {
      ben_res.add(f.resource_cost);
      ben_det.add(f.detect_cost);
    }
    minutes += (f.t_close - f.t_download) / 60.0;
  }
  s.mean_trial_minutes = s.files.empty() ? 0.0 : minutes / static_cast<double>(s.files.size());
  s.averages.malware_detect = malware_detect_average(s, cfg, zero_day_M);
  s.averages.benign_detect = ben_det.value();
  s.averages.malware_resource = mal_res.value();
  s.averages.benign_resource = ben_res.value();

  ToolSetup setup;
  if (auto it = cfg.setups.find(s.tool_id); it != cfg.setups.end()) setup = it->second;
  const double initial =
      initial_cost(setup.setup_hours, setup.appliance_total, cfg.annual, cfg.constants);
  s.annual = annualize(s.averages, s.ambient_rate_per_min, s.mean_trial_minutes,
                       setup.appliance_annual, cfg.annual, initial);
}

}  // namespace

std::vector<ToolScore> score_dataset(const Dataset& ds, const ScoringConfig& cfg) {
  cfg.constants.validate();
  cfg.annual.validate();

  std::unordered_map<std::string, const FileSample*> files;
  for (const auto& f : ds.files) files.emplace(f.file_id, &f);
  std::map<std::pair<std::string, std::string>, std::vector<AlertEvent>> alerts;
  for (const auto& a : ds.alerts) alerts[{a.tool_id, a.file_id}].push_back(a);
  std::unordered_map<std::string, const AmbientProfile*> ambients;
  for (const auto& a : ds.ambients) ambients.emplace(a.tool_id, &a);

  std::vector<ToolScore> scores;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& trial : ds.trials) {
    auto [it, fresh] = slot.emplace(trial.tool_id, scores.size());
    if (fresh) {
      ToolScore s;
      s.tool_id = trial.tool_id;
      if (auto a = ambients.find(trial.tool_id); a != ambients.end()) {
        s.ambient_rate_per_min = ambient_rate(*a->second, cfg.constants);
      }
      scores.push_back(std::move(s));
    }
    auto& score = scores[it->second];
    if (trial.aborted) {
      ++score.aborted;
      continue;
    }
    auto fit = files.find(trial.file_id);
    if (fit == files.end()) {
      throw ValidationError(fmt::format("trial references unknown file '{}'", trial.file_id));
    }
    const auto& file = *fit->second;
    static const std::vector<AlertEvent> kNone;
    auto ait = alerts.find({trial.tool_id, trial.file_id});
    const auto& file_alerts = ait == alerts.end() ? kNone : ait->second;

    FileScore fs;
    fs.file_id = file.file_id;
    fs.label = file.label;
    fs.file_type = file.file_type;
    fs.zero_day = file.zero_day;
    fs.outcome = derive_outcome(trial, file_alerts);
    fs.t_download = trial.t_download;
    fs.t_execute = trial.t_execute;
    fs.t_close = trial.t_close;
    if (file.malicious()) {
      fs.detect_cost = malware_detection_cost(
          file, fs.outcome, curve_for_trial(trial, cfg.mode, cfg.constants.M), cfg.constants);
    } else {
      fs.detect_cost = benign_detection_cost(file, fs.outcome, cfg.constants);
    }
    fs.resource_cost = file_resource_cost(trial.resource_series, trial,
                                          score.ambient_rate_per_min, fs.outcome,
                                          cfg.constants);
    score.files.push_back(std::move(fs));
  }

  const double zd_M = cfg.annual.zero_day_M.value_or(cfg.constants.M);
  for (auto& s : scores) finish_score(s, cfg, zd_M);
  return scores;
}

std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
  if (n == 0) throw EmptyGrid("grid has no points");
  if (!(hi >= lo)) throw ConfigError(fmt::format("grid upper bound {} below lower {}", hi, lo));
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return g;
}

SweepResult sweep_zero_day_cost(std::span<const ToolScore> scores,
                                std::span<const double> grid, const ScoringConfig& cfg,
                                std::string_view ml_tool, std::string_view signature_tool) {
  if (grid.empty()) throw EmptyGrid("zero-day sweep grid is empty");
  if (!std::is_sorted(grid.begin(), grid.end())) {
    throw ConfigError("zero-day sweep grid must be ascending");
  }
  SweepResult r;
  r.ml_tool = std::string(ml_tool);
  r.signature_tool = std::string(signature_tool);
  std::optional<std::size_t> ml, sig;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    r.tools.push_back(scores[i].tool_id);
    if (scores[i].tool_id == ml_tool) ml = i;
    if (scores[i].tool_id == signature_tool) sig = i;
  }
  if (!ml || !sig) {
    throw ConfigError(fmt::format("sweep tools '{}' and '{}' must both be scored", ml_tool,
                                  signature_tool));
  }

  for (double zd_M : grid) {
    SweepPoint p;
    p.zero_day_M = zd_M;
    for (const auto& s : scores) {
      ToolScore copy = s;
      finish_score(copy, cfg, zd_M);
      p.totals.push_back(copy.annual.total);
    }
    r.points.push_back(std::move(p));
  }

  for (std::size_t i = 0; i < r.points.size(); ++i) {
    const double d = r.points[i].totals[*ml] - r.points[i].totals[*sig];
    if (d >= 0.0) continue;
    r.crossover_grid = r.points[i].zero_day_M;
    if (i == 0) {
      r.crossover_interpolated = r.points[0].zero_day_M;
    } else {
      const double d0 = r.points[i - 1].totals[*ml] - r.points[i - 1].totals[*sig];
      const double x0 = r.points[i - 1].zero_day_M;
      const double x1 = r.points[i].zero_day_M;
      r.crossover_interpolated = x0 + (x1 - x0) * d0 / (d0 - d);
    }
    break;
  }
  return r;
}

}  // namespace deteval::cost
