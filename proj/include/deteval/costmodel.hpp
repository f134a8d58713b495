#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deteval/model.hpp"
#include "deteval/money.hpp"

namespace deteval::cost {

enum class CurveMode {
  // alpha = (1 + te/60)^2 + 1, beta = sqrt(alpha - 1)/60: puts the first root
  // of f''' at te and the inflection at te + 60.
  ConstraintDerived,
  // alpha = (1 + 60/te)^2 + 1, beta = (alpha - 1)^2/60, kept for comparison.
  PaperPrinted,
};

std::string_view to_string(CurveMode mode);  // "constraint-derived" / "paper-printed"
std::optional<CurveMode> parse_curve_mode(std::string_view text);

struct CurveParams {
  double alpha = 0.0;
  double beta = 0.0;
};

/// Throws NonpositiveTe unless te_rel > 0.
CurveParams attack_cost_params(double te_rel, CurveMode mode);

/// Shifted, scaled gamma CDF: M * P(alpha, beta * (t - t0)).
struct AttackCostCurve {
  double t0 = 0.0;
  double te = 0.0;
  double alpha = 2.0;
  double beta = 1.0 / 60.0;
  double M = 1000.0;

  static AttackCostCurve fit(double t0, double te, CurveMode mode, double M = 1000.0);

  /// beta^alpha / Gamma(alpha)
  double normalizer() const;
  /// Throws std::invalid_argument when alpha <= 1, beta <= 0 or te <= t0.
  void validate() const;
};

double attack_cost(double t, const AttackCostCurve& curve);

struct CostConstants {
  double triage = 35.05;
  double ir = 140.0;
  double labor_rate = 70.0;
  double siem_fee = 0.05;
  double cpu_rate = 0.02444 / 3.0;  // per full-CPU hour
  double ram_rate = 0.00328 / 3.0;  // per GB-hour
  double hdd_rate_month = 0.05 / 3.0;  // per GB-month
  double days_per_month = 30.5;
  double M = 1000.0;

  double hdd_rate() const { return hdd_rate_month / days_per_month / 24.0; }  // per GB-hour
  /// Throws ConfigError on negative values or triage != labor/2 + siem fee.
  void validate() const;
};

struct AnnualConfig {
  long files_per_year = 50'000;
  double malware_fraction = 0.0116;
  double zero_day_fraction_of_malware = 0.0;
  std::optional<double> zero_day_M;  // defaults to CostConstants::M
  long network_size_hosts = 10'000;
  double free_setup_hours = 8.0;

  double malware_count() const { return static_cast<double>(files_per_year) * malware_fraction; }
  double benign_count() const { return static_cast<double>(files_per_year) - malware_count(); }
  void validate() const;
};

struct AnnualCostBreakdown {
  double initial = 0.0;
  double annual_malware_resource = 0.0;
  double annual_benign_resource = 0.0;
  double annual_ambient_resource = 0.0;
  double annual_appliance_resource = 0.0;
  double annual_malware_detect = 0.0;
  double annual_benign_detect = 0.0;
  double total = 0.0;

  double annual_resource() const {
    return annual_malware_resource + annual_benign_resource + annual_ambient_resource +
           annual_appliance_resource;
  }
  double annual_detect() const { return annual_malware_detect + annual_benign_detect; }
};

/// Curve fitted to one trial: t0 = t_download, te = t_execute.
AttackCostCurve curve_for_trial(const TrialRecord& trial, CurveMode mode, double M);

/// Throws LabelMismatch for benign files.
double malware_detection_cost(const FileSample& file, const DetectionOutcome& outcome,
                              const AttackCostCurve& curve, const CostConstants& k);
/// Throws LabelMismatch for malicious files.
double benign_detection_cost(const FileSample& file, const DetectionOutcome& outcome,
                             const CostConstants& k);

double ambient_rate(const AmbientProfile& profile, const CostConstants& k);  // dollars/minute

/// Samples in [t_download, t_execute) each cover the time to the next
/// sample, the last one up to t_execute. From t_execute to the detection (or
/// t_close) the ambient rate applies. An empty series is imputed at the
/// ambient rate from t_download on.
double file_resource_cost(std::span<const ResourceSample> series, const TrialRecord& trial,
                          double ambient_rate_per_min, const DetectionOutcome& outcome,
                          const CostConstants& k);

double initial_cost(double setup_hours, double appliance_total, const AnnualConfig& annual,
                    const CostConstants& k);

struct AverageCosts {
  double malware_detect = 0.0;
  double benign_detect = 0.0;
  double malware_resource = 0.0;
  double benign_resource = 0.0;
};

/// Linear extrapolation to one host-year. Throws NegativeRemainingTime when
/// file handling alone exceeds the year. `initial` is carried into the total.
AnnualCostBreakdown annualize(const AverageCosts& avg, double ambient_rate_per_min,
                              double mean_trial_minutes, double appliance_annual,
                              const AnnualConfig& annual, double initial = 0.0);

struct ToolSetup {
  double setup_hours = 0.0;
  double appliance_total = 0.0;
  double appliance_annual = 0.0;
};

struct ScoringConfig {
  CurveMode mode = CurveMode::ConstraintDerived;
  CostConstants constants;
  AnnualConfig annual;
  std::map<std::string, ToolSetup, std::less<>> setups;
};

struct FileScore {
  std::string file_id;
  Label label = Label::Benign;
  FileType file_type = FileType::Other;
  bool zero_day = false;
  DetectionOutcome outcome;
  double t_download = 0.0;
  double t_execute = 0.0;
  double t_close = 0.0;
  double detect_cost = 0.0;
  double resource_cost = 0.0;
};

struct ToolScore {
  std::string tool_id;
  std::vector<FileScore> files;  // non-aborted trials, in trial order
  std::size_t aborted = 0;
  double ambient_rate_per_min = 0.0;
  double mean_trial_minutes = 0.0;
  AverageCosts averages;  // per-file; malware detect weighted by the annual zero-day split
  AnnualCostBreakdown annual;
};

/// Scores every tool that has trials, in order of first appearance. The
/// dataset must already be valid.
std::vector<ToolScore> score_dataset(const Dataset& ds, const ScoringConfig& cfg);

struct SweepPoint {
  double zero_day_M = 0.0;
  std::vector<double> totals;  // parallel to SweepResult::tools
};

struct SweepResult {
  std::vector<std::string> tools;
  std::vector<SweepPoint> points;
  std::string ml_tool;
  std::string signature_tool;
  // First grid value where the ML tool's total is below the signature
  // tool's, and the linear interpolation of the crossing inside the step.
  std::optional<double> crossover_grid;
  std::optional<double> crossover_interpolated;
};

/// Recomputes totals with zero-day malware charged against a curve of
/// maximum zero_day_M. Throws EmptyGrid, ConfigError for unknown tools.
SweepResult sweep_zero_day_cost(std::span<const ToolScore> scores,
                                std::span<const double> grid, const ScoringConfig& cfg,
                                std::string_view ml_tool, std::string_view signature_tool);

/// n evenly spaced points from lo to hi inclusive. Throws EmptyGrid when n is
/// zero, ConfigError when hi < lo.
std::vector<double> linear_grid(double lo, double hi, std::size_t n);

}  // namespace deteval::cost
