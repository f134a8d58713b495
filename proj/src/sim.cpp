#include "deteval/sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "deteval/errors.hpp"

namespace deteval::sim {

namespace {

std::uint64_t fnv1a(std::uint64_t h, std::string_view s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  // field separator so ("ab","c") and ("a","bc") differ
  h ^= 0xff;
  h *= 0x100000001b3ULL;
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double parse_number(std::string_view text, std::string_view whole) {
  double v = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || p != last) {
    throw ConfigError(fmt::format("bad number '{}' in distribution '{}'", text, whole));
  }
  return v;
}

bool bernoulli(Rng& rng, double p) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

std::uint64_t nonneg_bytes(double v) {
  return v <= 0.0 ? 0 : static_cast<std::uint64_t>(std::llround(v));
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view tool_id,
                          std::string_view file_id, std::string_view salt) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(master_seed);
  h = fnv1a(h, tool_id);
  h = fnv1a(h, file_id);
  h = fnv1a(h, salt);
  return splitmix64(h);
}

// ---------------------------------------------------------------------------
// Distribution

Distribution Distribution::constant(double v) {
  if (v < 0.0) throw ConfigError(fmt::format("constant {} is negative", v));
  return {Kind::Constant, v, 0.0};
}

Distribution Distribution::uniform(double lo, double hi) {
  if (lo < 0.0 || hi < lo) {
    throw ConfigError(fmt::format("uniform bounds [{}, {}] invalid", lo, hi));
  }
  return {Kind::Uniform, lo, hi};
}

Distribution Distribution::lognormal(double median, double sigma) {
  if (!(median > 0.0) || sigma < 0.0) {
    throw ConfigError(fmt::format("lognormal({}, {}) invalid", median, sigma));
  }
  return {Kind::LogNormal, median, sigma};
}

Distribution Distribution::exponential(double mean) {
  if (!(mean > 0.0)) throw ConfigError(fmt::format("exponential mean {} invalid", mean));
  return {Kind::Exponential, mean, 0.0};
}

Distribution Distribution::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw ConfigError(fmt::format("distribution '{}' lacks a kind prefix", text));
  }
  const auto kind = text.substr(0, colon);
  const auto args = text.substr(colon + 1);
  std::vector<double> xs;
  std::size_t pos = 0;
  while (pos <= args.size()) {
    const auto comma = args.find(',', pos);
    const auto piece = args.substr(pos, comma == std::string_view::npos ? std::string_view::npos
                                                                       : comma - pos);
    xs.push_back(parse_number(piece, text));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  auto need = [&](std::size_t n) {
    if (xs.size() != n) {
      throw ConfigError(fmt::format("distribution '{}' expects {} argument(s)", text, n));
    }
  };
  if (kind == "const") {
    need(1);
    return constant(xs[0]);
  }
  if (kind == "uniform") {
    need(2);
    return uniform(xs[0], xs[1]);
  }
  if (kind == "lognormal") {
    need(2);
    return lognormal(xs[0], xs[1]);
  }
  if (kind == "exp") {
    need(1);
    return exponential(xs[0]);
  }
  throw ConfigError(fmt::format("unknown distribution kind '{}'", kind));
}

double Distribution::sample(Rng& rng) const {
  switch (kind_) {
    case Kind::Constant:
      return a_;
    case Kind::Uniform:
      return a_ == b_ ? a_ : std::uniform_real_distribution<double>(a_, b_)(rng);
    case Kind::LogNormal:
      return std::lognormal_distribution<double>(std::log(a_), b_)(rng);
    case Kind::Exponential:
      return std::exponential_distribution<double>(1.0 / a_)(rng);
  }
  return 0.0;
}

double Distribution::mean() const {
  switch (kind_) {
    case Kind::Constant: return a_;
    case Kind::Uniform: return 0.5 * (a_ + b_);
    case Kind::LogNormal: return a_ * std::exp(0.5 * b_ * b_);
    case Kind::Exponential: return a_;
  }
  return 0.0;
}

std::string Distribution::to_string() const {
  switch (kind_) {
    case Kind::Constant: return fmt::format("const:{}", a_);
    case Kind::Uniform: return fmt::format("uniform:{},{}", a_, b_);
    case Kind::LogNormal: return fmt::format("lognormal:{},{}", a_, b_);
    case Kind::Exponential: return fmt::format("exp:{}", a_);
  }
  return {};
}

// ---------------------------------------------------------------------------
// Detector models

std::string_view to_string(DetectorKind k) {
  switch (k) {
    case DetectorKind::Signature: return "signature";
    case DetectorKind::MLStatic: return "ml-static";
    case DetectorKind::DynamicOnly: return "dynamic-only";
  }
  return "?";
}

std::optional<DetectorKind> parse_detector_kind(std::string_view text) {
  if (text == "signature") return DetectorKind::Signature;
  if (text == "ml-static") return DetectorKind::MLStatic;
  if (text == "dynamic-only") return DetectorKind::DynamicOnly;
  return std::nullopt;
}

double DetectorModel::detection_probability(const FileSample& file) const {
  if (file.label == Label::Benign) return false_positive_rate;
  if (file.zero_day) {
    return kind == DetectorKind::Signature ? zero_day_recall * known_hash_fraction
                                           : zero_day_recall;
  }
  auto it = recall_by_filetype.find(file.file_type);
  return it == recall_by_filetype.end() ? 0.0 : it->second;
}

void DetectorModel::validate() const {
  auto prob = [](std::string_view what, double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ConfigError(fmt::format("{} = {} is not a probability", what, p));
    }
  };
  prob("known_hash_fraction", known_hash_fraction);
  prob("zero_day_recall", zero_day_recall);
  prob("false_positive_rate", false_positive_rate);
  for (const auto& [t, p] : recall_by_filetype) {
    prob(fmt::format("recall[{}]", deteval::to_string(t)), p);
  }
  if (appliance) prob("post_close_fraction", appliance->post_close_fraction);
}

namespace {

using FT = FileType;

// Per-filetype malware recall columns; PE holds the public-PE recall.
std::map<FileType, double> recall_column(double compressed, double html, double image,
                                         double jar, double office, double pdf,
                                         double pe, double source, double text,
                                         double xml) {
  return {{FT::Compressed, compressed}, {FT::HTML, html},     {FT::Image, image},
          {FT::JAR, jar},               {FT::MSOffice, office}, {FT::PDF, pdf},
          {FT::PE, pe},                 {FT::SourceCode, source}, {FT::Text, text},
          {FT::XML, xml},               {FT::Other, 0.0}};
}

// Average benign detection cost divided by the triage charge gives the
// per-benign alert rate.
constexpr double kTriage = 35.05;

}  // namespace

DetectorModel detector_preset(std::string_view name) {
  DetectorModel m;
  if (name == "signature") {
    m.kind = DetectorKind::Signature;
    m.recall_by_filetype = recall_column(0.45, 0.65, 0.06, 0.0, 0.82, 0.92, 0.70, 0.50,
                                         0.41, 0.64);
    m.zero_day_recall = 0.70;
    m.known_hash_fraction = 0.04 / 0.70;
    m.static_latency = Distribution::constant(4.0);
  } else if (name == "ml") {
    m.kind = DetectorKind::MLStatic;
    m.recall_by_filetype = recall_column(0.30, 0.0, 0.0, 0.0, 0.40, 0.0, 0.85, 0.0, 0.0, 0.0);
    m.zero_day_recall = 0.40;
    m.static_latency = Distribution::constant(0.0);
  } else if (name == "dynamic-only") {
    m.kind = DetectorKind::DynamicOnly;
    m.recall_by_filetype = recall_column(0.05, 0.0, 0.67, 0.0, 0.55, 0.0, 0.68, 0.48,
                                         0.59, 0.0);
    m.zero_day_recall = 0.038;
    m.dynamic_latency = Distribution::constant(9.0);
  } else if (name == "tool1") {
    m.kind = DetectorKind::MLStatic;
    m.recall_by_filetype = recall_column(0.3155, 0.0, 0.0, 0.0, 0.0, 0.0, 0.807, 0.0,
                                         0.0, 0.0);
    m.zero_day_recall = 0.455;
    m.false_positive_rate = 0.136695 / kTriage;
    m.static_latency = Distribution::constant(33.0);
  } else if (name == "tool2") {
    m.kind = DetectorKind::MLStatic;
    m.recall_by_filetype = recall_column(0.0037, 0.0, 0.0, 0.0, 0.4916, 0.0, 0.879, 0.0,
                                         0.0, 0.0711);
    m.zero_day_recall = 0.401;
    m.false_positive_rate = 0.032947 / kTriage;
    m.static_latency = Distribution::constant(0.0);
  } else if (name == "tool3") {
    m.kind = DetectorKind::MLStatic;
    m.recall_by_filetype = recall_column(0.3198, 0.4485, 0.4229, 0.0551, 0.5151, 0.5967,
                                         0.598, 0.3138, 0.3425, 0.5308);
    m.zero_day_recall = 0.381;
    m.false_positive_rate = 0.023133 / kTriage;
    m.static_latency = Distribution::constant(1.0);
    m.appliance = ApplianceModel{0.02, Distribution::uniform(1.0, 600.0)};
  } else if (name == "tool4") {
    m.kind = DetectorKind::MLStatic;
    m.recall_by_filetype = recall_column(0.0231, 0.0807, 0.0700, 0.0, 0.4783, 0.3377,
                                         0.710, 0.1293, 0.2385, 0.1185);
    m.zero_day_recall = 0.278;
    m.false_positive_rate = 0.012618 / kTriage;
    m.static_latency = Distribution::constant(55.0);
  } else if (name == "baseline1") {
    m.kind = DetectorKind::DynamicOnly;
    m.recall_by_filetype = recall_column(0.0532, 0.0, 0.6653, 0.0, 0.5485, 0.0, 0.682,
                                         0.4807, 0.5921, 0.0);
    m.zero_day_recall = 0.038;
    m.false_positive_rate = 0.003505 / kTriage;
    m.dynamic_latency = Distribution::constant(9.0);
  } else if (name == "baseline2") {
    m.kind = DetectorKind::Signature;
    m.recall_by_filetype = recall_column(0.4459, 0.6490, 0.0558, 0.0, 0.8194, 0.9233,
                                         0.766, 0.4994, 0.4059, 0.6351);
    m.zero_day_recall = 0.766;
    m.known_hash_fraction = 0.044 / 0.766;
    m.false_positive_rate = 0.007711 / kTriage;
    m.static_latency = Distribution::constant(4.0);
  } else {
    throw ConfigError(fmt::format("unknown detector preset '{}'", name));
  }
  return m;
}

std::vector<std::string> detector_preset_names() {
  return {"signature", "ml", "dynamic-only", "tool1", "tool2",
          "tool3",     "tool4", "baseline1", "baseline2"};
}

ToolModel tool_preset(std::string_view name) {
  ToolModel t;
  t.detector = detector_preset(name);
  constexpr double MB = 1024.0 * 1024.0;
  // Appliance-backed and heavier ML agents idle hotter.
  const bool heavy = name == "tool3" || name == "tool4";
  t.active.cpu_fraction = heavy ? Distribution::uniform(0.10, 0.30)
                                : Distribution::uniform(0.02, 0.10);
  t.active.ram_bytes = Distribution::uniform(heavy ? 600 * MB : 150 * MB,
                                             heavy ? 900 * MB : 250 * MB);
  t.active.hdd_read_bytes_per_s = Distribution::exponential(heavy ? 200e3 : 50e3);
  t.active.hdd_write_bytes_per_s = Distribution::exponential(heavy ? 100e3 : 20e3);
  t.idle.cpu_fraction = heavy ? Distribution::uniform(0.04, 0.08)
                              : Distribution::uniform(0.005, 0.02);
  t.idle.ram_bytes = Distribution::uniform(heavy ? 550 * MB : 140 * MB,
                                           heavy ? 650 * MB : 160 * MB);
  t.idle.hdd_read_bytes_per_s = Distribution::exponential(heavy ? 40e3 : 5e3);
  t.idle.hdd_write_bytes_per_s = Distribution::exponential(heavy ? 20e3 : 2e3);
  return t;
}

std::optional<AlertEvent> detector_verdict(std::string_view tool_id,
                                           const DetectorModel& model,
                                           const FileSample& file,
                                           const TrialTimes& times, Rng& rng) {
  // Draw order is fixed so that a given stream always yields the same
  // verdict regardless of which branch is taken.
  const double u_detect = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const double u_late = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const double latency = model.kind == DetectorKind::DynamicOnly
                             ? model.dynamic_latency.sample(rng)
                             : model.static_latency.sample(rng);
  const double late_delay =
      model.appliance ? model.appliance->post_close_delay.sample(rng) : 0.0;

  if (!(u_detect < model.detection_probability(file))) return std::nullopt;

  AlertEvent alert{std::string(tool_id), file.file_id, 0.0};
  if (model.appliance && u_late < model.appliance->post_close_fraction) {
    alert.t_alert = times.t_close + std::max(late_delay, 1e-3);
  } else if (model.kind == DetectorKind::DynamicOnly) {
    alert.t_alert = times.t_execute + latency;
  } else {
    alert.t_alert = times.t_download + latency;
  }
  return alert;
}

std::vector<ResourceSample> sample_resources(const ResourceProfile& profile,
                                             double t_begin, double t_end, Rng& rng) {
  std::vector<ResourceSample> out;
  for (double t = t_begin; t < t_end; t += 1.0) {
    ResourceSample s;
    s.t = t;
    s.cpu_fraction = std::clamp(profile.cpu_fraction.sample(rng), 0.0, 1.0);
    s.ram_bytes = nonneg_bytes(profile.ram_bytes.sample(rng));
    s.hdd_read_bytes = nonneg_bytes(profile.hdd_read_bytes_per_s.sample(rng));
    s.hdd_write_bytes = nonneg_bytes(profile.hdd_write_bytes_per_s.sample(rng));
    out.push_back(s);
  }
  return out;
}

AmbientProfile sample_ambient(std::string_view tool_id, const ResourceProfile& idle,
                              double duration_s, Rng& rng) {
  if (!(duration_s > 0.0)) {
    throw ConfigError(fmt::format("ambient duration {} must be positive", duration_s));
  }
  const auto xs = sample_resources(idle, 0.0, duration_s, rng);
  AmbientProfile p;
  p.tool_id = std::string(tool_id);
  p.duration_s = duration_s;
  if (xs.empty()) return p;
  const double n = static_cast<double>(xs.size());
  for (const auto& s : xs) {
    p.mean_cpu_fraction += s.cpu_fraction;
    p.mean_ram_bytes += static_cast<double>(s.ram_bytes);
    p.mean_hdd_read_bytes_per_s += static_cast<double>(s.hdd_read_bytes);
    p.mean_hdd_write_bytes_per_s += static_cast<double>(s.hdd_write_bytes);
  }
  p.mean_cpu_fraction /= n;
  p.mean_ram_bytes /= n;
  p.mean_hdd_read_bytes_per_s /= n;
  p.mean_hdd_write_bytes_per_s /= n;
  return p;
}

// ---------------------------------------------------------------------------
// Faults and stages

double FaultConfig::transient_for(StageKind stage) const {
  auto it = transient_by_stage.find(stage);
  return it == transient_by_stage.end() ? transient_probability : it->second;
}

void FaultConfig::validate() const {
  auto prob = [](std::string_view what, double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ConfigError(fmt::format("{} = {} is not a probability", what, p));
    }
  };
  prob("transient fault probability", transient_probability);
  prob("persistent fault probability", persistent_probability);
  for (const auto& [s, p] : transient_by_stage) {
    prob(fmt::format("transient fault probability of {}", stage_name(s)), p);
  }
}

std::string_view to_string(Lifecycle l) {
  switch (l) {
    case Lifecycle::Off: return "Off";
    case Lifecycle::Restoring: return "Restoring";
    case Lifecycle::Ready: return "Ready";
    case Lifecycle::ScriptLoaded: return "ScriptLoaded";
    case Lifecycle::FileDelivered: return "FileDelivered";
    case Lifecycle::Executing: return "Executing";
    case Lifecycle::Collected: return "Collected";
  }
  return "?";
}

StageOutcome simulate_stage(const VmState& vm, StageKind stage, const StageTiming& timing,
                            const StageParams& params, Rng& rng) {
  auto require = [&](bool ok) {
    if (!ok) {
      throw IllegalTransition(fmt::format("stage {} not allowed from VM state {}",
                                          stage_name(stage), to_string(vm.lifecycle)));
    }
  };
  auto ms = [](double s) { return from_seconds(std::max(s, 0.0)); };
  StageOutcome out;
  switch (stage) {
    case StageKind::RestoreSnapshot:
      require(vm.lifecycle == Lifecycle::Off || vm.lifecycle == Lifecycle::Restoring);
      out = {ms(timing.restore.sample(rng)), Lifecycle::Restoring, Lifecycle::Ready};
      break;
    case StageKind::UploadScript:
      require(vm.lifecycle == Lifecycle::Ready);
      out = {ms(timing.upload.sample(rng)), Lifecycle::Ready, Lifecycle::ScriptLoaded};
      break;
    case StageKind::DeliverFile:
      require(vm.lifecycle == Lifecycle::ScriptLoaded);
      out = {ms(timing.deliver.sample(rng)), Lifecycle::ScriptLoaded,
             Lifecycle::FileDelivered};
      break;
    case StageKind::StaticWait:
      require(vm.lifecycle == Lifecycle::FileDelivered && !vm.static_done);
      out = {ms(params.static_wait_s + timing.static_overshoot.sample(rng)),
             Lifecycle::FileDelivered, Lifecycle::FileDelivered};
      break;
    case StageKind::ExecuteDynamic:
      require(vm.lifecycle == Lifecycle::FileDelivered ||
              vm.lifecycle == Lifecycle::Executing);
      out = {ms(params.dynamic_wait_s + timing.dynamic_overshoot.sample(rng)),
             Lifecycle::Executing, Lifecycle::Executing};
      break;
    case StageKind::CollectPowerOff:
      require(vm.lifecycle == Lifecycle::Executing);
      out = {ms(timing.collect.sample(rng)), Lifecycle::Executing, Lifecycle::Collected};
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Backend

namespace {

StageParams params_for(const StageTiming& timing, const TrialSpec& spec) {
  StageParams p{timing.static_wait_s, timing.dynamic_wait_s};
  auto read = [&](const char* key, double& dst) {
    auto it = spec.params.find(key);
    if (it == spec.params.end()) return;
    dst = parse_number(it->second, it->second);
  };
  read("static_wait_s", p.static_wait_s);
  read("dynamic_wait_s", p.dynamic_wait_s);
  return p;
}

class SimSession final : public TrialSession {
 public:
  SimSession(const SimBackend& backend, const ToolModel& tool, const FileSample& file,
             const TrialContext& ctx, std::optional<StageKind> persistent_stage)
      : backend_(&backend),
        tool_(&tool),
        file_(&file),
        tool_id_(ctx.spec->tool_id),
        master_seed_(ctx.master_seed),
        params_(params_for(backend.config().timing, *ctx.spec)),
        rng_(derive_seed(ctx.master_seed, ctx.spec->tool_id, ctx.spec->file_id,
                         fmt::format("attempt:{}", ctx.attempt))),
        persistent_stage_(persistent_stage) {}

  void start(StageKind stage, SimMillis now) override {
    const auto out =
        simulate_stage(vm_, stage, backend_->config().timing, params_, rng_);
    vm_.lifecycle = out.during;
    vm_.clock = std::max(vm_.clock, now);
    current_ = stage;
    started_at_ = now;
    ready_at_ = now + out.duration;
    after_ = out.after;
    fault_pending_ =
        bernoulli(rng_, backend_->config().faults.transient_for(stage));
    if (stage == StageKind::ExecuteDynamic) t_execute_ = now;
  }

  StageCheck check(StageKind stage, SimMillis now) override {
    if (!current_ || *current_ != stage) {
      throw IllegalTransition(
          fmt::format("check of {} but no such stage is running", stage_name(stage)));
    }
    if (now < ready_at_) return {false, ready_at_};
    if (persistent_stage_ && *persistent_stage_ == stage) {
      throw StageFault(fmt::format("persistent fault in {}", stage_name(stage)), true);
    }
    if (fault_pending_) {
      fault_pending_ = false;
      throw StageFault(fmt::format("transient fault in {}", stage_name(stage)), false);
    }
    complete(stage, ready_at_);
    return {true, std::nullopt};
  }

  void skip(StageKind stage, SimMillis now) override {
    vm_.clock = std::max(vm_.clock, now);
    current_.reset();
    switch (stage) {
      case StageKind::RestoreSnapshot: vm_.lifecycle = Lifecycle::Ready; break;
      case StageKind::UploadScript: vm_.lifecycle = Lifecycle::ScriptLoaded; break;
      case StageKind::DeliverFile: vm_.lifecycle = Lifecycle::FileDelivered; break;
      case StageKind::StaticWait: vm_.static_done = true; break;
      case StageKind::ExecuteDynamic: vm_.lifecycle = Lifecycle::Executing; break;
      case StageKind::CollectPowerOff:
        // Abandoned VM: the observation window ends now, nothing collected.
        vm_.lifecycle = Lifecycle::Collected;
        t_close_ = now;
        resources_collected_ = false;
        break;
    }
  }

  TrialOutput finish(SimMillis) override {
    TrialOutput out;
    auto& rec = out.record;
    rec.tool_id = tool_id_;
    rec.file_id = file_->file_id;
    if (!t_download_ || !t_execute_ || !t_close_) return out;

    const SimMillis origin = *t_download_;
    rec.t_download = 0.0;
    rec.t_execute = to_seconds(*t_execute_ - origin);
    rec.t_close = to_seconds(*t_close_ - origin);

    const TrialTimes times{rec.t_download, rec.t_execute, rec.t_close};
    Rng verdict_rng(derive_seed(master_seed_, tool_id_, file_->file_id, "verdict"));
    if (auto alert = detector_verdict(tool_id_, tool_->detector, *file_, times, verdict_rng)) {
      // Alerts live on the same millisecond grid as the trial clock.
      alert->t_alert = to_seconds(from_seconds(alert->t_alert));
      out.alerts.push_back(*alert);
    }
    if (resources_collected_) {
      Rng res_rng(derive_seed(master_seed_, tool_id_, file_->file_id, "resources"));
      rec.resource_series = sample_resources(tool_->active, 0.0, rec.t_close, res_rng);
      out.logs.push_back({"collect", 0, fmt::format("{} exited 0", file_->display_name), ""});
    }
    return out;
  }

 private:
  void complete(StageKind stage, SimMillis at) {
    vm_.lifecycle = after_;
    vm_.clock = std::max(vm_.clock, at);
    current_.reset();
    switch (stage) {
      case StageKind::DeliverFile: t_download_ = at; break;
      case StageKind::StaticWait: vm_.static_done = true; break;
      case StageKind::CollectPowerOff: t_close_ = at; break;
      default: break;
    }
    (void)started_at_;
  }

  const SimBackend* backend_;
  const ToolModel* tool_;
  const FileSample* file_;
  std::string tool_id_;
  std::uint64_t master_seed_;
  StageParams params_;
  Rng rng_;
  std::optional<StageKind> persistent_stage_;

  VmState vm_;
  std::optional<StageKind> current_;
  SimMillis started_at_ = 0;
  SimMillis ready_at_ = 0;
  Lifecycle after_ = Lifecycle::Off;
  bool fault_pending_ = false;
  bool resources_collected_ = true;
  std::optional<SimMillis> t_download_;
  std::optional<SimMillis> t_execute_;
  std::optional<SimMillis> t_close_;
};

}  // namespace

SimBackend::SimBackend(SimConfig config, std::vector<FileSample> catalog)
    : config_(std::move(config)) {
  config_.faults.validate();
  for (const auto& [id, t] : config_.tools) t.detector.validate();
  for (auto& f : catalog) {
    auto id = f.file_id;
    if (!catalog_.emplace(std::move(id), std::move(f)).second) {
      throw ConfigError("duplicate file_id in simulator catalog");
    }
  }
}

const FileSample& SimBackend::file(const std::string& file_id) const {
  auto it = catalog_.find(file_id);
  if (it == catalog_.end()) {
    throw ConfigError(fmt::format("file '{}' is not in the simulator catalog", file_id));
  }
  return it->second;
}

std::unique_ptr<TrialSession> SimBackend::open(const TrialContext& ctx) {
  const auto& spec = *ctx.spec;
  auto tit = config_.tools.find(spec.tool_id);
  if (tit == config_.tools.end()) {
    throw ConfigError(fmt::format("tool '{}' has no simulator model", spec.tool_id));
  }
  const auto& f = file(spec.file_id);

  std::optional<StageKind> persistent;
  for (std::size_t i = 0; i < kStageCount && !persistent; ++i) {
    const auto s = static_cast<StageKind>(i);
    if (config_.faults.injected_persistent.contains({spec.tool_id, spec.file_id, s})) {
      persistent = s;
    }
  }
  if (!persistent && config_.faults.persistent_probability > 0.0) {
    Rng r(derive_seed(ctx.master_seed, spec.tool_id, spec.file_id, "persistent"));
    if (bernoulli(r, config_.faults.persistent_probability)) {
      persistent = static_cast<StageKind>(
          std::uniform_int_distribution<std::size_t>(0, kStageCount - 1)(r));
    }
  }
  return std::make_unique<SimSession>(*this, tit->second, f, ctx, persistent);
}

AmbientProfile SimBackend::ambient(const std::string& tool_id, std::uint64_t master_seed,
                                   double duration_s) const {
  auto it = config_.tools.find(tool_id);
  if (it == config_.tools.end()) {
    throw ConfigError(fmt::format("tool '{}' has no simulator model", tool_id));
  }
  Rng rng(derive_seed(master_seed, tool_id, "", "ambient"));
  return sample_ambient(tool_id, it->second.idle, duration_s, rng);
}

// ---------------------------------------------------------------------------
// Corpus

std::map<FileType, double> default_malware_mix() {
  return {{FT::Compressed, 3252}, {FT::HTML, 4575},      {FT::Image, 986},
          {FT::JAR, 127},         {FT::MSOffice, 299},   {FT::PDF, 3977},
          {FT::PE, 26930},        {FT::SourceCode, 905}, {FT::Text, 8738},
          {FT::XML, 211}};
}

std::map<FileType, double> default_benign_mix() {
  return {{FT::PE, 30},   {FT::Text, 20},    {FT::HTML, 15},      {FT::PDF, 12},
          {FT::Compressed, 12}, {FT::JAR, 4}, {FT::MSOffice, 3}, {FT::Image, 2},
          {FT::XML, 1},   {FT::SourceCode, 1}};
}

namespace {

// Largest-remainder apportionment of n items over weights.
std::vector<std::pair<FileType, std::size_t>> apportion(const std::map<FileType, double>& mix,
                                                         std::size_t n) {
  double total = 0.0;
  for (const auto& [t, w] : mix) {
    if (w < 0.0) throw ConfigError("corpus mix weights must be nonnegative");
    total += w;
  }
  std::vector<std::pair<FileType, std::size_t>> out;
  if (n == 0) return out;
  if (!(total > 0.0)) throw ConfigError("corpus mix has zero total weight");
  std::vector<std::tuple<double, FileType>> rema;
  std::size_t used = 0;
  for (const auto& [t, w] : mix) {
    const double exact = static_cast<double>(n) * w / total;
    const auto whole = static_cast<std::size_t>(std::floor(exact));
    out.emplace_back(t, whole);
    used += whole;
    rema.emplace_back(exact - static_cast<double>(whole), t);
  }
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
    return std::get<0>(a) > std::get<0>(b);
  });
  for (std::size_t i = 0; used < n; ++i, ++used) {
    const auto t = std::get<1>(rema[i % rema.size()]);
    for (auto& [ot, c] : out) {
      if (ot == t) ++c;
    }
  }
  return out;
}

std::string_view extension(FileType t) {
  switch (t) {
    case FT::Compressed: return "zip";
    case FT::HTML: return "html";
    case FT::Image: return "png";
    case FT::JAR: return "jar";
    case FT::MSOffice: return "docx";
    case FT::PDF: return "pdf";
    case FT::PE: return "exe";
    case FT::SourceCode: return "js";
    case FT::Text: return "txt";
    case FT::XML: return "xml";
    case FT::Other: return "bin";
  }
  return "bin";
}

}  // namespace

std::vector<FileSample> generate_corpus(const CorpusConfig& cfg, std::uint64_t seed) {
  if (!(cfg.malware_fraction >= 0.0 && cfg.malware_fraction <= 1.0) ||
      !(cfg.zero_day_fraction_of_malware_pe >= 0.0 &&
        cfg.zero_day_fraction_of_malware_pe <= 1.0)) {
    throw ConfigError("corpus fractions must be within [0, 1]");
  }
  const auto n_mal = static_cast<std::size_t>(
      std::llround(static_cast<double>(cfg.files) * cfg.malware_fraction));
  const auto n_ben = cfg.files - n_mal;

  std::vector<FileSample> files;
  files.reserve(cfg.files);
  auto add = [&](FileType t, Label label, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      FileSample f;
      f.file_type = t;
      f.label = label;
      files.push_back(std::move(f));
    }
  };
  std::size_t mal_pe = 0;
  for (const auto& [t, c] :
       apportion(cfg.malware_mix.empty() ? default_malware_mix() : cfg.malware_mix, n_mal)) {
    add(t, Label::Malicious, c);
    if (t == FT::PE) mal_pe = c;
  }
  for (const auto& [t, c] :
       apportion(cfg.benign_mix.empty() ? default_benign_mix() : cfg.benign_mix, n_ben)) {
    add(t, Label::Benign, c);
  }

  auto zero_days = static_cast<std::size_t>(
      std::llround(static_cast<double>(mal_pe) * cfg.zero_day_fraction_of_malware_pe));
  for (auto& f : files) {
    if (zero_days == 0) break;
    if (f.label == Label::Malicious && f.file_type == FT::PE) {
      f.zero_day = true;
      --zero_days;
    }
  }

  Rng rng(derive_seed(seed, "", "", "corpus"));
  std::shuffle(files.begin(), files.end(), rng);
  std::uniform_int_distribution<std::uint64_t> size_dist(1'000, 5'000'000);
  for (std::size_t i = 0; i < files.size(); ++i) {
    auto& f = files[i];
    f.file_id = fmt::format("f{:06d}", i);
    f.display_name = fmt::format("sample_{:06d}.{}", i, extension(f.file_type));
    f.size_bytes = size_dist(rng);
  }
  return files;
}

}  // namespace deteval::sim
