#include "deteval/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include <fmt/format.h>

#include "deteval/errors.hpp"

namespace deteval::io {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    auto piece = trim(s.substr(pos, next == std::string_view::npos ? next : next - pos));
    if (!piece.empty()) out.push_back(std::move(piece));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

template <typename T>
T parse_as(const std::string& key, const std::string& value) {
  T v{};
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (value.empty() || ec != std::errc() || p != value.data() + value.size()) {
    throw ConfigError(fmt::format("{}: cannot parse '{}'", key, value));
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, value));
}

// Typed access that consumes keys as it reads them.
class Reader {
 public:
  explicit Reader(ConfigFile& f) : f_(&f) {}

  template <typename T>
  void number(const std::string& key, T& dst) {
    if (auto v = f_->take(key)) dst = parse_as<T>(key, *v);
  }
  void optional_number(const std::string& key, std::optional<double>& dst) {
    if (auto v = f_->take(key)) dst = parse_as<double>(key, *v);
  }
  void boolean(const std::string& key, bool& dst) {
    if (auto v = f_->take(key)) dst = parse_bool(key, *v);
  }
  void text(const std::string& key, std::string& dst) {
    if (auto v = f_->take(key)) dst = *v;
  }
  void distribution(const std::string& key, sim::Distribution& dst) {
    auto v = f_->take(key);
    if (!v) return;
    try {
      dst = sim::Distribution::parse(*v);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}: {}", key, e.what()));
    }
  }
  std::optional<std::string> take(const std::string& key) { return f_->take(key); }
  std::vector<std::string> keys(const std::string& prefix) const {
    return f_->keys_with_prefix(prefix);
  }

 private:
  ConfigFile* f_;
};

FileType file_type_key(const std::string& key, std::string_view token) {
  auto t = parse_file_type(token);
  if (!t) throw ConfigError(fmt::format("{}: unknown file type '{}'", key, token));
  return *t;
}

StageKind stage_key(const std::string& key, std::string_view token) {
  auto s = parse_stage(token);
  if (!s) throw ConfigError(fmt::format("{}: unknown stage '{}'", key, token));
  return *s;
}

void read_mix(Reader& r, const std::string& prefix, std::map<FileType, double>& mix) {
  for (const auto& key : r.keys(prefix)) {
    const auto type = file_type_key(key, std::string_view(key).substr(prefix.size()));
    double w = 0.0;
    r.number(key, w);
    mix[type] = w;
  }
}

void read_profile(Reader& r, const std::string& prefix, sim::ResourceProfile& p) {
  r.distribution(prefix + "cpu", p.cpu_fraction);
  r.distribution(prefix + "ram", p.ram_bytes);
  r.distribution(prefix + "hdd_read", p.hdd_read_bytes_per_s);
  r.distribution(prefix + "hdd_write", p.hdd_write_bytes_per_s);
}

void read_tool(Reader& r, const std::string& id, ExperimentConfig& cfg) {
  const std::string p = "tool." + id + ".";
  std::string preset = id;
  r.text(p + "preset", preset);
  const auto names = sim::detector_preset_names();
  if (std::find(names.begin(), names.end(), preset) == names.end()) {
    throw ConfigError(fmt::format("{}preset: unknown preset '{}' (known: {})", p, preset,
                                  fmt::join(names, ", ")));
  }
  auto model = sim::tool_preset(preset);
  auto& d = model.detector;
  if (auto k = r.take(p + "kind")) {
    auto kind = sim::parse_detector_kind(*k);
    if (!kind) throw ConfigError(fmt::format("{}kind: unknown detector kind '{}'", p, *k));
    d.kind = *kind;
  }
  for (const auto& key : r.keys(p + "recall.")) {
    const auto type = file_type_key(key, std::string_view(key).substr(p.size() + 7));
    r.number(key, d.recall_by_filetype[type]);
  }
  r.number(p + "zero_day_recall", d.zero_day_recall);
  r.number(p + "known_hash_fraction", d.known_hash_fraction);
  r.number(p + "false_positive_rate", d.false_positive_rate);
  r.distribution(p + "static_latency", d.static_latency);
  r.distribution(p + "dynamic_latency", d.dynamic_latency);
  if (auto v = r.take(p + "appliance.post_close_fraction")) {
    if (!d.appliance) d.appliance = sim::ApplianceModel{};
    d.appliance->post_close_fraction = parse_as<double>(p + "appliance.post_close_fraction", *v);
  }
  if (d.appliance) r.distribution(p + "appliance.post_close_delay", d.appliance->post_close_delay);
  read_profile(r, p + "active.", model.active);
  read_profile(r, p + "idle.", model.idle);

  cost::ToolSetup setup;
  r.number(p + "setup_hours", setup.setup_hours);
  r.number(p + "appliance_total", setup.appliance_total);
  r.number(p + "appliance_annual", setup.appliance_annual);
  cfg.scoring.setups[id] = setup;
  cfg.sim.tools[id] = std::move(model);
}

}  // namespace

ConfigFile ConfigFile::parse(std::istream& in, const std::string& source) {
  ConfigFile f;
  f.source_ = source;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ParseError(source, lineno, 1, "expected 'key = value'");
    }
    auto key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw ParseError(source, lineno, 1, "empty key");
    if (f.values_.contains(key)) {
      throw ParseError(source, lineno, 1, fmt::format("key '{}' repeated", key));
    }
    f.values_.emplace(std::move(key), trim(std::string_view(body).substr(eq + 1)));
  }
  return f;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure(fmt::format("cannot open config {}", path.string()));
  return parse(in, path.string());
}

void ConfigFile::set(const std::string& key, std::string value) {
  values_[key] = std::move(value);
}

std::optional<std::string> ConfigFile::take(const std::string& key) {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  consumed_.insert(key);
  return it->second;
}

std::vector<std::string> ConfigFile::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (auto it = values_.lower_bound(prefix); it != values_.end() && it->first.starts_with(prefix);
       ++it) {
    out.push_back(it->first);
  }
  return out;
}

void ConfigFile::require_all_consumed() const {
  std::vector<std::string> unknown;
  for (const auto& [k, v] : values_) {
    if (!consumed_.contains(k)) unknown.push_back(k);
  }
  if (!unknown.empty()) {
    throw ConfigError(fmt::format("{}: unknown key(s): {}", source_, fmt::join(unknown, ", ")));
  }
}

void ExperimentConfig::validate() const {
  if (workers < 1 || trials_per_worker < 1) {
    throw ConfigError("workers and trials_per_worker must be >= 1");
  }
  if (!(time_scale > 0.0)) throw ConfigError("time_scale must be positive");
  if (poll_interval_us < 0) throw ConfigError("poll_interval_us must be >= 0");
  if (tools.empty()) throw ConfigError("no tools configured");
  for (const auto& t : tools) {
    if (!sim.tools.contains(t)) throw ConfigError(fmt::format("tool '{}' has no model", t));
  }
  for (const auto& c : resources) {
    if (c.limit < 1) {
      throw ConfigError(fmt::format("resources.{}.limit must be >= 1, got {}", c.name, c.limit));
    }
  }
  sim.faults.validate();
  remediation.validate();
  scoring.constants.validate();
  scoring.annual.validate();
  if (sweep.points == 0) throw EmptyGrid("sweep grid has no points");
  if (!(sweep.hi >= sweep.lo)) throw ConfigError("sweep grid upper bound below lower bound");
}

ExperimentConfig default_experiment_config() {
  ExperimentConfig cfg;
  cfg.tools = {"tool1", "tool2", "tool3", "tool4", "baseline2"};
  for (const auto& t : cfg.tools) {
    cfg.sim.tools[t] = sim::tool_preset(t);
    cfg.scoring.setups[t] = {};
  }
  return cfg;
}

ExperimentConfig experiment_config_from(ConfigFile file) {
  ExperimentConfig cfg = default_experiment_config();
  Reader r(file);

  r.number("experiment.workers", cfg.workers);
  r.number("experiment.trials_per_worker", cfg.trials_per_worker);
  r.number("experiment.seed", cfg.seed);
  if (auto m = r.take("experiment.mode")) {
    if (*m == "deterministic") {
      cfg.mode = ExecutionMode::Deterministic;
    } else if (*m == "threaded") {
      cfg.mode = ExecutionMode::Threaded;
    } else {
      throw ConfigError(fmt::format("experiment.mode: '{}' is not deterministic|threaded", *m));
    }
  }
  r.number("experiment.time_scale", cfg.time_scale);
  r.number("experiment.poll_interval_us", cfg.poll_interval_us);

  r.number("corpus.files", cfg.corpus.files);
  r.number("corpus.malware_fraction", cfg.corpus.malware_fraction);
  r.number("corpus.zero_day_fraction", cfg.corpus.zero_day_fraction_of_malware_pe);
  read_mix(r, "corpus.malware_mix.", cfg.corpus.malware_mix);
  read_mix(r, "corpus.benign_mix.", cfg.corpus.benign_mix);

  if (auto t = r.take("tools")) {
    cfg.tools = split(*t, ',');
    cfg.sim.tools.clear();
    cfg.scoring.setups.clear();
  }
  std::set<std::string> seen;
  for (const auto& id : cfg.tools) {
    if (!seen.insert(id).second) throw ConfigError(fmt::format("tool '{}' listed twice", id));
    read_tool(r, id, cfg);
  }

  auto& tm = cfg.sim.timing;
  r.distribution("timing.restore", tm.restore);
  r.distribution("timing.upload", tm.upload);
  r.distribution("timing.deliver", tm.deliver);
  r.number("timing.static_wait_s", tm.static_wait_s);
  r.distribution("timing.static_overshoot", tm.static_overshoot);
  r.number("timing.dynamic_wait_s", tm.dynamic_wait_s);
  r.distribution("timing.dynamic_overshoot", tm.dynamic_overshoot);
  r.distribution("timing.collect", tm.collect);

  auto& fc = cfg.sim.faults;
  r.number("faults.transient", fc.transient_probability);
  for (const auto& key : r.keys("faults.transient.")) {
    const auto stage = stage_key(key, std::string_view(key).substr(17));
    r.number(key, fc.transient_by_stage[stage]);
  }
  r.number("faults.persistent", fc.persistent_probability);
  if (auto inj = r.take("faults.inject")) {
    for (const auto& item : split(*inj, ',')) {
      const auto colon = item.find(':');
      const auto at = item.find('@');
      if (colon == std::string::npos || at == std::string::npos || at < colon) {
        throw ConfigError(
            fmt::format("faults.inject: '{}' is not tool:file@stage", item));
      }
      fc.injected_persistent.insert({item.substr(0, colon), item.substr(colon + 1, at - colon - 1),
                                     stage_key("faults.inject", item.substr(at + 1))});
    }
  }

  auto& rp = cfg.remediation;
  r.number("remediation.ignore", rp.ignore_budget);
  r.number("remediation.stage_retry_default", rp.default_stage_retry_budget);
  for (const auto& key : r.keys("remediation.stage_retry.")) {
    const auto stage = stage_key(key, std::string_view(key).substr(24));
    r.number(key, rp.stage_retry_budget[std::string(stage_name(stage))]);
  }
  r.number("remediation.stage_skip", rp.stage_skip_budget);
  r.number("remediation.trial_restart", rp.trial_restart_budget);
  r.number("remediation.orchestrator_restart", rp.orchestrator_restart_budget);
  if (auto l = r.take("remediation.ladder")) {
    rp.ladder.clear();
    for (const auto& name : split(*l, ',')) {
      auto a = parse_remediation_action(name);
      if (!a) throw ConfigError(fmt::format("remediation.ladder: unknown action '{}'", name));
      rp.ladder.push_back(*a);
    }
  }
  if (auto t = r.take("remediation.terminal")) {
    auto a = parse_remediation_action(*t);
    if (!a) throw ConfigError(fmt::format("remediation.terminal: unknown action '{}'", *t));
    rp.terminal = *a;
  }

  for (const auto& key : r.keys("resources.")) {
    constexpr std::string_view suffix = ".limit";
    if (!key.ends_with(suffix)) continue;  // reported as unknown below
    const auto name = key.substr(10, key.size() - 10 - suffix.size());
    int limit = 0;
    r.number(key, limit);
    auto it = std::find_if(cfg.resources.begin(), cfg.resources.end(),
                           [&](const ResourceClass& c) { return c.name == name; });
    if (it == cfg.resources.end()) {
      cfg.resources.push_back({name, limit});
    } else {
      it->limit = limit;
    }
  }

  auto& sc = cfg.scoring;
  if (auto m = r.take("cost.mode")) {
    auto mode = cost::parse_curve_mode(*m);
    if (!mode) throw ConfigError(fmt::format("cost.mode: unknown curve mode '{}'", *m));
    sc.mode = *mode;
  }
  auto& k = sc.constants;
  r.number("cost.M", k.M);
  r.number("cost.triage", k.triage);
  r.number("cost.ir", k.ir);
  r.number("cost.labor_rate", k.labor_rate);
  r.number("cost.siem_fee", k.siem_fee);
  r.number("cost.cpu_rate", k.cpu_rate);
  r.number("cost.ram_rate", k.ram_rate);
  r.number("cost.hdd_rate_month", k.hdd_rate_month);
  r.number("cost.days_per_month", k.days_per_month);

  auto& an = sc.annual;
  r.number("annual.files_per_year", an.files_per_year);
  r.number("annual.malware_fraction", an.malware_fraction);
  r.number("annual.zero_day_fraction", an.zero_day_fraction_of_malware);
  r.optional_number("annual.zero_day_M", an.zero_day_M);
  r.number("annual.network_size_hosts", an.network_size_hosts);
  r.number("annual.free_setup_hours", an.free_setup_hours);

  r.text("sweep.ml_tool", cfg.sweep.ml_tool);
  r.text("sweep.signature_tool", cfg.sweep.signature_tool);
  if (auto g = r.take("sweep.grid")) cfg.sweep = parse_grid(*g, cfg.sweep);

  file.require_all_consumed();
  cfg.validate();
  return cfg;
}

SweepSettings resolved_sweep(const ExperimentConfig& cfg) {
  SweepSettings s = cfg.sweep;
  auto first_of = [&](sim::DetectorKind kind) {
    for (const auto& t : cfg.tools) {
      auto it = cfg.sim.tools.find(t);
      if (it != cfg.sim.tools.end() && it->second.detector.kind == kind) return t;
    }
    return std::string();
  };
  if (s.ml_tool.empty()) s.ml_tool = first_of(sim::DetectorKind::MLStatic);
  if (s.signature_tool.empty()) s.signature_tool = first_of(sim::DetectorKind::Signature);
  return s;
}

SweepSettings parse_grid(std::string_view text, SweepSettings base) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    const auto next = text.find(':', pos);
    parts.push_back(trim(text.substr(pos, next == std::string_view::npos ? next : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  if (parts.size() != 3) throw ConfigError(fmt::format("grid '{}' is not lo:hi:n", text));
  base.lo = parse_as<double>("grid", parts[0]);
  base.hi = parse_as<double>("grid", parts[1]);
  base.points = parse_as<std::size_t>("grid", parts[2]);
  if (base.points == 0) throw EmptyGrid(fmt::format("grid '{}' has no points", text));
  if (!(base.hi >= base.lo)) throw ConfigError(fmt::format("grid '{}' runs backwards", text));
  return base;
}

}  // namespace deteval::io
