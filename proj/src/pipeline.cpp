#include "deteval/pipeline.hpp"

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "deteval/errors.hpp"
#include "deteval/report.hpp"
#include "deteval/sim.hpp"
#include "deteval/stats.hpp"
#include "deteval/tables.hpp"

namespace deteval::io {

std::vector<TrialSpec> trial_specs(std::span<const FileSample> corpus,
                                   std::span<const std::string> tools) {
  std::vector<TrialSpec> specs;
  specs.reserve(corpus.size() * tools.size());
  for (const auto& f : corpus) {
    for (const auto& t : tools) specs.push_back({t, f.file_id, {}});
  }
  return specs;
}

RunOutputs run_simulation(const ExperimentConfig& cfg, MetricsSink* sink) {
  cfg.validate();
  auto corpus = sim::generate_corpus(cfg.corpus, cfg.seed);

  ExperimentPlan plan;
  plan.trial_specs = trial_specs(corpus, cfg.tools);
  plan.worker_count = cfg.workers;
  plan.trials_per_worker = cfg.trials_per_worker;
  plan.master_seed = cfg.seed;
  plan.remediation = cfg.remediation;
  plan.mode = cfg.mode;
  plan.time_scale = cfg.time_scale;
  plan.poll_interval = std::chrono::microseconds(cfg.poll_interval_us);

  sim::SimBackend backend(cfg.sim, corpus);
  ResourceWarden warden(cfg.resources);

  RunOutputs out;
  out.results = run_experiment(plan, backend, warden, sink);
  out.dataset.files = std::move(corpus);
  for (auto& t : out.results.trials) {
    out.dataset.trials.push_back(t.record);
    out.dataset.alerts.insert(out.dataset.alerts.end(), t.alerts.begin(), t.alerts.end());
  }
  for (const auto& tool : cfg.tools) {
    out.dataset.ambients.push_back(backend.ambient(tool, cfg.seed));
  }
  return out;
}

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string data;
  std::string mode;
  std::optional<double> zero_day_max;
  std::optional<double> zero_day_fraction;
  std::string grid;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "experiment config file (key = value)");
  cmd->add_option("--seed", o.seed, "master seed, overrides experiment.seed");
  cmd->add_option("--out", o.out, "output directory")->capture_default_str();
  cmd->add_option("--mode", o.mode, "attack cost curve")
      ->check(CLI::IsMember({"paper-printed", "constraint-derived"}));
  cmd->add_option("--zero-day-max", o.zero_day_max,
                  "maximum attack cost for zero-day malware (dollars)");
  cmd->add_option("--zero-day-fraction", o.zero_day_fraction,
                  "annual share of malware that is zero-day");
}

ExperimentConfig load_config(const Options& o) {
  ExperimentConfig cfg = o.config.empty() ? default_experiment_config()
                                          : experiment_config_from(ConfigFile::load(o.config));
  if (o.seed) cfg.seed = *o.seed;
  if (!o.mode.empty()) cfg.scoring.mode = *cost::parse_curve_mode(o.mode);
  if (o.zero_day_fraction) cfg.scoring.annual.zero_day_fraction_of_malware = *o.zero_day_fraction;
  if (o.zero_day_max) {
    cfg.scoring.annual.zero_day_M = *o.zero_day_max;
    cfg.sweep.hi = std::max(*o.zero_day_max, cfg.sweep.lo);
  }
  if (!o.grid.empty()) cfg.sweep = parse_grid(o.grid, cfg.sweep);
  cfg.validate();
  return cfg;
}

fs::path data_dir(const Options& o) {
  if (o.data.empty()) throw UsageError("--data DIR is required");
  return o.data;
}

Dataset load_data(const Options& o, std::ostream& out) {
  RowCounts rc;
  auto ds = load_tables(TablePaths::in(data_dir(o)), &rc);
  out << fmt::format("loaded {} files, {} trials, {} resource samples, {} alerts, {} ambient\n",
                     rc.files, rc.trials, rc.resource_samples, rc.alerts, rc.ambients);
  return ds;
}

int cmd_run(const Options& o, std::ostream& out) {
  const auto cfg = load_config(o);
  const fs::path dir = o.out;
  fs::create_directories(dir);
  std::ofstream log(dir / "metrics.jsonl", std::ios::binary | std::ios::trunc);
  if (!log) throw IoFailure(fmt::format("cannot open {}", (dir / "metrics.jsonl").string()));
  JsonlSink sink(log);
  const auto run = run_simulation(cfg, &sink);
  log.close();
  write_tables(run.dataset, TablePaths::in(dir));

  std::ifstream events(dir / "metrics.jsonl");
  const auto summary = aggregate_metrics(events);
  report::write_text_file(dir / "metrics_summary.json", to_json(summary).dump(2) + "\n");
  out << fmt::format("{} trials: {} completed, {} aborted; peak {} files/min\n",
                     run.results.trials.size(), run.results.completed(), run.results.aborted(),
                     summary.peak_files_per_minute);
  out << fmt::format("wrote raw tables and metrics log to {}\n", dir.string());
  return 0;
}

int cmd_score(const Options& o, std::ostream& out) {
  const auto cfg = load_config(o);
  const auto ds = load_data(o, out);
  const auto scores = cost::score_dataset(ds, cfg.scoring);
  const auto stats = stats::compute_stats(scores, stats::index_files(ds.files));
  const auto docs = report::render_report(scores, stats);
  const fs::path dir = o.out;
  report::write_text_file(dir / "breakdown.csv", report::breakdown_csv(scores));
  report::write_text_file(dir / "average_costs.csv", docs.average_costs_csv);
  for (const auto& s : scores) {
    out << fmt::format("{}: total ${:.2f}\n", s.tool_id, s.annual.total);
  }
  return 0;
}

int cmd_stats(const Options& o, std::ostream& out) {
  const auto cfg = load_config(o);
  const auto ds = load_data(o, out);
  const auto scores = cost::score_dataset(ds, cfg.scoring);
  const auto stats = stats::compute_stats(scores, stats::index_files(ds.files));
  const auto docs = report::render_report(scores, stats);
  const fs::path dir = o.out;
  report::write_text_file(dir / "results.csv", docs.results_csv);
  report::write_text_file(dir / "zero_day.csv", docs.zero_day_csv);
  report::write_text_file(dir / "filetype_recall.csv", docs.filetype_csv);
  for (const auto& t : stats.tools) {
    out << fmt::format("{}: recall {}, precision {}\n", t.tool_id,
                       t.overall.recall ? fmt::format("{:.5f}", *t.overall.recall) : "n/a",
                       t.overall.precision ? fmt::format("{:.5f}", *t.overall.precision) : "n/a");
  }
  return 0;
}

cost::SweepResult do_sweep(const ExperimentConfig& cfg, std::span<const cost::ToolScore> scores) {
  const auto s = resolved_sweep(cfg);
  if (s.ml_tool.empty() || s.signature_tool.empty()) {
    throw ConfigError("sweep needs an ML tool and a signature tool (sweep.ml_tool, "
                      "sweep.signature_tool)");
  }
  const auto grid = cost::linear_grid(s.lo, s.hi, s.points);
  return cost::sweep_zero_day_cost(scores, grid, cfg.scoring, s.ml_tool, s.signature_tool);
}

std::string crossover_line(const cost::SweepResult& r) {
  if (!r.crossover_interpolated) {
    return fmt::format("no crossover: {} stays above {} on the grid\n", r.ml_tool,
                       r.signature_tool);
  }
  return fmt::format("crossover: {} drops below {} at zero_day_M ~ ${:.2f} (grid ${:.2f})\n",
                     r.ml_tool, r.signature_tool, *r.crossover_interpolated, *r.crossover_grid);
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const auto cfg = load_config(o);
  const auto ds = load_data(o, out);
  const auto scores = cost::score_dataset(ds, cfg.scoring);
  const auto result = do_sweep(cfg, scores);
  const fs::path dir = o.out;
  report::write_text_file(dir / "sweep.csv", report::sweep_csv(result));
  const auto line = crossover_line(result);
  report::write_text_file(dir / "sweep_summary.txt", line);
  out << line;
  return 0;
}

int cmd_report(const Options& o, std::ostream& out) {
  const auto cfg = load_config(o);
  Dataset ds;
  if (o.data.empty()) {
    ds = run_simulation(cfg).dataset;
    write_tables(ds, TablePaths::in(fs::path(o.out) / "data"));
  } else {
    ds = load_data(o, out);
  }
  const auto scores = cost::score_dataset(ds, cfg.scoring);
  const auto stats = stats::compute_stats(scores, stats::index_files(ds.files));
  std::optional<cost::SweepResult> sweep;
  const auto s = resolved_sweep(cfg);
  if (!s.ml_tool.empty() && !s.signature_tool.empty()) sweep = do_sweep(cfg, scores);
  const auto docs = report::render_report(scores, stats, sweep ? &*sweep : nullptr);
  report::write_report(docs, o.out);
  report::write_text_file(fs::path(o.out) / "breakdown.csv", report::breakdown_csv(scores));
  out << docs.summary_txt;
  return 0;
}

int cmd_validate(const Options& o, std::ostream& out) {
  load_data(o, out);
  out << "ok\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Detector evaluation: simulated trials, cost model and reports", "deteval"};
  app.require_subcommand(1);
  Options o;

  struct Command {
    const char* name;
    const char* help;
    int (*fn)(const Options&, std::ostream&);
  };
  const Command commands[] = {
      {"run", "simulate an experiment and write the raw tables and metrics log", cmd_run},
      {"score", "annual cost breakdown from raw tables", cmd_score},
      {"stats", "detection statistics tables from raw tables", cmd_stats},
      {"sweep", "zero-day maximum cost sensitivity sweep", cmd_sweep},
      {"report", "every table plus a text summary", cmd_report},
      {"validate", "load and check the raw tables", cmd_validate},
  };
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    add_common(sub, o);
    sub->add_option("--data", o.data, "directory holding the raw tables");
    if (std::string_view(c.name) == "sweep" || std::string_view(c.name) == "report") {
      sub->add_option("--grid", o.grid, "zero_day_M grid as lo:hi:n");
    }
    subs.emplace_back(sub, &c);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;  // --help is not an error
  }

  try {
    for (const auto& [sub, c] : subs) {
      if (sub->parsed()) return c->fn(o, out);
    }
    throw UsageError("no command given");
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace deteval::io
