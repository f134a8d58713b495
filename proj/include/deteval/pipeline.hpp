#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "deteval/config.hpp"
#include "deteval/costmodel.hpp"
#include "deteval/metrics.hpp"
#include "deteval/model.hpp"
#include "deteval/orchestrator.hpp"

namespace deteval::io {

struct RunOutputs {
  Dataset dataset;
  ExperimentResults results;
};

/// Trial specs in file-major order: every tool on file 0, then file 1, ...
std::vector<TrialSpec> trial_specs(std::span<const FileSample> corpus,
                                   std::span<const std::string> tools);

/// Generates the corpus, runs every (tool, file) trial on the simulator and
/// gathers the raw tables, ambient profiles included.
RunOutputs run_simulation(const ExperimentConfig& cfg, MetricsSink* sink = nullptr);

/// Command-line entry point: deteval {run|score|stats|sweep|report|validate}.
/// Returns the process exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace deteval::io
