#pragma once

#include "pdediff/config.hpp"
#include "pdediff/metrics.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace pdediff {

/// Where a command reads and writes. Relative data and checkpoint paths resolve against out_dir.
struct CommandContext {
  ExperimentConfig cfg;
  std::string out_dir = ".";
  std::ostream* log = nullptr;  // progress and summaries; silent when null

  std::string path(const std::string& p) const;
};

DatasetSummary cmd_generate(const CommandContext& ctx);
TrainResult cmd_train(const CommandContext& ctx);

/// AR and/or AAO rollouts from the first C test states. Writes forecast_metrics.csv,
/// one series CSV and one PDET of samples per run.
std::vector<MetricsRow> cmd_forecast(const CommandContext& ctx);

/// Sparsity sweep over task.proportions with the configured sampler plus interpolation and
/// climatology baselines. Writes da_offline_metrics.csv.
std::vector<MetricsRow> cmd_da_offline(const CommandContext& ctx);

/// Forecast every s states over the next f states from all observations received so far.
/// Writes da_online_metrics.csv and a per-step CSV.
std::vector<MetricsRow> cmd_da_online(const CommandContext& ctx);

/// Scores a PDET of predictions against a PDET of truths, ignoring the first `first` states.
MetricsRow cmd_evaluate(const CommandContext& ctx, const std::string& pred_path, const std::string& truth_path,
                        int first);

struct InvariantCheck {
  std::string name;
  double residual = 0;
  double tolerance = 0;
  bool pass = false;
};

/// Oracle and sampler invariants against closed forms. `perturbation` is added to every
/// oracle score and noise prediction so the report can be shown to catch errors.
std::vector<InvariantCheck> oracle_invariants(double perturbation = 0.0);

/// Prints the invariant report and writes oracle_check.csv; returns the number of failures.
int cmd_oracle_check(const CommandContext& ctx, double perturbation = 0.0);

}  // namespace pdediff
