#pragma once

#include "pdediff/trajectory.hpp"

#include <string>
#include <vector>

namespace pdediff {

/// Per-step errors over a set of trajectories. Standard errors are 3x the standard error
/// of the per-trajectory value.
struct MetricSeries {
  Eigen::VectorXd mse, mse_se;
  Eigen::VectorXd rho, rho_se;
  Eigen::VectorXi rho_excluded;  // degenerate fields dropped at each step
  double rmsd = 0, rmsd_se = 0;
  double t_max = 0, t_max_se = 0;
  int n_trajectories = 0;
};

Eigen::VectorXd mse_per_step(const std::vector<TrajectoryD>& pred, const std::vector<TrajectoryD>& truth);

/// Pearson correlation of two fields; NaN when either is constant.
double pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);

/// Per-trajectory correlation averaged over trajectories; NaN entries are skipped and
/// counted in `excluded`.
Eigen::VectorXd pearson_per_step(const std::vector<TrajectoryD>& pred, const std::vector<TrajectoryD>& truth,
                                 Eigen::VectorXi* excluded = nullptr);

/// dt times the number of leading steps with rho above the threshold.
double high_correlation_time(const Eigen::VectorXd& rho, double dt, double threshold = 0.8);

struct ScalarWithSe {
  double value = 0;
  double se = 0;
};

ScalarWithSe rmsd(const std::vector<TrajectoryD>& pred, const std::vector<TrajectoryD>& truth);

/// Everything at once; steps before `first` are ignored (e.g. the initial frames of a forecast).
MetricSeries evaluate_metrics(const std::vector<TrajectoryD>& pred, const std::vector<TrajectoryD>& truth,
                              int first = 0, double threshold = 0.8);

/// |rfft| of one channel of state l; D / 2 + 1 bins.
Eigen::VectorXd spectrum(const TrajectoryD& traj, Eigen::Index l, int channel = 0);

/// Mean training state over trajectories and time.
Field baseline_climatology(const std::vector<TrajectoryD>& train);
TrajectoryD climatology_trajectory(const Field& mean, Eigen::Index L, double dt);

/// init followed by its last state repeated up to L states.
TrajectoryD baseline_persistence(const TrajectoryD& init, Eigen::Index L);

struct MetricsRow {
  std::string task, model;
  std::uint64_t seed = 0;
  double gamma = 0;
  int P = 0, C = 0;
  double proportion = 0;
  double rmsd = 0, rmsd_se = 0, t_max = 0, t_max_se = 0;
  std::int64_t nfe = 0;
  double wall_s = 0;
};

extern const char* const kMetricsHeader;
extern const char* const kSeriesHeader;

/// Appends rows, writing the header when the file is new or empty.
void append_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(const std::string& path);
void write_series_csv(const std::string& path, const MetricSeries& m);

}  // namespace pdediff
