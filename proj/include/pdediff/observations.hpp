#pragma once

#include "pdediff/common.hpp"
#include "pdediff/trajectory.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pdediff {

struct ObsIndex {
  int t = 0;  // state index
  int z = 0;  // spatial index
  bool operator==(const ObsIndex& o) const { return t == o.t && z == o.z; }
  bool operator<(const ObsIndex& o) const { return t != o.t ? t < o.t : z < o.z; }
};

/// Sparse space-time measurements y = A vec(x) + eta, eta ~ N(0, sigma_y^2 I).
struct ObservationSet {
  std::vector<ObsIndex> indices;
  Eigen::VectorXd values;
  double sigma_y = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
  /// Unique, in-range indices with one value each.
  void validate(Eigen::Index L, Eigen::Index D) const;
};

/// Observations restricted to states [offset, offset + length), re-based to window coordinates.
struct WindowObservations {
  ObservationSet local;
  int offset = 0;
  int length = 0;

  ObservationSet to_global() const;
};

WindowObservations restrict_to_window(const ObservationSet& obs, int offset, int length);

/// Merges sets; later duplicates of an index are dropped. sigma_y is taken from the first non-empty set.
ObservationSet merge(const std::vector<ObservationSet>& sets);

/// Gathers x (D x L, column = state) at the observed indices.
Eigen::VectorXd apply_A(const ObservationSet& obs, const Eigen::MatrixXd& x);

/// Dense (D x L) mask and value planes; unobserved entries are 0 in both.
struct DenseObservations {
  Eigen::MatrixXd mask;
  Eigen::MatrixXd values;
};
DenseObservations scatter(const ObservationSet& obs, Eigen::Index L, Eigen::Index D);

/// Fills obs.values from the truth plus N(0, sigma_y^2) noise drawn from `seed`.
void observe(ObservationSet& obs, const Eigen::MatrixXd& truth, std::uint64_t seed);

/// floor(proportion * L * D) uniformly drawn indices plus every index of the first
/// `n_initial_full` states. Values are read from `truth` with noise.
ObservationSet sample_offline_obs(const TrajectoryD& truth, double proportion, int n_initial_full, double sigma_y,
                                  std::uint64_t seed);

/// Index-only variant of sample_offline_obs.
ObservationSet sample_offline_indices(int L, int D, double proportion, int n_initial_full, std::uint64_t seed);

/// Number of online DA steps needed for forecasts of length f to reach L.
int online_steps(int L, int s, int f);

/// Block j covers states [j * s, (j + 1) * s); it carries floor(proportion * s * D) indices,
/// except block 0 which carries floor(first_fraction * s * D). Values are left empty.
std::vector<ObservationSet> online_obs_stream(int L, int D, int s, double proportion, std::uint64_t seed,
                                              int n_blocks = -1, double first_fraction = 0.1);

void write_obs_csv(const std::string& path, const ObservationSet& obs);
ObservationSet read_obs_csv(const std::string& path);

}  // namespace pdediff
