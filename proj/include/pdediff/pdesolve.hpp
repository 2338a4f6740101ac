#pragma once

#include "pdediff/common.hpp"
#include "pdediff/trajectory.hpp"

#include <cstdint>
#include <string>

namespace pdediff {

/// Space-time discretisation. States are saved every dt_save on D points; the
/// integrator runs on D * solve_factor points and saved states are spectrally truncated to D.
struct GridSpec {
  bool operator==(const GridSpec&) const = default;
  int D = 64;
  double domain_length = 1.0;
  double dt_solver = 1e-4;
  double dt_save = 0.01;
  int n_steps_saved = 101;
  int solve_factor = 1;

  int solve_points() const { return D * solve_factor; }
  int substeps() const;  // dt_save / dt_solver
  void validate() const;
};

/// Gaussian random field N(0, scale^2 (-Laplacian + k0^2)^-power) initial conditions.
struct BurgersParams {
  bool operator==(const BurgersParams&) const = default;
  double viscosity = 0.01;
  double grf_scale = 625.0;
  double grf_k0 = 5.0;
  double grf_power = 4.0;
};

/// Truncated Fourier series u0 = sum_k A_k sin(2 pi l_k z / length + phi_k).
struct KSParams {
  bool operator==(const KSParams&) const = default;
  double viscosity = 1.0;
  int init_n_modes = 10;
  double amp_min = -0.5, amp_max = 0.5;
  double phase_min = 0.0, phase_max = 6.283185307179586;
  int freq_min = 1, freq_max = 3;
};

enum class PdeKind { Burgers, KS };

std::string to_string(PdeKind kind);
PdeKind parse_pde_kind(const std::string& name);

/// Largest |u| tolerated before a trajectory is declared blown up.
inline constexpr double kBlowUpBound = 1e3;

/// Integrates u_t + u u_z = nu u_zz. `init` lives on the solve grid.
TrajectoryD solve_burgers(const Field& init, const GridSpec& grid, const BurgersParams& params);

/// Integrates u_t + u u_z + u_zz + nu u_zzzz = 0. `init` lives on the solve grid.
TrajectoryD solve_ks(const Field& init, const GridSpec& grid, const KSParams& params);

Field sample_burgers_grf(int n, double domain_length, const BurgersParams& params, std::uint64_t seed);
Field sample_ks_fourier(int n, double domain_length, const KSParams& params, std::uint64_t seed);

/// Pointwise variance of the GRF realised on n points (sum over the retained modes).
double grf_pointwise_variance(int n, double domain_length, const BurgersParams& params);

struct PdeSpec {
  bool operator==(const PdeSpec&) const = default;
  PdeKind kind = PdeKind::KS;
  GridSpec grid;
  BurgersParams burgers;
  KSParams ks;
};

/// Initial condition on the solve grid.
Field sample_initial_condition(const PdeSpec& spec, std::uint64_t seed);
TrajectoryD solve(const PdeSpec& spec, const Field& init);

struct DatasetSpec {
  bool operator==(const DatasetSpec&) const = default;
  PdeSpec pde;
  int n_train = 0, n_valid = 0, n_test = 0;
  int length_train = 140;
  int length_test = 640;  // validation and test share this length
  int burn_in = 0;        // saved states discarded at the start of every trajectory
};

struct DatasetSummary {
  int n_train = 0, n_valid = 0, n_test = 0;
  int D = 0, length_train = 0, length_test = 0;
  NormStats stats;
};

/// Writes `<dir>/{train,valid,test}.pdet` (f32) plus matching `.stats` sidecars holding
/// the train-split normalisation. Splits draw from disjoint seed substreams.
DatasetSummary generate_dataset(const DatasetSpec& spec, std::uint64_t seed, const std::string& dir,
                                int threads = 1);

/// One trajectory of a split; exposed so callers can regenerate individual members.
TrajectoryD generate_trajectory(const DatasetSpec& spec, std::uint64_t seed, const std::string& split,
                                int index, int length);

}  // namespace pdediff
