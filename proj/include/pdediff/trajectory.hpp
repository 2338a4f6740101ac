#pragma once

#include "pdediff/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pdediff {

/// Time-major grid of PDE states. Column l holds state l laid out as [channels][D].
template <typename Scalar>
struct Trajectory {
  MatrixX<Scalar> data;
  int channels = 1;
  double dt_save = 1.0;

  Trajectory() = default;
  Trajectory(Eigen::Index width, Eigen::Index length, double dt, int n_channels = 1)
      : data(MatrixX<Scalar>::Zero(width * n_channels, length)), channels(n_channels), dt_save(dt) {}

  Eigen::Index length() const { return data.cols(); }
  Eigen::Index width() const { return data.rows() / channels; }

  template <typename Other>
  Trajectory<Other> cast() const {
    Trajectory<Other> out;
    out.data = data.template cast<Other>();
    out.channels = channels;
    out.dt_save = dt_save;
    return out;
  }
};

using TrajectoryD = Trajectory<double>;

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

struct PdetHeader {
  std::uint32_t version = 1;
  std::uint32_t n_traj = 0;
  std::uint32_t length = 0;
  std::uint32_t channels = 1;
  std::uint32_t width = 0;
  DType dtype = DType::F32;
  double dt_save = 1.0;
};

/// Writes the little-endian PDET container. `shape` supplies L/channels/D/dt when the set is empty.
void write_pdet(const std::string& path, const std::vector<TrajectoryD>& trajectories, DType dtype,
                const PdetHeader& shape = {});
PdetHeader read_pdet_header(const std::string& path);
std::vector<TrajectoryD> read_pdet(const std::string& path, PdetHeader* header = nullptr);

/// Per-dataset z-score statistics, stored in `<name>.stats`.
struct NormStats {
  double mean = 0.0;
  double std = 1.0;
};

void write_stats(const std::string& path, const NormStats& stats);
NormStats read_stats(const std::string& path);
NormStats compute_stats(const std::vector<TrajectoryD>& trajectories);

}  // namespace pdediff
