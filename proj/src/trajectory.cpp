#include "pdediff/trajectory.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace pdediff {

static_assert(std::endian::native == std::endian::little, "PDET I/O assumes a little-endian host");

namespace {

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(static_cast<bool>(is), ErrorCode::IoError, "truncated PDET file " + path);
  return v;
}

PdetHeader read_header(std::istream& is, const std::string& path) {
  char magic[4];
  is.read(magic, 4);
  require(is && std::memcmp(magic, "PDET", 4) == 0, ErrorCode::IoError, "bad magic in " + path);
  PdetHeader h;
  h.version = get<std::uint32_t>(is, path);
  require(h.version == 1, ErrorCode::IoError, "unsupported PDET version in " + path);
  h.n_traj = get<std::uint32_t>(is, path);
  h.length = get<std::uint32_t>(is, path);
  h.channels = get<std::uint32_t>(is, path);
  h.width = get<std::uint32_t>(is, path);
  const auto dtype = get<std::uint8_t>(is, path);
  require(dtype <= 1, ErrorCode::IoError, "bad dtype in " + path);
  h.dtype = static_cast<DType>(dtype);
  h.dt_save = get<double>(is, path);
  return h;
}

}  // namespace

void write_pdet(const std::string& path, const std::vector<TrajectoryD>& trajectories, DType dtype,
                const PdetHeader& shape) {
  PdetHeader h = shape;
  h.n_traj = static_cast<std::uint32_t>(trajectories.size());
  h.dtype = dtype;
  if (!trajectories.empty()) {
    const auto& first = trajectories.front();
    h.length = static_cast<std::uint32_t>(first.length());
    h.channels = static_cast<std::uint32_t>(first.channels);
    h.width = static_cast<std::uint32_t>(first.width());
    h.dt_save = first.dt_save;
  }
  for (const auto& tr : trajectories) {
    require(tr.length() == h.length && tr.width() == h.width && tr.channels == static_cast<int>(h.channels),
            ErrorCode::ShapeMismatch, "trajectories in one PDET file must share a shape");
  }
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::IoError, "cannot open " + path + " for writing");
  os.write("PDET", 4);
  put(os, h.version);
  put(os, h.n_traj);
  put(os, h.length);
  put(os, h.channels);
  put(os, h.width);
  put(os, static_cast<std::uint8_t>(h.dtype));
  put(os, h.dt_save);
  for (const auto& tr : trajectories) {
    if (dtype == DType::F64) {
      os.write(reinterpret_cast<const char*>(tr.data.data()), static_cast<std::streamsize>(tr.data.size() * 8));
    } else {
      const Eigen::MatrixXf f = tr.data.cast<float>();
      os.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * 4));
    }
  }
  require(static_cast<bool>(os), ErrorCode::IoError, "write failed for " + path);
}

PdetHeader read_pdet_header(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::IoError, "cannot open " + path);
  return read_header(is, path);
}

std::vector<TrajectoryD> read_pdet(const std::string& path, PdetHeader* header) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::IoError, "cannot open " + path);
  const PdetHeader h = read_header(is, path);
  if (header) *header = h;
  std::vector<TrajectoryD> out;
  out.reserve(h.n_traj);
  const Eigen::Index rows = static_cast<Eigen::Index>(h.channels) * h.width;
  for (std::uint32_t n = 0; n < h.n_traj; ++n) {
    TrajectoryD tr(h.width, h.length, h.dt_save, static_cast<int>(h.channels));
    if (h.dtype == DType::F64) {
      is.read(reinterpret_cast<char*>(tr.data.data()), static_cast<std::streamsize>(rows * h.length * 8));
    } else {
      Eigen::MatrixXf f(rows, h.length);
      is.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(rows * h.length * 4));
      tr.data = f.cast<double>();
    }
    require(static_cast<bool>(is), ErrorCode::IoError, "truncated PDET payload in " + path);
    out.push_back(std::move(tr));
  }
  return out;
}

void write_stats(const std::string& path, const NormStats& stats) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::IoError, "cannot open " + path + " for writing");
  os << std::setprecision(17) << "mean = " << stats.mean << "\nstd = " << stats.std << "\n";
}

NormStats read_stats(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::IoError, "cannot open " + path);
  NormStats s;
  bool have_mean = false, have_std = false;
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string key, eq;
    double value = 0;
    if (!(ls >> key >> eq >> value) || eq != "=") continue;
    if (key == "mean") s.mean = value, have_mean = true;
    if (key == "std") s.std = value, have_std = true;
  }
  require(have_mean && have_std, ErrorCode::IoError, "stats file " + path + " lacks mean/std");
  return s;
}

NormStats compute_stats(const std::vector<TrajectoryD>& trajectories) {
  double sum = 0, count = 0;
  for (const auto& tr : trajectories) {
    sum += tr.data.sum();
    count += static_cast<double>(tr.data.size());
  }
  NormStats s;
  if (count == 0) return s;
  s.mean = sum / count;
  double ss = 0;
  for (const auto& tr : trajectories) ss += (tr.data.array() - s.mean).square().sum();
  const double var = ss / count;
  s.std = var > 0 ? std::sqrt(var) : 1.0;
  return s;
}

}  // namespace pdediff
