#include "pdediff/observations.hpp"

#include "pdediff/rng.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace pdediff {

void ObservationSet::validate(Eigen::Index L, Eigen::Index D) const {
  require(values.size() == 0 || values.size() == static_cast<Eigen::Index>(indices.size()), ErrorCode::ShapeMismatch,
          "observation values and indices differ in length");
  require(sigma_y >= 0, ErrorCode::InvalidArgument, "sigma_y must be >= 0");
  std::set<ObsIndex> seen;
  for (const auto& i : indices) {
    require(i.t >= 0 && i.t < L && i.z >= 0 && i.z < D, ErrorCode::IndexOutOfRange,
            "observation (" + std::to_string(i.t) + ", " + std::to_string(i.z) + ") outside the grid");
    require(seen.insert(i).second, ErrorCode::InvalidArgument, "duplicate observation index");
  }
}

ObservationSet WindowObservations::to_global() const {
  ObservationSet g = local;
  for (auto& i : g.indices) i.t += offset;
  return g;
}

WindowObservations restrict_to_window(const ObservationSet& obs, int offset, int length) {
  WindowObservations w;
  w.offset = offset;
  w.length = length;
  w.local.sigma_y = obs.sigma_y;
  w.local.seed = obs.seed;
  std::vector<double> vals;
  for (std::size_t k = 0; k < obs.indices.size(); ++k) {
    const auto& i = obs.indices[k];
    if (i.t < offset || i.t >= offset + length) continue;
    w.local.indices.push_back({i.t - offset, i.z});
    if (obs.values.size()) vals.push_back(obs.values[static_cast<Eigen::Index>(k)]);
  }
  if (obs.values.size()) w.local.values = Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  return w;
}

ObservationSet merge(const std::vector<ObservationSet>& sets) {
  ObservationSet out;
  std::set<ObsIndex> seen;
  std::vector<double> vals;
  bool have_sigma = false;
  for (const auto& s : sets) {
    if (!have_sigma && !s.empty()) {
      out.sigma_y = s.sigma_y;
      out.seed = s.seed;
      have_sigma = true;
    }
    for (std::size_t k = 0; k < s.indices.size(); ++k) {
      if (!seen.insert(s.indices[k]).second) continue;
      out.indices.push_back(s.indices[k]);
      vals.push_back(s.values.size() ? s.values[static_cast<Eigen::Index>(k)] : 0.0);
    }
  }
  out.values = Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  return out;
}

Eigen::VectorXd apply_A(const ObservationSet& obs, const Eigen::MatrixXd& x) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(obs.indices.size()));
  for (std::size_t k = 0; k < obs.indices.size(); ++k) {
    const auto& i = obs.indices[k];
    require(i.t >= 0 && i.t < x.cols() && i.z >= 0 && i.z < x.rows(), ErrorCode::IndexOutOfRange,
            "observation index outside the trajectory");
    y[static_cast<Eigen::Index>(k)] = x(i.z, i.t);
  }
  return y;
}

DenseObservations scatter(const ObservationSet& obs, Eigen::Index L, Eigen::Index D) {
  DenseObservations d{Eigen::MatrixXd::Zero(D, L), Eigen::MatrixXd::Zero(D, L)};
  for (std::size_t k = 0; k < obs.indices.size(); ++k) {
    const auto& i = obs.indices[k];
    require(i.t >= 0 && i.t < L && i.z >= 0 && i.z < D, ErrorCode::IndexOutOfRange,
            "observation index outside the grid");
    d.mask(i.z, i.t) = 1.0;
    d.values(i.z, i.t) = obs.values.size() ? obs.values[static_cast<Eigen::Index>(k)] : 0.0;
  }
  return d;
}

void observe(ObservationSet& obs, const Eigen::MatrixXd& truth, std::uint64_t seed) {
  Rng rng(seed);
  obs.values = apply_A(obs, truth);
  for (Eigen::Index k = 0; k < obs.values.size(); ++k) obs.values[k] += obs.sigma_y * rng.normal();
}

namespace {

// Partial Fisher-Yates: m distinct draws from [0, n), returned sorted.
std::vector<std::int64_t> choose(std::int64_t n, std::int64_t m, Rng& rng) {
  std::vector<std::int64_t> pool(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) pool[i] = i;
  for (std::int64_t i = 0; i < m; ++i) std::swap(pool[i], pool[rng.integer(i, n - 1)]);
  pool.resize(static_cast<std::size_t>(m));
  std::sort(pool.begin(), pool.end());
  return pool;
}

void check_proportion(double p) {
  require(std::isfinite(p) && p > 0 && p <= 1, ErrorCode::InvalidProportion,
          "proportion must lie in (0, 1], got " + std::to_string(p));
}

}  // namespace

ObservationSet sample_offline_indices(int L, int D, double proportion, int n_initial_full, std::uint64_t seed) {
  check_proportion(proportion);
  require(L >= 1 && D >= 1 && n_initial_full >= 0, ErrorCode::InvalidArgument, "invalid observation grid");
  Rng rng(seed);
  const std::int64_t total = static_cast<std::int64_t>(L) * D;
  const auto m = static_cast<std::int64_t>(std::floor(proportion * static_cast<double>(total) + 1e-9));
  std::set<ObsIndex> idx;
  for (auto k : choose(total, std::min(m, total), rng)) idx.insert({static_cast<int>(k / D), static_cast<int>(k % D)});
  for (int t = 0; t < std::min(n_initial_full, L); ++t)
    for (int z = 0; z < D; ++z) idx.insert({t, z});
  ObservationSet obs;
  obs.indices.assign(idx.begin(), idx.end());
  obs.seed = seed;
  return obs;
}

ObservationSet sample_offline_obs(const TrajectoryD& truth, double proportion, int n_initial_full, double sigma_y,
                                  std::uint64_t seed) {
  ObservationSet obs = sample_offline_indices(static_cast<int>(truth.length()), static_cast<int>(truth.width()),
                                              proportion, n_initial_full, substream(seed, "obs/indices"));
  obs.sigma_y = sigma_y;
  obs.seed = seed;
  observe(obs, truth.data, substream(seed, "obs/noise"));
  return obs;
}

int online_steps(int L, int s, int f) {
  require(s >= 1 && f >= 1 && f <= L, ErrorCode::InvalidArgument, "online DA needs s >= 1 and 1 <= f <= L");
  return (L - f + s - 1) / s + 1;
}

std::vector<ObservationSet> online_obs_stream(int L, int D, int s, double proportion, std::uint64_t seed,
                                              int n_blocks, double first_fraction) {
  check_proportion(proportion);
  require(s >= 1, ErrorCode::InvalidArgument, "block length s must be >= 1");
  if (n_blocks < 0) n_blocks = (L + s - 1) / s;
  std::vector<ObservationSet> out;
  for (int j = 0; j < n_blocks; ++j) {
    const int t0 = j * s;
    const int len = std::max(0, std::min(s, L - t0));
    Rng rng(substream(seed, "obs/online", static_cast<std::uint64_t>(j)));
    const double p = j == 0 ? first_fraction : proportion;
    const std::int64_t total = static_cast<std::int64_t>(len) * D;
    const auto m = std::min(total, static_cast<std::int64_t>(std::floor(p * static_cast<double>(s) * D + 1e-9)));
    ObservationSet obs;
    obs.seed = seed;
    for (auto k : choose(total, m, rng)) obs.indices.push_back({t0 + static_cast<int>(k / D), static_cast<int>(k % D)});
    out.push_back(std::move(obs));
  }
  return out;
}

void write_obs_csv(const std::string& path, const ObservationSet& obs) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::IoError, "cannot open " + path + " for writing");
  os << "# sigma_y=" << std::setprecision(17) << obs.sigma_y << " seed=" << obs.seed << "\n";
  os << "t_idx,z_idx,value\n";
  for (std::size_t k = 0; k < obs.indices.size(); ++k) {
    os << obs.indices[k].t << ',' << obs.indices[k].z << ','
       << (obs.values.size() ? obs.values[static_cast<Eigen::Index>(k)] : 0.0) << "\n";
  }
  require(static_cast<bool>(os), ErrorCode::IoError, "write failed for " + path);
}

ObservationSet read_obs_csv(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::IoError, "cannot open " + path);
  ObservationSet obs;
  std::string line;
  require(static_cast<bool>(std::getline(is, line)) && line.rfind("# ", 0) == 0, ErrorCode::IoError,
          "missing metadata line in " + path);
  {
    std::istringstream ls(line.substr(2));
    std::string tok;
    while (ls >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      try {
        if (key == "sigma_y") obs.sigma_y = std::stod(val);
        if (key == "seed") obs.seed = std::stoull(val);
      } catch (const std::logic_error&) {
        throw Error(ErrorCode::IoError, "bad metadata in " + path);
      }
    }
  }
  require(static_cast<bool>(std::getline(is, line)) && line == "t_idx,z_idx,value", ErrorCode::IoError,
          "missing header in " + path);
  std::vector<double> vals;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string a, b, c;
    require(std::getline(ls, a, ',') && std::getline(ls, b, ',') && std::getline(ls, c), ErrorCode::IoError,
            "malformed row in " + path);
    try {
      obs.indices.push_back({std::stoi(a), std::stoi(b)});
      vals.push_back(std::stod(c));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::IoError, "malformed row in " + path);
    }
  }
  obs.values = Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  return obs;
}

}  // namespace pdediff
