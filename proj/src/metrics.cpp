#include "pdediff/metrics.hpp"

#include "pdediff/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace pdediff {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_pair(const std::vector<TrajectoryD>& pred, const std::vector<TrajectoryD>& truth) {
  require(pred.size() == truth.size(), ErrorCode::ShapeMismatch, "prediction and truth sets differ in size");
  require(!pred.empty(), ErrorCode::InvalidArgument, "no trajectories to evaluate");
  for (std::size_t n = 0; n < pred.size(); ++n) {
    require(pred[n].data.rows() == truth[n].data.rows() && pred[n].data.cols() == truth[n].data.cols() &&
                pred[n].data.cols() == truth.front().data.cols() && pred[n].data.rows() == truth.front().data.rows(),
            ErrorCode::ShapeMismatch, "trajectory " + std::to_string(n) + " has a mismatched shape");
  }
}

// 3 x standard error of the mean of finite values.
double three_se(const std::vector<double>& v) {
  double s = 0, s2 = 0;
  int n = 0;
  for (double x : v) {
    if (std::isnan(x)) continue;
    s += x;
    ++n;
  }
  if (n < 2) return 0.0;
  const double m = s / n;
  for (double x : v)
    if (!std::isnan(x)) s2 += (x - m) * (x - m);
  return 3.0 * std::sqrt(s2 / (n - 1) / n);
}

double nanmean(const std::vector<double>& v, int* used = nullptr) {
  double s = 0;
  int n = 0;
  for (double x : v) {
    if (std::isnan(x)) continue;
    s += x;
    ++n;
  }
  if (used) *used = n;
  return n ? s / n : kNaN;
}

// rows: per-trajectory values, cols: steps
Eigen::MatrixXd mse_table(const std::vector<TrajectoryD>& pred, const std::vector<TrajectoryD>& truth) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(pred.size()), truth.front().length());
  const double rows = static_cast<double>(truth.front().data.rows());
  for (std::size_t n = 0; n < pred.size(); ++n)
    m.row(static_cast<Eigen::Index>(n)) = (pred[n].data - truth[n].data).colwise().squaredNorm() / rows;
  return m;
}

Eigen::MatrixXd rho_table(const std::vector<TrajectoryD>& pred, const std::vector<TrajectoryD>& truth) {
  Eigen::MatrixXd r(static_cast<Eigen::Index>(pred.size()), truth.front().length());
  for (std::size_t n = 0; n < pred.size(); ++n)
    for (Eigen::Index l = 0; l < r.cols(); ++l) r(static_cast<Eigen::Index>(n), l) = pearson(pred[n].data.col(l), truth[n].data.col(l));
  return r;
}

std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index c) {
  return {m.col(c).data(), m.col(c).data() + m.rows()};
}

}  // namespace

Eigen::VectorXd mse_per_step(const std::vector<TrajectoryD>& pred, const std::vector<TrajectoryD>& truth) {
  check_pair(pred, truth);
  return mse_table(pred, truth).colwise().mean().transpose();
}

double pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  require(a.size() == b.size(), ErrorCode::ShapeMismatch, "pearson needs equal-length fields");
  const Eigen::ArrayXd da = a.array() - a.mean(), db = b.array() - b.mean();
  const double va = da.square().sum(), vb = db.square().sum();
  const double scale_a = a.cwiseAbs().maxCoeff(), scale_b = b.cwiseAbs().maxCoeff();
  // Constant fields, allowing for the rounding left by the mean subtraction.
  const double eps = 1e-24 * static_cast<double>(a.size());
  if (va <= eps * scale_a * scale_a || vb <= eps * scale_b * scale_b || va == 0 || vb == 0) return kNaN;
  return std::clamp((da * db).sum() / std::sqrt(va * vb), -1.0, 1.0);
}

Eigen::VectorXd pearson_per_step(const std::vector<TrajectoryD>& pred, const std::vector<TrajectoryD>& truth,
                                 Eigen::VectorXi* excluded) {
  check_pair(pred, truth);
  const Eigen::MatrixXd r = rho_table(pred, truth);
  Eigen::VectorXd out(r.cols());
  if (excluded) excluded->resize(r.cols());
  for (Eigen::Index l = 0; l < r.cols(); ++l) {
    int used = 0;
    out[l] = nanmean(column(r, l), &used);
    if (excluded) (*excluded)[l] = static_cast<int>(r.rows()) - used;
  }
  return out;
}

double high_correlation_time(const Eigen::VectorXd& rho, double dt, double threshold) {
  Eigen::Index n = 0;
  while (n < rho.size() && rho[n] > threshold) ++n;
  return dt * static_cast<double>(n);
}

ScalarWithSe rmsd(const std::vector<TrajectoryD>& pred, const std::vector<TrajectoryD>& truth) {
  check_pair(pred, truth);
  const Eigen::MatrixXd m = mse_table(pred, truth);
  std::vector<double> per(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index n = 0; n < m.rows(); ++n) per[static_cast<std::size_t>(n)] = std::sqrt(m.row(n).mean());
  return {std::sqrt(m.colwise().mean().mean()), three_se(per)};
}

MetricSeries evaluate_metrics(const std::vector<TrajectoryD>& pred, const std::vector<TrajectoryD>& truth, int first,
                              double threshold) {
  check_pair(pred, truth);
  const Eigen::Index L = truth.front().length();
  require(first >= 0 && first < L, ErrorCode::OutOfRange, "first evaluated step outside the trajectory");
  const Eigen::Index n = L - first;
  const Eigen::MatrixXd m = mse_table(pred, truth).rightCols(n);
  const Eigen::MatrixXd r = rho_table(pred, truth).rightCols(n);
  const double dt = truth.front().dt_save;

  MetricSeries s;
  s.n_trajectories = static_cast<int>(pred.size());
  s.mse.resize(n);
  s.mse_se.resize(n);
  s.rho.resize(n);
  s.rho_se.resize(n);
  s.rho_excluded.resize(n);
  for (Eigen::Index l = 0; l < n; ++l) {
    const auto ml = column(m, l), rl = column(r, l);
    s.mse[l] = m.col(l).mean();
    s.mse_se[l] = three_se(ml);
    int used = 0;
    s.rho[l] = nanmean(rl, &used);
    s.rho_se[l] = three_se(rl);
    s.rho_excluded[l] = s.n_trajectories - used;
  }
  s.rmsd = std::sqrt(s.mse.mean());
  s.t_max = high_correlation_time(s.rho, dt, threshold);
  std::vector<double> per_rmsd, per_tmax;
  for (Eigen::Index k = 0; k < m.rows(); ++k) {
    per_rmsd.push_back(std::sqrt(m.row(k).mean()));
    per_tmax.push_back(high_correlation_time(r.row(k).transpose(), dt, threshold));
  }
  s.rmsd_se = three_se(per_rmsd);
  s.t_max_se = three_se(per_tmax);
  return s;
}

Eigen::VectorXd spectrum(const TrajectoryD& traj, Eigen::Index l, int channel) {
  require(l >= 0 && l < traj.length(), ErrorCode::IndexOutOfRange, "spectrum time index outside the trajectory");
  require(channel >= 0 && channel < traj.channels, ErrorCode::IndexOutOfRange, "spectrum channel out of range");
  const Eigen::Index D = traj.width();
  RealFft fft(D);
  Eigen::VectorXcd xhat;
  fft.forward(traj.data.col(l).segment(channel * D, D), xhat);
  return xhat.head(fft.modes()).cwiseAbs();
}

Field baseline_climatology(const std::vector<TrajectoryD>& train) {
  require(!train.empty(), ErrorCode::EmptyTrain, "climatology needs training trajectories");
  Field sum = Field::Zero(train.front().data.rows());
  double count = 0;
  for (const auto& tr : train) {
    require(tr.data.rows() == sum.size(), ErrorCode::ShapeMismatch, "training trajectories differ in width");
    sum += tr.data.rowwise().sum();
    count += static_cast<double>(tr.length());
  }
  require(count > 0, ErrorCode::EmptyTrain, "training trajectories are empty");
  return sum / count;
}

TrajectoryD climatology_trajectory(const Field& mean, Eigen::Index L, double dt) {
  TrajectoryD t(mean.size(), L, dt);
  t.data = mean.replicate(1, L);
  return t;
}

TrajectoryD baseline_persistence(const TrajectoryD& init, Eigen::Index L) {
  require(init.length() >= 1, ErrorCode::InitTooShort, "persistence needs at least one state");
  require(L >= 1, ErrorCode::InvalidArgument, "persistence length must be >= 1");
  TrajectoryD out = init;
  out.data.resize(init.data.rows(), L);
  const Eigen::Index keep = std::min(L, init.length());
  out.data.leftCols(keep) = init.data.leftCols(keep);
  for (Eigen::Index l = keep; l < L; ++l) out.data.col(l) = init.data.col(init.length() - 1);
  return out;
}

const char* const kMetricsHeader = "task,model,seed,gamma,P,C,proportion,rmsd,rmsd_se,t_max,t_max_se,nfe,wall_s";
const char* const kSeriesHeader = "l,mse,mse_se,rho,rho_se";

void append_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::error_code ec;
  const bool fresh = !std::filesystem::exists(path, ec) || std::filesystem::file_size(path, ec) == 0;
  std::ofstream os(path, std::ios::app);
  require(static_cast<bool>(os), ErrorCode::IoError, "cannot open " + path + " for writing");
  os << std::setprecision(10);
  if (fresh) os << kMetricsHeader << "\n";
  for (const auto& r : rows) {
    os << r.task << ',' << r.model << ',' << r.seed << ',' << r.gamma << ',' << r.P << ',' << r.C << ','
       << r.proportion << ',' << r.rmsd << ',' << r.rmsd_se << ',' << r.t_max << ',' << r.t_max_se << ',' << r.nfe
       << ',' << r.wall_s << "\n";
  }
  require(static_cast<bool>(os), ErrorCode::IoError, "write failed for " + path);
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::IoError, "cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(is, line)) && line == kMetricsHeader, ErrorCode::IoError,
          "unexpected metrics header in " + path);
  std::vector<MetricsRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) f.push_back(tok);
    require(f.size() == 13, ErrorCode::IoError, "malformed metrics row in " + path);
    MetricsRow r;
    try {
      r.task = f[0];
      r.model = f[1];
      r.seed = std::stoull(f[2]);
      r.gamma = std::stod(f[3]);
      r.P = std::stoi(f[4]);
      r.C = std::stoi(f[5]);
      r.proportion = std::stod(f[6]);
      r.rmsd = std::stod(f[7]);
      r.rmsd_se = std::stod(f[8]);
      r.t_max = std::stod(f[9]);
      r.t_max_se = std::stod(f[10]);
      r.nfe = std::stoll(f[11]);
      r.wall_s = std::stod(f[12]);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::IoError, "bad value in metrics row of " + path);
    }
    rows.push_back(r);
  }
  return rows;
}

void write_series_csv(const std::string& path, const MetricSeries& m) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::IoError, "cannot open " + path + " for writing");
  os << std::setprecision(12) << kSeriesHeader << "\n";
  for (Eigen::Index l = 0; l < m.mse.size(); ++l)
    os << l + 1 << ',' << m.mse[l] << ',' << m.mse_se[l] << ',' << m.rho[l] << ',' << m.rho_se[l] << "\n";
  require(static_cast<bool>(os), ErrorCode::IoError, "write failed for " + path);
}

}  // namespace pdediff
