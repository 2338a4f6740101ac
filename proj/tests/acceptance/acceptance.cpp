// Acceptance runner. Prints one PASS/FAIL line per criterion; exit status 1 if any fails.
// Usage: acceptance [--work DIR] [AC1 AC2 ...]

#include "pdediff/metrics.hpp"
#include "pdediff/net.hpp"
#include "pdediff/oracle.hpp"
#include "pdediff/pdesolve.hpp"
#include "pdediff/pipeline.hpp"
#include "pdediff/sampler.hpp"
#include "pdediff/train.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <sys/wait.h>

using namespace pdediff;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kGradTol = 1e-4;
constexpr int kGradNets = 3;
constexpr int kGradDirections = 100;
constexpr double kCompositionTol = 1e-10;
constexpr double kGuidedScoreTol = 1e-10;
constexpr int kPosteriorRuns = 10000;
constexpr double kPosteriorSe = 3.0;
constexpr double kScoreDeviationTol = 0.1;
constexpr int kScoreEpochs = 50;
constexpr double kScoreTMin = 0.1;
constexpr double kArOverAao = 1.5;
constexpr int kRhoState = 50;
constexpr double kRhoThreshold = 0.8;
constexpr double kInterpSlack = 1.1;
constexpr double kRichardsonOrder = 3.5;
constexpr double kMeanDrift = 1e-8;

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_work;

fs::path workdir(const std::string& name) {
  const auto dir = g_work / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string sci(double v, int digits = 3) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

GaussianAR ar1(double a, int L) {
  GaussianAR m;
  m.order = a == 0.0 ? 0 : 1;
  if (a != 0.0) m.coeffs = {a};
  m.innovation_var = 1.0 - a * a;
  m.length = L;
  return m;
}

// ---------------------------------------------------------------------------------------------

double probe(const ScoreNet<double>& net, const Eigen::VectorXd& p, const Eigen::MatrixXd& in, Eigen::Index D,
             const Eigen::MatrixXd& c, Tape<double>& tape) {
  const int out = net.forward(p, in, D, tape, false);
  const auto& y = tape.value(out);
  return (c.array() * y.array()).sum() + 0.5 * y.squaredNorm();
}

Outcome ac1_gradients() {
  const std::vector<NetConfig> nets = [] {
    NetConfig a, b, c;
    a.window = 3;
    a.levels = {{4, 1}, {6, 1}};
    b.window = 5;
    b.levels = {{4, 1}, {4, 2}, {6, 1}};
    c.window = 3;
    c.levels = {{6, 2}};
    c.kernel_size = 5;
    return std::vector<NetConfig>{a, b, c};
  }();
  double worst = 0;
  for (int k = 0; k < kGradNets; ++k) {
    ScoreNet<double> net(nets[static_cast<std::size_t>(k)]);
    const Eigen::Index D = 8, B = 2;
    Rng rng(substream(1, "acceptance/grad", static_cast<std::uint64_t>(k)));
    Eigen::VectorXd p(net.n_params());
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = 0.5 * rng.normal();
    const Eigen::MatrixXd in = rng.normal_matrix(net.config().in_channels(), B * D);
    const Eigen::MatrixXd c = rng.normal_matrix(net.config().out_channels(), B * D);
    Tape<double> tape, probe_tape;
    const int out = net.forward(p, in, D, tape);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p.size());
    tape.backward(out, c + tape.value(out), p, &g);
    const Eigen::MatrixXd gin = tape.grad(0);
    const double h = 1e-5;
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); };
    for (int d = 0; d < kGradDirections; ++d) {
      Eigen::VectorXd v = rng.normal_matrix(p.size(), 1);
      v.normalize();
      const double fd =
          (probe(net, p + h * v, in, D, c, probe_tape) - probe(net, p - h * v, in, D, c, probe_tape)) / (2 * h);
      worst = std::max(worst, rel(fd, g.dot(v)));
      Eigen::MatrixXd u = rng.normal_matrix(in.rows(), in.cols());
      u /= u.norm();
      const double fdx =
          (probe(net, p, in + h * u, D, c, probe_tape) - probe(net, p, in - h * u, D, c, probe_tape)) / (2 * h);
      worst = std::max(worst, rel(fdx, (gin.array() * u.array()).sum()));
    }
  }
  return {worst < kGradTol, "worst relative error " + sci(worst) + " over " + std::to_string(kGradNets) + " nets x " +
                                std::to_string(kGradDirections) + " directions (tol " + sci(kGradTol) + ")"};
}

// ---------------------------------------------------------------------------------------------

Outcome ac2_composition() {
  double exact_err = 0;
  Rng rng(substream(2, "acceptance/composition"));
  for (int L = 3; L <= 8; ++L) {
    const GaussianOracle o(ar1(0.0, L));
    for (double t : {0.05, 0.5, 2.0}) {
      const Eigen::MatrixXd x = rng.normal_matrix(1, L);
      const Eigen::VectorXd e = o.noised_score(x.transpose(), t);
      for (int k = 1; 2 * k + 1 <= L; ++k) {
        const auto s = compose_full_score_2kp1(oracle_local_score(o, 2 * k + 1), x, 2 * k + 1, t);
        exact_err = std::max(exact_err, (s.transpose() - e).cwiseAbs().maxCoeff());
      }
      for (int k = 1; k + 1 <= L; ++k) {
        const auto s = compose_full_score_kp1(oracle_local_score(o, k + 1), oracle_local_score(o, k), x, k, t);
        exact_err = std::max(exact_err, (s.transpose() - e).cwiseAbs().maxCoeff());
      }
    }
  }
  const int L = 12;
  const double t = 0.5;
  const GaussianOracle o(ar1(0.9, L));
  std::vector<Eigen::MatrixXd> xs;
  for (int r = 0; r < 16; ++r) xs.push_back(rng.normal_matrix(1, L));
  std::vector<double> err2, errk;
  for (int k = 1; k <= 4; ++k) {
    double a = 0, b = 0;
    for (const auto& x : xs) {
      const Eigen::VectorXd e = o.noised_score(x.transpose(), t);
      a = std::max(a, (compose_full_score_2kp1(oracle_local_score(o, 2 * k + 1), x, 2 * k + 1, t).transpose() - e)
                          .cwiseAbs()
                          .maxCoeff());
      b = std::max(b, (compose_full_score_kp1(oracle_local_score(o, k + 1), oracle_local_score(o, k), x, k, t)
                           .transpose() -
                       e)
                          .cwiseAbs()
                          .maxCoeff());
    }
    err2.push_back(a);
    errk.push_back(b);
  }
  bool decreasing = true;
  for (std::size_t k = 1; k < err2.size(); ++k) decreasing = decreasing && err2[k] < err2[k - 1];
  std::ostringstream os;
  os << "iid max error " << sci(exact_err) << " (tol " << sci(kCompositionTol) << "); a = 0.9 2k+1 sup errors";
  for (double v : err2) os << ' ' << sci(v);
  os << " (k+1 form";
  for (double v : errk) os << ' ' << sci(v);
  os << ")";
  return {exact_err < kCompositionTol && decreasing, os.str()};
}

// ---------------------------------------------------------------------------------------------

Outcome ac3_guided_posterior() {
  const int L = 7, W = 3;
  const GaussianOracle o(ar1(0.0, L));
  const double sy = 0.3;
  const std::vector<ObsIndex> sites = {{0, 0}, {3, 0}, {4, 0}};
  const Eigen::Vector3d yv(0.5, -1.2, 2.0);
  auto exact_r2 = [](double t) { return sigma2(t) / (mu(t) * mu(t) + sigma2(t)); };

  // Exact score check on a single column.
  double score_err = 0;
  {
    OracleEpsModel model(Eigen::MatrixXd::Identity(W, W), 1);
    ObservationSet obs;
    obs.indices = sites;
    obs.values = yv;
    obs.sigma_y = sy;
    const auto dense = scatter(obs, L, 1);
    SequenceScore score(model, 1, L, 256);
    score.set_observations(&dense, sy);
    score.set_r2(exact_r2);
    Rng rng(substream(3, "acceptance/guided"));
    for (double t : {0.001, 0.01, 0.2, 0.6, 1.0, 5.0}) {
      const Eigen::MatrixXd x = rng.normal_matrix(1, L);
      Eigen::MatrixXd s;
      NfeCounter nfe;
      score(x, t, s, nfe, "predictor");
      score_err = std::max(score_err, (s.transpose() - o.posterior_noised_score(obs, x.transpose(), t))
                                          .cwiseAbs()
                                          .maxCoeff());
    }
  }

  // Sampling: the D columns are independent copies of the same posterior.
  const int D = 100, runs = kPosteriorRuns / D;
  OracleEpsModel model(Eigen::MatrixXd::Identity(W, W), D);
  ObservationSet obs;
  obs.sigma_y = sy;
  std::vector<double> vals;
  for (int z = 0; z < D; ++z)
    for (std::size_t k = 0; k < sites.size(); ++k) {
      obs.indices.push_back({sites[k].t, z});
      vals.push_back(yv[static_cast<Eigen::Index>(k)]);
    }
  obs.values = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  RolloutPlan plan;
  plan.W = W;
  plan.L = L;
  plan.guidance.sigma_y = sy;
  plan.r2 = exact_r2;
  // Fine grid so the integrator's own bias sits well below the Monte-Carlo error.
  plan.time_grid.n_steps = 2048;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(L), s2 = Eigen::VectorXd::Zero(L);
  for (int r = 0; r < runs; ++r) {
    Rng rng(substream(3, "acceptance/guided/run", static_cast<std::uint64_t>(r)));
    const Eigen::MatrixXd x = sample_aao(model, D, obs, plan, rng).x;
    s1 += x.colwise().sum().transpose();
    s2 += x.array().square().matrix().colwise().sum().transpose();
  }
  ObservationSet one;
  one.indices = sites;
  one.values = yv;
  one.sigma_y = sy;
  const auto [pm, pc] = o.posterior_moments(one);
  // The sampler returns the Tweedie mean at t_min, whose spread is the posterior variance
  // shrunk by the residual noise at t_min.
  const double tm = plan.schedule.t_min, m = mu(tm), s2t = sigma2(tm);
  const double n = static_cast<double>(D) * runs;
  double worst_z = 0;
  for (int l = 0; l < L; ++l) {
    const double v = pc(l, l);
    const double v_out = m * m * v * v / (m * m * v + s2t);
    const double mean = s1[l] / n, var = s2[l] / n - mean * mean;
    const double z_mean = std::abs(mean - pm[l]) / std::sqrt(v_out / n);
    const double z_var = std::abs(var - v_out) / (v_out * std::sqrt(2.0 / (n - 1)));
    worst_z = std::max({worst_z, z_mean, z_var});
  }
  return {score_err < kGuidedScoreTol && worst_z < kPosteriorSe,
          "score error " + sci(score_err) + " (tol " + sci(kGuidedScoreTol) + "); worst moment deviation " +
              sci(worst_z) + " SE over " + std::to_string(D * runs) + " samples (tol " + sci(kPosteriorSe) + ")"};
}

// ---------------------------------------------------------------------------------------------

std::vector<TrajectoryD> normal_trajectories(int n, int L, int D, std::uint64_t seed) {
  std::vector<TrajectoryD> out;
  for (int i = 0; i < n; ++i) {
    Rng rng(substream(seed, "traj", static_cast<std::uint64_t>(i)));
    TrajectoryD tr(D, L, 1.0);
    tr.data = rng.normal_matrix(D, L);
    out.push_back(std::move(tr));
  }
  return out;
}

Outcome ac4_score_matching() {
  const int D = 32, L = 16;
  NetConfig net;
  net.window = 5;
  net.levels = {{32, 1}, {32, 1}};
  TrainConfig tc;
  tc.lr = 1e-3;
  tc.epochs = kScoreEpochs;
  tc.windows_per_traj = 12;
  tc.seed = substream(4, "acceptance/score/train");
  const auto train_set = normal_trajectories(1024, L, D, substream(4, "acceptance/score/data"));
  const auto valid_set = normal_trajectories(32, L, D, substream(4, "acceptance/score/valid"));
  TrainInputs in;
  in.train = &train_set;
  in.valid = &valid_set;
  const auto result = train(net, tc, in);

  // Held-out windows; the score of N(0, I) data is -x at every diffusion time.
  NetEpsModel model(net, result.best_params, D);
  Rng rng(substream(4, "acceptance/score/heldout"));
  double worst_rms = 0, worst_abs = 0, worst_t = 0;
  for (double t : {kScoreTMin, 0.3, 1.0, 3.0, 10.0}) {
    const Eigen::MatrixXd x0 = rng.normal_matrix(net.window * D, 64);
    const Eigen::MatrixXd x = mu(t) * x0 + sigma(t) * rng.normal_matrix(x0.rows(), x0.cols());
    Eigen::MatrixXd eps;
    model.eps(x, t, nullptr, eps);
    const Eigen::MatrixXd dev = -eps / sigma(t) + x;
    const double rms = std::sqrt(dev.squaredNorm() / static_cast<double>(dev.size()));
    if (rms > worst_rms) {
      worst_rms = rms;
      worst_t = t;
    }
    worst_abs = std::max(worst_abs, dev.cwiseAbs().maxCoeff());
  }
  return {worst_rms < kScoreDeviationTol,
          "RMS deviation from -x " + sci(worst_rms) + " at t = " + sci(worst_t) + " (tol " + sci(kScoreDeviationTol) + ", t >= " +
              sci(kScoreTMin) + "); entrywise max " + sci(worst_abs) + "; final valid loss " +
              sci(result.log.empty() ? 0.0 : result.log.back().valid_loss)};
}

// ---------------------------------------------------------------------------------------------

const MetricsRow* find_row(const std::vector<MetricsRow>& rows, const std::string& model, double proportion = -1) {
  for (const auto& r : rows)
    if (r.model == model && (proportion < 0 || std::abs(r.proportion - proportion) < 1e-12)) return &r;
  return nullptr;
}

double rho_at(const fs::path& pred_path, const fs::path& truth_path, int state) {
  const auto pred = read_pdet(pred_path.string());
  auto truth = read_pdet(truth_path.string());
  truth.resize(pred.size());
  for (auto& tr : truth) tr.data = tr.data.leftCols(pred.front().length()).eval();
  return pearson_per_step(pred, truth)[state];
}

Outcome ac5_ar_beats_aao() {
  const auto dir = workdir("ac5");
  CommandContext ctx;
  ctx.cfg = preset("burgers-desk");
  ctx.cfg.task.compare_aao = true;
  ctx.out_dir = dir.string();
  ctx.log = &std::cerr;
  cmd_generate(ctx);
  cmd_train(ctx);
  const auto rows = cmd_forecast(ctx);
  const MetricsRow* ar = find_row(rows, "joint-ar-4|1");
  const MetricsRow* aao = find_row(rows, "joint-aao-c0");
  if (!ar || !aao) return {false, "forecast did not produce the joint-ar-4|1 and joint-aao-c0 rows"};
  const auto truth = dir / ctx.cfg.data_dir / "test.pdet";
  const double rho_ar = rho_at(dir / "forecast_joint-ar-4_1.pdet", truth, kRhoState);
  const double rho_aao = rho_at(dir / "forecast_joint-aao-c0.pdet", truth, kRhoState);
  const bool pass = ar->rmsd * kArOverAao <= aao->rmsd && rho_ar > kRhoThreshold && rho_aao < kRhoThreshold;
  return {pass, "RMSD AR " + sci(ar->rmsd) + " vs AAO " + sci(aao->rmsd) + " (need ratio >= " + sci(kArOverAao) +
                    "); rho at state " + std::to_string(kRhoState) + " AR " + sci(rho_ar) + ", AAO " +
                    sci(rho_aao) + " (threshold " + sci(kRhoThreshold) + ")"};
}

// ---------------------------------------------------------------------------------------------

Outcome ac6_offline_da() {
  const auto dir = workdir("ac6");
  CommandContext ctx;
  ctx.cfg = preset("ks-desk");
  ctx.out_dir = dir.string();
  ctx.log = &std::cerr;
  cmd_generate(ctx);
  cmd_train(ctx);
  const auto rows = cmd_da_offline(ctx);
  const auto& props = ctx.cfg.task.proportions;
  const std::string tag = "joint-ar";
  std::vector<const MetricsRow*> ours;
  for (double p : props) {
    ours.push_back(find_row(rows, tag, p));
    if (!ours.back()) return {false, "missing " + tag + " row"};
  }
  std::ostringstream os;
  bool monotone = true;
  os << "RMSD";
  for (std::size_t j = 0; j < ours.size(); ++j) {
    os << ' ' << sci(ours[j]->rmsd);
    if (j == 0) continue;
    // rmsd_se holds three standard errors.
    const double pooled = std::hypot(ours[j]->rmsd_se, ours[j - 1]->rmsd_se) / 3.0;
    monotone = monotone && ours[j]->rmsd <= ours[j - 1]->rmsd + pooled;
  }
  os << (monotone ? " non-increasing" : " NOT non-increasing") << " within 1 pooled SE";
  const double dense = props.back(), sparse = 1e-2;
  const MetricsRow* interp_dense = find_row(rows, "interp-best", dense);
  const MetricsRow* interp_sparse = find_row(rows, "interp-best", sparse);
  const MetricsRow* ours_sparse = find_row(rows, tag, sparse);
  if (!interp_dense || !interp_sparse || !ours_sparse) return {false, "missing interpolation rows"};
  const bool dense_ok = ours.back()->rmsd <= kInterpSlack * interp_dense->rmsd;
  const bool sparse_ok = ours_sparse->rmsd < interp_sparse->rmsd;
  os << "; at " << sci(dense) << " " << sci(ours.back()->rmsd) << " vs interpolation " << sci(interp_dense->rmsd)
     << " x " << sci(kInterpSlack) << "; at " << sci(sparse) << " " << sci(ours_sparse->rmsd) << " vs "
     << sci(interp_sparse->rmsd);
  return {monotone && dense_ok && sparse_ok, os.str()};
}

// ---------------------------------------------------------------------------------------------

Outcome ac7_nfe() {
  const int D = 2;
  int checked = 0, wrong = 0;
  std::string first_wrong;
  for (int W : {3, 5}) {
    OracleEpsModel joint(Eigen::MatrixXd::Identity(W, W), D);
    for (int L : {W, 9, 20}) {
      for (int p : {4, 16}) {
        for (int c : {0, 1, 2}) {
          for (int chunk : {2, 256}) {
            RolloutPlan plan;
            plan.W = W;
            plan.L = L;
            plan.time_grid.n_steps = p;
            plan.corrector_steps = c;
            plan.chunk = chunk;
            auto note = [&](std::int64_t got, std::int64_t want, const std::string& what) {
              ++checked;
              if (got != want) {
                if (wrong++ == 0)
                  first_wrong = what + " W=" + std::to_string(W) + " L=" + std::to_string(L) + " p=" +
                                std::to_string(p) + " c=" + std::to_string(c) + ": " + std::to_string(got) +
                                " != " + std::to_string(want);
              }
            };
            Rng rng(substream(7, "acceptance/nfe"));
            const auto aao = sample_aao(joint, D, ObservationSet{}, plan, rng);
            note(aao.nfe.forward_evals, aao_nfe(L, W, chunk, c, p), "aao");
            const int windows = L - W + 1;
            if (chunk >= windows) note(aao.nfe.forward_evals, static_cast<std::int64_t>(1 + c) * p, "aao (1+c)p");
            for (int P = 1; P < W && chunk == 256; ++P) {
              plan.P = P;
              plan.C = W - P;
              const Eigen::MatrixXd init = Eigen::MatrixXd::Zero(D, plan.C);
              const auto ar = sample_ar_joint(joint, init, ObservationSet{}, plan, rng);
              note(ar.nfe.forward_evals, ar_steps(L, plan.C, P) * (1 + c) * p, "ar");
            }
          }
        }
      }
    }
  }
  return {wrong == 0, std::to_string(checked) + " settings checked, " + std::to_string(wrong) + " mismatches" +
                          (first_wrong.empty() ? "" : " (" + first_wrong + ")")};
}

// ---------------------------------------------------------------------------------------------

double richardson_order(const PdeSpec& spec, const Field& init, double dt) {
  auto run = [&](double h) {
    PdeSpec s = spec;
    s.grid.dt_solver = h;
    return solve(s, init);
  };
  const auto a = run(dt), b = run(dt / 2), c = run(dt / 4);
  const auto last = [](const TrajectoryD& t) { return t.data.col(t.length() - 1); };
  return std::log2((last(a) - last(b)).norm() / (last(b) - last(c)).norm());
}

Outcome ac8_solvers() {
  std::ostringstream os;
  bool pass = true;
  for (const std::string name : {"burgers-desk", "ks-desk"}) {
    PdeSpec spec = preset(name).data.pde;
    const bool burgers = spec.kind == PdeKind::Burgers;
    spec.grid.n_steps_saved = burgers ? 6 : 11;
    const Field init = sample_initial_condition(spec, substream(8, "acceptance/solver/" + name));
    const double order = richardson_order(spec, init, burgers ? 2e-3 : 0.1);
    PdeSpec long_spec = preset(name).data.pde;
    long_spec.grid.n_steps_saved = burgers ? 101 : 320;
    double drift = 0;
    for (int i = 0; i < 4; ++i) {
      Field u0 = sample_initial_condition(long_spec, substream(8, "acceptance/solver/drift/" + name, i));
      u0.array() += 0.25 * (i - 1.5);
      const auto tr = solve(long_spec, u0);
      for (Eigen::Index l = 0; l < tr.length(); ++l) drift = std::max(drift, std::abs(tr.data.col(l).mean() - u0.mean()));
    }
    pass = pass && order >= kRichardsonOrder && drift < kMeanDrift;
    os << (burgers ? "Burgers" : "KS") << " order " << sci(order) << ", mean drift " << sci(drift) << "; ";
  }
  os << "(need order >= " << sci(kRichardsonOrder) << ", drift < " << sci(kMeanDrift) << ")";
  return {pass, os.str()};
}

// ---------------------------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string without_wall_time(const std::string& csv) {
  std::istringstream is(csv);
  std::string line, out;
  int wall_col = -1;
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (wall_col < 0) {
      for (std::size_t i = 0; i < cells.size(); ++i)
        if (cells[i] == "wall_s") wall_col = static_cast<int>(i);
    } else if (wall_col < static_cast<int>(cells.size())) {
      cells[static_cast<std::size_t>(wall_col)] = "-";
    }
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
    out += '\n';
  }
  return out;
}

Outcome ac9_determinism() {
  auto cfg = preset("burgers-desk");
  cfg.data.n_train = 16;
  cfg.data.n_valid = 4;
  cfg.data.n_test = 4;
  cfg.data.length_train = 24;
  cfg.data.length_test = 24;
  cfg.net.levels = {{8, 1}, {8, 1}};
  cfg.train.epochs = 2;
  cfg.train.windows_per_traj = 2;
  cfg.task.n_eval = 2;
  cfg.sample.time_grid.n_steps = 32;
  cfg.task.online_s = 5;
  cfg.task.online_f = 10;
  cfg.task.pc_grid = {{4, 1}, {2, 3}};
  cfg.task.proportions = {0.05, 0.3};
  const auto root = workdir("ac9");
  save_config((root / "tiny.cfg").string(), cfg);
  const std::vector<std::string> commands = {
      "generate", "train", "forecast", "da-offline", "da-online",
      "evaluate --pred forecast_joint-ar-4_1.pdet --truth burgers-data/test.pdet", "oracle-check"};
  for (const std::string run : {"a", "b"}) {
    fs::create_directories(root / run);
    for (const auto& c : commands) {
      const std::string cmd = std::string(PDEDIFF_CLI) + " --config " + (root / "tiny.cfg").string() +
                              " --threads 1 --seed 7 --out " + (root / run).string() + " " + c + " > " +
                              (root / (run + ".log")).string() + " 2>&1";
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return {false, "command failed: " + c};
    }
  }
  int files = 0, differ = 0;
  std::string first;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root / "a");
    const auto ext = e.path().extension();
    if (ext != ".pdet" && ext != ".csv") continue;
    std::string x = slurp(e.path()), y = fs::exists(root / "b" / rel) ? slurp(root / "b" / rel) : "";
    if (ext == ".csv") {
      x = without_wall_time(x);
      y = without_wall_time(y);
    }
    ++files;
    if (x != y && differ++ == 0) first = rel.string();
  }
  return {differ == 0 && files >= 20, std::to_string(files) + " PDET/CSV files compared across " +
                                          std::to_string(commands.size()) + " commands, " + std::to_string(differ) +
                                          " differ" + (first.empty() ? "" : " (first: " + first + ")")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"AC1", ac1_gradients},    {"AC2", ac2_composition}, {"AC3", ac3_guided_posterior},
      {"AC4", ac4_score_matching}, {"AC5", ac5_ar_beats_aao}, {"AC6", ac6_offline_da},
      {"AC7", ac7_nfe},          {"AC8", ac8_solvers},     {"AC9", ac9_determinism}};
  g_work = fs::temp_directory_path() / "pdediff_acceptance";
  std::vector<std::string> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc) {
      g_work = argv[++i];
    } else {
      selected.push_back(a);
    }
  }
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), name) == selected.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << name << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << " [" << std::fixed
              << std::setprecision(1) << s << " s]" << std::defaultfloat << std::endl;
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
