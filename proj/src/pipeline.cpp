#include "pdediff/pipeline.hpp"

#include "pdediff/interpolate.hpp"
#include "pdediff/sampler.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <thread>

namespace pdediff {

namespace fs = std::filesystem;

std::string CommandContext::path(const std::string& p) const {
  const fs::path q(p);
  if (q.is_absolute()) return p;
  return (fs::path(out_dir) / q).string();
}

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void say(const CommandContext& ctx, const std::string& line) {
  if (ctx.log) *ctx.log << line << std::endl;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::IoError, "cannot create directory " + dir);
}

void remove_file(const std::string& path) {
  std::error_code ec;
  fs::remove(path, ec);
}

/// Runs fn(i, worker) for i in [0, n). Results must only depend on i; the first failure
/// by index is rethrown.
void parallel_for(int n, int threads, const std::function<void(int, int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i, 0);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::vector<std::thread> pool;
  const int nt = std::min(threads, n);
  for (int w = 0; w < nt; ++w) {
    pool.emplace_back([&, w] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i, w);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string data_file(const CommandContext& ctx, const std::string& split) {
  return (fs::path(ctx.path(ctx.cfg.data_dir)) / (split + ".pdet")).string();
}

std::vector<TrajectoryD> load_split(const CommandContext& ctx, const std::string& split) {
  return read_pdet(data_file(ctx, split));
}

std::vector<TrajectoryD> normalise(std::vector<TrajectoryD> set, const NormStats& s) {
  for (auto& t : set) t.data = ((t.data.array() - s.mean) / s.std).matrix();
  return set;
}

/// Test trajectories cut to the task length.
std::vector<TrajectoryD> eval_set(const CommandContext& ctx, int& L) {
  const auto& task = ctx.cfg.task;
  auto test = load_split(ctx, "test");
  require(!test.empty(), ErrorCode::DataTooShort, "test split is empty");
  const int n = task.n_eval > 0 ? std::min<int>(task.n_eval, static_cast<int>(test.size()))
                                : static_cast<int>(test.size());
  test.resize(static_cast<std::size_t>(n));
  const int avail = static_cast<int>(test.front().length());
  L = task.length > 0 ? task.length : avail;
  require(L <= avail, ErrorCode::DataTooShort,
          "task length " + std::to_string(L) + " exceeds test length " + std::to_string(avail));
  for (auto& t : test) t.data = t.data.leftCols(L).eval();
  return test;
}

Checkpoint load_model(const CommandContext& ctx) {
  const auto path = ctx.path(ctx.cfg.checkpoint);
  require(fs::exists(path), ErrorCode::IoError, "checkpoint " + path + " not found (run train first)");
  return load_checkpoint(path);
}

RolloutPlan make_plan(const ExperimentConfig& cfg, const Checkpoint& ck, int P, int C, int L) {
  RolloutPlan p;
  p.W = ck.net.window;
  p.P = P;
  p.C = C;
  p.L = L;
  p.corrector_steps = cfg.sample.corrector_steps;
  p.corrector_snr = cfg.sample.corrector_snr;
  p.time_grid = cfg.sample.time_grid;
  p.schedule = NoiseSchedule{cfg.sample.t_min, ck.meta.t_max};
  p.guidance = cfg.sample.guidance;
  p.chunk = cfg.sample.chunk;
  p.threshold = cfg.sample.threshold;
  p.threshold_percentile = cfg.sample.threshold_percentile;
  p.data_mean = ck.meta.stats.mean;
  p.data_std = ck.meta.stats.std;
  return p;
}

/// Lazily built network per worker thread.
class ModelPool {
 public:
  ModelPool(const Checkpoint& ck, Eigen::Index D, int threads)
      : ck_(ck), D_(D), models_(static_cast<std::size_t>(std::max(1, threads))) {}
  NetEpsModel& get(int worker) {
    auto& m = models_[static_cast<std::size_t>(worker)];
    if (!m) m = std::make_unique<NetEpsModel>(ck_, D_);
    return *m;
  }

 private:
  const Checkpoint& ck_;
  Eigen::Index D_;
  std::vector<std::unique_ptr<NetEpsModel>> models_;
};

/// Every entry of states [0, n) of x as an observation.
ObservationSet dense_frames(const Eigen::MatrixXd& x, int n, int offset = 0) {
  ObservationSet o;
  const Eigen::Index D = x.rows();
  o.values.resize(n * D);
  for (int t = 0; t < n; ++t)
    for (Eigen::Index z = 0; z < D; ++z) {
      o.indices.push_back({offset + t, static_cast<int>(z)});
      o.values[static_cast<Eigen::Index>(o.indices.size()) - 1] = x(z, t);
    }
  return o;
}

TrajectoryD as_trajectory(Eigen::MatrixXd x, double dt) {
  TrajectoryD t;
  t.data = std::move(x);
  t.dt_save = dt;
  return t;
}

MetricsRow make_row(const std::string& task, const std::string& model, const ExperimentConfig& cfg,
                    const MetricSeries& m) {
  MetricsRow r;
  r.task = task;
  r.model = model;
  r.seed = cfg.task.seed;
  r.rmsd = m.rmsd;
  r.rmsd_se = m.rmsd_se;
  r.t_max = m.t_max;
  r.t_max_se = m.t_max_se;
  return r;
}

std::string regime_tag(const Checkpoint& ck) {
  std::string s = to_string(ck.meta.regime);
  for (auto& c : s)
    if (c == '_') c = '-';
  return s;
}

}  // namespace

// ---------------------------------------------------------------- generate

DatasetSummary cmd_generate(const CommandContext& ctx) {
  const auto& cfg = ctx.cfg;
  validate(cfg);
  const auto dir = ctx.path(cfg.data_dir);
  ensure_dir(dir);
  const auto s = generate_dataset(cfg.data, substream(cfg.task.seed, "data"), dir, cfg.task.threads);
  std::ostringstream os;
  os << "pde " << to_string(cfg.data.pde.kind) << ", D = " << s.D << ", dt = " << fmt(cfg.data.pde.grid.dt_save)
     << "\n"
     << "train " << s.n_train << " x " << s.length_train << " states\n"
     << "valid " << s.n_valid << " x " << s.length_test << " states\n"
     << "test  " << s.n_test << " x " << s.length_test << " states\n"
     << "train mean " << fmt(s.stats.mean) << ", std " << fmt(s.stats.std) << "\n"
     << "written to " << dir;
  say(ctx, os.str());
  return s;
}

// ---------------------------------------------------------------- train

TrainResult cmd_train(const CommandContext& ctx) {
  const auto& cfg = ctx.cfg;
  validate(cfg);
  const NormStats stats = read_stats(data_file(ctx, "train") + ".stats");
  const auto train_set = normalise(load_split(ctx, "train"), stats);
  const auto valid_set = normalise(load_split(ctx, "valid"), stats);

  TrainConfig tc = cfg.train;
  tc.seed = substream(cfg.task.seed, "train");
  tc.threads = cfg.task.threads;

  const auto ckpt_path = ctx.path(cfg.checkpoint);
  const auto last_path = ckpt_path + ".last";
  const auto opt_path = ckpt_path + ".opt";
  const auto log_path = ckpt_path + ".loss.csv";
  ensure_dir(fs::path(ckpt_path).parent_path().empty() ? "." : fs::path(ckpt_path).parent_path().string());

  TrainInputs in;
  in.train = &train_set;
  in.valid = valid_set.empty() ? nullptr : &valid_set;
  std::vector<std::string> log_rows;
  if (cfg.resume && fs::exists(opt_path) && fs::exists(last_path)) {
    const auto last = load_checkpoint(last_path);
    require(last.net == cfg.net, ErrorCode::InvalidArgument, "checkpoint net differs from the config");
    in.init_params = last.params;
    in.resume = load_optimizer(opt_path);
    std::ifstream old(log_path);
    std::string line;
    std::getline(old, line);  // header
    while (std::getline(old, line)) {
      if (std::stoi(line.substr(0, line.find(','))) <= in.resume->epoch) log_rows.push_back(line);
    }
    say(ctx, "resuming from epoch " + std::to_string(in.resume->epoch));
  }

  auto write_log = [&] {
    std::ofstream out(log_path);
    require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + log_path);
    out << "epoch,train_loss,valid_loss,lr\n";
    for (const auto& r : log_rows) out << r << '\n';
  };
  auto checkpoint = [&](const Eigen::VectorXf& params, int epoch, double tl, double vl) {
    Checkpoint c;
    c.net = cfg.net;
    c.meta.regime = cfg.train.regime;
    c.meta.cond_frames = cfg.train.cond_frames;
    c.meta.stats = stats;
    c.meta.epoch = epoch;
    c.meta.t_max = cfg.train.t_max;
    c.params = params;
    c.train_loss = tl;
    c.valid_loss = vl;
    return c;
  };

  in.on_epoch = [&](const EpochLog& log, const Eigen::VectorXf& p, const OptimizerState& opt) {
    log_rows.push_back(std::to_string(log.epoch) + "," + fmt(log.train_loss) + "," + fmt(log.valid_loss) + "," +
                       fmt(log.lr));
    write_log();
    save_checkpoint(ckpt_path, checkpoint(opt.best_params, log.epoch, opt.best_train, opt.best_valid));
    save_checkpoint(last_path, checkpoint(p, log.epoch, log.train_loss, log.valid_loss));
    save_optimizer(opt_path, opt);
    std::ostringstream os;
    os << "epoch " << log.epoch << "/" << tc.epochs << " train " << std::setprecision(6) << log.train_loss
       << " valid " << log.valid_loss;
    say(ctx, os.str());
  };
  struct Stop {};
  int ran = 0;
  auto save_epoch = in.on_epoch;
  in.on_epoch = [&](const EpochLog& log, const Eigen::VectorXf& p, const OptimizerState& opt) {
    save_epoch(log, p, opt);
    if (cfg.stop_after > 0 && ++ran >= cfg.stop_after && log.epoch < tc.epochs) throw Stop{};
  };
  TrainResult result;
  try {
    result = train(cfg.net, tc, in);
  } catch (const Stop&) {
    say(ctx, "stopped after " + std::to_string(ran) + " epoch(s); rerun with train.resume = true to continue");
    return result;
  }
  if (result.log.empty() && !fs::exists(ckpt_path)) {
    save_checkpoint(ckpt_path, checkpoint(result.best_params, 0, 0.0, 0.0));
    write_log();
  }
  say(ctx, "checkpoint " + ckpt_path);
  return result;
}

// ---------------------------------------------------------------- forecast

namespace {

struct ForecastRun {
  std::string tag;
  SamplerKind sampler = SamplerKind::AR;
  int P = 0, C = 0;
  int corrector_steps = 0;
};

}  // namespace

std::vector<MetricsRow> cmd_forecast(const CommandContext& ctx) {
  const auto& cfg = ctx.cfg;
  validate(cfg);
  const auto ck = load_model(ctx);
  int L = 0;
  const auto truth = eval_set(ctx, L);
  const int n = static_cast<int>(truth.size());
  const Eigen::Index D = truth.front().width();
  const double dt = truth.front().dt_save;
  const int W = ck.net.window;
  ensure_dir(ctx.out_dir);
  const auto metrics_path = ctx.path("forecast_metrics.csv");
  remove_file(metrics_path);

  std::vector<ForecastRun> runs;
  const std::string rtag = regime_tag(ck);
  if (ck.meta.regime == Regime::MseBaseline) {
    runs.push_back({rtag, SamplerKind::AR, 1, W - 1, 0});
  } else {
    auto pcs = cfg.task.pc_grid;
    if (pcs.empty()) pcs.emplace_back(cfg.sample.P, cfg.sample.C);
    if (ck.meta.regime == Regime::Amortised) pcs = {{W - ck.meta.cond_frames, ck.meta.cond_frames}};
    if (cfg.sample.sampler == SamplerKind::AR || cfg.task.compare_aao) {
      for (const auto& [P, C] : pcs) {
        if (ck.meta.regime == Regime::Joint && C < 1) continue;
        runs.push_back({rtag + "-ar-" + std::to_string(P) + "|" + std::to_string(C), SamplerKind::AR, P, C,
                        cfg.sample.corrector_steps});
      }
    }
    const bool aao_ok = ck.meta.regime == Regime::Joint || ck.meta.regime == Regime::Universal;
    if (aao_ok && (cfg.sample.sampler == SamplerKind::AAO || cfg.task.compare_aao)) {
      const int c = cfg.task.compare_aao ? cfg.task.aao_corrector_steps : cfg.sample.corrector_steps;
      runs.push_back({rtag + "-aao-c" + std::to_string(c), SamplerKind::AAO, 0, std::max(1, cfg.sample.C), c});
    }
  }

  std::vector<MetricsRow> rows;
  for (const auto& run : runs) {
    const auto t0 = std::chrono::steady_clock::now();
    ModelPool pool(ck, D, cfg.task.threads);
    std::vector<TrajectoryD> pred(static_cast<std::size_t>(n));
    std::vector<std::int64_t> nfe(static_cast<std::size_t>(n), 0);
    parallel_for(n, cfg.task.threads, [&](int i, int w) {
      NetEpsModel& model = pool.get(w);
      const Eigen::MatrixXd& x = truth[i].data;
      Rng rng(substream(cfg.task.seed, "sample/forecast/" + run.tag, static_cast<std::uint64_t>(i)));
      RolloutPlan plan = make_plan(cfg, ck, std::max(1, run.P), run.C, L);
      plan.corrector_steps = run.corrector_steps;
      Eigen::MatrixXd out;
      if (ck.meta.regime == Regime::MseBaseline) {
        out = rollout_mse(model, x.leftCols(run.C), L, ck.meta.stats.mean, ck.meta.stats.std);
      } else if (run.sampler == SamplerKind::AAO) {
        plan.P = 1;
        auto obs = dense_frames(x, run.C);
        obs.sigma_y = cfg.sample.guidance.sigma_y;
        auto r = sample_aao(model, D, obs, plan, rng);
        out = std::move(r.x);
        nfe[i] = r.nfe.forward_evals;
      } else {
        auto r = ck.meta.regime == Regime::Joint ? sample_ar_joint(model, x.leftCols(run.C), {}, plan, rng)
                                                 : sample_ar_amortised(model, x.leftCols(run.C), {}, plan, rng);
        out = std::move(r.x);
        nfe[i] = r.nfe.forward_evals;
      }
      pred[i] = as_trajectory(std::move(out), dt);
    });
    const auto m = evaluate_metrics(pred, truth, run.C, cfg.task.rho_threshold);
    auto row = make_row("forecast", run.tag, cfg, m);
    row.gamma = ck.meta.regime == Regime::MseBaseline ? 0.0 : cfg.sample.guidance.gamma;
    row.P = run.sampler == SamplerKind::AR ? run.P : 0;
    row.C = run.C;
    std::int64_t total = 0;
    for (auto v : nfe) total += v;
    row.nfe = n ? total / n : 0;
    row.wall_s = seconds_since(t0);
    rows.push_back(row);
    std::string file = run.tag;
    for (auto& c : file)
      if (c == '|') c = '_';
    write_pdet(ctx.path("forecast_" + file + ".pdet"), pred, DType::F32);
    write_series_csv(ctx.path("forecast_" + file + "_series.csv"), m);
    append_metrics_csv(metrics_path, {row});
    std::ostringstream os;
    os << run.tag << ": rmsd " << std::setprecision(4) << m.rmsd << " +- " << m.rmsd_se << ", t_max " << m.t_max
       << ", nfe " << row.nfe;
    say(ctx, os.str());
  }

  const int C0 = runs.empty() ? cfg.sample.C : runs.front().C;
  if (cfg.task.persistence) {
    std::vector<TrajectoryD> pred;
    for (const auto& t : truth) pred.push_back(baseline_persistence(as_trajectory(t.data.leftCols(C0), dt), L));
    const auto m = evaluate_metrics(pred, truth, C0, cfg.task.rho_threshold);
    auto row = make_row("forecast", "persistence", cfg, m);
    row.C = C0;
    rows.push_back(row);
    append_metrics_csv(metrics_path, {row});
    write_series_csv(ctx.path("forecast_persistence_series.csv"), m);
  }
  if (cfg.task.climatology) {
    const auto clim = baseline_climatology(load_split(ctx, "train"));
    std::vector<TrajectoryD> pred;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      auto c = climatology_trajectory(clim, L, dt);
      c.data.leftCols(C0) = truth[i].data.leftCols(C0);
      pred.push_back(std::move(c));
    }
    const auto m = evaluate_metrics(pred, truth, C0, cfg.task.rho_threshold);
    auto row = make_row("forecast", "climatology", cfg, m);
    row.C = C0;
    rows.push_back(row);
    append_metrics_csv(metrics_path, {row});
    write_series_csv(ctx.path("forecast_climatology_series.csv"), m);
  }
  return rows;
}

// ---------------------------------------------------------------- offline DA

std::vector<MetricsRow> cmd_da_offline(const CommandContext& ctx) {
  const auto& cfg = ctx.cfg;
  validate(cfg);
  const auto ck = load_model(ctx);
  require(ck.meta.regime != Regime::MseBaseline, ErrorCode::RegimeMismatch, "data assimilation needs a score model");
  int L = 0;
  const auto truth = eval_set(ctx, L);
  const int n = static_cast<int>(truth.size());
  const Eigen::Index D = truth.front().width();
  const double dt = truth.front().dt_save;
  const int W = ck.net.window;
  const auto& task = cfg.task;
  int C = cfg.sample.C, P = cfg.sample.P;
  if (ck.meta.regime == Regime::Amortised) {
    C = ck.meta.cond_frames;
    P = W - C;
  }
  const int n_full = task.n_initial_full >= 0 ? task.n_initial_full : C;
  const bool ar = cfg.sample.sampler == SamplerKind::AR;
  require(!ar || n_full >= C, ErrorCode::InitTooShort, "AR data assimilation needs n_initial_full >= C");
  ensure_dir(ctx.out_dir);
  const auto metrics_path = ctx.path("da_offline_metrics.csv");
  remove_file(metrics_path);
  const std::string tag = regime_tag(ck) + (ar ? "-ar" : "-aao");
  const Field clim = task.climatology ? baseline_climatology(load_split(ctx, "train")) : Field();

  std::vector<MetricsRow> rows;
  for (std::size_t j = 0; j < task.proportions.size(); ++j) {
    const double prop = task.proportions[j];
    ExperimentConfig local = cfg;
    if (!task.gammas.empty()) local.sample.guidance.gamma = task.gammas[j];
    if (!task.guidance_sigma_ys.empty()) local.sample.guidance.sigma_y = task.guidance_sigma_ys[j];
    const std::uint64_t obs_seed = substream(task.seed, "obs/offline", j);
    std::vector<ObservationSet> obs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      obs[i] = sample_offline_obs(truth[i], prop, n_full, task.sigma_y, substream(obs_seed, "traj", i));

    const auto t0 = std::chrono::steady_clock::now();
    ModelPool pool(ck, D, task.threads);
    std::vector<TrajectoryD> pred(static_cast<std::size_t>(n));
    std::vector<std::int64_t> nfe(static_cast<std::size_t>(n), 0);
    parallel_for(n, task.threads, [&](int i, int w) {
      NetEpsModel& model = pool.get(w);
      Rng rng(substream(substream(task.seed, "sample/da-offline/" + tag, j), "traj", i));
      RolloutPlan plan = make_plan(local, ck, P, C, L);
      SampleResult r;
      if (ar) {
        const auto dense = scatter(obs[i], L, D);
        const Eigen::MatrixXd init = dense.values.leftCols(C);
        r = ck.meta.regime == Regime::Joint ? sample_ar_joint(model, init, obs[i], plan, rng)
                                            : sample_ar_amortised(model, init, obs[i], plan, rng);
      } else {
        r = sample_aao(model, D, obs[i], plan, rng);
      }
      pred[i] = as_trajectory(std::move(r.x), dt);
      nfe[i] = r.nfe.forward_evals;
    });
    const double wall = seconds_since(t0);
    auto add_row = [&](const std::string& model, const std::vector<TrajectoryD>& p, double gamma, std::int64_t f,
                       double wall_s) {
      const auto m = evaluate_metrics(p, truth, 0, task.rho_threshold);
      auto row = make_row("da-offline", model, cfg, m);
      row.gamma = gamma;
      row.proportion = prop;
      row.P = model == tag ? P : 0;
      row.C = model == tag ? C : 0;
      row.nfe = f;
      row.wall_s = wall_s;
      rows.push_back(row);
      append_metrics_csv(metrics_path, {row});
      return m;
    };
    std::int64_t total = 0;
    for (auto v : nfe) total += v;
    const auto m = add_row(tag, pred, local.sample.guidance.gamma, n ? total / n : 0, wall);
    const std::string suffix = "_p" + std::to_string(j);
    write_pdet(ctx.path("da_offline_" + tag + suffix + ".pdet"), pred, DType::F32);
    write_series_csv(ctx.path("da_offline_" + tag + suffix + "_series.csv"), m);
    std::ostringstream os;
    os << "proportion " << fmt(prop) << ": " << tag << " rmsd " << std::setprecision(4) << m.rmsd << " +- "
       << m.rmsd_se;

    double best = std::numeric_limits<double>::infinity();
    std::vector<TrajectoryD> best_pred;
    for (const auto method : task.interp_methods) {
      const auto t1 = std::chrono::steady_clock::now();
      std::vector<TrajectoryD> ip(static_cast<std::size_t>(n));
      parallel_for(n, task.threads, [&](int i, int) { ip[i] = baseline_interpolate(obs[i], L, D, method, dt); });
      const auto mi = add_row("interp-" + to_string(method), ip, 0.0, 0, seconds_since(t1));
      os << ", " << to_string(method) << " " << mi.rmsd;
      if (mi.rmsd < best) {
        best = mi.rmsd;
        best_pred = std::move(ip);
      }
    }
    if (!best_pred.empty()) add_row("interp-best", best_pred, 0.0, 0, 0.0);
    if (task.climatology) {
      std::vector<TrajectoryD> cp(static_cast<std::size_t>(n), climatology_trajectory(clim, L, dt));
      const auto mc = add_row("climatology", cp, 0.0, 0, 0.0);
      os << ", climatology " << mc.rmsd;
    }
    say(ctx, os.str());
  }
  return rows;
}

// ---------------------------------------------------------------- online DA

std::vector<MetricsRow> cmd_da_online(const CommandContext& ctx) {
  const auto& cfg = ctx.cfg;
  validate(cfg);
  const auto ck = load_model(ctx);
  const Regime regime = ck.meta.regime;
  require(regime == Regime::Joint || regime == Regime::Universal, ErrorCode::RegimeMismatch,
          "online data assimilation needs a joint or universal model");
  int L = 0;
  const auto truth = eval_set(ctx, L);
  const int n = static_cast<int>(truth.size());
  const Eigen::Index D = truth.front().width();
  const double dt = truth.front().dt_save;
  const int W = ck.net.window;
  const auto& task = cfg.task;
  const int s = task.online_s, f = std::min(task.online_f, L);
  const int steps = online_steps(L, s, f);
  const int C = cfg.sample.C, P = cfg.sample.P;
  const bool ar = cfg.sample.sampler == SamplerKind::AR;
  require(f >= W, ErrorCode::TooShort, "online forecasts must cover at least one model window");
  require(C >= 1, ErrorCode::InvalidArgument, "online data assimilation needs C >= 1");
  ensure_dir(ctx.out_dir);
  const auto metrics_path = ctx.path("da_online_metrics.csv");
  remove_file(metrics_path);
  const std::string tag = regime_tag(ck) + (ar ? "-ar" : "-aao");

  // per trajectory: RMSD of each DA step's forecast
  Eigen::MatrixXd step_rmsd(n, steps);
  std::vector<TrajectoryD> latest(static_cast<std::size_t>(n));
  std::vector<std::int64_t> nfe(static_cast<std::size_t>(n), 0);
  const auto t0 = std::chrono::steady_clock::now();
  ModelPool pool(ck, D, task.threads);
  parallel_for(n, task.threads, [&](int i, int w) {
    NetEpsModel& model = pool.get(w);
    const Eigen::MatrixXd& x = truth[i].data;
    // identical for every backend: depends on (seed, trajectory) only
    auto blocks = online_obs_stream(L, static_cast<int>(D), s, task.online_proportion,
                                    substream(task.seed, "obs/online", i), -1, task.online_first_fraction);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      blocks[b].sigma_y = task.sigma_y;
      observe(blocks[b], x, substream(substream(task.seed, "obs/online/noise", i), "block", b));
    }
    Rng rng(substream(task.seed, "sample/da-online/" + tag, i));
    Eigen::MatrixXd est = Eigen::MatrixXd::Zero(D, L);
    for (int j = 0; j < steps; ++j) {
      const int start = j * s, end = std::min(start + f, L);
      const int ws = j == 0 ? 0 : start - C;
      const int len = end - ws;
      std::vector<ObservationSet> known(blocks.begin(), blocks.begin() + std::min<std::size_t>(j + 1, blocks.size()));
      const auto window_obs = restrict_to_window(merge(known), ws, len).local;
      RolloutPlan plan = make_plan(cfg, ck, P, C, len);
      SampleResult r;
      if (!ar) {
        std::vector<ObservationSet> parts{window_obs};
        if (j > 0) parts.push_back(dense_frames(est.middleCols(ws, C), C));
        auto o = merge(parts);
        o.sigma_y = task.sigma_y;
        r = sample_aao(model, D, o, plan, rng);
      } else {
        Eigen::MatrixXd init;
        if (j == 0) {
          // no earlier forecast: sample the first window from its observations alone
          RolloutPlan first = make_plan(cfg, ck, P, C, W);
          const auto o = restrict_to_window(window_obs, 0, W).local;
          auto r0 = sample_aao(model, D, o, first, rng);
          init = r0.x.leftCols(C);
          nfe[i] += r0.nfe.forward_evals;
        } else {
          init = est.middleCols(ws, C);
        }
        r = regime == Regime::Joint ? sample_ar_joint(model, init, window_obs, plan, rng)
                                    : sample_ar_amortised(model, init, window_obs, plan, rng);
      }
      nfe[i] += r.nfe.forward_evals;
      const int off = start - ws;
      est.middleCols(start, end - start) = r.x.middleCols(off, end - start);
      step_rmsd(i, j) = std::sqrt((est.middleCols(start, end - start) - x.middleCols(start, end - start))
                                      .squaredNorm() /
                                  static_cast<double>(D * (end - start)));
    }
    latest[i] = as_trajectory(std::move(est), dt);
  });
  const double wall = seconds_since(t0);

  const Eigen::VectorXd per_traj = step_rmsd.rowwise().mean();
  MetricsRow row;
  row.task = "da-online";
  row.model = tag;
  row.seed = task.seed;
  row.gamma = cfg.sample.guidance.gamma;
  row.P = ar ? P : 0;
  row.C = C;
  row.proportion = task.online_proportion;
  row.rmsd = per_traj.mean();
  row.rmsd_se = n > 1 ? 3.0 * std::sqrt((per_traj.array() - row.rmsd).square().sum() / (n - 1) / n) : 0.0;
  std::int64_t total = 0;
  for (auto v : nfe) total += v;
  row.nfe = n ? total / n : 0;
  row.wall_s = wall;
  append_metrics_csv(metrics_path, {row});
  write_pdet(ctx.path("da_online_" + tag + ".pdet"), latest, DType::F32);
  {
    std::ofstream out(ctx.path("da_online_" + tag + "_steps.csv"));
    require(static_cast<bool>(out), ErrorCode::IoError, "cannot write online step CSV");
    out << "step,start,rmsd,rmsd_se\n" << std::setprecision(12);
    for (int j = 0; j < steps; ++j) {
      const Eigen::VectorXd c = step_rmsd.col(j);
      const double mean = c.mean();
      const double se = n > 1 ? 3.0 * std::sqrt((c.array() - mean).square().sum() / (n - 1) / n) : 0.0;
      out << j << ',' << j * s << ',' << mean << ',' << se << '\n';
    }
  }
  std::ostringstream os;
  os << tag << ": " << steps << " DA steps, mean rmsd " << std::setprecision(4) << row.rmsd << " +- " << row.rmsd_se;
  say(ctx, os.str());
  return {row};
}

// ---------------------------------------------------------------- evaluate

MetricsRow cmd_evaluate(const CommandContext& ctx, const std::string& pred_path, const std::string& truth_path,
                        int first) {
  const auto pred = read_pdet(ctx.path(pred_path));
  auto truth = read_pdet(ctx.path(truth_path));
  require(truth.size() >= pred.size(), ErrorCode::ShapeMismatch, "fewer truths than predictions");
  truth.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    require(truth[i].length() >= pred[i].length(), ErrorCode::ShapeMismatch, "truth shorter than prediction");
    truth[i].data = truth[i].data.leftCols(pred[i].length()).eval();
  }
  const auto m = evaluate_metrics(pred, truth, first, ctx.cfg.task.rho_threshold);
  auto row = make_row("evaluate", fs::path(pred_path).stem().string(), ctx.cfg, m);
  row.C = first;
  ensure_dir(ctx.out_dir);
  const auto metrics_path = ctx.path("evaluate_metrics.csv");
  remove_file(metrics_path);
  append_metrics_csv(metrics_path, {row});
  write_series_csv(ctx.path("evaluate_series.csv"), m);
  std::ostringstream os;
  os << row.model << ": rmsd " << std::setprecision(6) << m.rmsd << " +- " << m.rmsd_se << ", t_max " << m.t_max
     << " +- " << m.t_max_se << " over " << m.n_trajectories << " trajectories";
  say(ctx, os.str());
  return row;
}

// ---------------------------------------------------------------- oracle check

int cmd_oracle_check(const CommandContext& ctx, double perturbation) {
  const auto checks = oracle_invariants(perturbation);
  int failures = 0;
  std::ostringstream os;
  os << std::left << std::setw(52) << "invariant" << std::setw(14) << "residual" << std::setw(14) << "tolerance"
     << "result\n";
  for (const auto& c : checks) {
    failures += c.pass ? 0 : 1;
    os << std::left << std::setw(52) << c.name << std::setw(14) << std::setprecision(3) << c.residual
       << std::setw(14) << c.tolerance << (c.pass ? "pass" : "FAIL") << '\n';
  }
  os << (failures ? std::to_string(failures) + " invariant(s) failed" : "all invariants pass");
  say(ctx, os.str());
  ensure_dir(ctx.out_dir);
  std::ofstream out(ctx.path("oracle_check.csv"));
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write oracle_check.csv");
  out << "invariant,residual,tolerance,pass\n" << std::setprecision(6);
  for (const auto& c : checks) out << c.name << ',' << c.residual << ',' << c.tolerance << ',' << c.pass << '\n';
  return failures;
}

}  // namespace pdediff
