#include "pdediff/train.hpp"

#include "pdediff/sde.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace pdediff {

void TrainConfig::validate() const {
  require(lr > 0, ErrorCode::InvalidArgument, "lr must be positive");
  require(weight_decay >= 0, ErrorCode::InvalidArgument, "weight_decay must be >= 0");
  require(batch_size >= 1, ErrorCode::InvalidArgument, "batch_size must be >= 1");
  require(epochs >= 0, ErrorCode::InvalidArgument, "epochs must be >= 0");
  require(windows_per_traj >= 1, ErrorCode::InvalidArgument, "windows_per_traj must be >= 1");
  require(threads >= 1, ErrorCode::InvalidArgument, "threads must be >= 1");
  require(t_max > 0 && t_max <= 50.0, ErrorCode::OutOfRange, "t_max must be in (0, 50]");
}

namespace {

struct Item {
  int traj = 0;
  int start = 0;
  float t = 0;
};

/// One batch with all of its randomness drawn up front, so sharding cannot change results.
struct Batch {
  std::vector<Item> items;
  Eigen::MatrixXf eps;  // (W * D, B)
  int cond = 0;
};

int regime_cond(Regime r, int W, int fixed, Rng& rng) {
  switch (r) {
    case Regime::Joint: return 0;
    case Regime::Amortised: return fixed;
    case Regime::Universal: return static_cast<int>(rng.integer(0, W - 1));
    case Regime::MseBaseline: return W - 1;
  }
  return 0;
}

std::vector<Batch> draw_batches(const std::vector<TrajectoryD>& data, const TrainConfig& cfg, int W, Eigen::Index D,
                                Rng& rng) {
  std::vector<int> order;
  for (int n = 0; n < static_cast<int>(data.size()); ++n)
    for (int r = 0; r < cfg.windows_per_traj; ++r) order.push_back(n);
  std::shuffle(order.begin(), order.end(), rng.engine());
  std::vector<Batch> batches;
  for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(cfg.batch_size)) {
    Batch b;
    const std::size_t end = std::min(order.size(), i + static_cast<std::size_t>(cfg.batch_size));
    b.cond = regime_cond(cfg.regime, W, cfg.cond_frames, rng);
    for (std::size_t j = i; j < end; ++j) {
      Item it;
      it.traj = order[j];
      it.start = static_cast<int>(rng.integer(0, data[it.traj].length() - W));
      it.t = cfg.regime == Regime::MseBaseline ? 0.0f : static_cast<float>(cfg.t_max * std::pow(rng.uniform(), 2));
      b.items.push_back(it);
    }
    b.eps.resize(W * D, static_cast<Eigen::Index>(b.items.size()));
    if (cfg.regime != Regime::MseBaseline) rng.fill_normal(b.eps);
    else b.eps.setZero();
    batches.push_back(std::move(b));
  }
  return batches;
}

struct Shard {
  Tape<float> tape;
  Eigen::VectorXf grad;
  Eigen::MatrixXf input, x, cond, target, dout;
  double sse = 0;
};

/// Sum of squared errors over items [lo, hi) of the batch; accumulates gradients when asked.
void run_shard(const ScoreNet<float>& net, const Eigen::VectorXf& p, const std::vector<TrajectoryD>& data,
               Regime regime, const Batch& batch, std::size_t lo, std::size_t hi, bool with_grad, Shard& s) {
  const int W = net.config().window;
  const Eigen::Index D = data.front().width();
  const auto B = static_cast<Eigen::Index>(hi - lo);
  s.sse = 0;
  if (B == 0) return;
  s.x.resize(W * D, B);
  s.cond.resize(W * D, B);
  Eigen::VectorXf t(B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const Item& it = batch.items[lo + b];
    const auto& tr = data[it.traj].data;
    for (int f = 0; f < W; ++f) s.cond.col(b).segment(f * D, D) = tr.col(it.start + f).cast<float>();
    t[b] = it.t;
    if (regime == Regime::MseBaseline) {
      s.x.col(b).setZero();
    } else {
      const auto m = static_cast<float>(mu(it.t)), sg = static_cast<float>(sigma(it.t));
      s.x.col(b) = m * s.cond.col(b) + sg * batch.eps.col(static_cast<Eigen::Index>(lo) + b);
    }
  }
  Eigen::VectorXf mask = Eigen::VectorXf::Zero(W);
  mask.head(batch.cond).setOnes();
  assemble_input(s.x, &s.cond, mask, t, W, D, s.input);
  const int out = net.forward(p, s.input, D, s.tape, with_grad);
  const Eigen::MatrixXf& y = s.tape.value(out);
  if (regime == Regime::MseBaseline) {
    pack_output<float>(s.cond, D, s.target);
    s.dout = Eigen::MatrixXf::Zero(y.rows(), y.cols());
    s.dout.row(W - 1) = y.row(W - 1) - s.target.row(W - 1);
  } else {
    pack_output<float>(batch.eps.middleCols(static_cast<Eigen::Index>(lo), B), D, s.target);
    s.dout = y - s.target;
  }
  s.sse = s.dout.cast<double>().squaredNorm();
  if (with_grad) {
    s.grad.setZero(p.size());
    s.tape.backward(out, (2.0f * s.dout).eval(), p, &s.grad);
  }
}

/// Elements that enter the loss for `count` windows.
double loss_denominator(Regime regime, int W, Eigen::Index D, std::size_t count) {
  const double per = regime == Regime::MseBaseline ? static_cast<double>(D) : static_cast<double>(W * D);
  return per * static_cast<double>(count);
}

}  // namespace

double evaluate_loss(const ScoreNet<float>& net, const Eigen::VectorXf& params, const TrainConfig& cfg,
                     const std::vector<TrajectoryD>& data, std::uint64_t seed) {
  if (data.empty()) return 0.0;
  const int W = net.config().window;
  const Eigen::Index D = data.front().width();
  Rng rng(seed);
  const auto batches = draw_batches(data, cfg, W, D, rng);
  Shard s;
  double sse = 0, n = 0;
  for (const auto& b : batches) {
    run_shard(net, params, data, cfg.regime, b, 0, b.items.size(), false, s);
    sse += s.sse;
    n += loss_denominator(cfg.regime, W, D, b.items.size());
  }
  return sse / n;
}

TrainResult train(const NetConfig& net_cfg, const TrainConfig& cfg, const TrainInputs& in) {
  cfg.validate();
  require(in.train != nullptr, ErrorCode::InvalidArgument, "no training data");
  const auto& data = *in.train;
  static const std::vector<TrajectoryD> kNone;
  const auto& valid = in.valid ? *in.valid : kNone;
  const ScoreNet<float> net(net_cfg);
  const int W = net_cfg.window;
  require(!data.empty(), ErrorCode::EmptyTrain, "training split is empty");
  for (const auto* set : {&data, &valid}) {
    for (const auto& tr : *set) {
      require(tr.length() >= W, ErrorCode::DataTooShort,
              "trajectory of length " + std::to_string(tr.length()) + " shorter than window " + std::to_string(W));
      require(tr.width() == data.front().width(), ErrorCode::ShapeMismatch, "trajectories differ in D");
    }
  }
  if (cfg.regime == Regime::Amortised) {
    require(cfg.cond_frames >= 1 && cfg.cond_frames <= W - 1, ErrorCode::InvalidArgument,
            "amortised cond_frames must be in [1, W-1]");
  }
  const Eigen::Index D = data.front().width();

  Eigen::VectorXf p = in.init_params ? *in.init_params : net.init_params(substream(cfg.seed, "train/init"));
  require(p.size() == net.n_params(), ErrorCode::ShapeMismatch, "initial parameters have the wrong size");
  OptimizerState opt;
  if (in.resume) {
    opt = *in.resume;
    require(opt.m.size() == p.size() && opt.v.size() == p.size(), ErrorCode::ShapeMismatch,
            "optimizer state does not match the net");
  } else {
    opt.m = Eigen::VectorXf::Zero(p.size());
    opt.v = Eigen::VectorXf::Zero(p.size());
    opt.best_params = p;
    opt.best_valid = std::numeric_limits<double>::infinity();
    opt.best_train = std::numeric_limits<double>::infinity();
  }

  const std::int64_t batches_per_epoch =
      (static_cast<std::int64_t>(data.size()) * cfg.windows_per_traj + cfg.batch_size - 1) / cfg.batch_size;
  const std::int64_t total_steps = batches_per_epoch * cfg.epochs;
  const std::uint64_t valid_seed = substream(cfg.seed, "train/valid");
  const int n_shards = cfg.threads;
  std::vector<Shard> shards(static_cast<std::size_t>(n_shards));
  const float beta1 = 0.9f, beta2 = 0.999f, adam_eps = 1e-8f;

  TrainResult result;
  for (int epoch = opt.epoch; epoch < cfg.epochs; ++epoch) {
    Rng rng(substream(cfg.seed, "train/epoch", static_cast<std::uint64_t>(epoch)));
    const auto batches = draw_batches(data, cfg, W, D, rng);
    double sse = 0, count = 0, lr_now = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch& batch = batches[bi];
      const std::size_t B = batch.items.size();
      auto work = [&](int k) {
        const std::size_t lo = B * k / n_shards, hi = B * (k + 1) / n_shards;
        run_shard(net, p, data, cfg.regime, batch, lo, hi, true, shards[k]);
      };
      if (n_shards == 1) {
        work(0);
      } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < n_shards; ++k) pool.emplace_back(work, k);
        for (auto& th : pool) th.join();
      }
      const double denom = loss_denominator(cfg.regime, W, D, B);
      Eigen::VectorXf g = Eigen::VectorXf::Zero(p.size());
      double batch_sse = 0;
      for (int k = 0; k < n_shards; ++k) {
        if (shards[k].grad.size() == p.size() && B * (k + 1) / n_shards > B * k / n_shards) g += shards[k].grad;
        batch_sse += shards[k].sse;
      }
      if (!std::isfinite(batch_sse)) {
        throw Error(ErrorCode::NonFinite,
                    "loss is not finite at epoch " + std::to_string(epoch) + " batch " + std::to_string(bi));
      }
      g /= static_cast<float>(denom);
      check_finite_gradient(g, net.layout());
      sse += batch_sse;
      count += denom;

      ++opt.step;
      lr_now = cfg.lr * std::max(0.0, 1.0 - static_cast<double>(opt.step - 1) / static_cast<double>(total_steps));
      const auto lr = static_cast<float>(lr_now);
      const float bc1 = 1.0f - std::pow(beta1, static_cast<float>(opt.step));
      const float bc2 = 1.0f - std::pow(beta2, static_cast<float>(opt.step));
      opt.m = beta1 * opt.m + (1.0f - beta1) * g;
      opt.v = beta2 * opt.v + (1.0f - beta2) * g.cwiseProduct(g);
      p.array() -= lr * ((opt.m.array() / bc1) / ((opt.v.array() / bc2).sqrt() + adam_eps) +
                         static_cast<float>(cfg.weight_decay) * p.array());
    }
    EpochLog log;
    log.epoch = epoch + 1;
    log.train_loss = sse / count;
    log.valid_loss = valid.empty() ? log.train_loss : evaluate_loss(net, p, cfg, valid, valid_seed);
    log.lr = lr_now;
    opt.epoch = epoch + 1;
    if (log.valid_loss < opt.best_valid) {
      opt.best_valid = log.valid_loss;
      opt.best_train = log.train_loss;
      opt.best_params = p;
    }
    result.log.push_back(log);
    if (in.on_epoch) in.on_epoch(log, p, opt);
  }
  result.best_params = opt.best_params;
  result.last_params = p;
  result.best_train = std::isfinite(opt.best_train) ? opt.best_train : 0.0;
  result.best_valid = std::isfinite(opt.best_valid) ? opt.best_valid : 0.0;
  result.optimizer = std::move(opt);
  return result;
}

}  // namespace pdediff
