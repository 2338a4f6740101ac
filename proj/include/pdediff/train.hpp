#pragma once

#include "pdediff/net.hpp"
#include "pdediff/trajectory.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace pdediff {

enum class Regime { Joint, Amortised, Universal, MseBaseline };

std::string to_string(Regime r);
Regime parse_regime(const std::string& name);

struct TrainConfig {
  bool operator==(const TrainConfig&) const = default;
  double lr = 2e-4;
  double weight_decay = 1e-3;
  int batch_size = 32;
  int epochs = 10;
  std::uint64_t seed = 0;
  Regime regime = Regime::Joint;
  int cond_frames = 1;        // amortised regime only
  int windows_per_traj = 1;   // random windows drawn from every trajectory per epoch
  int threads = 1;            // data-parallel shards; reduction order is fixed
  double t_max = 10.0;        // diffusion times are drawn as t_max * u^2

  void validate() const;
};

/// What a checkpoint needs beyond the weights to drive sampling.
struct ModelMeta {
  Regime regime = Regime::Joint;
  int cond_frames = 0;
  NormStats stats;
  int epoch = 0;
  double t_max = 10.0;
};

struct Checkpoint {
  NetConfig net;
  ModelMeta meta;
  Eigen::VectorXf params;
  double train_loss = 0.0;
  double valid_loss = 0.0;
};

std::string render_model_text(const NetConfig& net, const ModelMeta& meta);
void parse_model_text(const std::string& text, NetConfig& net, ModelMeta& meta);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// AdamW moments and counters, stored next to a checkpoint to allow resuming.
struct OptimizerState {
  Eigen::VectorXf m, v;
  std::int64_t step = 0;
  int epoch = 0;  // completed epochs
  double best_valid = 0.0;
  Eigen::VectorXf best_params;
  double best_train = 0.0;
};

void save_optimizer(const std::string& path, const OptimizerState& state);
OptimizerState load_optimizer(const std::string& path);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  Eigen::VectorXf best_params;   // lowest validation loss (train loss when there is no validation split)
  Eigen::VectorXf last_params;
  OptimizerState optimizer;
  std::vector<EpochLog> log;
  double best_train = 0.0, best_valid = 0.0;
};

struct TrainInputs {
  const std::vector<TrajectoryD>* train = nullptr;  // already normalised
  const std::vector<TrajectoryD>* valid = nullptr;
  std::optional<Eigen::VectorXf> init_params;       // overrides fresh initialisation
  std::optional<OptimizerState> resume;
  /// Called after every epoch with the current weights and optimizer state (for checkpointing).
  std::function<void(const EpochLog&, const Eigen::VectorXf&, const OptimizerState&)> on_epoch;
};

/// Minimises the epsilon-matching loss of the chosen regime with AdamW and a linear decay of
/// the learning rate to zero over `epochs`. Deterministic for a fixed (seed, threads).
TrainResult train(const NetConfig& net_cfg, const TrainConfig& cfg, const TrainInputs& inputs);

/// Mean loss of `params` on a fixed set of windows drawn from `data` with `seed`.
double evaluate_loss(const ScoreNet<float>& net, const Eigen::VectorXf& params, const TrainConfig& cfg,
                     const std::vector<TrajectoryD>& data, std::uint64_t seed);

}  // namespace pdediff
