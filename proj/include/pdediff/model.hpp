#pragma once

#include "pdediff/net.hpp"
#include "pdediff/train.hpp"

#include <functional>

namespace pdediff {

/// Clean conditioning frames for a batch of windows: values (W * D, n), mask over the W frames.
struct WindowCond {
  const Eigen::MatrixXd* values = nullptr;
  Eigen::VectorXd mask;
};

/// Produces the cotangent (W * D, n) of a scalar objective from the predicted noise.
using CotangentFn = std::function<void(const Eigen::MatrixXd& eps, Eigen::MatrixXd& cotangent)>;

/// Noise predictor over batches of windows. Windows are (W * D, n) matrices, frame-major
/// per column (entry f * D + z). The score is -eps / sigma_t.
class EpsModel {
 public:
  virtual ~EpsModel() = default;

  virtual int window() const = 0;
  virtual Regime regime() const { return Regime::Joint; }
  virtual int cond_frames() const { return 0; }

  virtual void eps(const Eigen::MatrixXd& x, double t, const WindowCond* cond, Eigen::MatrixXd& out) = 0;

  /// One forward pass: eps(x), then J^T g with g = cotangent(eps) and J = d eps / d x.
  virtual void eps_vjp(const Eigen::MatrixXd& x, double t, const WindowCond* cond, const CotangentFn& cotangent,
                       Eigen::MatrixXd& eps_out, Eigen::MatrixXd& vjp_out) = 0;
};

/// The trained network behind the EpsModel interface. Not shareable across threads.
class NetEpsModel : public EpsModel {
 public:
  NetEpsModel(const NetConfig& cfg, Eigen::VectorXf params, Eigen::Index D, Regime regime = Regime::Joint,
              int cond_frames = 0);
  explicit NetEpsModel(const Checkpoint& ckpt, Eigen::Index D);

  int window() const override { return net_.config().window; }
  Regime regime() const override { return regime_; }
  int cond_frames() const override { return cond_frames_; }

  void eps(const Eigen::MatrixXd& x, double t, const WindowCond* cond, Eigen::MatrixXd& out) override;
  void eps_vjp(const Eigen::MatrixXd& x, double t, const WindowCond* cond, const CotangentFn& cotangent,
               Eigen::MatrixXd& eps_out, Eigen::MatrixXd& vjp_out) override;

  /// Next-state regression head of the MSE baseline: the last output frame given W-1 clean frames.
  Eigen::VectorXd predict_next(const Eigen::MatrixXd& frames);

 private:
  void build_input(const Eigen::MatrixXd& x, double t, const WindowCond* cond);

  ScoreNet<float> net_;
  Eigen::VectorXf params_;
  Eigen::Index D_;
  Regime regime_;
  int cond_frames_;
  Tape<float> tape_;
  Eigen::MatrixXf input_, packed_;
};

}  // namespace pdediff
