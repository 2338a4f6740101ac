#include "pdediff/model.hpp"

namespace pdediff {

NetEpsModel::NetEpsModel(const NetConfig& cfg, Eigen::VectorXf params, Eigen::Index D, Regime regime,
                         int cond_frames)
    : net_(cfg), params_(std::move(params)), D_(D), regime_(regime), cond_frames_(cond_frames) {
  require(params_.size() == net_.n_params(), ErrorCode::ShapeMismatch, "parameters do not match the net config");
  require(D_ >= 1, ErrorCode::InvalidArgument, "D must be positive");
}

NetEpsModel::NetEpsModel(const Checkpoint& ckpt, Eigen::Index D)
    : NetEpsModel(ckpt.net, ckpt.params, D, ckpt.meta.regime, ckpt.meta.cond_frames) {}

void NetEpsModel::build_input(const Eigen::MatrixXd& x, double t, const WindowCond* cond) {
  const int W = window();
  require(x.rows() == W * D_, ErrorCode::ShapeMismatch, "window batch has the wrong height");
  const Eigen::VectorXf tv = Eigen::VectorXf::Constant(x.cols(), static_cast<float>(t));
  Eigen::VectorXf mask = Eigen::VectorXf::Zero(W);
  const Eigen::MatrixXd* values = nullptr;
  if (cond && cond->values) {
    require(cond->mask.size() == W && cond->values->rows() == x.rows() && cond->values->cols() == x.cols(),
            ErrorCode::ShapeMismatch, "conditioning shape mismatch");
    mask = cond->mask.cast<float>();
    values = cond->values;
  }
  assemble_input(x, values, mask, tv, W, D_, input_);
}

void NetEpsModel::eps(const Eigen::MatrixXd& x, double t, const WindowCond* cond, Eigen::MatrixXd& out) {
  build_input(x, t, cond);
  const int id = net_.forward(params_, input_, D_, tape_, false);
  out.resize(x.rows(), x.cols());
  unpack_output(tape_.value(id), D_, out);
}

void NetEpsModel::eps_vjp(const Eigen::MatrixXd& x, double t, const WindowCond* cond, const CotangentFn& cotangent,
                          Eigen::MatrixXd& eps_out, Eigen::MatrixXd& vjp_out) {
  build_input(x, t, cond);
  const int id = net_.forward(params_, input_, D_, tape_, true);
  eps_out.resize(x.rows(), x.cols());
  unpack_output(tape_.value(id), D_, eps_out);
  Eigen::MatrixXd cot = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  cotangent(eps_out, cot);
  pack_output<float>(cot, D_, packed_);
  tape_.backward(id, packed_, params_, nullptr);
  vjp_out.resize(x.rows(), x.cols());
  const Eigen::MatrixXf g = tape_.grad(0).topRows(window());
  unpack_output(g, D_, vjp_out);
}

Eigen::VectorXd NetEpsModel::predict_next(const Eigen::MatrixXd& frames) {
  const int W = window();
  require(frames.rows() == D_ && frames.cols() == W - 1, ErrorCode::ShapeMismatch,
          "next-state prediction needs W-1 frames");
  Eigen::MatrixXd cond = Eigen::MatrixXd::Zero(W * D_, 1);
  cond.topRows((W - 1) * D_) = Eigen::Map<const Eigen::VectorXd>(frames.data(), (W - 1) * D_);
  WindowCond wc{&cond, Eigen::VectorXd::Ones(W)};
  wc.mask[W - 1] = 0;
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(W * D_, 1);
  build_input(zero, 0.0, &wc);
  const int id = net_.forward(params_, input_, D_, tape_, false);
  return tape_.value(id).row(W - 1).transpose().cast<double>();
}

}  // namespace pdediff
