#pragma once

#include "pdediff/common.hpp"
#include "pdediff/rng.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace pdediff {

/// Window-to-window convolutional net. Levels run at dilation 2^l without pooling so the
/// map stays exactly equivariant to circular shifts on any grid size.
struct NetConfig {
  bool operator==(const NetConfig&) const = default;
  int window = 5;
  std::vector<std::pair<int, int>> levels{{32, 2}, {64, 2}};  // (channels, residual blocks)
  int kernel_size = 3;

  int in_channels() const { return 3 * window + 1; }  // noisy, cond, mask, t
  int out_channels() const { return window; }
  void validate() const;
};

std::string render_levels(const std::vector<std::pair<int, int>>& levels);
std::vector<std::pair<int, int>> parse_levels(const std::string& text);

struct ParamTensor {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index rows = 0, cols = 0;
  Eigen::Index size() const { return rows * cols; }
};

/// Parameter tensors in the order the forward pass consumes them.
std::vector<ParamTensor> net_layout(const NetConfig& cfg);
Eigen::Index layout_size(const std::vector<ParamTensor>& layout);

/// Throws NonFinite naming the first tensor whose gradient block is not finite.
template <typename S>
void check_finite_gradient(const VectorX<S>& grad, const std::vector<ParamTensor>& layout) {
  for (const auto& t : layout) {
    if (!grad.segment(t.offset, t.size()).allFinite()) {
      throw Error(ErrorCode::NonFinite, "gradient of " + t.name + " is not finite");
    }
  }
}

/// Records activations of one forward pass and replays them in reverse.
/// Activations are (channels, batch * D) with column b * D + z.
template <typename S>
class Tape {
 public:
  using Mat = MatrixX<S>;

  void reset(Eigen::Index D, bool record) {
    D_ = D;
    record_ = record;
    n_vals_ = 0;
    ops_.clear();
  }

  int input(const Mat& x) {
    const int id = alloc();
    val_[id] = x;
    return id;
  }

  const Mat& value(int id) const { return val_[id]; }
  const Mat& grad(int id) const { return grad_[id]; }

  /// Circular convolution: out = W * im2col(x) + b, W of shape (cout, K * cin).
  int conv(int x, const ParamTensor& w, const ParamTensor& b, int K, int dilation, const VectorX<S>& p) {
    const Eigen::Index cin = val_[x].rows();
    const auto Wm = map(p, w);
    const auto bv = map(p, b);
    require(Wm.cols() == cin * K, ErrorCode::ShapeMismatch, "conv " + w.name + " input channel mismatch");
    const int out = alloc();
    Op op{Kind::Conv, x, -1, out, &w, &b, K, dilation, -1};
    if (K == 1) {
      val_[out].noalias() = Wm * val_[x];
    } else {
      Mat* col = &scratch_;
      if (record_) {
        op.aux = alloc_aux();
        col = &aux_[op.aux];
      }
      im2col(val_[x], K, dilation, *col);
      val_[out].noalias() = Wm * (*col);
    }
    val_[out].colwise() += bv.col(0);
    push(op);
    return out;
  }

  /// Per-column normalisation across channels, no affine part.
  int norm(int x) {
    const int out = alloc();
    Op op{Kind::Norm, x, -1, out, nullptr, nullptr, 0, 0, -1};
    const Mat& in = val_[x];
    const S c = static_cast<S>(in.rows());
    Mat& y = val_[out];
    const auto mean = (in.colwise().sum() / c).eval();
    y = in.rowwise() - mean;
    Mat* rstd = &scratch_;
    if (record_) {
      op.aux = alloc_aux();
      rstd = &aux_[op.aux];
    }
    *rstd = ((y.array().square().colwise().sum() / c) + S(1e-5)).rsqrt().matrix();
    y.array().rowwise() *= rstd->array().row(0);
    push(op);
    return out;
  }

  int silu(int x) {
    const int out = alloc();
    const auto& in = val_[x].array();
    val_[out] = (in / (S(1) + (-in).exp())).matrix();
    push(Op{Kind::Silu, x, -1, out, nullptr, nullptr, 0, 0, -1});
    return out;
  }

  int add(int a, int b) {
    const int out = alloc();
    val_[out] = val_[a] + val_[b];
    push(Op{Kind::Add, a, b, out, nullptr, nullptr, 0, 0, -1});
    return out;
  }

  /// Reverse sweep from `out` seeded with `dout`. Parameter gradients accumulate into
  /// `dparams` when non-null; the gradient of value 0 (the input) is left in grad(0).
  void backward(int out, const Mat& dout, const VectorX<S>& p, VectorX<S>* dparams) {
    require(record_, ErrorCode::InvalidArgument, "backward needs a recorded forward pass");
    for (int i = 0; i < n_vals_; ++i) grad_[i].setZero(val_[i].rows(), val_[i].cols());
    grad_[out] = dout;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
      const Op& op = *it;
      const Mat& dy = grad_[op.out];
      switch (op.kind) {
        case Kind::Conv: {
          const auto Wm = map(p, *op.w);
          if (dparams) {
            auto dW = map(*dparams, *op.w);
            auto db = map(*dparams, *op.bias);
            if (op.K == 1) {
              dW.noalias() += dy * val_[op.a].transpose();
            } else {
              dW.noalias() += dy * aux_[op.aux].transpose();
            }
            db.col(0) += dy.rowwise().sum();
          }
          if (op.K == 1) {
            grad_[op.a].noalias() += Wm.transpose() * dy;
          } else {
            scratch_.noalias() = Wm.transpose() * dy;
            col2im_add(scratch_, op.K, op.dilation, grad_[op.a]);
          }
          break;
        }
        case Kind::Norm: {
          const Mat& y = val_[op.out];
          const auto& rstd = aux_[op.aux].array();
          const S c = static_cast<S>(y.rows());
          const auto mdy = (dy.colwise().sum() / c).eval();
          const auto mdyy = ((dy.array() * y.array()).colwise().sum() / c).eval();
          Mat g = dy.rowwise() - mdy;
          g.array() -= y.array().rowwise() * mdyy.array();
          g.array().rowwise() *= rstd.row(0);
          grad_[op.a] += g;
          break;
        }
        case Kind::Silu: {
          const auto& x = val_[op.a].array();
          const auto s = (S(1) / (S(1) + (-x).exp())).eval();
          grad_[op.a].array() += dy.array() * s * (S(1) + x * (S(1) - s));
          break;
        }
        case Kind::Add:
          grad_[op.a] += dy;
          grad_[op.b] += dy;
          break;
      }
    }
  }

 private:
  enum class Kind { Conv, Norm, Silu, Add };
  struct Op {
    Kind kind;
    int a, b, out;
    const ParamTensor* w;
    const ParamTensor* bias;
    int K, dilation;
    int aux;
  };

  static Eigen::Map<const Mat> map(const VectorX<S>& p, const ParamTensor& t) {
    return Eigen::Map<const Mat>(p.data() + t.offset, t.rows, t.cols);
  }
  static Eigen::Map<Mat> map(VectorX<S>& p, const ParamTensor& t) {
    return Eigen::Map<Mat>(p.data() + t.offset, t.rows, t.cols);
  }

  int alloc() {
    if (n_vals_ == static_cast<int>(val_.size())) {
      val_.emplace_back();
      grad_.emplace_back();
    }
    return n_vals_++;
  }
  int alloc_aux() {
    const int id = static_cast<int>(ops_.size());
    if (id >= static_cast<int>(aux_.size())) aux_.resize(static_cast<std::size_t>(id) + 1);
    return id;
  }
  void push(const Op& op) {
    if (record_) ops_.push_back(op);
  }

  // Row block j of the column matrix holds x shifted by (j - K/2) * dilation.
  void im2col(const Mat& x, int K, int dilation, Mat& col) const {
    const Eigen::Index cin = x.rows(), N = x.cols(), D = D_;
    col.resize(cin * K, N);
    for (Eigen::Index n = 0; n < N; ++n) {
      const Eigen::Index base = (n / D) * D, z = n % D;
      for (int j = 0; j < K; ++j) {
        Eigen::Index src = (z + static_cast<Eigen::Index>(j - K / 2) * dilation) % D;
        if (src < 0) src += D;
        col.col(n).segment(j * cin, cin) = x.col(base + src);
      }
    }
  }
  void col2im_add(const Mat& col, int K, int dilation, Mat& dx) const {
    const Eigen::Index cin = dx.rows(), N = dx.cols(), D = D_;
    for (Eigen::Index n = 0; n < N; ++n) {
      const Eigen::Index base = (n / D) * D, z = n % D;
      for (int j = 0; j < K; ++j) {
        Eigen::Index src = (z + static_cast<Eigen::Index>(j - K / 2) * dilation) % D;
        if (src < 0) src += D;
        dx.col(base + src) += col.col(n).segment(j * cin, cin);
      }
    }
  }

  Eigen::Index D_ = 1;
  bool record_ = true;
  int n_vals_ = 0;
  std::vector<Mat> val_, grad_, aux_;
  std::vector<Op> ops_;
  Mat scratch_;
};

template <typename S>
class ScoreNet {
 public:
  using Mat = MatrixX<S>;

  explicit ScoreNet(NetConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    layout_ = net_layout(cfg_);
    size_ = layout_size(layout_);
  }

  const NetConfig& config() const { return cfg_; }
  const std::vector<ParamTensor>& layout() const { return layout_; }
  Eigen::Index n_params() const { return size_; }

  /// Fan-in scaled uniform weights and biases; the output convolution starts at zero.
  VectorX<S> init_params(std::uint64_t seed) const {
    VectorX<S> p = VectorX<S>::Zero(size_);
    Rng rng(seed);
    for (std::size_t i = 0; i < layout_.size(); ++i) {
      const auto& t = layout_[i];
      if (t.name.rfind("conv_out.", 0) == 0) continue;
      // Biases share the fan-in of the weight tensor that precedes them.
      const auto& w = t.cols == 1 ? layout_[i - 1] : t;
      const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols));
      for (Eigen::Index j = 0; j < t.size(); ++j) p[t.offset + j] = static_cast<S>(rng.uniform(-bound, bound));
    }
    return p;
  }

  /// input: (in_channels, B * D). Returns the output value id on the tape; its value is (W, B * D).
  int forward(const VectorX<S>& p, const Mat& input, Eigen::Index D, Tape<S>& tape, bool record = true) const {
    require(p.size() == size_, ErrorCode::ShapeMismatch, "parameter vector has the wrong size");
    require(input.rows() == cfg_.in_channels() && D > 0 && input.cols() % D == 0, ErrorCode::ShapeMismatch,
            "net input must be (3W+1, B*D)");
    tape.reset(D, record);
    std::size_t cursor = 0;
    auto next = [&]() -> const ParamTensor& { return layout_.at(cursor++); };
    const int K = cfg_.kernel_size;
    auto conv = [&](int x, int k, int dil) {
      const auto& w = next();
      const auto& b = next();
      return tape.conv(x, w, b, k, dil, p);
    };
    auto resblock = [&](int x, int dil) {
      int h = tape.silu(tape.norm(x));
      h = tape.silu(conv(h, K, dil));
      h = conv(h, K, dil);
      return tape.add(x, h);
    };

    int h = conv(tape.input(input), K, 1);
    const int n_levels = static_cast<int>(cfg_.levels.size());
    std::vector<int> skips(static_cast<std::size_t>(n_levels));
    for (int l = 0; l < n_levels; ++l) {
      if (l > 0) h = conv(h, 1, 1);
      for (int r = 0; r < cfg_.levels[l].second; ++r) h = resblock(h, 1 << l);
      skips[l] = h;
    }
    for (int l = n_levels - 2; l >= 0; --l) {
      h = tape.add(conv(h, 1, 1), skips[l]);
      for (int r = 0; r < cfg_.levels[l].second; ++r) h = resblock(h, 1 << l);
    }
    h = conv(tape.silu(h), K, 1);
    require(cursor == layout_.size(), ErrorCode::ShapeMismatch, "layout and forward pass disagree");
    return h;
  }

 private:
  NetConfig cfg_;
  std::vector<ParamTensor> layout_;
  Eigen::Index size_ = 0;
};

/// Packs windows into net input. x, cond: (W * D, B) frame-major; mask: W entries in {0, 1};
/// t: B diffusion times. Conditioning values are zeroed where the mask is 0.
template <typename S, typename X, typename Cd>
void assemble_input(const Eigen::MatrixBase<X>& x, const Eigen::MatrixBase<Cd>* cond, const VectorX<S>& mask,
                    const VectorX<S>& t, int W, Eigen::Index D, MatrixX<S>& out) {
  const Eigen::Index B = x.cols();
  require(x.rows() == W * D && mask.size() == W && t.size() == B, ErrorCode::ShapeMismatch,
          "window batch shape mismatch");
  out.resize(3 * W + 1, B * D);
  for (Eigen::Index b = 0; b < B; ++b) {
    for (int f = 0; f < W; ++f) {
      out.block(f, b * D, 1, D) = x.col(b).segment(f * D, D).transpose().template cast<S>();
      if (cond && mask[f] != S(0)) {
        out.block(W + f, b * D, 1, D) = (*cond).col(b).segment(f * D, D).transpose().template cast<S>();
      } else {
        out.block(W + f, b * D, 1, D).setZero();
      }
      out.block(2 * W + f, b * D, 1, D).setConstant(mask[f]);
    }
    out.block(3 * W, b * D, 1, D).setConstant(t[b]);
  }
}

/// (W, B * D) net output to (W * D, B) frame-major windows.
template <typename S, typename Out>
void unpack_output(const MatrixX<S>& y, Eigen::Index D, Eigen::MatrixBase<Out>& out) {
  const Eigen::Index W = y.rows(), B = y.cols() / D;
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index f = 0; f < W; ++f)
      out.col(b).segment(f * D, D) = y.block(f, b * D, 1, D).transpose().template cast<typename Out::Scalar>();
}

/// Inverse of unpack_output, used to seed backward passes.
template <typename S, typename In>
void pack_output(const Eigen::MatrixBase<In>& g, Eigen::Index D, MatrixX<S>& y) {
  const Eigen::Index B = g.cols(), W = g.rows() / D;
  y.resize(W, B * D);
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index f = 0; f < W; ++f)
      y.block(f, b * D, 1, D) = g.col(b).segment(f * D, D).transpose().template cast<S>();
}

}  // namespace pdediff
