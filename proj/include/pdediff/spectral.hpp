#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

namespace pdediff {

/// Real-to-half-complex FFT of a fixed length. Not shareable across threads (plan cache).
class RealFft {
 public:
  explicit RealFft(Eigen::Index n) : n_(n) { fft_.SetFlag(Eigen::FFT<double>::HalfSpectrum); }

  Eigen::Index size() const { return n_; }
  Eigen::Index modes() const { return n_ / 2 + 1; }

  template <typename In>
  void forward(const Eigen::MatrixBase<In>& x, Eigen::VectorXcd& xhat) {
    buf_ = x;
    fft_.fwd(xhat, buf_, n_);
  }

  void inverse(const Eigen::VectorXcd& xhat, Eigen::VectorXd& x) { fft_.inv(x, xhat, n_); }

 private:
  Eigen::Index n_;
  Eigen::FFT<double> fft_;
  Eigen::VectorXd buf_;
};

}  // namespace pdediff
