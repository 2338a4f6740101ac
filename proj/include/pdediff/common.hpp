#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace pdediff {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// A spatial field sampled on D grid points.
using Field = Eigen::VectorXd;

enum class ErrorCode {
  InvalidArgument,
  InvalidGrid,
  NonFinite,
  OutOfRange,
  ShapeMismatch,
  IndexOutOfRange,
  InvalidProportion,
  DataTooShort,
  TooShort,
  InitTooShort,
  RegimeMismatch,
  NotStationary,
  SingularSystem,
  EmptyTrain,
  EmptyObservations,
  IoError,
  Usage,
};

const char* to_string(ErrorCode code);

/// Library-wide exception. The code drives CLI exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// CLI exit codes: 0 success, 1 usage, 2 numeric failure, 3 I/O.
int exit_code_for(ErrorCode code);

inline void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) throw Error(code, what);
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.allFinite();
}

}  // namespace pdediff
