#pragma once

#include "pdediff/common.hpp"
#include "pdediff/rng.hpp"

#include <utility>
#include <vector>

namespace pdediff {

/// Diffusion-time window used for sampling.
struct NoiseSchedule {
  bool operator==(const NoiseSchedule&) const = default;
  double t_min = 1e-3;
  double t_max = 10.0;

  void validate() const {
    require(0 < t_min && t_min < t_max && t_max <= 50.0, ErrorCode::OutOfRange,
            "noise schedule needs 0 < t_min < t_max <= 50");
  }
};

struct GuidanceConfig {
  bool operator==(const GuidanceConfig&) const = default;
  double gamma = 0.1;
  double sigma_y = 0.01;

  void validate() const {
    require(gamma > 0, ErrorCode::InvalidArgument, "guidance gamma must be positive");
    require(sigma_y >= 0, ErrorCode::InvalidArgument, "sigma_y must be non-negative");
  }
};

enum class Spacing { Linear, Quadratic };

struct TimeGrid {
  bool operator==(const TimeGrid&) const = default;
  int n_steps = 128;
  Spacing spacing = Spacing::Quadratic;
  double kappa = 2.0;  // exponent of the quadratic family
};

inline void check_time(double t) {
  require(std::isfinite(t) && t >= 0, ErrorCode::OutOfRange, "diffusion time must be finite and >= 0");
}

/// sigma_t^2 = 1 - e^{-t}, via expm1 so small t keeps full precision.
inline double sigma2(double t) {
  check_time(t);
  return -std::expm1(-t);
}
inline double mu(double t) {
  check_time(t);
  return std::exp(-0.5 * t);
}
inline double sigma(double t) { return std::sqrt(sigma2(t)); }

/// Kernel p(x_t | x_0) = N(mu x_0, sigma^2 I).
inline std::pair<double, double> kernel(double t) { return {mu(t), sigma(t)}; }

/// log(mu / sigma); decreasing in t.
inline double log_snr(double t) { return -0.5 * t - 0.5 * std::log(sigma2(t)); }

/// r_t^2 = gamma sigma_t^2 / mu_t^2 = gamma (e^t - 1).
inline double guidance_variance(double t, const GuidanceConfig& cfg) {
  require(t > 0, ErrorCode::OutOfRange, "guidance variance needs t > 0");
  check_time(t);
  return cfg.gamma * std::expm1(t);
}

template <typename Derived>
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> noise_sample(const Eigen::MatrixBase<Derived>& x0, double t, Rng& rng) {
  Eigen::MatrixXd eps = rng.normal_matrix(x0.rows(), x0.cols());
  const auto [m, s] = kernel(t);
  Eigen::MatrixXd xt = m * x0 + s * eps;
  return {std::move(xt), std::move(eps)};
}

/// E[x_0 | x_t] = (x_t + sigma^2 score) / mu.
template <typename A, typename B>
auto tweedie(const Eigen::MatrixBase<A>& xt, const Eigen::MatrixBase<B>& score, double t) {
  const double s2 = sigma2(t), m = mu(t);
  return ((xt + s2 * score) / m).eval();
}

template <typename A, typename B>
auto reverse_drift(const Eigen::MatrixBase<A>& xt, const Eigen::MatrixBase<B>& score) {
  return (-0.5 * xt - score).eval();
}

template <typename A, typename B>
auto pf_ode_drift(const Eigen::MatrixBase<A>& xt, const Eigen::MatrixBase<B>& score) {
  return (-0.5 * xt - 0.5 * score).eval();
}

/// Descending grid t_0 = t_max > ... > t_N = t_min.
inline std::vector<double> time_grid(const TimeGrid& g, const NoiseSchedule& s) {
  s.validate();
  require(g.n_steps >= 1, ErrorCode::InvalidArgument, "time grid needs at least one step");
  require(g.kappa > 0, ErrorCode::InvalidArgument, "kappa must be positive");
  const int n = g.n_steps;
  std::vector<double> t(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) {
    const double f = static_cast<double>(i) / n;
    if (g.spacing == Spacing::Linear) {
      t[i] = s.t_max - (s.t_max - s.t_min) * f;
    } else {
      const double lo = std::pow(s.t_min, 1.0 / g.kappa), hi = std::pow(s.t_max, 1.0 / g.kappa);
      t[n - i] = std::pow((1.0 - f) * lo + f * hi, g.kappa);
    }
  }
  t.front() = s.t_max;
  t.back() = s.t_min;
  return t;
}

inline std::string to_string(Spacing s) { return s == Spacing::Linear ? "linear" : "quadratic"; }
inline Spacing parse_spacing(const std::string& name) {
  if (name == "linear") return Spacing::Linear;
  if (name == "quadratic") return Spacing::Quadratic;
  throw Error(ErrorCode::Usage, "unknown time spacing '" + name + "'");
}

}  // namespace pdediff
