#pragma once

#include "pdediff/model.hpp"
#include "pdediff/observations.hpp"
#include "pdediff/sde.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <vector>

namespace pdediff {

/// Stationary Gaussian AR(p) sequence x_l = sum_j a_j x_{l-j} + e_l, e_l ~ N(0, q).
/// Each of the d components of a state follows the same recursion independently.
struct GaussianAR {
  int order = 0;
  std::vector<double> coeffs;
  double innovation_var = 1.0;
  int length = 1;
  int dim = 1;

  void validate() const;
};

/// Autocovariances gamma_0 .. gamma_{n-1} of the stationary process.
Eigen::VectorXd autocovariance(const GaussianAR& m, int n);

/// Stationary covariance of (x_1 .. x_L), (L d) x (L d), state-major.
Eigen::MatrixXd joint_cov(const GaussianAR& m);

/// Exact scores and posteriors of a GaussianAR under the VP noising kernel.
class GaussianOracle {
 public:
  explicit GaussianOracle(GaussianAR m);

  const GaussianAR& model() const { return m_; }
  const Eigen::MatrixXd& cov() const { return cov_; }
  int size() const { return static_cast<int>(cov_.rows()); }

  /// Score of N(0, mu^2 Sigma + sigma^2 I) over the full sequence.
  Eigen::VectorXd noised_score(const Eigen::VectorXd& x, double t) const;

  /// Score of the noised marginal over the given states (x holds their d-blocks in order).
  Eigen::VectorXd local_noised_score(const std::vector<int>& states, const Eigen::VectorXd& x, double t) const;

  /// Score in x_target of p_t(x_target | x_given) for disjoint state sets.
  Eigen::VectorXd conditional_score(const std::vector<int>& target, const std::vector<int>& given,
                                    const Eigen::VectorXd& x_given, const Eigen::VectorXd& x_target, double t) const;

  /// Exact posterior of the clean sequence given masked observations (state t, component z).
  std::pair<Eigen::VectorXd, Eigen::MatrixXd> posterior_moments(const ObservationSet& obs) const;

  /// Exact grad log p_t(x | y) of the noised sequence given the observations.
  Eigen::VectorXd posterior_noised_score(const ObservationSet& obs, const Eigen::VectorXd& x, double t) const;

 private:
  std::vector<Eigen::Index> elements(const std::vector<int>& states) const;
  Eigen::MatrixXd noised_block(const std::vector<Eigen::Index>& rows, const std::vector<Eigen::Index>& cols,
                               double t) const;

  GaussianAR m_;
  Eigen::MatrixXd cov_;
  mutable std::mutex mutex_;
  mutable std::map<double, std::shared_ptr<const Eigen::LLT<Eigen::MatrixXd>>> cache_;
};

/// Exact window model for sequences whose D spatial columns are independent copies of a
/// scalar stationary process with W x W covariance `window_cov`. With a conditioning mask the
/// prediction is the exact conditional noise estimate given the clean conditioning frames.
class OracleEpsModel : public EpsModel {
 public:
  OracleEpsModel(Eigen::MatrixXd window_cov, Eigen::Index D, Regime regime = Regime::Joint, int cond_frames = 0);

  int window() const override { return static_cast<int>(cov_.rows()); }
  Regime regime() const override { return regime_; }
  int cond_frames() const override { return cond_frames_; }

  void eps(const Eigen::MatrixXd& x, double t, const WindowCond* cond, Eigen::MatrixXd& out) override;
  void eps_vjp(const Eigen::MatrixXd& x, double t, const WindowCond* cond, const CotangentFn& cotangent,
               Eigen::MatrixXd& eps_out, Eigen::MatrixXd& vjp_out) override;

 private:
  // Precision of the noised conditional times sigma, and the conditional mean map.
  struct Factors {
    Eigen::MatrixXd scaled_precision;  // sigma * Lambda^-1
    Eigen::MatrixXd mean_map;          // clean conditioning frames -> conditional mean
  };
  Factors factors(const Eigen::VectorXd& mask, double t) const;
  void predict(const Eigen::MatrixXd& x, double t, const WindowCond* cond, Eigen::MatrixXd& out,
               Eigen::MatrixXd* precision) const;

  Eigen::MatrixXd cov_;
  Eigen::Index D_;
  Regime regime_;
  int cond_frames_;
};

/// Batched local score over windows of `len` consecutive states of a stationary oracle:
/// input and output are (len * d, n) matrices.
using LocalScoreFn = std::function<Eigen::MatrixXd(const Eigen::MatrixXd& windows, double t)>;
LocalScoreFn oracle_local_score(const GaussianOracle& oracle, int len);

}  // namespace pdediff
