#pragma once

#include "pdediff/model.hpp"
#include "pdediff/observations.hpp"
#include "pdediff/oracle.hpp"
#include "pdediff/rng.hpp"
#include "pdediff/sde.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>

namespace pdediff {

/// Forward-pass batches by phase. forward_evals counts predictor and corrector batches;
/// the final Tweedie step is tracked under "denoise" only.
struct NfeCounter {
  std::int64_t forward_evals = 0;
  std::map<std::string, std::int64_t> phases;

  void add(const std::string& phase, std::int64_t n = 1);
  NfeCounter& operator+=(const NfeCounter& o);
};

struct RolloutPlan {
  int W = 5;
  int P = 4;
  int C = 1;
  int L = 5;
  int corrector_steps = 0;
  double corrector_snr = 0.1;
  TimeGrid time_grid;
  NoiseSchedule schedule;
  GuidanceConfig guidance;
  int chunk = 256;
  bool threshold = false;
  double threshold_percentile = 99.5;
  // Data normalisation: the model sees (x - mean) / std.
  double data_mean = 0.0;
  double data_std = 1.0;
  // Replaces the default r_t^2 = gamma sigma_t^2 / mu_t^2 when set.
  std::function<double(double)> r2;

  void validate_ar() const;
  void validate_common() const;
  double r2_at(double t) const;
};

/// Score of a (D x L) state at diffusion time t.
using ScoreFn = std::function<void(const Eigen::MatrixXd& x, double t, Eigen::MatrixXd& score)>;

/// Exponential-integrator update of the probability-flow ODE given the score at (x, t_from).
Eigen::MatrixXd predictor_update(const Eigen::MatrixXd& x, const Eigen::MatrixXd& score, double t_from, double t_to);
Eigen::MatrixXd predictor_step(const ScoreFn& score_fn, const Eigen::MatrixXd& x, double t_from, double t_to);

/// Langevin update with the signal-to-noise step rule.
Eigen::MatrixXd corrector_update(const Eigen::MatrixXd& x, const Eigen::MatrixXd& score, double t, double snr, Rng& rng);
Eigen::MatrixXd corrector_step(const ScoreFn& score_fn, const Eigen::MatrixXd& x, double t, double snr, Rng& rng);

/// Composes the full (D x L) score from windows of W = 2k + 1 states; position i reads
/// the window starting at clamp(i - k, 0, L - W).
Eigen::MatrixXd compose_full_score_2kp1(const LocalScoreFn& local, const Eigen::MatrixXd& x, int W, double t,
                                        int chunk = 256, NfeCounter* nfe = nullptr);

/// Composes the full score from (k+1)-state and k-state marginal scores.
Eigen::MatrixXd compose_full_score_kp1(const LocalScoreFn& local_kp1, const LocalScoreFn& local_k,
                                       const Eigen::MatrixXd& x, int k, double t);

/// Reconstruction-guidance term for a batch of windows (W * D, n) with dense window
/// observations (D x W each, given as a mask and values per column). r2 is r_t^2.
Eigen::MatrixXd guidance_score(EpsModel& model, double t, const Eigen::MatrixXd& x, const WindowCond* cond,
                               const Eigen::MatrixXd& obs_mask, const Eigen::MatrixXd& obs_values, double sigma_y,
                               double r2);

/// Guided score of a full (D x L) sequence built from window predictions of an EpsModel.
class SequenceScore {
 public:
  SequenceScore(EpsModel& model, Eigen::Index D, Eigen::Index L, int chunk);

  /// Dense observations over the sequence (D x L); values in model space.
  void set_observations(const DenseObservations* obs, double sigma_y);
  /// Architectural conditioning; only valid when L == W.
  void set_condition(const WindowCond* cond);
  void set_r2(std::function<double(double)> r2) { r2_ = std::move(r2); }

  /// Full score; adds one forward batch per chunk to `phase`. eps_hat (optional) receives
  /// the composed noise prediction.
  void operator()(const Eigen::MatrixXd& x, double t, Eigen::MatrixXd& score, NfeCounter& nfe,
                  const std::string& phase, Eigen::MatrixXd* eps_hat = nullptr);

 private:
  EpsModel& model_;
  Eigen::Index D_, L_;
  int W_, chunk_;
  const DenseObservations* obs_ = nullptr;
  double sigma_y_ = 0;
  const WindowCond* cond_ = nullptr;
  std::function<double(double)> r2_;
};

/// Predictor-corrector integration from x(t_max) down to t_min, then Tweedie.
Eigen::MatrixXd run_reverse(SequenceScore& score, Eigen::MatrixXd x, const RolloutPlan& plan, Rng& rng,
                            NfeCounter& nfe);

/// Tweedie estimate with optional percentile clipping.
Eigen::MatrixXd final_denoise(const Eigen::MatrixXd& x, const Eigen::MatrixXd& score, double t, bool threshold,
                              double percentile = 99.5);

struct SampleResult {
  Eigen::MatrixXd x;  // D x L, data units
  NfeCounter nfe;
};

/// All-at-once guided sampling of the full sequence. obs values are in data units.
/// x_tmax overrides the N(0, I) initial state (model space).
SampleResult sample_aao(EpsModel& model, Eigen::Index D, const ObservationSet& obs, const RolloutPlan& plan, Rng& rng,
                        const Eigen::MatrixXd* x_tmax = nullptr);

/// Autoregressive rollout with a joint model; past frames are guided as observations with
/// noise sigma_y. init holds at least C states (data units); the output starts with init.
SampleResult sample_ar_joint(EpsModel& model, const Eigen::MatrixXd& init, const ObservationSet& obs,
                             const RolloutPlan& plan, Rng& rng);

/// Autoregressive rollout with an amortised or universal model; past frames enter through
/// the conditioning channels and observations are guided on the predicted frames only.
SampleResult sample_ar_amortised(EpsModel& model, const Eigen::MatrixXd& init, const ObservationSet& obs,
                                 const RolloutPlan& plan, Rng& rng);

/// Deterministic rollout of the next-state regression baseline (W - 1 conditioning frames).
Eigen::MatrixXd rollout_mse(NetEpsModel& model, const Eigen::MatrixXd& init, int L, double data_mean,
                            double data_std);

/// Closed-form forward-batch counts.
std::int64_t aao_nfe(int L, int W, int chunk, int corrector_steps, int n_steps);
std::int64_t ar_steps(int L, int C, int P);

}  // namespace pdediff
