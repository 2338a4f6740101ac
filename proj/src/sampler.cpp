#include "pdediff/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace pdediff {

void NfeCounter::add(const std::string& phase, std::int64_t n) {
  phases[phase] += n;
  if (phase != "denoise") forward_evals += n;
}

NfeCounter& NfeCounter::operator+=(const NfeCounter& o) {
  forward_evals += o.forward_evals;
  for (const auto& [k, v] : o.phases) phases[k] += v;
  return *this;
}

void RolloutPlan::validate_common() const {
  require(W >= 1 && W % 2 == 1, ErrorCode::InvalidArgument, "window must be odd");
  require(L >= 1, ErrorCode::InvalidArgument, "sequence length must be positive");
  require(corrector_steps >= 0, ErrorCode::InvalidArgument, "corrector steps must be >= 0");
  require(corrector_snr >= 0, ErrorCode::InvalidArgument, "corrector snr must be >= 0");
  require(chunk >= 1, ErrorCode::InvalidArgument, "chunk must be positive");
  require(data_std > 0, ErrorCode::InvalidArgument, "data std must be positive");
  require(threshold_percentile > 0 && threshold_percentile <= 100, ErrorCode::InvalidArgument,
          "threshold percentile must lie in (0, 100]");
  schedule.validate();
  guidance.validate();
}

void RolloutPlan::validate_ar() const {
  validate_common();
  require(P + C == W, ErrorCode::InvalidArgument, "AR rollout needs P + C = W");
  require(P >= 1 && C >= 0, ErrorCode::InvalidArgument, "AR rollout needs P >= 1 and C >= 0");
}

double RolloutPlan::r2_at(double t) const { return r2 ? r2(t) : guidance_variance(t, guidance); }

Eigen::MatrixXd predictor_update(const Eigen::MatrixXd& x, const Eigen::MatrixXd& score, double t_from, double t_to) {
  require(t_to > 0 && t_from >= t_to, ErrorCode::OutOfRange, "predictor needs t_from >= t_to > 0");
  if (t_from == t_to) return x;
  const double h = log_snr(t_to) - log_snr(t_from);
  const Eigen::MatrixXd eps = -sigma(t_from) * score;
  return (mu(t_to) / mu(t_from)) * x - sigma(t_to) * std::expm1(h) * eps;
}

Eigen::MatrixXd predictor_step(const ScoreFn& score_fn, const Eigen::MatrixXd& x, double t_from, double t_to) {
  Eigen::MatrixXd s;
  score_fn(x, t_from, s);
  return predictor_update(x, s, t_from, t_to);
}

Eigen::MatrixXd corrector_update(const Eigen::MatrixXd& x, const Eigen::MatrixXd& score, double t, double snr,
                                 Rng& rng) {
  const Eigen::MatrixXd z = rng.normal_matrix(x.rows(), x.cols());
  const double sn = score.norm();
  const double delta = sn > 0 ? 2.0 * std::pow(snr * z.norm() / sn, 2) : snr * snr * sigma2(t);
  return x + delta * score + std::sqrt(2.0 * delta) * z;
}

Eigen::MatrixXd corrector_step(const ScoreFn& score_fn, const Eigen::MatrixXd& x, double t, double snr, Rng& rng) {
  Eigen::MatrixXd s;
  score_fn(x, t, s);
  return corrector_update(x, s, t, snr, rng);
}

namespace {

// Positions [lo, hi] whose score is read from the window starting at s.
std::pair<Eigen::Index, Eigen::Index> owned(Eigen::Index s, Eigen::Index L, int W) {
  const Eigen::Index k = W / 2, last = L - W;
  return {s == 0 ? 0 : s + k, s == last ? L - 1 : s + k};
}

Eigen::MatrixXd gather_windows(const Eigen::MatrixXd& x, Eigen::Index first, Eigen::Index n, int len) {
  const Eigen::Index D = x.rows();
  Eigen::MatrixXd w(D * len, n);
  for (Eigen::Index j = 0; j < n; ++j)
    w.col(j) = Eigen::Map<const Eigen::VectorXd>(x.col(first + j).data(), D * len);
  return w;
}

}  // namespace

Eigen::MatrixXd compose_full_score_2kp1(const LocalScoreFn& local, const Eigen::MatrixXd& x, int W, double t,
                                        int chunk, NfeCounter* nfe) {
  require(W >= 1 && W % 2 == 1, ErrorCode::InvalidArgument, "window must be odd");
  require(chunk >= 1, ErrorCode::InvalidArgument, "chunk must be positive");
  const Eigen::Index D = x.rows(), L = x.cols();
  require(L >= W, ErrorCode::TooShort, "sequence shorter than the window");
  Eigen::MatrixXd out(D, L);
  const Eigen::Index n_windows = L - W + 1;
  for (Eigen::Index c0 = 0; c0 < n_windows; c0 += chunk) {
    const Eigen::Index n = std::min<Eigen::Index>(chunk, n_windows - c0);
    const Eigen::MatrixXd s = local(gather_windows(x, c0, n, W), t);
    if (nfe) nfe->add("compose");
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto [lo, hi] = owned(c0 + j, L, W);
      for (Eigen::Index i = lo; i <= hi; ++i) out.col(i) = s.col(j).segment((i - c0 - j) * D, D);
    }
  }
  return out;
}

Eigen::MatrixXd compose_full_score_kp1(const LocalScoreFn& local_kp1, const LocalScoreFn& local_k,
                                       const Eigen::MatrixXd& x, int k, double t) {
  require(k >= 1, ErrorCode::InvalidArgument, "Markov order must be >= 1");
  const Eigen::Index D = x.rows(), L = x.cols();
  require(L >= k + 1, ErrorCode::TooShort, "sequence shorter than k + 1 states");
  // (k+1)-window ending at j starts at j - k; k-window ending at m starts at m - k + 1.
  const Eigen::MatrixXd big = local_kp1(gather_windows(x, 0, L - k, k + 1), t);
  Eigen::MatrixXd small;
  if (L - k - 1 > 0) small = local_k(gather_windows(x, 1, L - k - 1, k), t);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(D, L);
  for (Eigen::Index i = 0; i < L; ++i) {
    for (Eigen::Index j = std::max<Eigen::Index>(i, k); j <= std::min<Eigen::Index>(i + k, L - 1); ++j)
      out.col(i) += big.col(j - k).segment((i - (j - k)) * D, D);
    for (Eigen::Index m = std::max<Eigen::Index>(i, k); m <= std::min<Eigen::Index>(i + k - 1, L - 2); ++m)
      out.col(i) -= small.col(m - k).segment((i - (m - k + 1)) * D, D);
  }
  return out;
}

Eigen::MatrixXd guidance_score(EpsModel& model, double t, const Eigen::MatrixXd& x, const WindowCond* cond,
                               const Eigen::MatrixXd& obs_mask, const Eigen::MatrixXd& obs_values, double sigma_y,
                               double r2) {
  require(t > 0, ErrorCode::OutOfRange, "guidance needs t > 0");
  require(obs_mask.rows() == x.rows() && obs_mask.cols() == x.cols() && obs_values.rows() == x.rows() &&
              obs_values.cols() == x.cols(),
          ErrorCode::ShapeMismatch, "observation planes must match the window batch");
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  if ((obs_mask.array() == 0).all()) return g;
  const double m = mu(t), s = sigma(t), prec = 1.0 / (r2 + sigma_y * sigma_y);
  Eigen::MatrixXd u;
  auto cot = [&](const Eigen::MatrixXd& eps, Eigen::MatrixXd& c) {
    const Eigen::MatrixXd xhat = (x - s * eps) / m;
    u = obs_mask.cwiseProduct(obs_values - xhat) * prec;
    c = u;
  };
  Eigen::MatrixXd eps, vjp;
  model.eps_vjp(x, t, cond, cot, eps, vjp);
  return (u - s * vjp) / m;
}

SequenceScore::SequenceScore(EpsModel& model, Eigen::Index D, Eigen::Index L, int chunk)
    : model_(model), D_(D), L_(L), W_(model.window()), chunk_(chunk) {
  require(L_ >= W_, ErrorCode::TooShort, "sequence shorter than the model window");
  require(chunk_ >= 1, ErrorCode::InvalidArgument, "chunk must be positive");
}

void SequenceScore::set_observations(const DenseObservations* obs, double sigma_y) {
  if (obs) {
    require(obs->mask.rows() == D_ && obs->mask.cols() == L_, ErrorCode::ShapeMismatch,
            "dense observations do not match the sequence");
    if ((obs->mask.array() == 0).all()) obs = nullptr;
  }
  obs_ = obs;
  sigma_y_ = sigma_y;
}

void SequenceScore::set_condition(const WindowCond* cond) {
  require(!cond || L_ == W_, ErrorCode::InvalidArgument, "architectural conditioning needs a single window");
  cond_ = cond;
}

void SequenceScore::operator()(const Eigen::MatrixXd& x, double t, Eigen::MatrixXd& score, NfeCounter& nfe,
                               const std::string& phase, Eigen::MatrixXd* eps_hat) {
  require(x.rows() == D_ && x.cols() == L_, ErrorCode::ShapeMismatch, "sequence shape mismatch");
  require(t > 0, ErrorCode::OutOfRange, "score needs t > 0");
  const double m = mu(t), s = sigma(t);
  const Eigen::Index n_windows = L_ - W_ + 1;
  Eigen::MatrixXd E(D_, L_);
  Eigen::MatrixXd V, JTV;
  double prec = 0;
  if (obs_) {
    V = Eigen::MatrixXd::Zero(D_, L_);
    JTV = Eigen::MatrixXd::Zero(D_, L_);
    prec = 1.0 / ((r2_ ? r2_(t) : 0.0) + sigma_y_ * sigma_y_);
  }
  Eigen::MatrixXd eps, vjp;
  for (Eigen::Index c0 = 0; c0 < n_windows; c0 += chunk_) {
    const Eigen::Index n = std::min<Eigen::Index>(chunk_, n_windows - c0);
    const Eigen::MatrixXd X = gather_windows(x, c0, n, W_);
    if (!obs_) {
      model_.eps(X, t, cond_, eps);
    } else {
      auto cot = [&](const Eigen::MatrixXd& e, Eigen::MatrixXd& c) {
        for (Eigen::Index j = 0; j < n; ++j) {
          const auto [lo, hi] = owned(c0 + j, L_, W_);
          for (Eigen::Index i = lo; i <= hi; ++i) {
            const Eigen::Index slot = (i - c0 - j) * D_;
            const Eigen::VectorXd xhat = (x.col(i) - s * e.col(j).segment(slot, D_)) / m;
            V.col(i) = obs_->mask.col(i).cwiseProduct(obs_->values.col(i) - xhat) * prec;
            c.col(j).segment(slot, D_) = V.col(i);
          }
        }
      };
      model_.eps_vjp(X, t, cond_, cot, eps, vjp);
      for (Eigen::Index j = 0; j < n; ++j)
        JTV.middleCols(c0 + j, W_) += Eigen::Map<const Eigen::MatrixXd>(vjp.col(j).data(), D_, W_);
    }
    nfe.add(phase);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto [lo, hi] = owned(c0 + j, L_, W_);
      for (Eigen::Index i = lo; i <= hi; ++i) E.col(i) = eps.col(j).segment((i - c0 - j) * D_, D_);
    }
  }
  score = -E / s;
  if (obs_) score += (V - s * JTV) / m;
  if (!score.allFinite()) throw Error(ErrorCode::NonFinite, "non-finite score at t = " + std::to_string(t));
  if (eps_hat) *eps_hat = std::move(E);
}

Eigen::MatrixXd final_denoise(const Eigen::MatrixXd& x, const Eigen::MatrixXd& score, double t, bool threshold,
                              double percentile) {
  Eigen::MatrixXd x0 = tweedie(x, score, t);
  if (!threshold || percentile >= 100.0 || x0.size() == 0) return x0;
  std::vector<double> a(static_cast<std::size_t>(x0.size()));
  for (Eigen::Index i = 0; i < x0.size(); ++i) a[i] = std::abs(x0.data()[i]);
  const auto rank = static_cast<std::size_t>(
      std::clamp<double>(std::ceil(percentile / 100.0 * static_cast<double>(a.size())) - 1, 0, a.size() - 1));
  std::nth_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(rank), a.end());
  const double lim = a[rank];
  return x0.cwiseMax(-lim).cwiseMin(lim);
}

Eigen::MatrixXd run_reverse(SequenceScore& score, Eigen::MatrixXd x, const RolloutPlan& plan, Rng& rng,
                            NfeCounter& nfe) {
  const auto times = time_grid(plan.time_grid, plan.schedule);
  Eigen::MatrixXd s;
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    score(x, times[i], s, nfe, "predictor");
    x = predictor_update(x, s, times[i], times[i + 1]);
    for (int c = 0; c < plan.corrector_steps; ++c) {
      score(x, times[i + 1], s, nfe, "corrector");
      x = corrector_update(x, s, times[i + 1], plan.corrector_snr, rng);
    }
  }
  score(x, times.back(), s, nfe, "denoise");
  return final_denoise(x, s, times.back(), plan.threshold, plan.threshold_percentile);
}

namespace {

ObservationSet normalised(const ObservationSet& obs, const RolloutPlan& plan) {
  ObservationSet o = obs;
  if (o.values.size()) o.values = (o.values.array() - plan.data_mean) / plan.data_std;
  o.sigma_y = obs.sigma_y / plan.data_std;
  return o;
}

Eigen::MatrixXd to_model(const Eigen::MatrixXd& x, const RolloutPlan& plan) {
  return (x.array() - plan.data_mean) / plan.data_std;
}

Eigen::MatrixXd to_data(const Eigen::MatrixXd& x, const RolloutPlan& plan) {
  return x.array() * plan.data_std + plan.data_mean;
}

std::function<double(double)> r2_fn(const RolloutPlan& plan) {
  return [plan](double t) { return plan.r2_at(t); };
}

}  // namespace

SampleResult sample_aao(EpsModel& model, Eigen::Index D, const ObservationSet& obs, const RolloutPlan& plan, Rng& rng,
                        const Eigen::MatrixXd* x_tmax) {
  plan.validate_common();
  require(plan.W == model.window(), ErrorCode::ShapeMismatch, "plan window differs from the model window");
  require(model.regime() == Regime::Joint || model.regime() == Regime::Universal, ErrorCode::RegimeMismatch,
          "all-at-once sampling needs a joint or universal model");
  require(plan.L >= plan.W, ErrorCode::TooShort, "sequence shorter than the model window");
  obs.validate(plan.L, D);
  const auto dense = scatter(normalised(obs, plan), plan.L, D);
  SequenceScore score(model, D, plan.L, plan.chunk);
  score.set_observations(obs.empty() ? nullptr : &dense, plan.guidance.sigma_y / plan.data_std);
  score.set_r2(r2_fn(plan));
  Eigen::MatrixXd x;
  if (x_tmax) {
    require(x_tmax->rows() == D && x_tmax->cols() == plan.L, ErrorCode::ShapeMismatch, "initial state shape mismatch");
    x = *x_tmax;
  } else {
    x = rng.normal_matrix(D, plan.L);
  }
  SampleResult r;
  r.x = to_data(run_reverse(score, std::move(x), plan, rng, r.nfe), plan);
  return r;
}

namespace {

// Shared AR driver; `amortised` selects conditioning channels over guided past frames.
SampleResult sample_ar(EpsModel& model, const Eigen::MatrixXd& init, const ObservationSet& obs, const RolloutPlan& plan,
                       Rng& rng, bool amortised) {
  plan.validate_ar();
  const int W = plan.W, C = plan.C, P = plan.P, L = plan.L;
  require(W == model.window(), ErrorCode::ShapeMismatch, "plan window differs from the model window");
  const Eigen::Index D = init.rows();
  require(D >= 1, ErrorCode::ShapeMismatch, "initial states have no rows");
  require(init.cols() >= C, ErrorCode::InitTooShort,
          "need " + std::to_string(C) + " initial states, got " + std::to_string(init.cols()));
  obs.validate(L, D);
  const auto dense = scatter(normalised(obs, plan), L, D);
  const double sy = plan.guidance.sigma_y / plan.data_std;

  SampleResult r;
  Eigen::MatrixXd xs(D, std::max<Eigen::Index>(init.cols(), L) + W);
  xs.leftCols(init.cols()) = to_model(init, plan);
  Eigen::Index len = init.cols();
  while (len < L) {
    const Eigen::Index o = len - C;
    DenseObservations wobs{Eigen::MatrixXd::Zero(D, W), Eigen::MatrixXd::Zero(D, W)};
    for (int f = C; f < W; ++f) {
      if (o + f >= L) break;
      wobs.mask.col(f) = dense.mask.col(o + f);
      wobs.values.col(f) = dense.values.col(o + f);
    }
    Eigen::MatrixXd cond_values;
    WindowCond cond;
    SequenceScore score(model, D, W, plan.chunk);
    if (amortised) {
      cond_values = Eigen::MatrixXd::Zero(W * D, 1);
      cond.mask = Eigen::VectorXd::Zero(W);
      for (int f = 0; f < C; ++f) {
        cond_values.col(0).segment(f * D, D) = xs.col(o + f);
        cond.mask[f] = 1.0;
      }
      cond.values = &cond_values;
      score.set_condition(&cond);
    } else {
      for (int f = 0; f < C; ++f) {
        wobs.mask.col(f).setOnes();
        wobs.values.col(f) = xs.col(o + f);
      }
    }
    score.set_observations(&wobs, sy);
    score.set_r2(r2_fn(plan));
    const Eigen::MatrixXd w = run_reverse(score, rng.normal_matrix(D, W), plan, rng, r.nfe);
    xs.middleCols(len, P) = w.rightCols(P);
    len += P;
  }
  r.x = to_data(xs.leftCols(L), plan);
  return r;
}

}  // namespace

SampleResult sample_ar_joint(EpsModel& model, const Eigen::MatrixXd& init, const ObservationSet& obs,
                             const RolloutPlan& plan, Rng& rng) {
  require(model.regime() == Regime::Joint || model.regime() == Regime::Universal, ErrorCode::RegimeMismatch,
          "joint AR rollout needs a joint or universal model");
  require(plan.C >= 1 && plan.P <= plan.W - 1, ErrorCode::InvalidArgument, "joint AR rollout needs 1 <= P <= W - 1");
  return sample_ar(model, init, obs, plan, rng, false);
}

SampleResult sample_ar_amortised(EpsModel& model, const Eigen::MatrixXd& init, const ObservationSet& obs,
                                 const RolloutPlan& plan, Rng& rng) {
  switch (model.regime()) {
    case Regime::Amortised:
      require(plan.C == model.cond_frames(), ErrorCode::RegimeMismatch,
              "amortised model trained with C = " + std::to_string(model.cond_frames()) + ", driven with C = " +
                  std::to_string(plan.C));
      break;
    case Regime::Universal:
      require(plan.C >= 0 && plan.C <= plan.W - 1, ErrorCode::RegimeMismatch, "universal model needs C in [0, W-1]");
      break;
    default:
      throw Error(ErrorCode::RegimeMismatch, "amortised rollout needs an amortised or universal model");
  }
  return sample_ar(model, init, obs, plan, rng, true);
}

Eigen::MatrixXd rollout_mse(NetEpsModel& model, const Eigen::MatrixXd& init, int L, double data_mean,
                            double data_std) {
  const int W = model.window();
  require(model.regime() == Regime::MseBaseline, ErrorCode::RegimeMismatch, "rollout_mse needs an MSE baseline model");
  require(init.cols() >= W - 1, ErrorCode::InitTooShort, "MSE rollout needs W - 1 initial states");
  require(data_std > 0, ErrorCode::InvalidArgument, "data std must be positive");
  const Eigen::Index D = init.rows();
  const Eigen::Index n = std::max<Eigen::Index>(L, init.cols());
  Eigen::MatrixXd xs(D, n);
  xs.leftCols(init.cols()) = (init.array() - data_mean) / data_std;
  for (Eigen::Index len = init.cols(); len < L; ++len) {
    xs.col(len) = model.predict_next(xs.middleCols(len - (W - 1), W - 1));
    if (!xs.col(len).allFinite()) throw Error(ErrorCode::NonFinite, "MSE rollout diverged at state " + std::to_string(len));
  }
  return (xs.leftCols(std::min<Eigen::Index>(n, L)).array() * data_std + data_mean).matrix();
}

std::int64_t aao_nfe(int L, int W, int chunk, int corrector_steps, int n_steps) {
  const std::int64_t windows = L - W + 1;
  return static_cast<std::int64_t>(1 + corrector_steps) * n_steps * ((windows + chunk - 1) / chunk);
}

std::int64_t ar_steps(int L, int C, int P) { return L <= C ? 0 : (L - C + P - 1) / P; }

}  // namespace pdediff
