#include "pdediff/pipeline.hpp"
#include "pdediff/sampler.hpp"

namespace pdediff {

namespace {

GaussianAR ar1(double a, int L) {
  GaussianAR m;
  m.order = a == 0.0 ? 0 : 1;
  if (a != 0.0) m.coeffs = {a};
  m.innovation_var = 1.0 - a * a;
  m.length = L;
  return m;
}

LocalScoreFn shifted(LocalScoreFn f, double delta) {
  if (delta == 0.0) return f;
  return [f = std::move(f), delta](const Eigen::MatrixXd& x, double t) {
    return (f(x, t).array() + delta).matrix();
  };
}

class ShiftedEps : public EpsModel {
 public:
  ShiftedEps(EpsModel& inner, double delta) : inner_(inner), delta_(delta) {}
  int window() const override { return inner_.window(); }
  Regime regime() const override { return inner_.regime(); }
  int cond_frames() const override { return inner_.cond_frames(); }
  void eps(const Eigen::MatrixXd& x, double t, const WindowCond* c, Eigen::MatrixXd& out) override {
    inner_.eps(x, t, c, out);
    out.array() += delta_;
  }
  void eps_vjp(const Eigen::MatrixXd& x, double t, const WindowCond* c, const CotangentFn& cot, Eigen::MatrixXd& e,
               Eigen::MatrixXd& vjp) override {
    const double d = delta_;
    inner_.eps_vjp(
        x, t, c,
        [&](const Eigen::MatrixXd& eps, Eigen::MatrixXd& g) {
          const Eigen::MatrixXd shifted_eps = (eps.array() + d).matrix();
          cot(shifted_eps, g);
        },
        e, vjp);
    e.array() += d;
  }

 private:
  EpsModel& inner_;
  double delta_;
};

InvariantCheck below(std::string name, double residual, double tol) {
  return {std::move(name), residual, tol, std::isfinite(residual) && residual <= tol};
}

double composed_error(const GaussianOracle& o, int W, double t, std::uint64_t seed, double delta) {
  Rng rng(seed);
  const int L = o.size();
  const Eigen::MatrixXd x = rng.normal_matrix(1, L);
  const Eigen::MatrixXd c = compose_full_score_2kp1(shifted(oracle_local_score(o, W), delta), x, W, t);
  return (c.transpose() - o.noised_score(x.transpose(), t)).cwiseAbs().maxCoeff();
}

}  // namespace

std::vector<InvariantCheck> oracle_invariants(double delta) {
  std::vector<InvariantCheck> out;

  double e = 0;
  for (int W : {3, 5})
    for (int L = W; L <= 8; ++L)
      for (double t : {0.1, 0.5, 1.0}) e = std::max(e, composed_error(GaussianOracle(ar1(0.0, L)), W, t, L, delta));
  out.push_back(below("2k+1 composition exact (iid)", e, 1e-10));

  e = 0;
  for (int k = 1; k <= 3; ++k)
    for (int L = std::max(3, k + 1); L <= 8; ++L) {
      const GaussianOracle o(ar1(0.0, L));
      Rng rng(static_cast<std::uint64_t>(100 * k + L));
      const Eigen::MatrixXd x = rng.normal_matrix(1, L);
      const auto c = compose_full_score_kp1(shifted(oracle_local_score(o, k + 1), delta),
                                            shifted(oracle_local_score(o, k), delta), x, k, 0.7);
      e = std::max(e, (c.transpose() - o.noised_score(x.transpose(), 0.7)).cwiseAbs().maxCoeff());
    }
  out.push_back(below("k+1 composition exact (iid)", e, 1e-10));

  out.push_back(below("2k+1 composition exact at t = 0 (AR(1), k = 1)",
                      composed_error(GaussianOracle(ar1(0.9, 6)), 3, 0.0, 3, delta), 1e-10));

  {
    const GaussianOracle o(ar1(0.9, 16));
    double worst = -std::numeric_limits<double>::infinity(), prev = 0;
    for (int k = 1; k <= 4; ++k) {
      const double err = composed_error(o, 2 * k + 1, 0.5, 21, delta);
      if (k > 1) worst = std::max(worst, err - prev);
      prev = err;
    }
    InvariantCheck c{"2k+1 error decreases in k (AR(1), a = 0.9)", worst, 0.0, worst < 0};
    out.push_back(c);
  }

  {
    const int L = 7, W = 3;
    const GaussianOracle o(ar1(0.0, L));
    OracleEpsModel base(Eigen::MatrixXd::Identity(W, W), 1);
    ShiftedEps model(base, delta);
    ObservationSet obs;
    obs.indices = {{0, 0}, {3, 0}, {4, 0}};
    obs.values = Eigen::Vector3d(0.5, -1.2, 2.0);
    obs.sigma_y = 0.3;
    const auto dense = scatter(obs, L, 1);
    SequenceScore score(model, 1, L, 2);
    score.set_observations(&dense, obs.sigma_y);
    score.set_r2([](double t) { return sigma2(t) / (mu(t) * mu(t) + sigma2(t)); });
    Rng rng(9);
    e = 0;
    for (double t : {0.01, 0.2, 0.6, 1.0, 5.0}) {
      const Eigen::MatrixXd x = rng.normal_matrix(1, L);
      Eigen::MatrixXd s;
      NfeCounter nfe;
      score(x, t, s, nfe, "predictor");
      e = std::max(e, (s.transpose() - o.posterior_noised_score(obs, x.transpose(), t)).cwiseAbs().maxCoeff());
    }
    out.push_back(below("prior + guidance = exact posterior score (iid)", e, 1e-10));
  }

  {
    const int W = 5;
    const GaussianOracle o(ar1(0.6, W));
    OracleEpsModel base(o.cov(), 1);
    ShiftedEps model(base, delta);
    Rng rng(4);
    e = 0;
    for (double t : {0.05, 0.5, 2.0}) {
      const Eigen::MatrixXd x = rng.normal_matrix(W, 3);
      Eigen::MatrixXd eps;
      model.eps(x, t, nullptr, eps);
      for (int j = 0; j < 3; ++j)
        e = std::max(e, (eps.col(j) + sigma(t) * o.noised_score(x.col(j), t)).cwiseAbs().maxCoeff());
      // Tweedie of the exact score is the Gaussian posterior mean mu Sigma (mu^2 Sigma + sigma^2 I)^-1 x
      const Eigen::MatrixXd S = o.cov();
      const Eigen::MatrixXd K = mu(t) * S * (mu(t) * mu(t) * S + sigma2(t) * Eigen::MatrixXd::Identity(W, W)).inverse();
      const Eigen::MatrixXd tw = tweedie(x, (-eps / sigma(t)).eval(), t);
      e = std::max(e, (tw - K * x).cwiseAbs().maxCoeff());
    }
    out.push_back(below("oracle noise prediction and Tweedie mean (AR(1))", e, 1e-10));
  }

  {
    const int W = 3, D = 2;
    OracleEpsModel base(Eigen::MatrixXd::Identity(W, W), D);
    ShiftedEps model(base, delta);
    double worst = 0;
    for (int L : {3, 7, 12})
      for (int c : {0, 1, 2})
        for (int chunk : {1, 4, 256}) {
          RolloutPlan p;
          p.W = W;
          p.L = L;
          p.C = 1;
          p.P = W - 1;
          p.corrector_steps = c;
          p.chunk = chunk;
          p.time_grid.n_steps = 4;
          Rng rng(static_cast<std::uint64_t>(L * 100 + c * 10 + chunk));
          const auto r = sample_aao(model, D, ObservationSet{}, p, rng);
          worst = std::max(worst, std::abs(static_cast<double>(r.nfe.forward_evals - aao_nfe(L, W, chunk, c, 4))));
          for (int C = 1; C < W; ++C) {
            p.C = C;
            p.P = W - C;
            const auto a = sample_ar_joint(model, rng.normal_matrix(D, C), ObservationSet{}, p, rng);
            const auto expect = ar_steps(L, C, W - C) * (1 + c) * 4;
            worst = std::max(worst, std::abs(static_cast<double>(a.nfe.forward_evals - expect)));
          }
        }
    out.push_back(below("NFE counts match closed forms", worst, 0.0));
  }
  return out;
}

}  // namespace pdediff
