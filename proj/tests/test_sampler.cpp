#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pdediff/sampler.hpp"

using namespace pdediff;

namespace {

GaussianAR ar1(double a, int L) {
  GaussianAR m;
  m.order = a == 0.0 ? 0 : 1;
  if (a != 0.0) m.coeffs = {a};
  m.innovation_var = a == 0.0 ? 1.0 : 1.0 - a * a;  // unit marginal variance
  m.length = L;
  return m;
}

// eps(x) = A x + b applied per column: a linear probe with a known Jacobian.
class LinearEps : public EpsModel {
 public:
  LinearEps(Eigen::MatrixXd A, Eigen::VectorXd b, int W) : A_(std::move(A)), b_(std::move(b)), W_(W) {}
  int window() const override { return W_; }
  void eps(const Eigen::MatrixXd& x, double, const WindowCond*, Eigen::MatrixXd& out) override {
    out = (A_ * x).colwise() + b_;
  }
  void eps_vjp(const Eigen::MatrixXd& x, double t, const WindowCond* c, const CotangentFn& cot, Eigen::MatrixXd& e,
               Eigen::MatrixXd& vjp) override {
    eps(x, t, c, e);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(x.rows(), x.cols());
    cot(e, g);
    vjp = A_.transpose() * g;
  }

 private:
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
  int W_;
};

RolloutPlan plan_for(int W, int L, int steps = 128) {
  RolloutPlan p;
  p.W = W;
  p.L = L;
  p.P = W - 1;
  p.C = 1;
  p.time_grid.n_steps = steps;
  return p;
}

Eigen::MatrixXd exact_composed_error(const GaussianOracle& o, int W, double t, int L, std::uint64_t seed) {
  Rng rng(seed);
  const Eigen::MatrixXd x = rng.normal_matrix(1, L);
  const Eigen::MatrixXd c = compose_full_score_2kp1(oracle_local_score(o, W), x, W, t);
  const Eigen::VectorXd e = o.noised_score(x.transpose(), t);
  return c.transpose() - e;
}

}  // namespace

TEST_CASE("predictor trivial cases") {
  Rng rng(1);
  const Eigen::MatrixXd x = rng.normal_matrix(3, 4);
  const Eigen::MatrixXd s = rng.normal_matrix(3, 4);
  CHECK(predictor_update(x, s, 0.5, 0.5) == x);
  const Eigen::MatrixXd y = predictor_update(x, Eigen::MatrixXd::Zero(3, 4), 0.8, 0.3);
  CHECK((y - mu(0.3) / mu(0.8) * x).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(predictor_update(x, s, 0.3, 0.5), Error);
  CHECK_THROWS_AS(predictor_update(x, s, 0.3, 0.0), Error);
}

TEST_CASE("predictor converges to the linear flow map at first order") {
  const double v = 0.25;
  const ScoreFn score = [v](const Eigen::MatrixXd& x, double t, Eigen::MatrixXd& s) {
    s = -x / (mu(t) * mu(t) * v + sigma2(t));
  };
  const NoiseSchedule sched;
  Eigen::MatrixXd x0(1, 5);
  x0 << -2.0, -0.5, 0.1, 1.0, 3.0;
  auto scale = [v](double t) { return std::sqrt(mu(t) * mu(t) * v + sigma2(t)); };
  const Eigen::MatrixXd exact = x0 * scale(sched.t_min) / scale(sched.t_max);
  auto error = [&](int n) {
    const auto times = time_grid(TimeGrid{n}, sched);
    Eigen::MatrixXd x = x0;
    for (std::size_t i = 0; i + 1 < times.size(); ++i) x = predictor_step(score, x, times[i], times[i + 1]);
    return (x - exact).cwiseAbs().maxCoeff();
  };
  const double e128 = error(128), e256 = error(256), e1024 = error(1024);
  MESSAGE("flow map error " << e128 << " " << e256 << " " << e1024);
  CHECK(e256 / e128 == doctest::Approx(0.5).epsilon(0.1));
  CHECK(e1024 < 5e-3);
}

TEST_CASE("corrector trivial cases") {
  Rng a(2);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(4, 3, 0.7);
  const Eigen::MatrixXd s = -x;
  CHECK(corrector_update(x, s, 0.5, 0.0, a) == x);
  Rng c(3), d(3);
  CHECK(corrector_update(x, s, 0.5, 0.2, c) == corrector_update(x, s, 0.5, 0.2, d));
  // zero score falls back to delta = snr^2 sigma^2
  Rng e(4), f(4);
  const Eigen::MatrixXd z = f.normal_matrix(4, 3);
  const double delta = 0.04 * sigma2(0.5);
  CHECK((corrector_update(x, Eigen::MatrixXd::Zero(4, 3), 0.5, 0.2, e) - (x + std::sqrt(2 * delta) * z))
            .cwiseAbs()
            .maxCoeff() < 1e-15);
}

TEST_CASE("corrector leaves the noised marginal invariant") {
  const double t = 0.5, v = 1.0;
  const double var = mu(t) * mu(t) * v + sigma2(t);
  const ScoreFn score = [var](const Eigen::MatrixXd& x, double, Eigen::MatrixXd& s) { s = -x / var; };
  Rng rng(5);
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(1000, 1, 3.0);
  double m = 0, q = 0;
  int n = 0;
  for (int it = 0; it < 10000; ++it) {
    x = corrector_step(score, x, t, 0.16, rng);
    if (it >= 2000) {
      m += x.mean();
      q += x.squaredNorm() / static_cast<double>(x.size());
      ++n;
    }
  }
  m /= n;
  q /= n;
  CHECK(std::abs(m) < 0.05);
  CHECK(q - m * m == doctest::Approx(var).epsilon(0.05));
}

TEST_CASE("2k+1 composition is exact for iid sequences") {
  for (int W : {3, 5})
    for (int L = W; L <= 8; ++L) {
      const GaussianOracle o(ar1(0.0, L));
      for (double t : {0.1, 0.5, 1.0}) CHECK(exact_composed_error(o, W, t, L, 10 + L).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("2k+1 composition error decreases with the window") {
  const int L = 16;
  const GaussianOracle o(ar1(0.9, L));
  double prev = 1e300;
  for (int k = 1; k <= 4; ++k) {
    const double err = exact_composed_error(o, 2 * k + 1, 0.5, L, 21).cwiseAbs().maxCoeff();
    MESSAGE("k = " << k << " error " << err);
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("2k+1 composition basics") {
  const GaussianOracle o(ar1(0.6, 9));
  Rng rng(6);
  const Eigen::MatrixXd x = rng.normal_matrix(1, 5);
  const auto local = oracle_local_score(o, 5);
  CHECK((compose_full_score_2kp1(local, x, 5, 0.3) - local(x.transpose(), 0.3).transpose()).cwiseAbs().maxCoeff() ==
        0.0);
  const Eigen::MatrixXd y = rng.normal_matrix(1, 9);
  const auto local3 = oracle_local_score(o, 3);
  NfeCounter a, b;
  const Eigen::MatrixXd c1 = compose_full_score_2kp1(local3, y, 3, 0.3, 256, &a);
  const Eigen::MatrixXd c2 = compose_full_score_2kp1(local3, y, 3, 0.3, 2, &b);
  CHECK((c1 - c2).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(a.forward_evals == 1);
  CHECK(b.forward_evals == 4);
  CHECK_THROWS_AS(compose_full_score_2kp1(local3, rng.normal_matrix(1, 2), 3, 0.3), Error);
}

TEST_CASE("k+1 composition is exact at t = 0 and for iid data") {
  for (double a : {0.0, 0.5, 0.9})
    for (int k = 1; k <= 3; ++k)
      for (int L = std::max(3, k + 1); L <= 8; ++L) {
        const GaussianOracle o(ar1(a, L));
        Rng rng(static_cast<std::uint64_t>(100 * k + L));
        const Eigen::MatrixXd x = rng.normal_matrix(1, L);
        const auto c = compose_full_score_kp1(oracle_local_score(o, k + 1), oracle_local_score(o, k), x, k, 0.0);
        CHECK((c.transpose() - o.noised_score(x.transpose(), 0.0)).cwiseAbs().maxCoeff() < 1e-10);
        if (a == 0.0) {
          const auto ci = compose_full_score_kp1(oracle_local_score(o, k + 1), oracle_local_score(o, k), x, k, 0.7);
          CHECK((ci.transpose() - o.noised_score(x.transpose(), 0.7)).cwiseAbs().maxCoeff() < 1e-10);
        }
      }
}

TEST_CASE("both compositions are exact at t = 0 for AR(1) with k = 1") {
  const GaussianOracle o(ar1(0.9, 3));
  Rng rng(7);
  const Eigen::MatrixXd x = rng.normal_matrix(1, 3);
  const auto c2 = compose_full_score_kp1(oracle_local_score(o, 2), oracle_local_score(o, 1), x, 1, 0.0);
  const auto c3 = compose_full_score_2kp1(oracle_local_score(o, 3), x, 3, 0.0);
  const Eigen::VectorXd e = o.noised_score(x.transpose(), 0.0);
  CHECK((c2.transpose() - e).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((c3.transpose() - e).cwiseAbs().maxCoeff() < 1e-10);
  // at t > 0 both carry a finite residual
  const Eigen::VectorXd e5 = o.noised_score(x.transpose(), 0.5);
  const auto r2 = compose_full_score_kp1(oracle_local_score(o, 2), oracle_local_score(o, 1), x, 1, 0.5);
  CHECK(std::isfinite((r2.transpose() - e5).norm()));
  CHECK_THROWS_AS(compose_full_score_kp1(oracle_local_score(o, 2), oracle_local_score(o, 1), x.leftCols(1), 1, 0.5),
                  Error);
}

TEST_CASE("guidance score equals the analytic expression on a linear probe") {
  const int W = 3, D = 2, n = 4;
  Rng rng(8);
  const Eigen::MatrixXd A = 0.3 * rng.normal_matrix(W * D, W * D);
  const Eigen::VectorXd b = rng.normal_matrix(W * D, 1);
  LinearEps model(A, b, W);
  const Eigen::MatrixXd x = rng.normal_matrix(W * D, n);
  Eigen::MatrixXd mask = (rng.normal_matrix(W * D, n).array() > 0).cast<double>();
  const Eigen::MatrixXd y = rng.normal_matrix(W * D, n);
  const double t = 0.4, r2 = 0.05, sy = 0.1;
  const Eigen::MatrixXd g = guidance_score(model, t, x, nullptr, mask, y, sy, r2);
  const double m = mu(t), s = sigma(t);
  const Eigen::MatrixXd xhat = (x - s * ((A * x).colwise() + b)) / m;
  const Eigen::MatrixXd J = (Eigen::MatrixXd::Identity(W * D, W * D) - s * A) / m;
  const Eigen::MatrixXd expect = J.transpose() * mask.cwiseProduct(y - xhat) / (r2 + sy * sy);
  CHECK((g - expect).cwiseAbs().maxCoeff() < 1e-8);

  // scaling r^2 + sigma_y^2 by c scales the field by 1 / c
  const double c = 3.0;
  const Eigen::MatrixXd g3 = guidance_score(model, t, x, nullptr, mask, y, sy, c * (r2 + sy * sy) - sy * sy);
  CHECK((g3 * c - g).cwiseAbs().maxCoeff() < 1e-10);

  CHECK(guidance_score(model, t, x, nullptr, Eigen::MatrixXd::Zero(W * D, n), y, sy, r2).isZero());
}

TEST_CASE("guided sequence score is the exact posterior score in the iid oracle") {
  const int L = 7, W = 3;
  GaussianAR iid = ar1(0.0, L);
  const GaussianOracle o(iid);
  OracleEpsModel model(Eigen::MatrixXd::Identity(W, W), 1);
  ObservationSet obs;
  obs.indices = {{0, 0}, {3, 0}, {4, 0}};
  obs.values = Eigen::Vector3d(0.5, -1.2, 2.0);
  obs.sigma_y = 0.3;
  const auto dense = scatter(obs, L, 1);
  SequenceScore score(model, 1, L, 2);
  score.set_observations(&dense, obs.sigma_y);
  score.set_r2([](double t) { return sigma2(t) / (mu(t) * mu(t) + sigma2(t)); });
  Rng rng(9);
  for (double t : {0.01, 0.2, 0.6, 1.0}) {
    const Eigen::MatrixXd x = rng.normal_matrix(1, L);
    Eigen::MatrixXd s;
    NfeCounter nfe;
    score(x, t, s, nfe, "predictor");
    const Eigen::VectorXd exact = o.posterior_noised_score(obs, x.transpose(), t);
    CHECK((s.transpose() - exact).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(nfe.forward_evals == 3);
  }
}

TEST_CASE("final denoise") {
  Rng rng(10);
  const Eigen::MatrixXd x = rng.normal_matrix(4, 50);
  const Eigen::MatrixXd s = rng.normal_matrix(4, 50);
  const Eigen::MatrixXd tw = tweedie(x, s, 0.01);
  CHECK(final_denoise(x, s, 0.01, false) == tw);
  CHECK(final_denoise(x, s, 0.01, true, 100.0) == tw);
  const Eigen::MatrixXd c = final_denoise(x, s, 0.01, true, 50.0);
  const double lim = c.cwiseAbs().maxCoeff();
  CHECK(lim < tw.cwiseAbs().maxCoeff());
  CHECK((tw.cwiseAbs().array() <= lim).count() >= 100);

  // exact conditional score gives the exact posterior mean
  const int L = 5;
  const GaussianOracle o(ar1(0.0, L));
  ObservationSet obs;
  obs.indices = {{1, 0}, {2, 0}};
  obs.values = Eigen::Vector2d(0.7, -0.4);
  obs.sigma_y = 0.2;
  const double t = 0.3, m = mu(t), s2 = sigma2(t);
  const Eigen::VectorXd xt = rng.normal_matrix(L, 1);
  const Eigen::MatrixXd x0 =
      final_denoise(xt.transpose(), o.posterior_noised_score(obs, xt, t).transpose(), t, false);
  for (int l = 0; l < L; ++l) {
    const double h = (l == 1 || l == 2) ? 1.0 : 0.0;
    const double yv = l == 1 ? 0.7 : l == 2 ? -0.4 : 0.0;
    const double prec = 1.0 + m * m / s2 + h / 0.04;
    CHECK(std::abs(x0(0, l) - (m * xt[l] / s2 + h * yv / 0.04) / prec) < 1e-10);
  }
}

TEST_CASE("unconditional all-at-once samples of the iid oracle are standard normal") {
  const int L = 6, W = 3, D = 100, runs = 100;
  OracleEpsModel model(Eigen::MatrixXd::Identity(W, W), D);
  RolloutPlan p = plan_for(W, L);
  p.chunk = 3;
  p.corrector_steps = 1;
  Eigen::MatrixXd s1 = Eigen::MatrixXd::Zero(1, L), s2 = Eigen::MatrixXd::Zero(1, L);
  NfeCounter total;
  for (int r = 0; r < runs; ++r) {
    Rng rng(substream(11, "test/aao", static_cast<std::uint64_t>(r)));
    const auto out = sample_aao(model, D, ObservationSet{}, p, rng);
    s1 += out.x.colwise().sum();
    s2 += out.x.array().square().matrix().colwise().sum();
    if (r == 0) {
      CHECK(out.nfe.forward_evals == aao_nfe(L, W, p.chunk, 1, 128));
      CHECK(out.nfe.forward_evals == 2 * 128 * 2);
      CHECK(out.nfe.phases.at("denoise") == 2);
    }
  }
  const double n = D * runs;
  for (int l = 0; l < L; ++l) {
    const double m = s1(0, l) / n, v = s2(0, l) / n - m * m;
    CHECK(std::abs(m) < 0.05);
    CHECK(v == doctest::Approx(1.0).epsilon(0.05));
  }
}

TEST_CASE("dense observations pin the all-at-once sample") {
  const int L = 7, W = 3, D = 16;
  OracleEpsModel model(joint_cov(ar1(0.5, W)), D);
  TrajectoryD truth(D, L, 1.0);
  Rng rng(12);
  truth.data = rng.normal_matrix(D, L);
  const auto obs = sample_offline_obs(truth, 1.0, 0, 0.01, 3);
  RolloutPlan p = plan_for(W, L);
  const auto out = sample_aao(model, D, obs, p, rng);
  const double rmsd = std::sqrt((apply_A(obs, out.x) - obs.values).squaredNorm() / static_cast<double>(obs.size()));
  MESSAGE("dense RMSD " << rmsd);
  CHECK(rmsd < 0.03);

  // The AR samplers, started from the observed first frame.
  const auto dense = scatter(obs, L, D);
  const Eigen::MatrixXd init = dense.values.leftCols(1);
  OracleEpsModel universal(joint_cov(ar1(0.5, W)), D, Regime::Universal);
  p.C = 1;
  p.P = 2;
  for (auto* m : {&model, &universal}) {
    const auto x = m->regime() == Regime::Joint ? sample_ar_joint(*m, init, obs, p, rng).x
                                                : sample_ar_amortised(*m, init, obs, p, rng).x;
    const double r = std::sqrt((apply_A(obs, x) - obs.values).squaredNorm() / static_cast<double>(obs.size()));
    MESSAGE(to_string(m->regime()) << " AR dense RMSD " << r);
    CHECK(r < 0.03);
  }
}

TEST_CASE("all-at-once sampling is deterministic and honours normalisation") {
  const int L = 5, W = 3, D = 4;
  OracleEpsModel model(Eigen::MatrixXd::Identity(W, W), D);
  RolloutPlan p = plan_for(W, L, 16);
  p.data_mean = 2.0;
  p.data_std = 3.0;
  Rng a(13), b(13);
  const auto x = sample_aao(model, D, ObservationSet{}, p, a).x;
  CHECK(x == sample_aao(model, D, ObservationSet{}, p, b).x);
  Rng c(13);
  RolloutPlan q = p;
  q.data_mean = 0.0;
  q.data_std = 1.0;
  const auto y = sample_aao(model, D, ObservationSet{}, q, c).x;
  CHECK((x - (3.0 * y.array() + 2.0).matrix()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("joint AR rollout counts, append-only output, and errors") {
  const int W = 5, D = 3, L = 17;
  OracleEpsModel model(joint_cov(ar1(0.7, W)), D);
  RolloutPlan p = plan_for(W, L, 8);
  p.C = 2;
  p.P = 3;
  p.corrector_steps = 1;
  Rng rng(14);
  const Eigen::MatrixXd init = rng.normal_matrix(D, 2);
  const auto out = sample_ar_joint(model, init, ObservationSet{}, p, rng);
  CHECK(out.x.cols() == L);
  CHECK(out.x.leftCols(2) == init);
  CHECK(ar_steps(L, 2, 3) == 5);
  CHECK(out.nfe.forward_evals == 5 * 2 * 8);
  CHECK(out.nfe.phases.at("denoise") == 5);

  // longer init is kept verbatim; the rollout continues from its last C states
  const Eigen::MatrixXd init4 = rng.normal_matrix(D, 4);
  const auto out4 = sample_ar_joint(model, init4, ObservationSet{}, p, rng);
  CHECK(out4.x.leftCols(4) == init4);
  CHECK(out4.nfe.forward_evals == ar_steps(L, 4, 3) * 2 * 8);

  try {
    sample_ar_joint(model, init.leftCols(1), ObservationSet{}, p, rng);
    FAIL("expected InitTooShort");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InitTooShort);
  }
  RolloutPlan bad = p;
  bad.P = 2;
  CHECK_THROWS_AS(sample_ar_joint(model, init, ObservationSet{}, bad, rng), Error);
}

TEST_CASE("amortised rollout regimes") {
  const int W = 5, D = 2, L = 9;
  const Eigen::MatrixXd cov = joint_cov(ar1(0.7, W));
  RolloutPlan p = plan_for(W, L, 8);
  p.C = 2;
  p.P = 3;
  Rng rng(15);
  const Eigen::MatrixXd init = rng.normal_matrix(D, 2);
  OracleEpsModel fixed(cov, D, Regime::Amortised, 2);
  CHECK(sample_ar_amortised(fixed, init, ObservationSet{}, p, rng).x.cols() == L);
  OracleEpsModel other(cov, D, Regime::Amortised, 1);
  try {
    sample_ar_amortised(other, init, ObservationSet{}, p, rng);
    FAIL("expected RegimeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RegimeMismatch);
  }
  OracleEpsModel joint(cov, D);
  CHECK_THROWS_AS(sample_ar_amortised(joint, init, ObservationSet{}, p, rng), Error);
  OracleEpsModel universal(cov, D, Regime::Universal);
  for (int C = 1; C <= W - 1; ++C) {
    RolloutPlan q = p;
    q.C = C;
    q.P = W - C;
    const auto out = sample_ar_amortised(universal, rng.normal_matrix(D, C), ObservationSet{}, q, rng);
    CHECK(out.x.cols() == L);
    CHECK(out.nfe.forward_evals == ar_steps(L, C, W - C) * 8);
  }
}

TEST_CASE("AR rollouts track AR(1) conditional moments") {
  const double a = 0.8;
  const int W = 3, D = 4, L = 6, runs = 250;
  const Eigen::MatrixXd cov = joint_cov(ar1(a, W));
  OracleEpsModel universal(cov, D, Regime::Universal);
  OracleEpsModel joint(cov, D);
  RolloutPlan p = plan_for(W, L, 64);
  p.C = 1;
  p.P = 2;
  const Eigen::MatrixXd init = Eigen::MatrixXd::Constant(D, 1, 1.5);
  Eigen::VectorXd s1a = Eigen::VectorXd::Zero(L), s2a = Eigen::VectorXd::Zero(L), s1j = Eigen::VectorXd::Zero(L);
  for (int r = 0; r < runs; ++r) {
    Rng ra(substream(16, "test/ar", static_cast<std::uint64_t>(r)));
    const auto xa = sample_ar_amortised(universal, init, ObservationSet{}, p, ra).x;
    Rng rj(substream(17, "test/ar", static_cast<std::uint64_t>(r)));
    const auto xj = sample_ar_joint(joint, init, ObservationSet{}, p, rj).x;
    s1a += xa.colwise().sum().transpose();
    s2a += xa.array().square().matrix().colwise().sum().transpose();
    s1j += xj.colwise().sum().transpose();
  }
  const double n = D * runs;
  for (int l = 1; l < L; ++l) {
    const double mean = std::pow(a, l) * 1.5, var = 1 - std::pow(a, 2 * l);
    const double se = std::sqrt(var / n);
    const double ma = s1a[l] / n, va = s2a[l] / n - ma * ma;
    const double mj = s1j[l] / n;
    MESSAGE("l = " << l << " exact " << mean << " amortised " << ma << " joint " << mj);
    CHECK(std::abs(ma - mean) < 3 * se);
    CHECK(va == doctest::Approx(var).epsilon(0.15));
    // Guiding on past frames only approximates the conditional.
    CHECK(std::abs(mj - mean) < 0.2);
  }
}

TEST_CASE("window observations steer the amortised rollout only on predicted frames") {
  const int W = 3, D = 2, L = 5;
  OracleEpsModel universal(Eigen::MatrixXd::Identity(W, W), D, Regime::Universal);
  RolloutPlan p = plan_for(W, L, 64);
  p.C = 1;
  p.P = 2;
  ObservationSet obs;
  for (int t = 1; t < L; ++t)
    for (int z = 0; z < D; ++z) obs.indices.push_back({t, z});
  obs.values = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(obs.size()), -1.0, 1.0);
  obs.sigma_y = 0.01;
  Rng rng(18);
  const auto out = sample_ar_amortised(universal, Eigen::MatrixXd::Zero(D, 1), obs, p, rng);
  CHECK((apply_A(obs, out.x) - obs.values).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("network model vector-Jacobian product matches finite differences") {
  NetConfig cfg;
  cfg.window = 3;
  cfg.levels = {{8, 1}, {8, 1}};
  ScoreNet<float> net(cfg);
  Eigen::VectorXf params = net.init_params(4);
  Rng rng(19);
  for (Eigen::Index i = 0; i < params.size(); ++i) params[i] += 0.05f * static_cast<float>(rng.normal());
  const int D = 8;
  NetEpsModel model(cfg, params, D);
  const Eigen::MatrixXd x = rng.normal_matrix(3 * D, 2);
  const Eigen::MatrixXd g = rng.normal_matrix(3 * D, 2);
  Eigen::MatrixXd eps, vjp, e0;
  model.eps_vjp(x, 0.4, nullptr, [&](const Eigen::MatrixXd&, Eigen::MatrixXd& c) { c = g; }, eps, vjp);
  model.eps(x, 0.4, nullptr, e0);
  CHECK((eps - e0).cwiseAbs().maxCoeff() < 1e-6);
  const double h = 1e-2;
  for (int trial = 0; trial < 3; ++trial) {
    const Eigen::MatrixXd v = rng.normal_matrix(3 * D, 2);
    Eigen::MatrixXd ep, em;
    model.eps(x + h * v, 0.4, nullptr, ep);
    model.eps(x - h * v, 0.4, nullptr, em);
    const double fd = g.cwiseProduct(ep - em).sum() / (2 * h);
    const double an = vjp.cwiseProduct(v).sum();
    CHECK(std::abs(fd - an) < 1e-2 * std::max(1.0, std::abs(an)));
  }
}

TEST_CASE("MSE baseline rollout") {
  NetConfig cfg;
  cfg.window = 3;
  cfg.levels = {{8, 1}, {8, 1}};
  const int D = 8;
  NetEpsModel model(cfg, ScoreNet<float>(cfg).init_params(1), D, Regime::MseBaseline, 2);
  Rng rng(20);
  const Eigen::MatrixXd init = rng.normal_matrix(D, 2);
  const Eigen::MatrixXd out = rollout_mse(model, init, 6, 0.5, 2.0);
  CHECK(out.cols() == 6);
  CHECK((out.leftCols(2) - init).cwiseAbs().maxCoeff() < 1e-12);
  // a zero-initialised head predicts the normalised zero state
  CHECK((out.rightCols(4).array() - 0.5).abs().maxCoeff() < 1e-6);
  CHECK_THROWS_AS(rollout_mse(model, init.leftCols(1), 6, 0.0, 1.0), Error);
  NetEpsModel joint(cfg, ScoreNet<float>(cfg).init_params(1), D);
  CHECK_THROWS_AS(rollout_mse(joint, init, 6, 0.0, 1.0), Error);
}
