#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pdediff/sde.hpp"

using namespace pdediff;

TEST_CASE("kernel coefficients") {
  CHECK(mu(0.0) == 1.0);
  CHECK(sigma(0.0) == 0.0);
  CHECK(mu(60.0) < 1e-12);
  CHECK(sigma(60.0) == doctest::Approx(1.0));
  for (double t : {1e-8, 1e-3, 0.1, 0.5, 1.0, 3.0}) CHECK(std::abs(mu(t) * mu(t) + sigma2(t) - 1.0) < 1e-14);
  // expm1 keeps relative precision at tiny t.
  CHECK(sigma2(1e-12) == doctest::Approx(1e-12).epsilon(1e-9));
  CHECK_THROWS_AS(mu(-0.1), Error);
}

TEST_CASE("noise sample statistics") {
  Rng rng(4);
  const double t = 0.5, x0 = 1.7;
  const int n = 100000;
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(1, n, x0);
  const auto [xt, eps] = noise_sample(x, t, rng);
  const double m = xt.mean();
  const double v = (xt.array() - m).square().sum() / (n - 1);
  const double se_m = sigma(t) / std::sqrt(n);
  const double se_v = sigma2(t) * std::sqrt(2.0 / (n - 1));
  CHECK(std::abs(m - mu(t) * x0) < 3 * se_m);
  CHECK(std::abs(v - sigma2(t)) < 3 * se_v);
  // -eps / sigma is the conditional score of the kernel.
  const Eigen::MatrixXd target = -eps / sigma(t);
  const Eigen::MatrixXd exact = -(xt.array() - mu(t) * x0) / sigma2(t);
  CHECK((target - exact).cwiseAbs().maxCoeff() < 1e-10);

  const auto [x_zero, e_zero] = noise_sample(x, 0.0, rng);
  CHECK(x_zero == x);
}

TEST_CASE("tweedie") {
  Eigen::VectorXd xt(3);
  xt << 0.3, -1.2, 2.0;
  CHECK(tweedie(xt, Eigen::VectorXd::Zero(3), 0.0) == xt);
  // Unit Gaussian prior: noised score is -x, posterior mean mu x / (mu^2 + sigma^2).
  for (double t : {0.01, 0.3, 1.0}) {
    const Eigen::VectorXd post = mu(t) * xt / (mu(t) * mu(t) + sigma2(t));
    CHECK((tweedie(xt, (-xt).eval(), t) - post).cwiseAbs().maxCoeff() < 1e-12);
  }
  // With the exact kernel score, tweedie recovers x0.
  Rng rng(8);
  for (double t : {0.001, 0.2, 0.9}) {
    const Eigen::VectorXd x0 = rng.normal_matrix(5, 1);
    const Eigen::VectorXd x = mu(t) * x0 + sigma(t) * rng.normal_matrix(5, 1);
    const Eigen::VectorXd score = -(x - mu(t) * x0) / sigma2(t);
    CHECK((tweedie(x, score, t) - x0).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("guidance variance") {
  GuidanceConfig cfg{0.1, 0.0};
  CHECK(guidance_variance(1.0, cfg) == doctest::Approx(0.1 * (1 - std::exp(-1.0)) / std::exp(-1.0)).epsilon(1e-14));
  CHECK(guidance_variance(1e-9, cfg) < 1e-9);
  double prev = 0;
  for (int i = 1; i <= 100; ++i) {
    const double r = guidance_variance(i / 100.0, cfg);
    CHECK(r > prev);
    prev = r;
  }
  GuidanceConfig twice{0.2, 0.0};
  CHECK(guidance_variance(0.37, twice) == doctest::Approx(2 * guidance_variance(0.37, cfg)));
  CHECK_THROWS_AS(guidance_variance(0.0, cfg), Error);
}

TEST_CASE("drifts") {
  Eigen::VectorXd x(2);
  x << 1.0, -2.0;
  CHECK(pf_ode_drift(x, (-x).eval()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(reverse_drift(x, Eigen::VectorXd::Zero(2)) == -0.5 * x);
}

TEST_CASE("probability-flow ODE transports the noised marginal to the prior") {
  // Prior N(0, v0); marginal at t has variance v(t) = mu^2 v0 + sigma^2 and score -x / v(t).
  const double v0 = 0.25;
  auto var = [&](double t) { return mu(t) * mu(t) * v0 + sigma2(t); };
  const auto ts = time_grid(TimeGrid{128, Spacing::Linear}, NoiseSchedule{});
  // The flow is linear, so tracking the map of a unit latent gives the pushed-forward std.
  double x = std::sqrt(var(ts.front()));
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    auto f = [&](double xx, double t) { return -0.5 * xx + 0.5 * xx / var(t); };
    const double h = ts[i + 1] - ts[i];
    const double k1 = f(x, ts[i]);
    const double k2 = f(x + 0.5 * h * k1, ts[i] + 0.5 * h);
    x += h * k2;
  }
  const double w2 = std::abs(x - std::sqrt(v0));
  CHECK(w2 < 1e-2);
}

TEST_CASE("time grids") {
  const NoiseSchedule s{1e-3, 1.0};
  const auto one = time_grid(TimeGrid{1, Spacing::Linear}, s);
  REQUIRE(one.size() == 2);
  CHECK(one[0] == 1.0);
  CHECK(one[1] == 1e-3);
  const auto lin = time_grid(TimeGrid{4, Spacing::Linear}, s);
  for (int i = 0; i < 4; ++i) CHECK(lin[i] - lin[i + 1] == doctest::Approx((1.0 - 1e-3) / 4));
  for (auto spacing : {Spacing::Linear, Spacing::Quadratic}) {
    const auto g = time_grid(TimeGrid{128, spacing}, s);
    CHECK(g.front() == s.t_max);
    CHECK(g.back() == s.t_min);
    for (std::size_t i = 0; i + 1 < g.size(); ++i) CHECK(g[i] > g[i + 1]);
  }
  CHECK_THROWS_AS(time_grid(TimeGrid{4, Spacing::Linear}, NoiseSchedule{0.5, 0.2}), Error);
  CHECK(NoiseSchedule{}.t_max == 10.0);
  CHECK(TimeGrid{}.spacing == Spacing::Quadratic);
}
