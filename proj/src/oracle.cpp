#include "pdediff/oracle.hpp"

#include <Eigen/Eigenvalues>
#include <set>

namespace pdediff {

void GaussianAR::validate() const {
  require(order >= 0 && static_cast<int>(coeffs.size()) == order, ErrorCode::InvalidArgument,
          "AR order does not match the number of coefficients");
  require(innovation_var > 0, ErrorCode::InvalidArgument, "innovation variance must be positive");
  require(length >= 1 && dim >= 1, ErrorCode::InvalidArgument, "AR length and dim must be positive");
}

namespace {

Eigen::MatrixXd companion(const GaussianAR& m) {
  const int p = m.order;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
  for (int j = 0; j < p; ++j) A(0, j) = m.coeffs[j];
  for (int j = 1; j < p; ++j) A(j, j - 1) = 1.0;
  return A;
}

}  // namespace

Eigen::VectorXd autocovariance(const GaussianAR& m, int n) {
  m.validate();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(std::max(n, m.order));
  if (m.order == 0) {
    if (n > 0) g[0] = m.innovation_var;
    return g.head(n);
  }
  const int p = m.order;
  const Eigen::MatrixXd A = companion(m);
  const double rho = A.eigenvalues().cwiseAbs().maxCoeff();
  require(rho < 1.0, ErrorCode::NotStationary, "AR recursion is not stationary (spectral radius " +
                                                   std::to_string(rho) + ")");
  // Gamma = A Gamma A^T + q e1 e1^T, solved in vectorised form.
  Eigen::MatrixXd K = Eigen::MatrixXd::Identity(p * p, p * p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) K.block(i * p, j * p, p, p) -= A(i, j) * A;
  Eigen::VectorXd q = Eigen::VectorXd::Zero(p * p);
  q[0] = m.innovation_var;
  const Eigen::VectorXd vg = K.partialPivLu().solve(q);
  const Eigen::Map<const Eigen::MatrixXd> G(vg.data(), p, p);
  for (int h = 0; h < p; ++h) g[h] = G(0, h);
  for (int h = p; h < g.size(); ++h) {
    double s = 0;
    for (int j = 0; j < p; ++j) s += m.coeffs[j] * g[h - 1 - j];
    g[h] = s;
  }
  return g.head(n);
}

Eigen::MatrixXd joint_cov(const GaussianAR& m) {
  const Eigen::VectorXd g = autocovariance(m, m.length);
  const Eigen::Index L = m.length, d = m.dim;
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(L * d, L * d);
  for (Eigen::Index i = 0; i < L; ++i)
    for (Eigen::Index j = 0; j < L; ++j)
      for (Eigen::Index c = 0; c < d; ++c) S(i * d + c, j * d + c) = g[std::abs(i - j)];
  return S;
}

GaussianOracle::GaussianOracle(GaussianAR m) : m_(std::move(m)), cov_(joint_cov(m_)) {
  require(cov_.llt().info() == Eigen::Success, ErrorCode::NotStationary, "AR covariance is not positive definite");
}

std::vector<Eigen::Index> GaussianOracle::elements(const std::vector<int>& states) const {
  std::vector<Eigen::Index> e;
  for (int s : states) {
    require(s >= 0 && s < m_.length, ErrorCode::IndexOutOfRange, "state index " + std::to_string(s) + " out of range");
    for (int c = 0; c < m_.dim; ++c) e.push_back(static_cast<Eigen::Index>(s) * m_.dim + c);
  }
  return e;
}

Eigen::MatrixXd GaussianOracle::noised_block(const std::vector<Eigen::Index>& rows,
                                             const std::vector<Eigen::Index>& cols, double t) const {
  const double m2 = mu(t) * mu(t), s2 = sigma2(t);
  Eigen::MatrixXd B(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      B(i, j) = m2 * cov_(rows[i], cols[j]) + (rows[i] == cols[j] ? s2 : 0.0);
  return B;
}

Eigen::VectorXd GaussianOracle::noised_score(const Eigen::VectorXd& x, double t) const {
  require(x.size() == cov_.rows(), ErrorCode::ShapeMismatch, "oracle score input has the wrong size");
  check_time(t);
  std::shared_ptr<const Eigen::LLT<Eigen::MatrixXd>> f;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(t);
    if (it == cache_.end()) {
      const Eigen::MatrixXd Lam =
          mu(t) * mu(t) * cov_ + sigma2(t) * Eigen::MatrixXd::Identity(cov_.rows(), cov_.cols());
      it = cache_.emplace(t, std::make_shared<const Eigen::LLT<Eigen::MatrixXd>>(Lam)).first;
    }
    f = it->second;
  }
  return -f->solve(x);
}

Eigen::VectorXd GaussianOracle::local_noised_score(const std::vector<int>& states, const Eigen::VectorXd& x,
                                                   double t) const {
  const auto e = elements(states);
  require(x.size() == static_cast<Eigen::Index>(e.size()), ErrorCode::ShapeMismatch, "local score size mismatch");
  return -noised_block(e, e, t).llt().solve(x);
}

Eigen::VectorXd GaussianOracle::conditional_score(const std::vector<int>& target, const std::vector<int>& given,
                                                  const Eigen::VectorXd& x_given, const Eigen::VectorXd& x_target,
                                                  double t) const {
  std::set<int> a(target.begin(), target.end());
  for (int g : given) require(!a.count(g), ErrorCode::IndexOutOfRange, "target and given states overlap");
  const auto et = elements(target), eg = elements(given);
  require(x_target.size() == static_cast<Eigen::Index>(et.size()) &&
              x_given.size() == static_cast<Eigen::Index>(eg.size()),
          ErrorCode::ShapeMismatch, "conditional score size mismatch");
  if (eg.empty()) return -noised_block(et, et, t).llt().solve(x_target);
  const Eigen::MatrixXd Ltt = noised_block(et, et, t), Ltg = noised_block(et, eg, t);
  const Eigen::LLT<Eigen::MatrixXd> gg(noised_block(eg, eg, t));
  const Eigen::VectorXd mean = Ltg * gg.solve(x_given);
  const Eigen::MatrixXd C = Ltt - Ltg * gg.solve(Ltg.transpose());
  return -C.llt().solve(x_target - mean);
}

namespace {

// Observation rows of the full covariance: H Sigma.
Eigen::MatrixXd observed_rows(const Eigen::MatrixXd& S, const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd R(idx.size(), S.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) R.row(k) = S.row(idx[k]);
  return R;
}

}  // namespace

std::pair<Eigen::VectorXd, Eigen::MatrixXd> GaussianOracle::posterior_moments(const ObservationSet& obs) const {
  obs.validate(m_.length, m_.dim);
  const Eigen::Index n = cov_.rows();
  if (obs.empty()) return {Eigen::VectorXd::Zero(n), cov_};
  require(obs.values.size() == static_cast<Eigen::Index>(obs.size()), ErrorCode::ShapeMismatch,
          "observations carry no values");
  std::vector<Eigen::Index> idx;
  for (const auto& i : obs.indices) idx.push_back(static_cast<Eigen::Index>(i.t) * m_.dim + i.z);
  const Eigen::MatrixXd HS = observed_rows(cov_, idx);
  Eigen::MatrixXd Syy(idx.size(), idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) Syy.col(k) = HS.col(idx[k]);
  Syy.diagonal().array() += obs.sigma_y * obs.sigma_y;
  const Eigen::LLT<Eigen::MatrixXd> f(Syy);
  require(f.info() == Eigen::Success, ErrorCode::SingularSystem, "observation covariance is singular");
  Eigen::VectorXd mean = HS.transpose() * f.solve(obs.values);
  Eigen::MatrixXd cov = cov_ - HS.transpose() * f.solve(HS);
  cov = 0.5 * (cov + cov.transpose());
  if (obs.sigma_y == 0) {
    for (std::size_t k = 0; k < idx.size(); ++k) {
      mean[idx[k]] = obs.values[static_cast<Eigen::Index>(k)];
      cov.row(idx[k]).setZero();
      cov.col(idx[k]).setZero();
    }
  }
  return {mean, cov};
}

Eigen::VectorXd GaussianOracle::posterior_noised_score(const ObservationSet& obs, const Eigen::VectorXd& x,
                                                       double t) const {
  check_time(t);
  const auto [m0, c0] = posterior_moments(obs);
  // x_t | y ~ N(mu m0, mu^2 C0 + sigma^2 I)
  const double m = mu(t);
  const Eigen::MatrixXd C = m * m * c0 + sigma2(t) * Eigen::MatrixXd::Identity(c0.rows(), c0.cols());
  return -C.llt().solve(x - m * m0);
}

OracleEpsModel::OracleEpsModel(Eigen::MatrixXd window_cov, Eigen::Index D, Regime regime, int cond_frames)
    : cov_(std::move(window_cov)), D_(D), regime_(regime), cond_frames_(cond_frames) {
  require(cov_.rows() == cov_.cols() && cov_.rows() >= 1, ErrorCode::ShapeMismatch, "window covariance must be square");
  require(D_ >= 1, ErrorCode::InvalidArgument, "D must be positive");
}

OracleEpsModel::Factors OracleEpsModel::factors(const Eigen::VectorXd& mask, double t) const {
  const int W = window();
  std::vector<int> c, u;
  for (int f = 0; f < W; ++f) (mask[f] > 0.5 ? c : u).push_back(f);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(W, W);
  Eigen::MatrixXd mean_map = Eigen::MatrixXd::Zero(W, W);
  if (c.empty()) {
    S = cov_;
  } else {
    Eigen::MatrixXd Scc(c.size(), c.size()), Suc(u.size(), c.size()), Suu(u.size(), u.size());
    for (std::size_t i = 0; i < c.size(); ++i)
      for (std::size_t j = 0; j < c.size(); ++j) Scc(i, j) = cov_(c[i], c[j]);
    for (std::size_t i = 0; i < u.size(); ++i) {
      for (std::size_t j = 0; j < c.size(); ++j) Suc(i, j) = cov_(u[i], c[j]);
      for (std::size_t j = 0; j < u.size(); ++j) Suu(i, j) = cov_(u[i], u[j]);
    }
    const Eigen::LLT<Eigen::MatrixXd> fc(Scc);
    const Eigen::MatrixXd G = fc.solve(Suc.transpose()).transpose();  // Suc Scc^-1
    const Eigen::MatrixXd Schur = Suu - G * Suc.transpose();
    for (std::size_t i = 0; i < c.size(); ++i) mean_map(c[i], c[i]) = 1.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      for (std::size_t j = 0; j < c.size(); ++j) mean_map(u[i], c[j]) = G(i, j);
      for (std::size_t j = 0; j < u.size(); ++j) S(u[i], u[j]) = Schur(i, j);
    }
  }
  const double m = mu(t), s = sigma(t);
  const Eigen::MatrixXd Lam = m * m * S + s * s * Eigen::MatrixXd::Identity(W, W);
  return {s * Lam.llt().solve(Eigen::MatrixXd::Identity(W, W)), mean_map};
}

void OracleEpsModel::predict(const Eigen::MatrixXd& x, double t, const WindowCond* cond, Eigen::MatrixXd& out,
                             Eigen::MatrixXd* precision) const {
  const int W = window();
  require(x.rows() == W * D_, ErrorCode::ShapeMismatch, "window batch has the wrong height");
  check_time(t);
  require(t > 0, ErrorCode::OutOfRange, "oracle noise prediction needs t > 0");
  const bool has_cond = cond && cond->values;
  const Eigen::VectorXd mask = has_cond ? cond->mask : Eigen::VectorXd::Zero(W);
  const Factors f = factors(mask, t);
  const double m = mu(t);
  out.resize(x.rows(), x.cols());
  for (Eigen::Index n = 0; n < x.cols(); ++n) {
    Eigen::Map<const Eigen::MatrixXd> X(x.col(n).data(), D_, W);
    Eigen::Map<Eigen::MatrixXd> E(out.col(n).data(), D_, W);
    if (has_cond) {
      Eigen::Map<const Eigen::MatrixXd> Cv(cond->values->col(n).data(), D_, W);
      E.noalias() = (X - m * Cv * f.mean_map.transpose()) * f.scaled_precision;
    } else {
      E.noalias() = X * f.scaled_precision;
    }
  }
  if (precision) *precision = f.scaled_precision;
}

void OracleEpsModel::eps(const Eigen::MatrixXd& x, double t, const WindowCond* cond, Eigen::MatrixXd& out) {
  predict(x, t, cond, out, nullptr);
}

void OracleEpsModel::eps_vjp(const Eigen::MatrixXd& x, double t, const WindowCond* cond, const CotangentFn& cotangent,
                             Eigen::MatrixXd& eps_out, Eigen::MatrixXd& vjp_out) {
  Eigen::MatrixXd P;
  predict(x, t, cond, eps_out, &P);
  Eigen::MatrixXd cot = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  cotangent(eps_out, cot);
  vjp_out.resize(x.rows(), x.cols());
  const int W = window();
  for (Eigen::Index n = 0; n < x.cols(); ++n) {
    Eigen::Map<const Eigen::MatrixXd> G(cot.col(n).data(), D_, W);
    Eigen::Map<Eigen::MatrixXd> V(vjp_out.col(n).data(), D_, W);
    V.noalias() = G * P;
  }
}

LocalScoreFn oracle_local_score(const GaussianOracle& oracle, int len) {
  require(len >= 1 && len <= oracle.model().length, ErrorCode::OutOfRange, "local window longer than the oracle");
  const Eigen::MatrixXd S = oracle.cov().topLeftCorner(static_cast<Eigen::Index>(len) * oracle.model().dim,
                                                       static_cast<Eigen::Index>(len) * oracle.model().dim);
  return [S](const Eigen::MatrixXd& windows, double t) -> Eigen::MatrixXd {
    require(windows.rows() == S.rows(), ErrorCode::ShapeMismatch, "local window size mismatch");
    const Eigen::MatrixXd Lam = mu(t) * mu(t) * S + sigma2(t) * Eigen::MatrixXd::Identity(S.rows(), S.cols());
    return -Lam.llt().solve(windows);
  };
}

}  // namespace pdediff
