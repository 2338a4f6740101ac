#include "pdediff/pdesolve.hpp"

#include "pdediff/rng.hpp"
#include "pdediff/spectral.hpp"

#include <complex>
#include <exception>
#include <filesystem>
#include <functional>
#include <numbers>
#include <thread>

namespace pdediff {

namespace {

using cplx = std::complex<double>;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Fourth-order exponential time differencing Runge-Kutta in Fourier space for
/// u_t = L u - (u^2 / 2)_z with a diagonal linear symbol L(k). Coefficients follow the
/// contour-integral evaluation, which stays accurate where hL is near zero.
class Etdrk4 {
 public:
  Etdrk4(int n, double domain_length, double dt, const std::function<double(double)>& symbol)
      : fft_(n), n_(n) {
    const Eigen::Index m = fft_.modes();
    ik_.resize(m);
    dealias_.resize(m);
    E_.resize(m), E2_.resize(m), Q_.resize(m), f1_.resize(m), f2_.resize(m), f3_.resize(m);
    constexpr int kContour = 32;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double k = kTwoPi * static_cast<double>(j) / domain_length;
      ik_[j] = cplx(0.0, k);
      // 2/3 rule; the Nyquist mode is always dropped.
      dealias_[j] = (3 * j <= n && 2 * j != n) ? 1.0 : 0.0;
      const double hl = dt * symbol(k);
      E_[j] = std::exp(hl);
      E2_[j] = std::exp(hl / 2);
      cplx q = 0, a = 0, b = 0, c = 0;
      for (int r = 1; r <= kContour; ++r) {
        const cplx z = hl + std::exp(cplx(0.0, std::numbers::pi * (r - 0.5) / kContour));
        const cplx ez = std::exp(z), z3 = z * z * z;
        q += (std::exp(z / 2.0) - 1.0) / z;
        a += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
        b += (2.0 + z + ez * (z - 2.0)) / z3;
        c += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
      }
      Q_[j] = dt * (q / double(kContour)).real();
      f1_[j] = dt * (a / double(kContour)).real();
      f2_[j] = dt * (b / double(kContour)).real();
      f3_[j] = dt * (c / double(kContour)).real();
    }
  }

  void to_spectral(const Eigen::VectorXd& u, Eigen::VectorXcd& v) { fft_.forward(u, v); }
  void to_physical(const Eigen::VectorXcd& v, Eigen::VectorXd& u) { fft_.inverse(v, u); }

  void step(Eigen::VectorXcd& v) {
    nonlinear(v, nv_);
    a_ = E2_.cwiseProduct(v) + Q_.cwiseProduct(nv_);
    nonlinear(a_, na_);
    b_ = E2_.cwiseProduct(v) + Q_.cwiseProduct(na_);
    nonlinear(b_, nb_);
    c_ = E2_.cwiseProduct(a_) + Q_.cwiseProduct(2.0 * nb_ - nv_);
    nonlinear(c_, nc_);
    v = E_.cwiseProduct(v) + nv_.cwiseProduct(f1_) + 2.0 * (na_ + nb_).cwiseProduct(f2_) + nc_.cwiseProduct(f3_);
  }

 private:
  // -(1/2) d/dz (u^2), dealiased.
  void nonlinear(const Eigen::VectorXcd& v, Eigen::VectorXcd& out) {
    fft_.inverse(v, u_);
    u_ = u_.array().square();
    fft_.forward(u_, out);
    out = (-0.5 * ik_.array() * out.array() * dealias_.array()).matrix();
  }

  RealFft fft_;
  int n_;
  Eigen::VectorXcd ik_;
  Eigen::VectorXd dealias_, E_, E2_, Q_, f1_, f2_, f3_;
  Eigen::VectorXcd nv_, na_, nb_, nc_, a_, b_, c_;
  Eigen::VectorXd u_;
};

TrajectoryD integrate(const Field& init, const GridSpec& grid, const std::function<double(double)>& symbol) {
  grid.validate();
  require(init.size() == grid.solve_points(), ErrorCode::InvalidGrid,
          "initial field has " + std::to_string(init.size()) + " points, solve grid has " +
              std::to_string(grid.solve_points()));
  require(init.allFinite(), ErrorCode::NonFinite, "initial condition is not finite");
  const int n = grid.solve_points();
  Etdrk4 solver(n, grid.domain_length, grid.dt_solver, symbol);
  TrajectoryD out(grid.D, grid.n_steps_saved, grid.dt_save);
  // Saved states are spectrally truncated to D points (rather than point-subsampled) so the
  // mean mode carries over exactly.
  RealFft coarse(grid.D);
  Eigen::VectorXcd v, vc = Eigen::VectorXcd::Zero(grid.D / 2 + 1);
  Eigen::VectorXd u = init, uc;
  solver.to_spectral(u, v);
  const int substeps = grid.substeps();
  for (int l = 0; l < grid.n_steps_saved; ++l) {
    if (l > 0) {
      for (int s = 0; s < substeps; ++s) solver.step(v);
      solver.to_physical(v, u);
    }
    const double peak = u.cwiseAbs().maxCoeff();
    if (!std::isfinite(peak) || peak > kBlowUpBound) {
      throw Error(ErrorCode::NonFinite, "solution blew up at saved step " + std::to_string(l));
    }
    if (grid.solve_factor == 1) {
      out.data.col(l) = u;
    } else {
      vc.head(grid.D / 2) = v.head(grid.D / 2) / static_cast<double>(grid.solve_factor);
      coarse.inverse(vc, uc);
      out.data.col(l) = uc;
    }
  }
  return out;
}

}  // namespace

int GridSpec::substeps() const {
  const double ratio = dt_save / dt_solver;
  return static_cast<int>(std::lround(ratio));
}

void GridSpec::validate() const {
  require(D >= 2 && D % 2 == 0, ErrorCode::InvalidGrid, "D must be even and >= 2");
  require(solve_factor >= 1, ErrorCode::InvalidGrid, "solve_factor must be >= 1");
  require(domain_length > 0 && dt_solver > 0 && dt_save > 0, ErrorCode::InvalidGrid,
          "lengths and steps must be positive");
  require(n_steps_saved >= 1, ErrorCode::InvalidGrid, "n_steps_saved must be >= 1");
  const double ratio = dt_save / dt_solver;
  require(ratio >= 1.0 - 1e-9 && std::abs(ratio - std::round(ratio)) < 1e-6 * ratio, ErrorCode::InvalidGrid,
          "dt_save must be an integer multiple of dt_solver");
}

std::string to_string(PdeKind kind) { return kind == PdeKind::Burgers ? "burgers" : "ks"; }

PdeKind parse_pde_kind(const std::string& name) {
  if (name == "burgers") return PdeKind::Burgers;
  if (name == "ks") return PdeKind::KS;
  throw Error(ErrorCode::Usage, "unknown PDE '" + name + "' (expected burgers or ks)");
}

TrajectoryD solve_burgers(const Field& init, const GridSpec& grid, const BurgersParams& params) {
  require(params.viscosity > 0, ErrorCode::InvalidArgument, "viscosity must be positive");
  const double nu = params.viscosity;
  return integrate(init, grid, [nu](double k) { return -nu * k * k; });
}

TrajectoryD solve_ks(const Field& init, const GridSpec& grid, const KSParams& params) {
  require(params.viscosity > 0, ErrorCode::InvalidArgument, "viscosity must be positive");
  const double nu = params.viscosity;
  return integrate(init, grid, [nu](double k) { return k * k - nu * k * k * k * k; });
}

double grf_pointwise_variance(int n, double domain_length, const BurgersParams& p) {
  double total = 0;
  for (int j = 0; 2 * j < n; ++j) {
    const double k = kTwoPi * j / domain_length;
    const double lambda = p.grf_scale * p.grf_scale * std::pow(k * k + p.grf_k0 * p.grf_k0, -p.grf_power);
    total += (j == 0 ? 1.0 : 2.0) * lambda;
  }
  return total / domain_length;
}

Field sample_burgers_grf(int n, double domain_length, const BurgersParams& p, std::uint64_t seed) {
  require(n >= 2 && n % 2 == 0, ErrorCode::InvalidGrid, "GRF grid must be even");
  require(domain_length > 0 && p.grf_k0 > 0 && p.grf_power > 0, ErrorCode::InvalidArgument,
          "invalid GRF parameters");
  Rng rng(seed);
  // Real Karhunen-Loeve expansion in the L2-orthonormal Fourier basis; Nyquist mode omitted.
  Eigen::VectorXcd coeff = Eigen::VectorXcd::Zero(n / 2 + 1);
  for (int j = 0; 2 * j < n; ++j) {
    const double k = kTwoPi * j / domain_length;
    const double lambda = p.grf_scale * p.grf_scale * std::pow(k * k + p.grf_k0 * p.grf_k0, -p.grf_power);
    if (j == 0) {
      coeff[0] = std::sqrt(lambda) * rng.normal() * n;
    } else {
      const double a = rng.normal(), b = rng.normal();
      // u = sqrt(2 lambda) (a cos + b sin) maps to the half spectrum as n/2 * sqrt(2 lambda) (a - i b).
      coeff[j] = 0.5 * n * std::sqrt(2.0 * lambda) * cplx(a, -b);
    }
  }
  RealFft fft(n);
  Eigen::VectorXd u;
  fft.inverse(coeff, u);
  return u / std::sqrt(domain_length);
}

Field sample_ks_fourier(int n, double domain_length, const KSParams& p, std::uint64_t seed) {
  require(p.init_n_modes >= 1, ErrorCode::InvalidArgument, "KS initial condition needs >= 1 mode");
  require(p.freq_min <= p.freq_max && p.amp_min <= p.amp_max && p.phase_min <= p.phase_max,
          ErrorCode::InvalidArgument, "KS initial-condition ranges must be ordered");
  Rng rng(seed);
  Field u = Field::Zero(n);
  for (int m = 0; m < p.init_n_modes; ++m) {
    const double amp = rng.uniform(p.amp_min, p.amp_max);
    const double phase = rng.uniform(p.phase_min, p.phase_max);
    const auto freq = static_cast<double>(rng.integer(p.freq_min, p.freq_max));
    for (int i = 0; i < n; ++i) {
      const double z = domain_length * i / n;
      u[i] += amp * std::sin(kTwoPi * freq * z / domain_length + phase);
    }
  }
  return u;
}

Field sample_initial_condition(const PdeSpec& spec, std::uint64_t seed) {
  const int n = spec.grid.solve_points();
  if (spec.kind == PdeKind::Burgers) return sample_burgers_grf(n, spec.grid.domain_length, spec.burgers, seed);
  return sample_ks_fourier(n, spec.grid.domain_length, spec.ks, seed);
}

TrajectoryD solve(const PdeSpec& spec, const Field& init) {
  if (spec.kind == PdeKind::Burgers) return solve_burgers(init, spec.grid, spec.burgers);
  return solve_ks(init, spec.grid, spec.ks);
}

TrajectoryD generate_trajectory(const DatasetSpec& spec, std::uint64_t seed, const std::string& split, int index,
                                int length) {
  PdeSpec pde = spec.pde;
  pde.grid.n_steps_saved = length + spec.burn_in;
  const Field init = sample_initial_condition(pde, substream(seed, "data/" + split, static_cast<std::uint64_t>(index)));
  TrajectoryD full = solve(pde, init);
  if (spec.burn_in == 0) return full;
  TrajectoryD out(full.width(), length, full.dt_save);
  out.data = full.data.rightCols(length);
  return out;
}

namespace {

std::vector<TrajectoryD> generate_split(const DatasetSpec& spec, std::uint64_t seed, const std::string& split,
                                        int count, int length, int threads) {
  std::vector<TrajectoryD> out(static_cast<std::size_t>(count));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  auto work = [&](int worker, int n_workers) {
    for (int i = worker; i < count; i += n_workers) {
      try {
        out[i] = generate_trajectory(spec, seed, split, i, length);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n_workers = std::max(1, std::min(threads, count));
  if (n_workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(work, w, n_workers);
    for (auto& t : pool) t.join();
  }
  for (int i = 0; i < count; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw Error(e.code(), split + " trajectory " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

DatasetSummary generate_dataset(const DatasetSpec& spec, std::uint64_t seed, const std::string& dir, int threads) {
  require(spec.n_train >= 0 && spec.n_valid >= 0 && spec.n_test >= 0, ErrorCode::InvalidArgument,
          "dataset counts must be non-negative");
  spec.pde.grid.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::IoError, "cannot create directory " + dir);

  const auto train = generate_split(spec, seed, "train", spec.n_train, spec.length_train, threads);
  const auto valid = generate_split(spec, seed, "valid", spec.n_valid, spec.length_test, threads);
  const auto test = generate_split(spec, seed, "test", spec.n_test, spec.length_test, threads);

  DatasetSummary summary;
  summary.n_train = spec.n_train;
  summary.n_valid = spec.n_valid;
  summary.n_test = spec.n_test;
  summary.D = spec.pde.grid.D;
  summary.length_train = spec.length_train;
  summary.length_test = spec.length_test;
  // Statistics of the stored (f32) values, so normalisation matches what readers see.
  std::vector<TrajectoryD> train_f32 = train;
  for (auto& tr : train_f32) tr.data = tr.data.cast<float>().cast<double>();
  summary.stats = compute_stats(train_f32);

  auto emit = [&](const std::string& name, const std::vector<TrajectoryD>& set, int length) {
    PdetHeader shape;
    shape.length = static_cast<std::uint32_t>(length);
    shape.width = static_cast<std::uint32_t>(spec.pde.grid.D);
    shape.dt_save = spec.pde.grid.dt_save;
    const std::string path = dir + "/" + name + ".pdet";
    write_pdet(path, set, DType::F32, shape);
    write_stats(path + ".stats", summary.stats);
  };
  emit("train", train, spec.length_train);
  emit("valid", valid, spec.length_test);
  emit("test", test, spec.length_test);
  return summary;
}

}  // namespace pdediff
