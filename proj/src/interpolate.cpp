#include "pdediff/interpolate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace pdediff {

namespace {

using i128 = __int128;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::int64_t kCoordLimit = std::int64_t{1} << 24;

i128 orient(const IPoint& a, const IPoint& b, const IPoint& c) {
  return i128(b.x - a.x) * (c.y - a.y) - i128(b.y - a.y) * (c.x - a.x);
}

// > 0 when d lies strictly inside the circumcircle of the ccw triangle (a, b, c)
int incircle(const IPoint& a, const IPoint& b, const IPoint& c, const IPoint& d) {
  const i128 adx = a.x - d.x, ady = a.y - d.y, bdx = b.x - d.x, bdy = b.y - d.y, cdx = c.x - d.x, cdy = c.y - d.y;
  const i128 ad = adx * adx + ady * ady, bd = bdx * bdx + bdy * bdy, cd = cdx * cdx + cdy * cdy;
  const i128 det = ad * (bdx * cdy - cdx * bdy) - bd * (adx * cdy - cdx * ady) + cd * (adx * bdy - bdx * ady);
  return det > 0 ? 1 : (det < 0 ? -1 : 0);
}

std::uint64_t edge_key(int u, int v) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) | static_cast<std::uint32_t>(v);
}

class Builder {
 public:
  explicit Builder(const std::vector<IPoint>& p) : p_(p) {}

  int add(int a, int b, int c) {
    const int id = static_cast<int>(tris_.size());
    tris_.push_back({a, b, c});
    alive_.push_back(true);
    emap_[edge_key(a, b)] = id;
    emap_[edge_key(b, c)] = id;
    emap_[edge_key(c, a)] = id;
    return id;
  }

  void kill(int t) {
    const auto& v = tris_[static_cast<std::size_t>(t)];
    for (int k = 0; k < 3; ++k) emap_.erase(edge_key(v[static_cast<std::size_t>(k)], v[static_cast<std::size_t>((k + 1) % 3)]));
    alive_[static_cast<std::size_t>(t)] = false;
  }

  int third(int t, int u, int v) const {
    for (int w : tris_[static_cast<std::size_t>(t)])
      if (w != u && w != v) return w;
    return -1;
  }

  // Lawson flips until every queued edge is locally Delaunay.
  void legalize(std::vector<std::pair<int, int>> stack) {
    while (!stack.empty()) {
      const auto [u, v] = stack.back();
      stack.pop_back();
      const auto i1 = emap_.find(edge_key(u, v)), i2 = emap_.find(edge_key(v, u));
      if (i1 == emap_.end() || i2 == emap_.end()) continue;
      const int t1 = i1->second, t2 = i2->second;
      const int w = third(t1, u, v), x = third(t2, v, u);
      if (incircle(p_[static_cast<std::size_t>(u)], p_[static_cast<std::size_t>(v)], p_[static_cast<std::size_t>(w)],
                   p_[static_cast<std::size_t>(x)]) <= 0)
        continue;
      kill(t1);
      kill(t2);
      add(w, u, x);
      add(w, x, v);
      stack.insert(stack.end(), {{u, x}, {x, v}, {v, w}, {w, u}});
    }
  }

  std::vector<std::array<int, 3>> result() const {
    std::vector<std::array<int, 3>> out;
    for (std::size_t t = 0; t < tris_.size(); ++t)
      if (alive_[t]) out.push_back(tris_[t]);
    return out;
  }

 private:
  const std::vector<IPoint>& p_;
  std::vector<std::array<int, 3>> tris_;
  std::vector<bool> alive_;
  std::unordered_map<std::uint64_t, int> emap_;
};

double orient_d(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double x, double y) {
  return (b.x() - a.x()) * (y - a.y()) - (b.y() - a.y()) * (x - a.x());
}

}  // namespace

Delaunay::Delaunay(std::vector<IPoint> points) : pts_(std::move(points)) {
  const auto n = pts_.size();
  for (const auto& p : pts_)
    require(std::abs(p.x) < kCoordLimit && std::abs(p.y) < kCoordLimit, ErrorCode::OutOfRange,
            "triangulation coordinates must stay below 2^24 in magnitude");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto at = [&](int i) -> const IPoint& { return pts_[static_cast<std::size_t>(i)]; };
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return at(a).x != at(b).x ? at(a).x < at(b).x : at(a).y < at(b).y;
  });
  for (std::size_t i = 1; i < n; ++i)
    require(!(at(order[i]) == at(order[i - 1])), ErrorCode::InvalidArgument, "duplicate interpolation site");
  nbrs_.assign(n, {});
  if (n < 3) return;

  std::size_t m = 2;
  while (m < n && orient(at(order[0]), at(order[1]), at(order[m])) == 0) ++m;
  if (m == n) return;

  // Fan the collinear prefix onto the first off-line point, then sweep.
  Builder b(pts_);
  std::vector<std::pair<int, int>> queue;
  const bool left = orient(at(order[0]), at(order[1]), at(order[m])) > 0;
  const int apex = order[m];
  std::vector<int> hull;
  for (std::size_t i = 0; i + 1 < m; ++i) {
    const int u = order[i], v = order[i + 1];
    if (left) b.add(u, v, apex);
    else b.add(v, u, apex);
    if (i > 0) queue.push_back({u, apex});
  }
  if (left) {
    hull.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
  } else {
    hull.assign(order.rbegin() + static_cast<std::ptrdiff_t>(n - m), order.rend());
  }
  hull.push_back(apex);
  b.legalize(queue);

  std::vector<char> visible;
  for (std::size_t k = m + 1; k < n; ++k) {
    const int p = order[k];
    const auto H = hull.size();
    visible.assign(H, 0);
    for (std::size_t i = 0; i < H; ++i) visible[i] = orient(at(hull[i]), at(hull[(i + 1) % H]), at(p)) < 0;
    std::size_t s = 0;
    while (!(visible[s] && !visible[(s + H - 1) % H])) ++s;
    std::size_t e = s;
    queue.clear();
    while (visible[e % H]) {
      const int u = hull[e % H], v = hull[(e + 1) % H];
      b.add(u, p, v);
      queue.push_back({u, v});
      ++e;
    }
    // hull vertices strictly between s and e are swallowed
    std::vector<int> next;
    next.reserve(H + 1);
    for (std::size_t i = 0; i < H; ++i) {
      const std::size_t off = (i + H - s) % H;
      if (off == 0) {
        next.push_back(hull[i]);
        next.push_back(p);
      } else if (off >= e - s) {
        next.push_back(hull[i]);
      }
    }
    hull.swap(next);
    b.legalize(queue);
  }
  tris_ = b.result();
  {
    std::unordered_map<std::uint64_t, int> owner;
    for (std::size_t t = 0; t < tris_.size(); ++t)
      for (int k = 0; k < 3; ++k)
        owner[edge_key(tris_[t][static_cast<std::size_t>(k)], tris_[t][static_cast<std::size_t>((k + 1) % 3)])] =
            static_cast<int>(t);
    adj_.assign(tris_.size(), {-1, -1, -1});
    for (std::size_t t = 0; t < tris_.size(); ++t)
      for (int k = 0; k < 3; ++k) {
        const int u = tris_[t][static_cast<std::size_t>((k + 1) % 3)], v = tris_[t][static_cast<std::size_t>((k + 2) % 3)];
        const auto it = owner.find(edge_key(v, u));
        if (it != owner.end()) adj_[t][static_cast<std::size_t>(k)] = it->second;
      }
  }

  for (const auto& t : tris_)
    for (int k = 0; k < 3; ++k) {
      auto& nb = nbrs_[static_cast<std::size_t>(t[static_cast<std::size_t>(k)])];
      for (int j = 1; j < 3; ++j) nb.push_back(t[static_cast<std::size_t>((k + j) % 3)]);
    }
  for (auto& nb : nbrs_) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }

  // bucket grid for point location
  std::int64_t xmin = pts_[0].x, xmax = xmin, ymin = pts_[0].y, ymax = ymin;
  for (const auto& q : pts_) {
    xmin = std::min(xmin, q.x);
    xmax = std::max(xmax, q.x);
    ymin = std::min(ymin, q.y);
    ymax = std::max(ymax, q.y);
  }
  const double w = static_cast<double>(xmax - xmin) + 1, h = static_cast<double>(ymax - ymin) + 1;
  cell_ = std::max(1.0, std::sqrt(w * h / static_cast<double>(tris_.size())));
  x0_ = static_cast<double>(xmin);
  y0_ = static_cast<double>(ymin);
  nx_ = static_cast<int>(w / cell_) + 1;
  ny_ = static_cast<int>(h / cell_) + 1;
  buckets_.assign(static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_), {});
  for (std::size_t t = 0; t < tris_.size(); ++t) {
    std::int64_t bx0 = xmax, bx1 = xmin, by0 = ymax, by1 = ymin;
    for (int v : tris_[t]) {
      bx0 = std::min(bx0, at(v).x);
      bx1 = std::max(bx1, at(v).x);
      by0 = std::min(by0, at(v).y);
      by1 = std::max(by1, at(v).y);
    }
    const int cx0 = static_cast<int>((static_cast<double>(bx0) - x0_) / cell_);
    const int cx1 = static_cast<int>((static_cast<double>(bx1) - x0_) / cell_);
    const int cy0 = static_cast<int>((static_cast<double>(by0) - y0_) / cell_);
    const int cy1 = static_cast<int>((static_cast<double>(by1) - y0_) / cell_);
    for (int cx = cx0; cx <= cx1; ++cx)
      for (int cy = cy0; cy <= cy1; ++cy)
        buckets_[static_cast<std::size_t>(cx) * static_cast<std::size_t>(ny_) + static_cast<std::size_t>(cy)].push_back(
            static_cast<int>(t));
  }
}

int Delaunay::locate(double x, double y, std::array<double, 3>& bary) const {
  if (tris_.empty()) return -1;
  const int cx = static_cast<int>(std::floor((x - x0_) / cell_)), cy = static_cast<int>(std::floor((y - y0_) / cell_));
  if (cx < 0 || cy < 0 || cx >= nx_ || cy >= ny_) return -1;
  for (int t : buckets_[static_cast<std::size_t>(cx) * static_cast<std::size_t>(ny_) + static_cast<std::size_t>(cy)]) {
    const auto& v = tris_[static_cast<std::size_t>(t)];
    Eigen::Vector2d P[3];
    for (int k = 0; k < 3; ++k) {
      const auto& q = pts_[static_cast<std::size_t>(v[static_cast<std::size_t>(k)])];
      P[k] = {static_cast<double>(q.x), static_cast<double>(q.y)};
    }
    const double area = orient_d(P[0], P[1], P[2].x(), P[2].y());
    const double b0 = orient_d(P[1], P[2], x, y) / area, b1 = orient_d(P[2], P[0], x, y) / area;
    const double b2 = 1.0 - b0 - b1;
    constexpr double tol = -1e-12;
    if (b0 >= tol && b1 >= tol && b2 >= tol) {
      bary = {b0, b1, b2};
      return t;
    }
  }
  return -1;
}

std::string to_string(InterpMethod m) {
  switch (m) {
    case InterpMethod::Linear: return "linear";
    case InterpMethod::Cubic: return "cubic";
    case InterpMethod::Nearest: return "nearest";
  }
  return "?";
}

InterpMethod parse_interp_method(const std::string& s) {
  if (s == "linear") return InterpMethod::Linear;
  if (s == "cubic") return InterpMethod::Cubic;
  if (s == "nearest") return InterpMethod::Nearest;
  throw Error(ErrorCode::Usage, "unknown interpolation method '" + s + "'");
}

Eigen::MatrixX2d estimate_gradients(const Delaunay& tri, const Eigen::VectorXd& f, double tol, int max_iter) {
  const auto& p = tri.points();
  const auto n = static_cast<Eigen::Index>(p.size());
  Eigen::MatrixX2d g = Eigen::MatrixX2d::Zero(n, 2);
  for (int it = 0; it < max_iter; ++it) {
    double err = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double q00 = 0, q01 = 0, q11 = 0, s0 = 0, s1 = 0;
      for (int j : tri.neighbours()[static_cast<std::size_t>(i)]) {
        const double ex = static_cast<double>(p[static_cast<std::size_t>(j)].x - p[static_cast<std::size_t>(i)].x);
        const double ey = static_cast<double>(p[static_cast<std::size_t>(j)].y - p[static_cast<std::size_t>(i)].y);
        const double L = std::hypot(ex, ey), L3 = L * L * L;
        const double df2 = -ex * g(j, 0) - ey * g(j, 1);
        const double r = 6 * (f[i] - f[j]) - 2 * df2;
        q00 += 4 * ex * ex / L3;
        q01 += 4 * ex * ey / L3;
        q11 += 4 * ey * ey / L3;
        s0 += r * ex / L3;
        s1 += r * ey / L3;
      }
      const double det = q00 * q11 - q01 * q01;
      if (det == 0) continue;
      const double r0 = (q11 * s0 - q01 * s1) / det, r1 = (-q01 * s0 + q00 * s1) / det;
      double change = std::max(std::abs(g(i, 0) + r0), std::abs(g(i, 1) + r1));
      g(i, 0) = -r0;
      g(i, 1) = -r1;
      change /= std::max({1.0, std::abs(r0), std::abs(r1)});
      err = std::max(err, change);
    }
    if (err < tol) break;
  }
  return g;
}

ScatteredInterpolator::ScatteredInterpolator(std::vector<IPoint> points, Eigen::VectorXd values, InterpMethod method)
    : tri_(std::move(points)), f_(std::move(values)), method_(method) {
  require(!tri_.points().empty(), ErrorCode::EmptyObservations, "no interpolation sites");
  require(f_.size() == static_cast<Eigen::Index>(tri_.points().size()), ErrorCode::ShapeMismatch,
          "interpolation values and sites differ in length");
  if (method_ == InterpMethod::Cubic) grad_ = estimate_gradients(tri_, f_);
}

double ScatteredInterpolator::nearest(double x, double y) const {
  double best = std::numeric_limits<double>::infinity();
  Eigen::Index arg = 0;
  for (std::size_t i = 0; i < tri_.points().size(); ++i) {
    const double dx = static_cast<double>(tri_.points()[i].x) - x, dy = static_cast<double>(tri_.points()[i].y) - y;
    const double d = dx * dx + dy * dy;
    if (d < best) {
      best = d;
      arg = static_cast<Eigen::Index>(i);
    }
  }
  return f_[arg];
}

double ScatteredInterpolator::cubic(int t, const std::array<double, 3>& b) const {
  const auto& v = tri_.triangles()[static_cast<std::size_t>(t)];
  Eigen::Vector2d P[3], G[3];
  double f[3];
  for (int k = 0; k < 3; ++k) {
    const auto id = v[static_cast<std::size_t>(k)];
    const auto& q = tri_.points()[static_cast<std::size_t>(id)];
    P[k] = {static_cast<double>(q.x), static_cast<double>(q.y)};
    G[k] = grad_.row(id).transpose();
    f[k] = f_[id];
  }
  const Eigen::Vector2d P4 = (P[0] + P[1] + P[2]) / 3.0;
  // Bezier ordinates of the Clough-Tocher split about the centroid.
  double cv[3][3] = {}, c4[3], inner[3], cc[3];
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j)
      if (i != j) cv[i][j] = f[i] + G[i].dot(P[j] - P[i]) / 3.0;
    c4[i] = f[i] + G[i].dot(P4 - P[i]) / 3.0;
  }
  for (int k = 0; k < 3; ++k) {
    const int i = (k + 1) % 3, j = (k + 2) % 3;
    const double c300 = f[i], c030 = f[j], c210 = cv[i][j], c120 = cv[j][i], c201 = c4[i], c021 = c4[j];
    // Cross-boundary derivative linear along the edge, taken in the direction joining this
    // centroid to the neighbour's (the centroid direction itself on the hull).
    const Eigen::Vector2d e = P[j] - P[i], w = P4 - 0.5 * (P[i] + P[j]);
    double tau = 0;
    const int nb = tri_.adjacent()[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)];
    if (nb >= 0) {
      Eigen::Vector2d cn = Eigen::Vector2d::Zero();
      for (int id : tri_.triangles()[static_cast<std::size_t>(nb)]) {
        const auto& q = tri_.points()[static_cast<std::size_t>(id)];
        cn += Eigen::Vector2d(static_cast<double>(q.x), static_cast<double>(q.y)) / 3.0;
      }
      Eigen::Matrix2d m;
      m << w, e;
      const Eigen::Vector2d bt = m.partialPivLu().solve(cn - P4);
      tau = -bt[1] / bt[0];
    }
    inner[k] = 0.25 * (c210 + c120 - c300 - c030) + 0.5 * (c201 + c021) +
               tau * (1.5 * c120 - 1.5 * c210 + 0.5 * c300 - 0.5 * c030);
  }
  for (int i = 0; i < 3; ++i) cc[i] = (inner[(i + 1) % 3] + inner[(i + 2) % 3] + c4[i]) / 3.0;
  const double c003 = (cc[0] + cc[1] + cc[2]) / 3.0;

  int k = 0;
  if (b[1] < b[k]) k = 1;
  if (b[2] < b[k]) k = 2;
  const int i = (k + 1) % 3, j = (k + 2) % 3;
  const double u = b[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(k)];
  const double s = b[static_cast<std::size_t>(j)] - b[static_cast<std::size_t>(k)];
  const double r = 3.0 * b[static_cast<std::size_t>(k)];
  return f[i] * u * u * u + f[j] * s * s * s + c003 * r * r * r +
         3.0 * (cv[i][j] * u * u * s + cv[j][i] * u * s * s + c4[i] * u * u * r + c4[j] * s * s * r + cc[i] * u * r * r +
                cc[j] * s * r * r) +
         6.0 * inner[k] * u * s * r;
}

double ScatteredInterpolator::operator()(double x, double y) const {
  if (method_ == InterpMethod::Nearest) return nearest(x, y);
  std::array<double, 3> b{};
  const int t = tri_.locate(x, y, b);
  return t < 0 ? kNaN : in_triangle(t, b);
}

double ScatteredInterpolator::in_triangle(int t, const std::array<double, 3>& b) const {
  if (method_ == InterpMethod::Cubic) return cubic(t, b);
  const auto& v = tri_.triangles()[static_cast<std::size_t>(t)];
  return b[0] * f_[v[0]] + b[1] * f_[v[1]] + b[2] * f_[v[2]];
}

namespace {

// Exact Euclidean nearest site for every grid node: row scans, then the lower envelope of
// parabolas along time. Returns the index into `sites` per node (D x L, column-major).
std::vector<int> nearest_site_map(const std::vector<IPoint>& sites, Eigen::Index L, Eigen::Index D) {
  const auto idx = [D](Eigen::Index t, Eigen::Index z) { return static_cast<std::size_t>(t * D + z); };
  std::vector<int> at(static_cast<std::size_t>(L * D), -1);
  for (std::size_t s = 0; s < sites.size(); ++s) at[idx(sites[s].x, sites[s].y)] = static_cast<int>(s);

  // pass 1: nearest site within each time column
  std::vector<int> col(static_cast<std::size_t>(L * D), -1);
  for (Eigen::Index t = 0; t < L; ++t) {
    int last = -1;
    for (Eigen::Index z = 0; z < D; ++z) {
      if (at[idx(t, z)] >= 0) last = static_cast<int>(z);
      col[idx(t, z)] = last;
    }
    last = -1;
    for (Eigen::Index z = D - 1; z >= 0; --z) {
      if (at[idx(t, z)] >= 0) last = static_cast<int>(z);
      if (last >= 0 && (col[idx(t, z)] < 0 || last - z < z - col[idx(t, z)])) col[idx(t, z)] = last;
    }
  }

  // pass 2: along time
  std::vector<int> out(static_cast<std::size_t>(L * D), -1);
  std::vector<Eigen::Index> v(static_cast<std::size_t>(L));
  std::vector<double> bound(static_cast<std::size_t>(L) + 1);
  for (Eigen::Index z = 0; z < D; ++z) {
    auto fval = [&](Eigen::Index t) {
      const int c = col[idx(t, z)];
      return c < 0 ? std::numeric_limits<double>::infinity() : static_cast<double>((c - z) * (c - z));
    };
    int k = -1;
    for (Eigen::Index q = 0; q < L; ++q) {
      const double fq = fval(q);
      if (!std::isfinite(fq)) continue;
      double s = 0;
      while (k >= 0) {
        const auto p = v[static_cast<std::size_t>(k)];
        s = ((fq + static_cast<double>(q * q)) - (fval(p) + static_cast<double>(p * p))) / (2.0 * static_cast<double>(q - p));
        if (s <= bound[static_cast<std::size_t>(k)]) --k;
        else break;
      }
      ++k;
      v[static_cast<std::size_t>(k)] = q;
      bound[static_cast<std::size_t>(k)] = k == 0 ? -std::numeric_limits<double>::infinity() : s;
      bound[static_cast<std::size_t>(k) + 1] = std::numeric_limits<double>::infinity();
    }
    if (k < 0) continue;
    int j = 0;
    for (Eigen::Index t = 0; t < L; ++t) {
      while (bound[static_cast<std::size_t>(j) + 1] < static_cast<double>(t)) ++j;
      const auto src = v[static_cast<std::size_t>(j)];
      out[idx(t, z)] = at[idx(src, col[idx(src, z)])];
    }
  }
  return out;
}

}  // namespace

TrajectoryD baseline_interpolate(const ObservationSet& obs, Eigen::Index L, Eigen::Index D, InterpMethod method,
                                 double dt) {
  require(!obs.empty(), ErrorCode::EmptyObservations, "interpolation needs observations");
  obs.validate(L, D);
  require(obs.values.size() == static_cast<Eigen::Index>(obs.size()), ErrorCode::ShapeMismatch,
          "observations carry no values");
  std::vector<IPoint> sites;
  sites.reserve(obs.size());
  for (const auto& i : obs.indices) sites.push_back({i.t, i.z});

  TrajectoryD out(D, L, dt);
  const auto near = nearest_site_map(sites, L, D);
  for (Eigen::Index t = 0; t < L; ++t)
    for (Eigen::Index z = 0; z < D; ++z) out.data(z, t) = obs.values[near[static_cast<std::size_t>(t * D + z)]];
  if (method == InterpMethod::Nearest) return out;

  const ScatteredInterpolator interp(sites, obs.values, method);
  const auto& tri = interp.triangulation();
  // rasterise each triangle over the integer nodes of its bounding box
  std::vector<char> done(static_cast<std::size_t>(L * D), 0);
  for (std::size_t ti = 0; ti < tri.triangles().size(); ++ti) {
    const auto& tv = tri.triangles()[ti];
    std::int64_t x0 = L, x1 = -1, y0 = D, y1 = -1;
    for (int v : tv) {
      const auto& q = sites[static_cast<std::size_t>(v)];
      x0 = std::min(x0, q.x);
      x1 = std::max(x1, q.x);
      y0 = std::min(y0, q.y);
      y1 = std::max(y1, q.y);
    }
    const IPoint& a = sites[static_cast<std::size_t>(tv[0])];
    const IPoint& b = sites[static_cast<std::size_t>(tv[1])];
    const IPoint& c = sites[static_cast<std::size_t>(tv[2])];
    for (std::int64_t x = x0; x <= x1; ++x)
      for (std::int64_t y = y0; y <= y1; ++y) {
        const auto cell = static_cast<std::size_t>(x * D + y);
        if (done[cell]) continue;
        const IPoint q{x, y};
        const i128 wa = orient(b, c, q), wb = orient(c, a, q), wc = orient(a, b, q);
        if (wa < 0 || wb < 0 || wc < 0) continue;
        done[cell] = 1;
        const double area = static_cast<double>(wa + wb + wc);
        out.data(y, x) = interp.in_triangle(static_cast<int>(ti), {static_cast<double>(wa) / area,
                                                                  static_cast<double>(wb) / area,
                                                                  static_cast<double>(wc) / area});
      }
  }
  return out;
}

}  // namespace pdediff
