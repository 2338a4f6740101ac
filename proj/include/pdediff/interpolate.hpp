#pragma once

#include "pdediff/observations.hpp"
#include "pdediff/trajectory.hpp"

#include <array>
#include <string>
#include <vector>

namespace pdediff {

struct IPoint {
  std::int64_t x = 0, y = 0;
  friend bool operator==(const IPoint&, const IPoint&) = default;
};

/// Delaunay triangulation of distinct integer points (exact predicates). Triangles are
/// counter-clockwise vertex triples; empty when all points are collinear.
class Delaunay {
 public:
  explicit Delaunay(std::vector<IPoint> points);

  const std::vector<IPoint>& points() const { return pts_; }
  const std::vector<std::array<int, 3>>& triangles() const { return tris_; }
  /// Vertices adjacent to each vertex through a triangle edge.
  const std::vector<std::vector<int>>& neighbours() const { return nbrs_; }
  /// Triangle across the edge opposite each vertex, -1 on the hull.
  const std::vector<std::array<int, 3>>& adjacent() const { return adj_; }

  /// Triangle containing (x, y) (boundary inclusive) and its barycentric coordinates; -1 if outside the hull.
  int locate(double x, double y, std::array<double, 3>& bary) const;

 private:
  std::vector<IPoint> pts_;
  std::vector<std::array<int, 3>> tris_;
  std::vector<std::vector<int>> nbrs_;
  std::vector<std::array<int, 3>> adj_;
  // uniform bucket grid over triangle bounding boxes for locate()
  double x0_ = 0, y0_ = 0, cell_ = 1;
  int nx_ = 0, ny_ = 0;
  std::vector<std::vector<int>> buckets_;
};

enum class InterpMethod { Linear, Cubic, Nearest };

std::string to_string(InterpMethod m);
InterpMethod parse_interp_method(const std::string& s);

/// Scattered-data interpolant on integer sites. Linear and cubic return NaN outside the
/// convex hull; nearest is defined everywhere.
class ScatteredInterpolator {
 public:
  ScatteredInterpolator(std::vector<IPoint> points, Eigen::VectorXd values, InterpMethod method);

  double operator()(double x, double y) const;
  /// Value inside triangle t at barycentric coordinates b.
  double in_triangle(int t, const std::array<double, 3>& b) const;
  /// Vertex gradients used by the cubic method (n x 2).
  const Eigen::MatrixX2d& gradients() const { return grad_; }
  void set_gradients(const Eigen::MatrixX2d& g) { grad_ = g; }
  const Delaunay& triangulation() const { return tri_; }

 private:
  double nearest(double x, double y) const;
  double cubic(int t, const std::array<double, 3>& b) const;

  Delaunay tri_;
  Eigen::VectorXd f_;
  InterpMethod method_;
  Eigen::MatrixX2d grad_;
};

/// Global gradient estimate minimising the summed squared second derivative of the cubic
/// Hermite curves along triangulation edges (Gauss-Seidel sweeps).
Eigen::MatrixX2d estimate_gradients(const Delaunay& tri, const Eigen::VectorXd& f, double tol = 1e-6,
                                    int max_iter = 400);

/// Fills the (D x L) grid from observations in (time, space) index coordinates. Grid nodes
/// outside the convex hull take the nearest observation.
TrajectoryD baseline_interpolate(const ObservationSet& obs, Eigen::Index L, Eigen::Index D, InterpMethod method,
                                 double dt = 1.0);

}  // namespace pdediff
