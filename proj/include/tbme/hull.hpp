#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "tbme/rng.hpp"

namespace tbme {

namespace detail {

/// Twice the signed area of triangle (o, a, b); positive when b lies left of
/// the directed line o->a.
inline double cross2(const Eigen::Vector2d& o, const Eigen::Vector2d& a,
                     const Eigen::Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

}  // namespace detail

/// Convex hull of a 2-D point set (Andrew monotone chain). Returns vertices
/// in counter-clockwise order without repeating the first vertex; points
/// interior to a hull edge are excluded. Degenerate inputs yield fewer than
/// three vertices.
inline std::vector<Eigen::Vector2d> convex_hull_2d(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
                          return a.x() == b.x() && a.y() == b.y();
                        }),
            pts.end());
  const size_t n = pts.size();
  if (n <= 2) return pts;
  std::vector<Eigen::Vector2d> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {  // lower chain
    while (k >= 2 && detail::cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  const size_t lower = k + 1;
  for (size_t i = n - 1; i-- > 0;) {  // upper chain
    while (k >= lower && detail::cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);  // last point equals the first
  return hull;
}

/// Convex hull of latent coordinates for intrinsic dimension 1 (an interval)
/// or 2 (a CCW polygon). Zero-point hulls are flagged empty; degenerate hulls
/// (single point, collinear set) have zero volume.
struct LatentHull {
  int dim = 0;
  bool empty = true;
  double lo = 0.0, hi = 0.0;            // dim == 1
  std::vector<Eigen::Vector2d> polygon;  // dim == 2, counter-clockwise

  /// Interval length (dim 1) or shoelace area (dim 2).
  double volume() const {
    if (empty) return 0.0;
    if (dim == 1) return hi - lo;
    if (polygon.size() < 3) return 0.0;
    double twice = 0.0;
    for (size_t i = 0; i < polygon.size(); ++i) {
      const auto& a = polygon[i];
      const auto& b = polygon[(i + 1) % polygon.size()];
      twice += a.x() * b.y() - b.x() * a.y();
    }
    return 0.5 * twice;
  }

  /// Membership with an absolute slack of tol measured as distance to the
  /// hull boundary (each edge test is scaled by the edge length).
  bool contains(const Eigen::VectorXd& y, double tol) const {
    if (empty) return false;
    if (dim == 1) return y[0] >= lo - tol && y[0] <= hi + tol;
    const Eigen::Vector2d p(y[0], y[1]);
    if (polygon.size() == 1) return (p - polygon[0]).norm() <= tol;
    if (polygon.size() == 2) return point_segment_distance(p, polygon[0], polygon[1]) <= tol;
    for (size_t i = 0; i < polygon.size(); ++i) {
      const auto& a = polygon[i];
      const auto& b = polygon[(i + 1) % polygon.size()];
      const double len = (b - a).norm();
      if (detail::cross2(a, b, p) < -tol * len) return false;
    }
    return true;
  }

  void bounding_box(Eigen::VectorXd& box_lo, Eigen::VectorXd& box_hi) const {
    if (empty) throw std::logic_error("LatentHull::bounding_box: empty hull");
    box_lo.resize(dim);
    box_hi.resize(dim);
    if (dim == 1) {
      box_lo[0] = lo;
      box_hi[0] = hi;
      return;
    }
    Eigen::Vector2d mn = polygon[0], mx = polygon[0];
    for (const auto& p : polygon) {
      mn = mn.cwiseMin(p);
      mx = mx.cwiseMax(p);
    }
    box_lo << mn.x(), mn.y();
    box_hi << mx.x(), mx.y();
  }

  /// Uniform sample from the hull interior. dim 2 uses an area-weighted fan
  /// triangulation (valid because the polygon is convex), consuming three
  /// uniforms per call; dim 1 consumes one.
  Eigen::VectorXd sample(Pcg32& rng) const {
    if (empty || volume() <= 0.0)
      throw std::logic_error("LatentHull::sample: hull has no interior");
    Eigen::VectorXd y(dim);
    if (dim == 1) {
      y[0] = rng.uniform(lo, hi);
      return y;
    }
    const size_t tris = polygon.size() - 2;
    std::vector<double> cum(tris);
    double total = 0.0;
    for (size_t i = 0; i < tris; ++i) {
      total += 0.5 * std::abs(detail::cross2(polygon[0], polygon[i + 1], polygon[i + 2]));
      cum[i] = total;
    }
    const double u = rng.next_double() * total;
    size_t t = std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
    if (t >= tris) t = tris - 1;
    const double s = std::sqrt(rng.next_double());
    const double v = rng.next_double();
    const Eigen::Vector2d p = (1.0 - s) * polygon[0] +
                              s * (1.0 - v) * polygon[t + 1] +
                              s * v * polygon[t + 2];
    y << p.x(), p.y();
    return y;
  }

  static double point_segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                                       const Eigen::Vector2d& b) {
    const Eigen::Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
  }
};

/// Hull of the rows of Y (m x d latent coordinates). Supports d in {1, 2}.
inline LatentHull convex_hull_latent(const Eigen::MatrixXd& Y) {
  const int d = static_cast<int>(Y.cols());
  if (d != 1 && d != 2)
    throw std::invalid_argument("convex_hull_latent: unsupported latent dimension " +
                                std::to_string(d));
  LatentHull hull;
  hull.dim = d;
  if (Y.rows() == 0) return hull;
  hull.empty = false;
  if (d == 1) {
    hull.lo = Y.col(0).minCoeff();
    hull.hi = Y.col(0).maxCoeff();
    return hull;
  }
  std::vector<Eigen::Vector2d> pts(Y.rows());
  for (Eigen::Index i = 0; i < Y.rows(); ++i) pts[i] = Y.row(i).head<2>();
  hull.polygon = convex_hull_2d(std::move(pts));
  return hull;
}

}  // namespace tbme
