#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tbme/dataset.hpp"
#include "tbme/fne.hpp"
#include "tbme/rng.hpp"

namespace tbme {

/// Exact nearest-neighbor engine. For D in {2,3} queries run over a uniform
/// bucket grid with an expanding-ring search whose termination bound
/// guarantees the returned squared distance equals the brute-force value;
/// other dimensions (and degenerate clouds) fall back to brute force.
class NnIndex {
 public:
  explicit NnIndex(Eigen::MatrixXd pts) : pts_(std::move(pts)) {
    n_ = pts_.rows();
    D_ = static_cast<int>(pts_.cols());
    if (n_ == 0) throw std::invalid_argument("NnIndex: empty cloud");
    use_grid_ = (D_ == 2 || D_ == 3) && n_ >= 64;
    if (use_grid_) build_grid();
  }

  Eigen::Index size() const { return n_; }

  double nn_sq(const Eigen::VectorXd& q) const {
    if (static_cast<int>(q.size()) != D_)
      throw std::invalid_argument("NnIndex::nn_sq: dimension mismatch");
    if (!use_grid_) return brute(q);
    std::array<long, 3> c{};
    long max_ring = 0;
    for (int d = 0; d < D_; ++d) {
      const long raw = static_cast<long>(std::floor((q[d] - lo_[d]) / h_));
      c[d] = std::clamp(raw, 0L, ncell_[d] - 1);
      max_ring = std::max({max_ring, c[d], ncell_[d] - 1 - c[d]});
    }
    double best = std::numeric_limits<double>::infinity();
    for (long r = 0;; ++r) {
      if (r > max_ring) break;  // every cell visited: search was exhaustive
      visit_ring(q, c, r, best);
      // Cells at ring > r lie outside the box spanned by rings <= r; any
      // unvisited point is at least `margin` away from q.
      double margin = std::numeric_limits<double>::infinity();
      for (int d = 0; d < D_; ++d) {
        const double box_lo = lo_[d] + static_cast<double>(c[d] - r) * h_;
        const double box_hi = lo_[d] + static_cast<double>(c[d] + r + 1) * h_;
        margin = std::min({margin, q[d] - box_lo, box_hi - q[d]});
      }
      if (margin > 0.0 && best <= margin * margin) break;
    }
    return best;
  }

 private:
  double brute(const Eigen::VectorXd& q) const {
    return (pts_.rowwise() - q.transpose()).rowwise().squaredNorm().minCoeff();
  }

  long cell_id(const std::array<long, 3>& c) const {
    long id = c[0];
    if (D_ >= 2) id += ncell_[0] * c[1];
    if (D_ >= 3) id += ncell_[0] * ncell_[1] * c[2];
    return id;
  }

  void build_grid() {
    lo_ = pts_.colwise().minCoeff();
    const Eigen::VectorXd hi = pts_.colwise().maxCoeff();
    const double max_extent = (hi - lo_).maxCoeff();
    if (!(max_extent > 0.0)) {
      use_grid_ = false;
      return;
    }
    const long target = std::max(
        1L, static_cast<long>(std::ceil(std::pow(n_ / 2.0, 1.0 / D_))));
    h_ = max_extent / static_cast<double>(target);
    long total = 1;
    for (int d = 0; d < D_; ++d) {
      ncell_[d] = std::max(1L, static_cast<long>(std::ceil((hi[d] - lo_[d]) / h_)));
      total *= ncell_[d];
    }
    std::vector<long> counts(total, 0);
    std::vector<long> ids(n_);
    for (Eigen::Index i = 0; i < n_; ++i) {
      std::array<long, 3> c{};
      for (int d = 0; d < D_; ++d)
        c[d] = std::clamp(static_cast<long>(std::floor((pts_(i, d) - lo_[d]) / h_)), 0L,
                          ncell_[d] - 1);
      ids[i] = cell_id(c);
      ++counts[ids[i]];
    }
    start_.assign(total + 1, 0);
    for (long cidx = 0; cidx < total; ++cidx) start_[cidx + 1] = start_[cidx] + counts[cidx];
    sorted_.resize(n_, D_);
    std::vector<long> cursor(start_.begin(), start_.end() - 1);
    for (Eigen::Index i = 0; i < n_; ++i) sorted_.row(cursor[ids[i]]++) = pts_.row(i);
  }

  void scan_cell(const Eigen::VectorXd& q, const std::array<long, 3>& c,
                 double& best) const {
    const long id = cell_id(c);
    for (long p = start_[id]; p < start_[id + 1]; ++p) {
      const double d2 = (sorted_.row(p).transpose() - q).squaredNorm();
      if (d2 < best) best = d2;
    }
  }

  /// Visits every in-bounds cell at Chebyshev distance exactly r from c0.
  void visit_ring(const Eigen::VectorXd& q, const std::array<long, 3>& c0, long r,
                  double& best) const {
    std::array<long, 3> lo{}, hi{};
    for (int d = 0; d < D_; ++d) {
      lo[d] = std::max(c0[d] - r, 0L);
      hi[d] = std::min(c0[d] + r, ncell_[d] - 1);
      if (lo[d] > hi[d]) return;
    }
    std::array<long, 3> c{};
    if (D_ == 2) {
      c[2] = 0;
      for (c[0] = lo[0]; c[0] <= hi[0]; ++c[0])
        for (c[1] = lo[1]; c[1] <= hi[1]; ++c[1])
          if (std::max(std::abs(c[0] - c0[0]), std::abs(c[1] - c0[1])) == r)
            scan_cell(q, c, best);
    } else {
      for (c[0] = lo[0]; c[0] <= hi[0]; ++c[0])
        for (c[1] = lo[1]; c[1] <= hi[1]; ++c[1])
          for (c[2] = lo[2]; c[2] <= hi[2]; ++c[2])
            if (std::max({std::abs(c[0] - c0[0]), std::abs(c[1] - c0[1]),
                          std::abs(c[2] - c0[2])}) == r)
              scan_cell(q, c, best);
    }
  }

  Eigen::MatrixXd pts_;
  Eigen::Index n_ = 0;
  int D_ = 0;
  bool use_grid_ = false;
  Eigen::VectorXd lo_;
  double h_ = 0.0;
  std::array<long, 3> ncell_{1, 1, 1};
  std::vector<long> start_;
  Eigen::MatrixXd sorted_;  // points regrouped by cell (CSR layout)
};

/// Squared Euclidean distance from query to the nearest cloud point
/// (brute force; NnIndex is the accelerated equivalent).
inline double nn_sq_dist(const Eigen::VectorXd& query, const PointCloud& cloud) {
  if (cloud.size() == 0) throw std::invalid_argument("nn_sq_dist: empty cloud");
  if (query.size() != cloud.points.cols())
    throw std::invalid_argument("nn_sq_dist: dimension mismatch");
  return (cloud.points.rowwise() - query.transpose()).rowwise().squaredNorm().minCoeff();
}

namespace detail {

inline void check_metric_pair(const PointCloud& U, const PointCloud& V, const char* who) {
  if (U.size() == 0 || V.size() == 0)
    throw std::invalid_argument(std::string(who) + ": empty input cloud");
  if (U.points.cols() != V.points.cols())
    throw std::invalid_argument(std::string(who) + ": ambient dimension mismatch");
}

/// Mean and max of squared NN distances from each row of `from` into `idx`,
/// accumulated in row order.
inline void directed_nn_stats(const Eigen::MatrixXd& from, const NnIndex& idx,
                              double& mean_sq, double& max_sq) {
  double sum = 0.0;
  max_sq = 0.0;
  for (Eigen::Index i = 0; i < from.rows(); ++i) {
    const double d2 = idx.nn_sq(from.row(i).transpose());
    sum += d2;
    if (d2 > max_sq) max_sq = d2;
  }
  mean_sq = sum / static_cast<double>(from.rows());
}

}  // namespace detail

/// Symmetric expected reconstruction error: half the sum of the two directed
/// mean squared nearest-neighbor distances.
inline double symmetric_ere(const PointCloud& U, const PointCloud& V) {
  detail::check_metric_pair(U, V, "symmetric_ere");
  NnIndex ui(U.points), vi(V.points);
  double uv_mean, uv_max, vu_mean, vu_max;
  detail::directed_nn_stats(U.points, vi, uv_mean, uv_max);
  detail::directed_nn_stats(V.points, ui, vu_mean, vu_max);
  return 0.5 * (uv_mean + vu_mean);
}

/// Symmetric Hausdorff distance (unsquared Euclidean).
inline double hausdorff(const PointCloud& U, const PointCloud& V) {
  detail::check_metric_pair(U, V, "hausdorff");
  NnIndex ui(U.points), vi(V.points);
  double uv_mean, uv_max, vu_mean, vu_max;
  detail::directed_nn_stats(U.points, vi, uv_mean, uv_max);
  detail::directed_nn_stats(V.points, ui, vu_mean, vu_max);
  return std::sqrt(std::max(uv_max, vu_max));
}

/// Directed expected reconstruction error: mean squared NN distance from U
/// into V.
inline double asymmetric_ere(const PointCloud& U, const PointCloud& V) {
  detail::check_metric_pair(U, V, "asymmetric_ere");
  NnIndex vi(V.points);
  double uv_mean, uv_max;
  detail::directed_nn_stats(U.points, vi, uv_mean, uv_max);
  return uv_mean;
}

struct MetricReport {
  double symmetric_ere = 0.0;
  double hausdorff = 0.0;
  double asymmetric_ere = 0.0;
  Eigen::Index m_true = 0;
  Eigen::Index m_est = 0;
  std::uint64_t seed_true = 0;
  std::uint64_t seed_est = 0;
};

/// All three metrics between a fresh true-manifold sample and a fresh sample
/// of the estimate (stage seeds 1 and 2 chained off `seed`). Both indexes are
/// built once and shared across the metrics.
inline MetricReport evaluate_estimate(const ManifoldSpec& spec, const ManifoldEstimate& est,
                                      Eigen::Index m, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("evaluate_estimate: m >= 1 required");
  MetricReport report;
  report.seed_true = chain_seed(seed, 1);
  report.seed_est = chain_seed(seed, 2);
  const PointCloud U = sample_true_manifold(spec, m, report.seed_true);
  const PointCloud V = sample_estimate(est, m, report.seed_est);
  detail::check_metric_pair(U, V, "evaluate_estimate");
  NnIndex ui(U.points), vi(V.points);
  double uv_mean, uv_max, vu_mean, vu_max;
  detail::directed_nn_stats(U.points, vi, uv_mean, uv_max);
  detail::directed_nn_stats(V.points, ui, vu_mean, vu_max);
  report.symmetric_ere = 0.5 * (uv_mean + vu_mean);
  report.hausdorff = std::sqrt(std::max(uv_max, vu_max));
  report.asymmetric_ere = uv_mean;
  report.m_true = U.size();
  report.m_est = V.size();
  return report;
}

}  // namespace tbme
