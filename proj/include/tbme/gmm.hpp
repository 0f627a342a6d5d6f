#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tbme/rng.hpp"

namespace tbme {

/// Shared EM settings for the mixture fitters.
struct EmConfig {
  double tol = 1e-6;           // stop when |Δll| <= tol * (1 + |ll|)
  int max_iters = 500;
  double sigma2_floor = 1e-8;  // PPCA noise-variance floor
  double weight_floor = 1e-8;  // mixing weights floored then renormalized
  double cov_reg = 1e-6;       // diagonal regularization, scaled by trace/p
};

namespace detail {

inline double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

/// k-means++ seeding: first center uniform, then squared-distance weighted.
inline Eigen::MatrixXd kmeanspp_means(const Eigen::MatrixXd& X, int k, Pcg32& rng) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd means(k, X.cols());
  means.row(0) = X.row(rng.uniform_int(static_cast<int>(n)));
  Eigen::VectorXd d2 = (X.rowwise() - means.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double target = rng.next_double() * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= d2[i];
        if (target <= 0.0) { pick = i; break; }
        pick = i;
      }
    } else {
      pick = rng.uniform_int(static_cast<int>(n));
    }
    means.row(c) = X.row(pick);
    d2 = d2.cwiseMin((X.rowwise() - means.row(c)).rowwise().squaredNorm());
  }
  return means;
}

inline std::vector<int> nearest_mean_assignment(const Eigen::MatrixXd& X,
                                                const Eigen::MatrixXd& means) {
  std::vector<int> assign(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    int best = 0;
    double best_d = (X.row(i) - means.row(0)).squaredNorm();
    for (Eigen::Index c = 1; c < means.rows(); ++c) {
      const double d = (X.row(i) - means.row(c)).squaredNorm();
      if (d < best_d) { best_d = d; best = static_cast<int>(c); }
    }
    assign[i] = best;
  }
  return assign;
}

}  // namespace detail

/// Gaussian mixture with full covariances. Cholesky factors and log
/// normalizers are cached at construction, so evaluation is allocation-light
/// and the stored parameters stay immutable.
class GmmModel {
 public:
  GmmModel() = default;

  GmmModel(Eigen::VectorXd weights, Eigen::MatrixXd means,
           std::vector<Eigen::MatrixXd> covariances)
      : weights_(std::move(weights)), means_(std::move(means)),
        covariances_(std::move(covariances)) {
    const Eigen::Index m = weights_.size();
    if (m < 1 || means_.rows() != m || static_cast<Eigen::Index>(covariances_.size()) != m)
      throw std::invalid_argument("GmmModel: inconsistent component counts");
    if (std::abs(weights_.sum() - 1.0) > 1e-10)
      throw std::invalid_argument("GmmModel: weights must sum to 1");
    const Eigen::Index p = means_.cols();
    chol_lower_.resize(m);
    log_norm_.resize(m);
    log_weights_.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      if (covariances_[j].rows() != p || covariances_[j].cols() != p)
        throw std::invalid_argument("GmmModel: covariance dimension mismatch");
      Eigen::LLT<Eigen::MatrixXd> llt(covariances_[j]);
      if (llt.info() != Eigen::Success)
        throw std::invalid_argument("GmmModel: covariance " + std::to_string(j) +
                                    " is not positive definite");
      chol_lower_[j] = llt.matrixL();
      log_norm_[j] = -0.5 * p * std::log(2.0 * M_PI) -
                     chol_lower_[j].diagonal().array().log().sum();
      log_weights_[j] = std::log(std::max(weights_[j], 1e-300));
    }
  }

  Eigen::Index components() const { return weights_.size(); }
  Eigen::Index dim() const { return means_.cols(); }
  const Eigen::VectorXd& weights() const { return weights_; }
  const Eigen::MatrixXd& means() const { return means_; }
  const std::vector<Eigen::MatrixXd>& covariances() const { return covariances_; }

  /// n x m matrix of log(w_j) + log N(x_i | mu_j, C_j).
  Eigen::MatrixXd weighted_log_densities(const Eigen::MatrixXd& X) const {
    if (X.cols() != dim())
      throw std::invalid_argument("GmmModel: point dimension mismatch");
    Eigen::MatrixXd out(X.rows(), components());
    for (Eigen::Index j = 0; j < components(); ++j) {
      Eigen::MatrixXd z = (X.rowwise() - means_.row(j)).transpose();
      chol_lower_[j].triangularView<Eigen::Lower>().solveInPlace(z);
      out.col(j) = (log_weights_[j] + log_norm_[j]) -
                   0.5 * z.colwise().squaredNorm().transpose().array();
    }
    return out;
  }

  double log_density(const Eigen::VectorXd& x) const {
    if (x.size() != dim())
      throw std::invalid_argument("GmmModel::log_density: dimension mismatch");
    Eigen::RowVectorXd lw(components());
    for (Eigen::Index j = 0; j < components(); ++j) {
      const Eigen::VectorXd z =
          chol_lower_[j].triangularView<Eigen::Lower>().solve(x - means_.row(j).transpose());
      lw[j] = log_weights_[j] + log_norm_[j] - 0.5 * z.squaredNorm();
    }
    return detail::log_sum_exp(lw);
  }

  /// Batch log densities for the rows of X.
  Eigen::VectorXd log_density_batch(const Eigen::MatrixXd& X) const {
    const Eigen::MatrixXd lw = weighted_log_densities(X);
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      out[i] = detail::log_sum_exp(lw.row(i));
    return out;
  }

 private:
  Eigen::VectorXd weights_;
  Eigen::MatrixXd means_;  // m x p
  std::vector<Eigen::MatrixXd> covariances_;
  std::vector<Eigen::MatrixXd> chol_lower_;
  Eigen::VectorXd log_norm_;
  Eigen::VectorXd log_weights_;
};

inline double log_density(const GmmModel& model, const Eigen::VectorXd& x) {
  return model.log_density(x);
}

struct GmmFitResult {
  GmmModel model;
  double log_likelihood = 0.0;
  int iterations = 0;
  std::vector<double> log_likelihood_history;
};

/// Full-covariance GMM fit by EM. k-means++ seeded means, nearest-mean initial
/// clusters, diagonal regularization cov_reg*(trace/p) added every M-step.
inline GmmFitResult fit_gmm(const Eigen::MatrixXd& points, int m, const EmConfig& config,
                            std::uint64_t seed) {
  const Eigen::Index n = points.rows();
  const Eigen::Index p = points.cols();
  if (m < 1) throw std::invalid_argument("fit_gmm: m must be >= 1");
  if (n < static_cast<Eigen::Index>(m) * (p + 1))
    throw std::invalid_argument("fit_gmm: too few points (" + std::to_string(n) +
                                ") for " + std::to_string(m) + " components in dim " +
                                std::to_string(p));

  Pcg32 rng(seed);
  Eigen::MatrixXd means = detail::kmeanspp_means(points, m, rng);
  const std::vector<int> assign = detail::nearest_mean_assignment(points, means);

  const Eigen::RowVectorXd global_mean = points.colwise().mean();
  const Eigen::MatrixXd centered_all = points.rowwise() - global_mean;
  const Eigen::MatrixXd global_cov =
      centered_all.transpose() * centered_all / static_cast<double>(n);

  auto regularize = [&](Eigen::MatrixXd& cov) {
    double scale = cov.trace() / static_cast<double>(p);
    if (!(scale > 0.0) || !std::isfinite(scale)) scale = 1e-12;
    cov.diagonal().array() += config.cov_reg * scale;
  };

  Eigen::VectorXd weights = Eigen::VectorXd::Zero(m);
  std::vector<Eigen::MatrixXd> covs(m);
  for (int j = 0; j < m; ++j) {
    std::vector<Eigen::Index> members;
    for (Eigen::Index i = 0; i < n; ++i)
      if (assign[i] == j) members.push_back(i);
    weights[j] = std::max(static_cast<double>(members.size()) / n, config.weight_floor);
    Eigen::MatrixXd cov;
    if (members.size() >= 2) {
      Eigen::MatrixXd sub(members.size(), p);
      for (size_t r = 0; r < members.size(); ++r) sub.row(r) = points.row(members[r]);
      const Eigen::RowVectorXd mu = sub.colwise().mean();
      means.row(j) = mu;
      const Eigen::MatrixXd c = sub.rowwise() - mu;
      cov = c.transpose() * c / static_cast<double>(members.size());
    } else {
      cov = global_cov;
    }
    regularize(cov);
    covs[j] = cov;
  }
  weights /= weights.sum();

  GmmFitResult result;
  GmmModel model(weights, means, covs);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < config.max_iters; ++it) {
    const Eigen::MatrixXd lw = model.weighted_log_densities(points);
    Eigen::VectorXd row_lse(n);
    for (Eigen::Index i = 0; i < n; ++i) row_lse[i] = detail::log_sum_exp(lw.row(i));
    const double ll = row_lse.sum();
    if (!std::isfinite(ll))
      throw std::runtime_error("fit_gmm: non-finite log-likelihood at iteration " +
                               std::to_string(it));
    result.log_likelihood_history.push_back(ll);
    result.log_likelihood = ll;
    result.iterations = it + 1;
    if (it > 0 && std::abs(ll - prev_ll) <= config.tol * (1.0 + std::abs(ll))) break;
    prev_ll = ll;
    if (it == config.max_iters - 1) break;

    const Eigen::MatrixXd resp = (lw.colwise() - row_lse).array().exp();
    const Eigen::VectorXd nk = resp.colwise().sum();
    Eigen::VectorXd new_weights = (nk / static_cast<double>(n)).cwiseMax(config.weight_floor);
    new_weights /= new_weights.sum();
    Eigen::MatrixXd new_means = means;
    std::vector<Eigen::MatrixXd> new_covs = covs;
    for (int j = 0; j < m; ++j) {
      if (nk[j] > 1e-12) {
        new_means.row(j) = (resp.col(j).transpose() * points) / nk[j];
        const Eigen::MatrixXd c = points.rowwise() - new_means.row(j);
        new_covs[j] =
            (c.transpose() * (resp.col(j).asDiagonal() * c)) / nk[j];
      }
      regularize(new_covs[j]);
    }
    means = new_means;
    covs = new_covs;
    model = GmmModel(new_weights, means, covs);
  }
  result.model = std::move(model);
  return result;
}

}  // namespace tbme
