#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tbme/dataset.hpp"
#include "tbme/gmm.hpp"

namespace tbme {

/// One probabilistic PCA mixture component: Gaussian with covariance
/// W W^T + sigma^2 I, mean doubling as the tangent-frame anchor.
struct PpcaComponent {
  double mixing_weight = 0.0;
  Eigen::VectorXd mean;      // anchor, length D
  Eigen::MatrixXd loading;   // W, D x d
  double noise_variance = 0.0;

  Eigen::MatrixXd covariance() const {
    const Eigen::Index D = mean.size();
    return loading * loading.transpose() +
           noise_variance * Eigen::MatrixXd::Identity(D, D);
  }
};

struct MoppcaModel {
  std::vector<PpcaComponent> components;
  int intrinsic_dim = 0;  // d
  int ambient_dim = 0;    // D
  double final_log_likelihood = 0.0;
  int iterations_used = 0;
  std::vector<double> log_likelihood_history;

  int component_count() const { return static_cast<int>(components.size()); }
};

/// Hard and soft association of training points with mixture components.
struct AssignmentRelation {
  std::vector<int> hard_assignment;    // point index -> component index
  Eigen::MatrixXd responsibilities;    // n x k, rows sum to 1
};

struct TangentFrame {
  Eigen::VectorXd anchor;  // length D
  Eigen::MatrixXd basis;   // d x D, orthonormal rows
};

struct TangentBundle {
  std::vector<TangentFrame> frames;
  AssignmentRelation assignment;
  int intrinsic_dim = 0;
  int ambient_dim = 0;

  /// Indices of the training points hard-assigned to frame i.
  std::vector<Eigen::Index> assigned_points(int frame) const {
    std::vector<Eigen::Index> idx;
    for (size_t j = 0; j < assignment.hard_assignment.size(); ++j)
      if (assignment.hard_assignment[j] == frame) idx.push_back(static_cast<Eigen::Index>(j));
    return idx;
  }
};

/// The mixture viewed as a plain ambient-space Gaussian mixture (this is the
/// default global density model for M3).
inline GmmModel to_gmm(const MoppcaModel& model) {
  const int k = model.component_count();
  Eigen::VectorXd weights(k);
  Eigen::MatrixXd means(k, model.ambient_dim);
  std::vector<Eigen::MatrixXd> covs(k);
  for (int j = 0; j < k; ++j) {
    weights[j] = model.components[j].mixing_weight;
    means.row(j) = model.components[j].mean;
    covs[j] = model.components[j].covariance();
  }
  return GmmModel(weights, means, covs);
}

namespace detail {

/// Exact M-step for one PPCA component given its responsibility-weighted
/// covariance: sigma^2 is the mean of the D-d trailing eigenvalues, W spans
/// the top-d eigenvectors scaled by sqrt(lambda - sigma^2).
inline void ppca_from_covariance(const Eigen::MatrixXd& S, int d, double sigma2_floor,
                                 Eigen::MatrixXd& W, double& sigma2) {
  const Eigen::Index D = S.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);  // ascending eigenvalues
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("ppca_from_covariance: eigendecomposition failed");
  const Eigen::VectorXd& evals = eig.eigenvalues();
  const Eigen::MatrixXd& evecs = eig.eigenvectors();
  double resid = 0.0;
  for (Eigen::Index i = 0; i < D - d; ++i) resid += std::max(evals[i], 0.0);
  sigma2 = std::max(resid / static_cast<double>(D - d), sigma2_floor);
  W.resize(D, d);
  for (int c = 0; c < d; ++c) {
    const Eigen::Index src = D - 1 - c;  // descending order
    W.col(c) = evecs.col(src) * std::sqrt(std::max(evals[src] - sigma2, 0.0));
  }
}

}  // namespace detail

/// Fits the mixture of probabilistic principal component analyzers by EM.
/// Means are k-means++ seeded; each M-step solves the per-component PPCA
/// problem in closed form from the responsibility-weighted covariance, so the
/// data log-likelihood is non-decreasing across iterations.
inline MoppcaModel fit_moppca(const PointCloud& X, int k, int d, const EmConfig& config,
                              std::uint64_t seed) {
  const Eigen::Index n = X.size();
  const int D = X.ambient_dim();
  if (k < 1) throw std::invalid_argument("fit_moppca: k must be >= 1");
  if (d < 1 || d >= D) throw std::invalid_argument("fit_moppca: need 1 <= d < D");
  if (n < static_cast<Eigen::Index>(k) * (d + 2))
    throw std::invalid_argument("fit_moppca: too few points (" + std::to_string(n) +
                                ") for k=" + std::to_string(k) + ", d=" + std::to_string(d));
  const Eigen::MatrixXd& pts = X.points;

  Pcg32 rng(seed);
  Eigen::MatrixXd means = detail::kmeanspp_means(pts, k, rng);
  const std::vector<int> assign = detail::nearest_mean_assignment(pts, means);

  const Eigen::RowVectorXd global_mean = pts.colwise().mean();
  const Eigen::MatrixXd centered_all = pts.rowwise() - global_mean;
  const Eigen::MatrixXd global_cov =
      centered_all.transpose() * centered_all / static_cast<double>(n);

  MoppcaModel model;
  model.intrinsic_dim = d;
  model.ambient_dim = D;
  model.components.resize(k);
  Eigen::VectorXd weights(k);
  for (int j = 0; j < k; ++j) {
    std::vector<Eigen::Index> members;
    for (Eigen::Index i = 0; i < n; ++i)
      if (assign[i] == j) members.push_back(i);
    weights[j] = std::max(static_cast<double>(members.size()) / n, config.weight_floor);
    Eigen::MatrixXd cov;
    if (static_cast<int>(members.size()) >= d + 1) {
      Eigen::MatrixXd sub(members.size(), D);
      for (size_t r = 0; r < members.size(); ++r) sub.row(r) = pts.row(members[r]);
      const Eigen::RowVectorXd mu = sub.colwise().mean();
      means.row(j) = mu;
      const Eigen::MatrixXd c = sub.rowwise() - mu;
      cov = c.transpose() * c / static_cast<double>(members.size());
    } else {
      cov = global_cov;
    }
    auto& comp = model.components[j];
    comp.mean = means.row(j);
    detail::ppca_from_covariance(cov, d, config.sigma2_floor, comp.loading,
                                 comp.noise_variance);
  }
  weights /= weights.sum();
  for (int j = 0; j < k; ++j) model.components[j].mixing_weight = weights[j];

  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < config.max_iters; ++it) {
    const GmmModel mixture = to_gmm(model);
    const Eigen::MatrixXd lw = mixture.weighted_log_densities(pts);
    Eigen::VectorXd row_lse(n);
    for (Eigen::Index i = 0; i < n; ++i) row_lse[i] = detail::log_sum_exp(lw.row(i));
    const double ll = row_lse.sum();
    if (!std::isfinite(ll))
      throw std::runtime_error("fit_moppca: non-finite log-likelihood at iteration " +
                               std::to_string(it));
    model.log_likelihood_history.push_back(ll);
    model.final_log_likelihood = ll;
    model.iterations_used = it + 1;
    if (it > 0 && std::abs(ll - prev_ll) <= config.tol * (1.0 + std::abs(ll))) break;
    prev_ll = ll;
    if (it == config.max_iters - 1) break;

    const Eigen::MatrixXd resp = (lw.colwise() - row_lse).array().exp();
    const Eigen::VectorXd nk = resp.colwise().sum();
    Eigen::VectorXd new_weights = (nk / static_cast<double>(n)).cwiseMax(config.weight_floor);
    new_weights /= new_weights.sum();
    for (int j = 0; j < k; ++j) {
      auto& comp = model.components[j];
      comp.mixing_weight = new_weights[j];
      if (nk[j] <= 1e-12) continue;  // starved component keeps its parameters
      comp.mean = (resp.col(j).transpose() * pts).transpose() / nk[j];
      const Eigen::MatrixXd c = pts.rowwise() - comp.mean.transpose();
      const Eigen::MatrixXd S = (c.transpose() * (resp.col(j).asDiagonal() * c)) / nk[j];
      detail::ppca_from_covariance(S, d, config.sigma2_floor, comp.loading,
                                   comp.noise_variance);
    }
  }
  return model;
}

/// Posterior component probabilities for each row of X (this is the
/// Mahalanobis-style soft assignment of points to pancakes).
inline Eigen::MatrixXd responsibilities(const MoppcaModel& model, const PointCloud& X) {
  if (X.ambient_dim() != model.ambient_dim)
    throw std::invalid_argument("responsibilities: dimension mismatch");
  const GmmModel mixture = to_gmm(model);
  const Eigen::MatrixXd lw = mixture.weighted_log_densities(X.points);
  Eigen::MatrixXd resp(lw.rows(), lw.cols());
  for (Eigen::Index i = 0; i < lw.rows(); ++i) {
    const double lse = detail::log_sum_exp(lw.row(i));
    resp.row(i) = (lw.row(i).array() - lse).exp();
  }
  return resp;
}

/// Anchors are component means; bases are the orthonormalized principal
/// directions of each loading matrix (descending singular value order, each
/// row sign-canonicalized). Hard assignment is the responsibility argmax with
/// ties broken toward the lowest component index. A rank-deficient loading is
/// an error only when its component owns enough points (>= d+1) to produce a
/// neighborhood; collapsed components that would be dropped downstream keep a
/// placeholder orthonormal frame instead.
inline TangentBundle extract_tangent_bundle(const MoppcaModel& model, const PointCloud& X) {
  const int k = model.component_count();
  const int d = model.intrinsic_dim;
  TangentBundle bundle;
  bundle.intrinsic_dim = d;
  bundle.ambient_dim = model.ambient_dim;
  const Eigen::MatrixXd resp = responsibilities(model, X);
  bundle.assignment.responsibilities = resp;
  bundle.assignment.hard_assignment.resize(resp.rows());
  std::vector<int> assigned_count(k, 0);
  for (Eigen::Index i = 0; i < resp.rows(); ++i) {
    int best = 0;
    for (int j = 1; j < k; ++j)
      if (resp(i, j) > resp(i, best)) best = j;
    bundle.assignment.hard_assignment[i] = best;
    ++assigned_count[best];
  }
  bundle.frames.reserve(k);
  for (int j = 0; j < k; ++j) {
    const auto& comp = model.components[j];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(comp.loading, Eigen::ComputeThinU);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv[0] : 0.0;
    const bool deficient = sv.size() < d || sv[d - 1] <= 1e-12 * std::max(1.0, smax);
    if (deficient && assigned_count[j] >= d + 1)
      throw std::runtime_error("extract_tangent_bundle: loading matrix of component " +
                               std::to_string(j) + " has rank < d");
    // JacobiSVD's U stays orthonormal even at rank < d, so the same columns
    // serve as the placeholder frame for components dropped downstream.
    Eigen::MatrixXd basis = svd.matrixU().leftCols(d).transpose();
    for (int r = 0; r < d; ++r) {
      for (Eigen::Index c = 0; c < basis.cols(); ++c) {
        if (std::abs(basis(r, c)) > 1e-12) {
          if (basis(r, c) < 0.0) basis.row(r) = -basis.row(r);
          break;
        }
      }
    }
    bundle.frames.push_back({comp.mean, std::move(basis)});
  }
  return bundle;
}

}  // namespace tbme
