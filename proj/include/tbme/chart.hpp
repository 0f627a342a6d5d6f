#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <utility>

namespace tbme {

/// Orthogonal coordinate chart for one tangent frame: forward maps an
/// ambient point to latent coordinates on the frame, inverse embeds latent
/// coordinates back onto the affine tangent plane. The basis must have
/// orthonormal rows (checked at construction), which makes the inverse the
/// transpose action and forward∘inverse the identity on latent space.
class Chart {
 public:
  Chart(Eigen::VectorXd anchor, Eigen::MatrixXd basis)
      : anchor_(std::move(anchor)), basis_(std::move(basis)) {
    if (basis_.rows() < 1 || basis_.cols() != anchor_.size())
      throw std::invalid_argument("Chart: basis/anchor dimension mismatch");
    const Eigen::MatrixXd gram = basis_ * basis_.transpose();
    const double err = (gram - Eigen::MatrixXd::Identity(basis_.rows(), basis_.rows()))
                           .cwiseAbs()
                           .maxCoeff();
    if (!(err <= 1e-10))
      throw std::invalid_argument("Chart: basis rows are not orthonormal");
  }

  int latent_dim() const { return static_cast<int>(basis_.rows()); }
  int ambient_dim() const { return static_cast<int>(basis_.cols()); }
  const Eigen::VectorXd& anchor() const { return anchor_; }
  const Eigen::MatrixXd& basis() const { return basis_; }

  /// basis * (x - anchor)
  Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
    if (x.size() != anchor_.size())
      throw std::invalid_argument("Chart::forward: dimension mismatch");
    return basis_ * (x - anchor_);
  }

  /// basis^T * y + anchor; the image lies on the affine tangent plane.
  Eigen::VectorXd inverse(const Eigen::VectorXd& y) const {
    if (y.size() != basis_.rows())
      throw std::invalid_argument("Chart::inverse: dimension mismatch");
    return basis_.transpose() * y + anchor_;
  }

  /// ||inverse(forward(x)) - x||, the distance from x to the plane.
  double reconstruction_error(const Eigen::VectorXd& x) const {
    return (inverse(forward(x)) - x).norm();
  }

 private:
  Eigen::VectorXd anchor_;
  Eigen::MatrixXd basis_;
};

inline Eigen::VectorXd chart_forward(const Chart& c, const Eigen::VectorXd& x) {
  return c.forward(x);
}

inline Eigen::VectorXd chart_inverse(const Chart& c, const Eigen::VectorXd& y) {
  return c.inverse(y);
}

inline double reconstruction_error(const Chart& c, const Eigen::VectorXd& x) {
  return c.reconstruction_error(x);
}

}  // namespace tbme
