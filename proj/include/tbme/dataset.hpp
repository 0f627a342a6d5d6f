#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tbme/rng.hpp"

namespace tbme {

enum class ManifoldKind { Spiral2D, Sine2D, SCurve3D, SwissRoll3D };

inline const char* manifold_kind_name(ManifoldKind k) {
  switch (k) {
    case ManifoldKind::Spiral2D: return "spiral";
    case ManifoldKind::Sine2D: return "sine";
    case ManifoldKind::SCurve3D: return "scurve";
    case ManifoldKind::SwissRoll3D: return "swissroll";
  }
  return "?";
}

inline ManifoldKind manifold_kind_from_name(const std::string& name) {
  if (name == "spiral") return ManifoldKind::Spiral2D;
  if (name == "sine") return ManifoldKind::Sine2D;
  if (name == "scurve" || name == "s-curve") return ManifoldKind::SCurve3D;
  if (name == "swissroll" || name == "swiss-roll") return ManifoldKind::SwissRoll3D;
  throw std::invalid_argument("unknown manifold kind: " + name);
}

/// Synthetic manifold family: a curve or surface traced by a latent
/// parameter t (plus a second uniform coordinate u for the surfaces),
/// observed under per-coordinate Gaussian noise.
struct ManifoldSpec {
  ManifoldKind kind = ManifoldKind::Spiral2D;
  double t_min = 0.0;
  double t_max = 1.0;
  std::vector<double> noise_sigmas;  // standard deviations, one per ambient coordinate
  int ambient_dim = 2;               // D
  int intrinsic_dim = 1;             // d

  void validate() const {
    const bool curve = kind == ManifoldKind::Spiral2D || kind == ManifoldKind::Sine2D;
    if (ambient_dim != (curve ? 2 : 3))
      throw std::invalid_argument("ManifoldSpec: ambient_dim inconsistent with kind");
    if (intrinsic_dim != (curve ? 1 : 2))
      throw std::invalid_argument("ManifoldSpec: intrinsic_dim inconsistent with kind");
    if (!(t_min < t_max))
      throw std::invalid_argument("ManifoldSpec: t_min must be < t_max");
    if (static_cast<int>(noise_sigmas.size()) != ambient_dim)
      throw std::invalid_argument("ManifoldSpec: need one noise sigma per coordinate");
    for (double s : noise_sigmas)
      if (!(s >= 0.0)) throw std::invalid_argument("ManifoldSpec: noise sigmas must be >= 0");
  }

  /// The four dataset configurations used throughout the experiments.
  static ManifoldSpec builtin(ManifoldKind k) {
    ManifoldSpec s;
    s.kind = k;
    switch (k) {
      case ManifoldKind::Spiral2D:
        s.t_min = 3.0; s.t_max = 15.0;
        s.noise_sigmas = {0.01, 0.01};
        s.ambient_dim = 2; s.intrinsic_dim = 1;
        break;
      case ManifoldKind::Sine2D:
        s.t_min = 3.0; s.t_max = 15.0;
        s.noise_sigmas = {0.05, 0.05};
        s.ambient_dim = 2; s.intrinsic_dim = 1;
        break;
      case ManifoldKind::SCurve3D:
        s.t_min = -1.5 * M_PI; s.t_max = 1.5 * M_PI;
        s.noise_sigmas = {0.05, 0.05, 0.05};
        s.ambient_dim = 3; s.intrinsic_dim = 2;
        break;
      case ManifoldKind::SwissRoll3D:
        s.t_min = 1.5 * M_PI; s.t_max = 4.5 * M_PI;
        s.noise_sigmas = {0.0005, 0.0005, 0.0005};
        s.ambient_dim = 3; s.intrinsic_dim = 2;
        break;
    }
    return s;
  }

  static ManifoldSpec builtin(const std::string& name) {
    return builtin(manifold_kind_from_name(name));
  }
};

/// Range of the second latent coordinate for the surface datasets; the
/// curves ignore u entirely.
inline std::pair<double, double> u_range(ManifoldKind k) {
  switch (k) {
    case ManifoldKind::SCurve3D: return {0.0, 2.0};
    case ManifoldKind::SwissRoll3D: return {0.0, 21.0};
    default: return {0.0, 0.0};
  }
}

/// An n x D sample matrix with its provenance.
struct PointCloud {
  Eigen::MatrixXd points;  // n x D, one point per row
  int intrinsic_dim = 0;   // declared d
  std::uint64_t seed = 0;
  std::string source;

  Eigen::Index size() const { return points.rows(); }
  int ambient_dim() const { return static_cast<int>(points.cols()); }

  void validate() const {
    if (points.rows() < 1) throw std::invalid_argument("PointCloud: need at least one point");
    if (!points.allFinite()) throw std::invalid_argument("PointCloud: non-finite coordinate");
  }
};

/// Noise-free point of the generator at latent coordinates (t, u);
/// u is ignored for the curve datasets.
inline Eigen::VectorXd generator_point(const ManifoldSpec& spec, double t, double u = 0.0) {
  if (t < spec.t_min || t > spec.t_max)
    throw std::out_of_range("generator_point: t outside parameter range");
  Eigen::VectorXd p(spec.ambient_dim);
  switch (spec.kind) {
    case ManifoldKind::Spiral2D:
      p << 0.04 * t * std::sin(t), 0.04 * t * std::cos(t);
      break;
    case ManifoldKind::Sine2D:
      p << t, std::sin(2.0 * M_PI * 5.0 * t / 30.0);
      break;
    case ManifoldKind::SCurve3D: {
      const double sgn = t < 0.0 ? -1.0 : 1.0;  // sign(0) taken as +1
      p << std::sin(t), u, sgn * (std::cos(t) - 1.0);
      break;
    }
    case ManifoldKind::SwissRoll3D:
      p << t * std::cos(t), u, t * std::sin(t);
      break;
  }
  return p;
}

/// Draws n noisy samples. Per point, the stream consumes: t, then u (surfaces
/// only), then one Gaussian per coordinate — so the zero-noise cloud for a
/// given seed is exactly the noisy cloud's generator means.
inline PointCloud generate_dataset(const ManifoldSpec& spec, int n, std::uint64_t seed) {
  spec.validate();
  if (n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");
  const auto [u_lo, u_hi] = u_range(spec.kind);
  Pcg32 rng(seed);
  PointCloud cloud;
  cloud.points.resize(n, spec.ambient_dim);
  cloud.intrinsic_dim = spec.intrinsic_dim;
  cloud.seed = seed;
  cloud.source = std::string("generator:") + manifold_kind_name(spec.kind);
  for (int i = 0; i < n; ++i) {
    const double t = rng.uniform(spec.t_min, spec.t_max);
    const double u = spec.intrinsic_dim == 2 ? rng.uniform(u_lo, u_hi) : 0.0;
    Eigen::VectorXd p = generator_point(spec, t, u);
    for (int j = 0; j < spec.ambient_dim; ++j)
      p[j] += rng.normal(0.0, spec.noise_sigmas[j]);
    cloud.points.row(i) = p;
  }
  return cloud;
}

/// Draws m noise-free points, uniform in the latent parameters.
inline PointCloud sample_true_manifold(const ManifoldSpec& spec, int m, std::uint64_t seed) {
  spec.validate();
  if (m < 1) throw std::invalid_argument("sample_true_manifold: m must be >= 1");
  const auto [u_lo, u_hi] = u_range(spec.kind);
  Pcg32 rng(seed);
  PointCloud cloud;
  cloud.points.resize(m, spec.ambient_dim);
  cloud.intrinsic_dim = spec.intrinsic_dim;
  cloud.seed = seed;
  cloud.source = std::string("true-manifold:") + manifold_kind_name(spec.kind);
  for (int i = 0; i < m; ++i) {
    const double t = rng.uniform(spec.t_min, spec.t_max);
    const double u = spec.intrinsic_dim == 2 ? rng.uniform(u_lo, u_hi) : 0.0;
    cloud.points.row(i) = generator_point(spec, t, u);
  }
  return cloud;
}

}  // namespace tbme
