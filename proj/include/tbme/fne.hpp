#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "tbme/chart.hpp"
#include "tbme/dataset.hpp"
#include "tbme/gmm.hpp"
#include "tbme/hull.hpp"
#include "tbme/moppca.hpp"
#include "tbme/rng.hpp"

namespace tbme {

enum class Method { M1, M2, M3 };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::M1: return "m1";
    case Method::M2: return "m2";
    case Method::M3: return "m3";
  }
  throw std::logic_error("method_name: bad enum");
}

inline Method parse_method(const std::string& s) {
  if (s == "m1" || s == "M1") return Method::M1;
  if (s == "m2" || s == "M2") return Method::M2;
  if (s == "m3" || s == "M3") return Method::M3;
  throw std::invalid_argument("parse_method: unknown method '" + s + "'");
}

struct FneConfig {
  double box_margin = 0.25;  // latent AABB expansion per side
  int volume_probe = 4096;   // rejection probe size for volume weights
  // 0 reuses the fitted mixture as the M3 ambient density; > 0 fits an
  // independent ambient GMM with that many components instead.
  int m3_ambient_components = 0;
};

/// M1 region: inverse image of the convex hull of assigned latent points.
struct HullNeighborhood {
  int frame_index;
  Chart chart;
  LatentHull hull;
};

/// M2 region: latent superlevel set {y : log P_a(y) > log_threshold},
/// truncated to the sampling box.
struct LatentDensityNeighborhood {
  int frame_index;
  Chart chart;
  GmmModel latent_density;
  double log_threshold;
  Eigen::VectorXd box_lo, box_hi;
};

/// M3 region: tangent plane intersected with the ambient superlevel set
/// {x : log P(x) > log_threshold}, truncated to the sampling box. The density
/// is shared across neighborhoods.
struct AmbientDensityNeighborhood {
  int frame_index;
  Chart chart;
  std::shared_ptr<const GmmModel> ambient_density;
  double log_threshold;
  Eigen::VectorXd box_lo, box_hi;
};

using Neighborhood =
    std::variant<HullNeighborhood, LatentDensityNeighborhood, AmbientDensityNeighborhood>;

inline const Chart& neighborhood_chart(const Neighborhood& n) {
  return std::visit([](const auto& v) -> const Chart& { return v.chart; }, n);
}

/// Union-of-neighborhoods manifold estimate. Weights are the normalized
/// estimated latent volumes used to sample the union approximately uniformly
/// (overlaps double-count).
struct ManifoldEstimate {
  Method method = Method::M1;
  std::vector<Neighborhood> neighborhoods;
  Eigen::VectorXd weights;
  int intrinsic_dim = 0;
  int ambient_dim = 0;
};

namespace detail {

inline Eigen::MatrixXd latent_coords(const Chart& chart, const Eigen::MatrixXd& pts,
                                     const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd Y(rows.size(), chart.latent_dim());
  for (size_t r = 0; r < rows.size(); ++r)
    Y.row(r) = chart.forward(pts.row(rows[r]).transpose());
  return Y;
}

/// Axis-aligned bounding box of the rows of Y, each side widened by
/// margin * (side width).
inline void expanded_box(const Eigen::MatrixXd& Y, double margin, Eigen::VectorXd& lo,
                         Eigen::VectorXd& hi) {
  lo = Y.colwise().minCoeff();
  hi = Y.colwise().maxCoeff();
  const Eigen::VectorXd w = hi - lo;
  lo -= margin * w;
  hi += margin * w;
}

inline double box_volume(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  return (hi - lo).prod();
}

inline Eigen::VectorXd uniform_in_box(Pcg32& rng, const Eigen::VectorXd& lo,
                                      const Eigen::VectorXd& hi) {
  Eigen::VectorXd y(lo.size());
  for (Eigen::Index j = 0; j < lo.size(); ++j) y[j] = rng.uniform(lo[j], hi[j]);
  return y;
}

inline bool in_box(const Eigen::VectorXd& y, const Eigen::VectorXd& lo,
                   const Eigen::VectorXd& hi) {
  return (y.array() >= lo.array()).all() && (y.array() <= hi.array()).all();
}

inline ManifoldEstimate finalize_estimate(Method method, std::vector<Neighborhood> ns,
                                          std::vector<double> volumes, int d, int D,
                                          const char* who) {
  if (ns.empty())
    throw std::runtime_error(std::string(who) + ": every frame is empty");
  double total = 0.0;
  for (double v : volumes) total += v;
  if (!(total > 0.0))
    throw std::runtime_error(std::string(who) +
                             ": empty estimate (no neighborhood has positive volume)");
  ManifoldEstimate est;
  est.method = method;
  est.neighborhoods = std::move(ns);
  est.weights = Eigen::Map<Eigen::VectorXd>(volumes.data(), volumes.size()) / total;
  est.intrinsic_dim = d;
  est.ambient_dim = D;
  return est;
}

}  // namespace detail

/// M1: per-frame convex hull of assigned latent coordinates, weight
/// proportional to hull d-volume. Frames with fewer than d+1 assigned points
/// are dropped.
inline ManifoldEstimate estimate_m1(const TangentBundle& bundle, const PointCloud& X) {
  const int d = bundle.intrinsic_dim;
  if (d != 1 && d != 2)
    throw std::invalid_argument("estimate_m1: unsupported latent dimension " +
                                std::to_string(d));
  std::vector<Neighborhood> ns;
  std::vector<double> volumes;
  for (size_t i = 0; i < bundle.frames.size(); ++i) {
    const auto idx = bundle.assigned_points(static_cast<int>(i));
    if (static_cast<int>(idx.size()) < d + 1) continue;
    Chart chart(bundle.frames[i].anchor, bundle.frames[i].basis);
    const Eigen::MatrixXd Y = detail::latent_coords(chart, X.points, idx);
    LatentHull hull = convex_hull_latent(Y);
    volumes.push_back(hull.volume());
    ns.push_back(HullNeighborhood{static_cast<int>(i), std::move(chart), std::move(hull)});
  }
  return detail::finalize_estimate(Method::M1, std::move(ns), std::move(volumes), d,
                                   bundle.ambient_dim, "estimate_m1");
}

/// Reusable per-frame state for M2: the fitted latent GMM, the sampling box,
/// and a cached probe of log-densities at fixed uniform box points. Assembling
/// an estimate for a given threshold only counts probe points above it, so
/// threshold search never refits.
struct M2FrameCore {
  int frame_index;
  Chart chart;
  GmmModel latent_density;
  Eigen::VectorXd box_lo, box_hi;
  double box_volume;
  Eigen::VectorXd probe_log_density;
};

struct M2Cores {
  std::vector<M2FrameCore> frames;
  int intrinsic_dim = 0;
  int ambient_dim = 0;
};

/// Seed chain: per-frame GMM fits use chain_seed(chain_seed(seed,1), frame),
/// probes chain_seed(chain_seed(seed,2), frame). Component counts are clamped
/// to what the frame's point count supports (>= d+1 points per component).
inline M2Cores build_m2_cores(const TangentBundle& bundle, const PointCloud& X,
                              int gmm_components, const FneConfig& config,
                              const EmConfig& em, std::uint64_t seed) {
  if (gmm_components < 1) throw std::invalid_argument("build_m2_cores: components >= 1");
  const int d = bundle.intrinsic_dim;
  M2Cores cores;
  cores.intrinsic_dim = d;
  cores.ambient_dim = bundle.ambient_dim;
  const std::uint64_t fit_seed = chain_seed(seed, 1);
  const std::uint64_t probe_seed = chain_seed(seed, 2);
  for (size_t i = 0; i < bundle.frames.size(); ++i) {
    const auto idx = bundle.assigned_points(static_cast<int>(i));
    if (static_cast<int>(idx.size()) < d + 1) continue;
    Chart chart(bundle.frames[i].anchor, bundle.frames[i].basis);
    const Eigen::MatrixXd Y = detail::latent_coords(chart, X.points, idx);
    const int comps = std::max(
        1, std::min(gmm_components, static_cast<int>(idx.size()) / (d + 1)));
    GmmModel gmm = fit_gmm(Y, comps, em, chain_seed(fit_seed, i)).model;
    M2FrameCore core{static_cast<int>(i), std::move(chart), std::move(gmm),
                     Eigen::VectorXd(),   Eigen::VectorXd(), 0.0,
                     Eigen::VectorXd()};
    detail::expanded_box(Y, config.box_margin, core.box_lo, core.box_hi);
    core.box_volume = detail::box_volume(core.box_lo, core.box_hi);
    Pcg32 rng(chain_seed(probe_seed, i));
    Eigen::MatrixXd probe(config.volume_probe, d);
    for (int r = 0; r < config.volume_probe; ++r)
      probe.row(r) = detail::uniform_in_box(rng, core.box_lo, core.box_hi);
    core.probe_log_density = core.latent_density.log_density_batch(probe);
    cores.frames.push_back(std::move(core));
  }
  return cores;
}

inline ManifoldEstimate assemble_m2(const M2Cores& cores, double log_threshold) {
  std::vector<Neighborhood> ns;
  std::vector<double> volumes;
  for (const auto& core : cores.frames) {
    const double accepted =
        (core.probe_log_density.array() > log_threshold).count() /
        static_cast<double>(core.probe_log_density.size());
    volumes.push_back(accepted * core.box_volume);
    ns.push_back(LatentDensityNeighborhood{core.frame_index, core.chart,
                                           core.latent_density, log_threshold,
                                           core.box_lo, core.box_hi});
  }
  return detail::finalize_estimate(Method::M2, std::move(ns), std::move(volumes),
                                   cores.intrinsic_dim, cores.ambient_dim, "assemble_m2");
}

inline ManifoldEstimate estimate_m2(const TangentBundle& bundle, const PointCloud& X,
                                    int gmm_components, double log_threshold,
                                    const FneConfig& config, const EmConfig& em,
                                    std::uint64_t seed) {
  return assemble_m2(build_m2_cores(bundle, X, gmm_components, config, em, seed),
                     log_threshold);
}

/// M3 analogue of M2FrameCore; the probe caches the ambient log-density along
/// each tangent plane, so assembly is again a counting pass.
struct M3FrameCore {
  int frame_index;
  Chart chart;
  Eigen::VectorXd box_lo, box_hi;
  double box_volume;
  Eigen::VectorXd probe_log_density;
};

struct M3Cores {
  std::vector<M3FrameCore> frames;
  std::shared_ptr<const GmmModel> ambient_density;
  int intrinsic_dim = 0;
  int ambient_dim = 0;
};

inline M3Cores build_m3_cores(const TangentBundle& bundle, const PointCloud& X,
                              std::shared_ptr<const GmmModel> ambient,
                              const FneConfig& config, std::uint64_t seed) {
  if (!ambient) throw std::invalid_argument("build_m3_cores: null ambient density");
  if (ambient->dim() != bundle.ambient_dim)
    throw std::invalid_argument("build_m3_cores: ambient density dimension mismatch");
  const int d = bundle.intrinsic_dim;
  M3Cores cores;
  cores.ambient_density = std::move(ambient);
  cores.intrinsic_dim = d;
  cores.ambient_dim = bundle.ambient_dim;
  const std::uint64_t probe_seed = chain_seed(seed, 2);
  for (size_t i = 0; i < bundle.frames.size(); ++i) {
    const auto idx = bundle.assigned_points(static_cast<int>(i));
    if (static_cast<int>(idx.size()) < d + 1) continue;
    Chart chart(bundle.frames[i].anchor, bundle.frames[i].basis);
    const Eigen::MatrixXd Y = detail::latent_coords(chart, X.points, idx);
    M3FrameCore core{static_cast<int>(i), std::move(chart), Eigen::VectorXd(),
                     Eigen::VectorXd(),   0.0,              Eigen::VectorXd()};
    detail::expanded_box(Y, config.box_margin, core.box_lo, core.box_hi);
    core.box_volume = detail::box_volume(core.box_lo, core.box_hi);
    Pcg32 rng(chain_seed(probe_seed, i));
    Eigen::MatrixXd probe(config.volume_probe, cores.ambient_dim);
    for (int r = 0; r < config.volume_probe; ++r)
      probe.row(r) =
          core.chart.inverse(detail::uniform_in_box(rng, core.box_lo, core.box_hi));
    core.probe_log_density = cores.ambient_density->log_density_batch(probe);
    cores.frames.push_back(std::move(core));
  }
  return cores;
}

inline ManifoldEstimate assemble_m3(const M3Cores& cores, double log_threshold) {
  std::vector<Neighborhood> ns;
  std::vector<double> volumes;
  for (const auto& core : cores.frames) {
    const double accepted =
        (core.probe_log_density.array() > log_threshold).count() /
        static_cast<double>(core.probe_log_density.size());
    volumes.push_back(accepted * core.box_volume);
    ns.push_back(AmbientDensityNeighborhood{core.frame_index, core.chart,
                                            cores.ambient_density, log_threshold,
                                            core.box_lo, core.box_hi});
  }
  return detail::finalize_estimate(Method::M3, std::move(ns), std::move(volumes),
                                   cores.intrinsic_dim, cores.ambient_dim, "assemble_m3");
}

inline ManifoldEstimate estimate_m3(const TangentBundle& bundle, const PointCloud& X,
                                    std::shared_ptr<const GmmModel> ambient,
                                    double log_threshold, const FneConfig& config,
                                    std::uint64_t seed) {
  return assemble_m3(build_m3_cores(bundle, X, std::move(ambient), config, seed),
                     log_threshold);
}

namespace detail {

/// One uniform latent draw from a neighborhood's region by rejection.
/// Returns the ambient point. Throws when acceptance collapses (threshold
/// above the region's density everywhere in the box).
inline Eigen::VectorXd draw_from_neighborhood(const Neighborhood& n, Pcg32& rng) {
  constexpr int kMaxAttempts = 100000;  // acceptance below ~1e-4 is pathological
  if (const auto* h = std::get_if<HullNeighborhood>(&n)) {
    Eigen::VectorXd lo, hi;
    h->hull.bounding_box(lo, hi);
    for (int a = 0; a < kMaxAttempts; ++a) {
      const Eigen::VectorXd y = uniform_in_box(rng, lo, hi);
      if (h->hull.contains(y, 0.0)) return h->chart.inverse(y);
    }
  } else if (const auto* l = std::get_if<LatentDensityNeighborhood>(&n)) {
    for (int a = 0; a < kMaxAttempts; ++a) {
      const Eigen::VectorXd y = uniform_in_box(rng, l->box_lo, l->box_hi);
      if (l->latent_density.log_density(y) > l->log_threshold) return l->chart.inverse(y);
    }
  } else {
    const auto& amb = std::get<AmbientDensityNeighborhood>(n);
    for (int a = 0; a < kMaxAttempts; ++a) {
      const Eigen::VectorXd y = uniform_in_box(rng, amb.box_lo, amb.box_hi);
      const Eigen::VectorXd x = amb.chart.inverse(y);
      if (amb.ambient_density->log_density(x) > amb.log_threshold) return x;
    }
  }
  throw std::runtime_error(
      "sample_estimate: pathological threshold (acceptance rate below 1e-4)");
}

}  // namespace detail

/// Uniform-ish sample of the estimate: pick a neighborhood by weight, draw a
/// latent point uniformly from its region by rejection, map through the
/// inverse chart. Deterministic given seed.
inline PointCloud sample_estimate(const ManifoldEstimate& est, Eigen::Index m,
                                  std::uint64_t seed) {
  if (est.neighborhoods.empty())
    throw std::invalid_argument("sample_estimate: empty estimate");
  if (m < 1) throw std::invalid_argument("sample_estimate: m >= 1 required");
  const Eigen::Index nn = est.weights.size();
  std::vector<double> cum(nn);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < nn; ++i) {
    acc += est.weights[i];
    cum[i] = acc;
  }
  Pcg32 rng(seed);
  PointCloud cloud;
  cloud.points.resize(m, est.ambient_dim);
  cloud.intrinsic_dim = est.intrinsic_dim;
  cloud.seed = seed;
  cloud.source = "estimate";
  for (Eigen::Index i = 0; i < m; ++i) {
    const double u = rng.next_double() * acc;
    size_t pick = std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
    if (pick >= static_cast<size_t>(nn)) pick = nn - 1;
    cloud.points.row(i) = detail::draw_from_neighborhood(est.neighborhoods[pick], rng);
  }
  return cloud;
}

/// Eq.-1 union membership: x belongs to the estimate iff some neighborhood's
/// plane passes within tol of x and x's latent image satisfies that
/// neighborhood's region rule.
inline bool membership(const ManifoldEstimate& est, const Eigen::VectorXd& x, double tol) {
  for (const auto& n : est.neighborhoods) {
    const Chart& chart = neighborhood_chart(n);
    if (chart.reconstruction_error(x) > tol) continue;
    const Eigen::VectorXd y = chart.forward(x);
    const bool inside = std::visit(
        [&](const auto& v) -> bool {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, HullNeighborhood>) {
            return v.hull.contains(y, 1e-9);
          } else if constexpr (std::is_same_v<T, LatentDensityNeighborhood>) {
            return detail::in_box(y, v.box_lo, v.box_hi) &&
                   v.latent_density.log_density(y) > v.log_threshold;
          } else {
            return detail::in_box(y, v.box_lo, v.box_hi) &&
                   v.ambient_density->log_density(v.chart.inverse(y)) > v.log_threshold;
          }
        },
        n);
    if (inside) return true;
  }
  return false;
}

}  // namespace tbme
