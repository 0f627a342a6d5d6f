#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Core>
#include <cmath>
#include <memory>
#include <vector>

#include "tbme/dataset.hpp"
#include "tbme/fne.hpp"
#include "tbme/json_io.hpp"
#include "tbme/moppca.hpp"

using namespace tbme;

namespace {

/// Single-frame bundle whose frame spans e1..ed at `anchor` with the given
/// points all hard-assigned to it.
TangentBundle single_frame_bundle(const Eigen::VectorXd& anchor, int d,
                                  const Eigen::MatrixXd& points) {
  const int D = static_cast<int>(anchor.size());
  TangentBundle bundle;
  bundle.intrinsic_dim = d;
  bundle.ambient_dim = D;
  TangentFrame frame;
  frame.anchor = anchor;
  frame.basis = Eigen::MatrixXd::Identity(d, D);
  bundle.frames.push_back(frame);
  bundle.assignment.hard_assignment.assign(points.rows(), 0);
  bundle.assignment.responsibilities = Eigen::MatrixXd::Ones(points.rows(), 1);
  return bundle;
}

Eigen::MatrixXd square_corners(double x0, double y0, double side) {
  Eigen::MatrixXd pts(4, 3);
  pts << x0, y0, 0, x0 + side, y0, 0, x0 + side, y0 + side, 0, x0, y0 + side, 0;
  return pts;
}

GmmModel standard_normal_gmm(int p) {
  Eigen::VectorXd w(1);
  w << 1.0;
  return GmmModel(w, Eigen::MatrixXd::Zero(1, p), {Eigen::MatrixXd::Identity(p, p)});
}

constexpr double kLog2Pi = 1.8378770664093453;

/// Spiral fixture shared by the end-to-end method tests.
struct SpiralFit {
  PointCloud X;
  TangentBundle bundle;
  SpiralFit() {
    X = generate_dataset(ManifoldSpec::builtin(ManifoldKind::Spiral2D), 800, 9001);
    const MoppcaModel model = fit_moppca(X, 14, 1, EmConfig{}, 17);
    bundle = extract_tangent_bundle(model, X);
  }
};

}  // namespace

TEST_CASE("m1 on a hand-built square frame samples inside the hull") {
  const Eigen::MatrixXd pts = square_corners(0.0, 0.0, 1.0);
  PointCloud X;
  X.points = pts;
  const TangentBundle bundle = single_frame_bundle(Eigen::Vector3d::Zero(), 2, pts);
  const ManifoldEstimate est = estimate_m1(bundle, X);
  REQUIRE(est.neighborhoods.size() == 1);
  CHECK(est.weights[0] == 1.0);
  const auto& hood = std::get<HullNeighborhood>(est.neighborhoods[0]);
  CHECK(hood.frame_index == 0);
  CHECK_THAT(hood.hull.volume(), Catch::Matchers::WithinAbs(1.0, 1e-15));

  const PointCloud sample = sample_estimate(est, 2000, 31);
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    const Eigen::VectorXd x = sample.points.row(i).transpose();
    REQUIRE(x[2] == 0.0);
    REQUIRE(x[0] >= 0.0);
    REQUIRE(x[0] <= 1.0);
    REQUIRE(hood.chart.reconstruction_error(x) < 1e-12);
    REQUIRE(membership(est, x, 1e-8));
  }
}

TEST_CASE("m1 sampling of the unit square is uniform") {
  const Eigen::MatrixXd pts = square_corners(0.0, 0.0, 1.0);
  PointCloud X;
  X.points = pts;
  const ManifoldEstimate est =
      estimate_m1(single_frame_bundle(Eigen::Vector3d::Zero(), 2, pts), X);
  const PointCloud sample = sample_estimate(est, 100000, 33);
  const Eigen::VectorXd mean = sample.points.colwise().mean();
  CHECK_THAT(mean[0], Catch::Matchers::WithinAbs(0.5, 0.01));
  CHECK_THAT(mean[1], Catch::Matchers::WithinAbs(0.5, 0.01));
  CHECK(mean[2] == 0.0);
}

TEST_CASE("equal-volume neighborhoods get equal weights and sampling shares") {
  Eigen::MatrixXd pts(8, 3);
  pts.topRows(4) = square_corners(0.0, 0.0, 1.0);
  pts.bottomRows(4) = square_corners(10.0, 0.0, 1.0);
  PointCloud X;
  X.points = pts;
  TangentBundle bundle;
  bundle.intrinsic_dim = 2;
  bundle.ambient_dim = 3;
  bundle.frames.push_back({Eigen::Vector3d::Zero(), Eigen::MatrixXd::Identity(2, 3)});
  bundle.frames.push_back(
      {Eigen::Vector3d(10, 0, 0), Eigen::MatrixXd::Identity(2, 3)});
  bundle.assignment.hard_assignment = {0, 0, 0, 0, 1, 1, 1, 1};
  const ManifoldEstimate est = estimate_m1(bundle, X);
  REQUIRE(est.weights.size() == 2);
  CHECK(est.weights[0] == 0.5);
  CHECK(est.weights[1] == 0.5);

  const PointCloud sample = sample_estimate(est, 10000, 35);
  const double right = (sample.points.col(0).array() > 5.0).count() / 10000.0;
  CHECK_THAT(right, Catch::Matchers::WithinAbs(0.5, 0.03));
}

TEST_CASE("m1 drops frames with fewer than d+1 assigned points") {
  Eigen::MatrixXd pts(6, 3);
  pts.topRows(4) = square_corners(0.0, 0.0, 1.0);
  pts.row(4) << 10, 0, 0;
  pts.row(5) << 11, 0, 0;
  PointCloud X;
  X.points = pts;
  TangentBundle bundle;
  bundle.intrinsic_dim = 2;
  bundle.ambient_dim = 3;
  bundle.frames.push_back({Eigen::Vector3d::Zero(), Eigen::MatrixXd::Identity(2, 3)});
  bundle.frames.push_back(
      {Eigen::Vector3d(10, 0, 0), Eigen::MatrixXd::Identity(2, 3)});
  bundle.assignment.hard_assignment = {0, 0, 0, 0, 1, 1};
  const ManifoldEstimate est = estimate_m1(bundle, X);
  REQUIRE(est.neighborhoods.size() == 1);
  CHECK(std::get<HullNeighborhood>(est.neighborhoods[0]).frame_index == 0);
  CHECK(est.weights[0] == 1.0);
}

TEST_CASE("m2 superlevel set of a standard normal is the unit interval") {
  // log N(y|0,1) > log N(1|0,1) iff |y| < 1.
  Chart chart(Eigen::Vector2d::Zero(), Eigen::MatrixXd::Identity(1, 2));
  Eigen::VectorXd lo(1), hi(1);
  lo << -4.0;
  hi << 4.0;
  const double threshold = -0.5 * kLog2Pi - 0.5;
  ManifoldEstimate est;
  est.method = Method::M2;
  est.intrinsic_dim = 1;
  est.ambient_dim = 2;
  est.neighborhoods.push_back(
      LatentDensityNeighborhood{0, chart, standard_normal_gmm(1), threshold, lo, hi});
  est.weights = Eigen::VectorXd::Ones(1);

  const PointCloud sample = sample_estimate(est, 100000, 37);
  double max_abs = 0.0, mean = 0.0;
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    REQUIRE(sample.points(i, 1) == 0.0);
    const double y = sample.points(i, 0);
    REQUIRE(std::abs(y) <= 1.0);
    max_abs = std::max(max_abs, std::abs(y));
    mean += y;
  }
  CHECK(max_abs > 0.99);
  CHECK_THAT(mean / sample.size(), Catch::Matchers::WithinAbs(0.0, 0.01));

  CHECK(membership(est, Eigen::Vector2d(0.99, 0.0), 1e-8));
  CHECK_FALSE(membership(est, Eigen::Vector2d(1.01, 0.0), 1e-8));
  CHECK_FALSE(membership(est, Eigen::Vector2d(0.5, 0.1), 1e-8));
}

TEST_CASE("m3 superlevel set on a plane through a spherical gaussian is a disk") {
  // On the plane z = 0, log N(x|0,I3) > alpha iff |x| < r_star.
  const double r_star = 1.2;
  const double alpha = -1.5 * kLog2Pi - 0.5 * r_star * r_star;
  Chart chart(Eigen::Vector3d::Zero(), Eigen::MatrixXd::Identity(2, 3));
  Eigen::VectorXd lo(2), hi(2);
  lo << -4.0, -4.0;
  hi << 4.0, 4.0;
  ManifoldEstimate est;
  est.method = Method::M3;
  est.intrinsic_dim = 2;
  est.ambient_dim = 3;
  est.neighborhoods.push_back(AmbientDensityNeighborhood{
      0, chart, std::make_shared<const GmmModel>(standard_normal_gmm(3)), alpha, lo, hi});
  est.weights = Eigen::VectorXd::Ones(1);

  const PointCloud sample = sample_estimate(est, 100000, 39);
  double max_r = 0.0, mean_r = 0.0;
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    REQUIRE(sample.points(i, 2) == 0.0);
    const double r = sample.points.row(i).head<2>().norm();
    REQUIRE(r <= r_star);
    max_r = std::max(max_r, r);
    mean_r += r;
  }
  CHECK(max_r > 0.99 * r_star);
  // Mean radius of a uniform disk is 2 r / 3.
  CHECK_THAT(mean_r / sample.size(),
             Catch::Matchers::WithinAbs(2.0 * r_star / 3.0, 0.01));

  CHECK(membership(est, Eigen::Vector3d(1.19, 0.0, 0.0), 1e-8));
  CHECK_FALSE(membership(est, Eigen::Vector3d(1.21, 0.0, 0.0), 1e-8));
  CHECK_FALSE(membership(est, Eigen::Vector3d(0.0, 0.0, 0.5), 1e-8));
}

TEST_CASE("a vacuous threshold weights neighborhoods by box volume") {
  M2Cores cores;
  cores.intrinsic_dim = 1;
  cores.ambient_dim = 2;
  for (int i = 0; i < 2; ++i) {
    const double half = i == 0 ? 1.0 : 3.0;
    cores.frames.push_back(M2FrameCore{
        i, Chart(Eigen::Vector2d(5.0 * i, 0.0), Eigen::MatrixXd::Identity(1, 2)),
        standard_normal_gmm(1), Eigen::VectorXd::Constant(1, -half),
        Eigen::VectorXd::Constant(1, half), 2.0 * half, Eigen::VectorXd::Zero(16)});
  }
  const ManifoldEstimate est = assemble_m2(cores, -1e10);
  REQUIRE(est.weights.size() == 2);
  CHECK(est.weights[0] == 0.25);
  CHECK(est.weights[1] == 0.75);

  CHECK_THROWS_WITH(assemble_m2(cores, 1e10),
                    Catch::Matchers::ContainsSubstring("empty estimate"));
}

TEST_CASE("fitted pipelines produce samples that pass their own membership") {
  const SpiralFit fit;
  const FneConfig fne;
  const EmConfig em;

  std::vector<ManifoldEstimate> ests;
  ests.push_back(estimate_m1(fit.bundle, fit.X));

  const M2Cores m2 = build_m2_cores(fit.bundle, fit.X, 2, fne, em, 21);
  std::vector<double> all_probes;
  for (const auto& f : m2.frames)
    all_probes.insert(all_probes.end(), f.probe_log_density.data(),
                      f.probe_log_density.data() + f.probe_log_density.size());
  std::sort(all_probes.begin(), all_probes.end());
  const double m2_threshold = all_probes[all_probes.size() * 3 / 10];
  ests.push_back(assemble_m2(m2, m2_threshold));

  const auto ambient = std::make_shared<const GmmModel>(
      to_gmm(fit_moppca(fit.X, 14, 1, em, 17)));
  const M3Cores m3 = build_m3_cores(fit.bundle, fit.X, ambient, fne, 23);
  std::vector<double> m3_probes;
  for (const auto& f : m3.frames)
    m3_probes.insert(m3_probes.end(), f.probe_log_density.data(),
                     f.probe_log_density.data() + f.probe_log_density.size());
  std::sort(m3_probes.begin(), m3_probes.end());
  ests.push_back(assemble_m3(m3, m3_probes[m3_probes.size() * 3 / 10]));

  for (const auto& est : ests) {
    CHECK_THAT(est.weights.sum(), Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK((est.weights.array() >= 0.0).all());
    const PointCloud sample = sample_estimate(est, 500, 41);
    for (Eigen::Index i = 0; i < sample.size(); ++i)
      REQUIRE(membership(est, sample.points.row(i).transpose(), 1e-8));
  }

  // Every frame with at least d+1 assigned points must appear.
  size_t live = 0;
  for (size_t f = 0; f < fit.bundle.frames.size(); ++f)
    if (fit.bundle.assigned_points(static_cast<int>(f)).size() >= 2) ++live;
  CHECK(ests[0].neighborhoods.size() == live);
  CHECK(m2.frames.size() == live);
  CHECK(m3.frames.size() == live);
}

TEST_CASE("raising the threshold shrinks the estimate") {
  const SpiralFit fit;
  const M2Cores cores = build_m2_cores(fit.bundle, fit.X, 2, FneConfig{}, EmConfig{}, 25);
  std::vector<double> probes;
  for (const auto& f : cores.frames)
    probes.insert(probes.end(), f.probe_log_density.data(),
                  f.probe_log_density.data() + f.probe_log_density.size());
  std::sort(probes.begin(), probes.end());
  const double t_low = probes[probes.size() / 10];
  const double t_high = probes[probes.size() / 2];
  const ManifoldEstimate wide = assemble_m2(cores, t_low);
  const ManifoldEstimate narrow = assemble_m2(cores, t_high);

  const PointCloud sample = sample_estimate(narrow, 300, 43);
  for (Eigen::Index i = 0; i < sample.size(); ++i)
    REQUIRE(membership(wide, sample.points.row(i).transpose(), 1e-8));
}

TEST_CASE("estimates survive a json round trip") {
  const SpiralFit fit;
  std::vector<ManifoldEstimate> ests;
  ests.push_back(estimate_m1(fit.bundle, fit.X));  // interval hulls (d = 1)
  ests.push_back(estimate_m2(fit.bundle, fit.X, 1, -20.0, FneConfig{}, EmConfig{}, 27));
  ests.push_back(estimate_m3(
      fit.bundle, fit.X,
      std::make_shared<const GmmModel>(to_gmm(fit_moppca(fit.X, 14, 1, EmConfig{}, 17))),
      -20.0, FneConfig{}, 29));

  const Eigen::MatrixXd pts = square_corners(0.0, 0.0, 1.0);
  PointCloud sq;
  sq.points = pts;
  ests.push_back(estimate_m1(single_frame_bundle(Eigen::Vector3d::Zero(), 2, pts), sq));

  for (const auto& est : ests) {
    const ManifoldEstimate back = estimate_from_json(to_json(est));
    CHECK(back.method == est.method);
    CHECK(back.intrinsic_dim == est.intrinsic_dim);
    CHECK(back.ambient_dim == est.ambient_dim);
    REQUIRE(back.weights == est.weights);
    const PointCloud a = sample_estimate(est, 200, 47);
    const PointCloud b = sample_estimate(back, 200, 47);
    REQUIRE(a.points == b.points);
  }
}

TEST_CASE("pathological thresholds abort sampling with a clear error") {
  // The strict > comparison never accepts when the threshold equals the mode.
  Chart chart(Eigen::Vector2d::Zero(), Eigen::MatrixXd::Identity(1, 2));
  Eigen::VectorXd lo(1), hi(1);
  lo << -4.0;
  hi << 4.0;
  ManifoldEstimate est;
  est.method = Method::M2;
  est.intrinsic_dim = 1;
  est.ambient_dim = 2;
  est.neighborhoods.push_back(LatentDensityNeighborhood{
      0, chart, standard_normal_gmm(1), -0.5 * kLog2Pi, lo, hi});
  est.weights = Eigen::VectorXd::Ones(1);
  CHECK_THROWS_WITH(sample_estimate(est, 1, 49),
                    Catch::Matchers::ContainsSubstring("pathological threshold"));
}

TEST_CASE("estimators reject unusable bundles and arguments") {
  Eigen::MatrixXd two(2, 3);
  two << 0, 0, 0, 1, 0, 0;
  PointCloud X;
  X.points = two;
  TangentBundle starved = single_frame_bundle(Eigen::Vector3d::Zero(), 2, two);
  CHECK_THROWS_WITH(estimate_m1(starved, X),
                    Catch::Matchers::ContainsSubstring("every frame is empty"));
  CHECK_THROWS_AS(build_m2_cores(starved, X, 0, FneConfig{}, EmConfig{}, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_m3_cores(starved, X, nullptr, FneConfig{}, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      build_m3_cores(starved, X, std::make_shared<const GmmModel>(standard_normal_gmm(2)),
                     FneConfig{}, 1),
      std::invalid_argument);

  TangentBundle d3;
  d3.intrinsic_dim = 3;
  d3.ambient_dim = 5;
  CHECK_THROWS_AS(estimate_m1(d3, X), std::invalid_argument);

  ManifoldEstimate empty;
  CHECK_THROWS_AS(sample_estimate(empty, 10, 1), std::invalid_argument);
}

TEST_CASE("gmm component counts are clamped to the frame's point budget") {
  Eigen::MatrixXd pts(5, 2);
  pts << 0, 0, 1, 0.01, 2, -0.01, 3, 0.02, 4, 0;
  PointCloud X;
  X.points = pts;
  TangentBundle bundle = single_frame_bundle(Eigen::Vector2d::Zero(), 1, pts);
  // 5 points with d = 1 support at most floor(5 / 2) = 2 components.
  const M2Cores cores = build_m2_cores(bundle, X, 3, FneConfig{}, EmConfig{}, 51);
  REQUIRE(cores.frames.size() == 1);
  CHECK(cores.frames[0].latent_density.components() == 2);
}

TEST_CASE("method names round trip") {
  for (Method m : {Method::M1, Method::M2, Method::M3})
    CHECK(parse_method(method_name(m)) == m);
  CHECK(parse_method("M2") == Method::M2);
  CHECK_THROWS_AS(parse_method("m4"), std::invalid_argument);
}
