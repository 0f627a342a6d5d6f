#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tbme/harness.hpp"

using namespace tbme;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

ExperimentConfig small_config(ManifoldKind kind, int n, int nok, Method method) {
  ExperimentConfig cfg;
  cfg.dataset = ManifoldSpec::builtin(kind);
  cfg.n = n;
  cfg.n_over_k = nok;
  cfg.method = method;
  cfg.repetitions = 2;
  cfg.search_iters = 2;
  cfg.metric_m = 300;
  cfg.master_seed = 4242;
  cfg.record_wall_time = false;
  return cfg;
}

}  // namespace

TEST_CASE("percentiles interpolate linearly") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  CHECK(detail::percentile(v, 0.0) == 1.0);
  CHECK(detail::percentile(v, 100.0) == 4.0);
  CHECK(detail::percentile(v, 50.0) == 2.5);
  CHECK(detail::percentile(v, 25.0) == 1.75);
  CHECK(detail::percentile({7.0}, 30.0) == 7.0);
  CHECK(detail::percentile({3.0, 1.0}, 50.0) == 2.0);  // sorts internally
  CHECK_THROWS_AS(detail::percentile({}, 50.0), std::invalid_argument);
}

TEST_CASE("min-max normalization maps extremes to 0 and 1") {
  CHECK(min_max_normalize({2.0, 4.0, 6.0}) == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(min_max_normalize({5.0, 5.0, 5.0}) == std::vector<double>{0.0, 0.0, 0.0});
  CHECK(min_max_normalize({}).empty());
  // Affine changes of the input do not change the normalized values.
  const std::vector<double> a{0.3, 0.9, 0.1, 0.55};
  std::vector<double> b;
  for (double v : a) b.push_back(3.0 * v + 10.0);
  const auto na = min_max_normalize(a);
  const auto nb = min_max_normalize(b);
  for (size_t i = 0; i < a.size(); ++i)
    CHECK_THAT(nb[i], Catch::Matchers::WithinAbs(na[i], 1e-12));
}

TEST_CASE("train/holdout split partitions the cloud") {
  const PointCloud cloud =
      generate_dataset(ManifoldSpec::builtin(ManifoldKind::Spiral2D), 10, 91);
  PointCloud train, holdout;
  split_train_holdout(cloud, 0.2, 93, train, holdout);
  CHECK(train.size() == 8);
  CHECK(holdout.size() == 2);
  CHECK(train.source == "train");
  CHECK(holdout.source == "holdout");

  // Partition: every original row appears exactly once across the two sides.
  std::map<std::pair<double, double>, int> counts;
  for (Eigen::Index i = 0; i < cloud.size(); ++i)
    ++counts[{cloud.points(i, 0), cloud.points(i, 1)}];
  for (Eigen::Index i = 0; i < train.size(); ++i)
    --counts[{train.points(i, 0), train.points(i, 1)}];
  for (Eigen::Index i = 0; i < holdout.size(); ++i)
    --counts[{holdout.points(i, 0), holdout.points(i, 1)}];
  for (const auto& [k, c] : counts) CHECK(c == 0);

  PointCloud train2, holdout2;
  split_train_holdout(cloud, 0.2, 93, train2, holdout2);
  CHECK(train.points == train2.points);
  CHECK(holdout.points == holdout2.points);

  // The holdout is clamped to keep both sides non-empty.
  split_train_holdout(cloud, 0.999, 95, train, holdout);
  CHECK(train.size() == 1);
  split_train_holdout(cloud, 0.001, 95, train, holdout);
  CHECK(holdout.size() == 1);

  PointCloud tiny;
  tiny.points = Eigen::MatrixXd::Zero(1, 2);
  CHECK_THROWS_AS(split_train_holdout(tiny, 0.5, 1, train, holdout),
                  std::invalid_argument);
}

TEST_CASE("config k rounds half away from zero") {
  ExperimentConfig cfg;
  cfg.n = 1500;
  cfg.n_over_k = 55;
  CHECK(cfg.k() == 27);
  cfg.n = 700;
  cfg.n_over_k = 95;
  CHECK(cfg.k() == 7);
  cfg.n = 110;
  cfg.n_over_k = 20;
  CHECK(cfg.k() == 6);
  cfg.n = 2300;
  cfg.n_over_k = 55;
  CHECK(cfg.k() == 42);
  cfg.n = 10;
  cfg.n_over_k = 100;
  CHECK(cfg.k() == 1);
}

TEST_CASE("config validation rejects out-of-range fields") {
  ExperimentConfig cfg = small_config(ManifoldKind::Spiral2D, 100, 55, Method::M1);
  CHECK_NOTHROW(cfg.validate());
  auto expect_throw = [&](auto mutate) {
    ExperimentConfig bad = cfg;
    mutate(bad);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  };
  expect_throw([](ExperimentConfig& c) { c.n = 1; });
  expect_throw([](ExperimentConfig& c) { c.n_over_k = 0; });
  expect_throw([](ExperimentConfig& c) { c.repetitions = 0; });
  expect_throw([](ExperimentConfig& c) { c.search_iters = 0; });
  expect_throw([](ExperimentConfig& c) { c.holdout_fraction = 0.0; });
  expect_throw([](ExperimentConfig& c) { c.holdout_fraction = 1.0; });
  expect_throw([](ExperimentConfig& c) { c.metric_m = 0; });
  expect_throw([](ExperimentConfig& c) { c.dataset.noise_sigmas = {-1.0}; });
}

TEST_CASE("summaries aggregate successful repetitions per config") {
  RunRow a;
  a.dataset = "spiral";
  a.n = 100;
  a.n_over_k = 55;
  a.k = 2;
  a.method = "m1";
  a.report.symmetric_ere = 1.0;
  a.report.hausdorff = 0.5;
  RunRow b = a;
  b.repetition = 1;
  b.report.symmetric_ere = 3.0;
  b.report.hausdorff = 1.5;
  RunRow fail = a;
  fail.repetition = 2;
  fail.error = "fit_moppca: too few points";
  RunRow other = a;
  other.method = "m2";
  other.report.symmetric_ere = 2.0;

  const auto s = summarize({a, b, fail, other});
  REQUIRE(s.size() == 2);
  CHECK(s[0].dataset == "spiral");
  CHECK(s[0].method == "m1");
  CHECK(s[0].successes == 2);
  CHECK(s[0].failures == 1);
  CHECK(s[0].mean_sym_ere == 2.0);
  CHECK(s[0].std_sym_ere == 1.0);  // population std of {1, 3}
  CHECK(s[0].best_sym_ere == 1.0);
  CHECK(s[0].mean_hausdorff == 1.0);
  CHECK(s[1].method == "m2");
  CHECK(s[1].successes == 1);
  CHECK(s[1].std_sym_ere == 0.0);
  CHECK(s[1].best_sym_ere == 2.0);

  RunRow broken = a;
  broken.error = "boom";
  const auto s2 = summarize({broken});
  CHECK(s2[0].successes == 0);
  CHECK(std::isnan(s2[0].mean_sym_ere));
}

TEST_CASE("results csv round trips every field") {
  std::vector<RunRow> rows(3);
  rows[0].dataset = "spiral";
  rows[0].n = 100;
  rows[0].n_over_k = 55;
  rows[0].k = 2;
  rows[0].method = "m2";
  rows[0].repetition = 0;
  rows[0].seed = 18446744073709551615ull;  // uint64 max survives
  rows[0].tuned.log_threshold = -3.25;
  rows[0].tuned.gmm_components = 2;
  rows[0].report.symmetric_ere = 1.5e-4;
  rows[0].report.hausdorff = 0.125;
  rows[0].report.asymmetric_ere = 7.5e-5;
  rows[0].wall_time_s = 1.25;
  rows[1].dataset = "sine";
  rows[1].method = "m1";
  rows[1].seed = 7;
  rows[1].report.symmetric_ere = 0.5;  // threshold stays NaN -> empty field
  rows[2].dataset = "swissroll";
  rows[2].method = "m3";
  rows[2].error = "sample_estimate: pathological, \"quoted\" detail";

  const std::string path = temp_path("tbme_results_roundtrip.csv");
  write_results_csv(rows, path);
  const std::string text = slurp(path);
  CHECK(text.rfind(kResultsCsvHeader, 0) == 0);
  CHECK(text.find("\"sample_estimate: pathological, \"\"quoted\"\" detail\"") !=
        std::string::npos);

  const auto back = read_results_csv(path);
  REQUIRE(back.size() == rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].dataset == rows[i].dataset);
    CHECK(back[i].n == rows[i].n);
    CHECK(back[i].n_over_k == rows[i].n_over_k);
    CHECK(back[i].k == rows[i].k);
    CHECK(back[i].method == rows[i].method);
    CHECK(back[i].repetition == rows[i].repetition);
    CHECK(back[i].seed == rows[i].seed);
    CHECK(back[i].tuned.gmm_components == rows[i].tuned.gmm_components);
    CHECK(back[i].error == rows[i].error);
    if (std::isnan(rows[i].tuned.log_threshold)) {
      CHECK(std::isnan(back[i].tuned.log_threshold));
    } else {
      CHECK(back[i].tuned.log_threshold == rows[i].tuned.log_threshold);
    }
    if (rows[i].error.empty()) {
      CHECK(back[i].report.symmetric_ere == rows[i].report.symmetric_ere);
      CHECK(back[i].report.hausdorff == rows[i].report.hausdorff);
      CHECK(back[i].report.asymmetric_ere == rows[i].report.asymmetric_ere);
    }
  }

  // Rewriting the parsed rows reproduces the file byte for byte.
  const std::string path2 = temp_path("tbme_results_roundtrip2.csv");
  write_results_csv(back, path2);
  CHECK(slurp(path2) == text);

  std::ofstream(path2, std::ios::trunc) << "not,the,header\n";
  CHECK_THROWS_AS(read_results_csv(path2), std::runtime_error);
  CHECK_THROWS_AS(read_results_csv(temp_path("tbme_missing.csv")), std::runtime_error);
}

TEST_CASE("the results header matches the documented schema") {
  CHECK(std::string(kResultsCsvHeader) ==
        "dataset,n,n_over_k,k,method,repetition,seed,threshold_log,gmm_components,"
        "sym_ere,hausdorff,asym_ere,wall_time_s,error");
}

TEST_CASE("m1 tuning is a no-op returning the plain hull estimate") {
  const ManifoldSpec spec = ManifoldSpec::builtin(ManifoldKind::Spiral2D);
  const PointCloud cloud = generate_dataset(spec, 300, 97);
  PointCloud train, holdout;
  split_train_holdout(cloud, 0.2, 99, train, holdout);
  const MoppcaModel model = fit_moppca(train, 4, 1, EmConfig{}, 101);
  const TangentBundle bundle = extract_tangent_bundle(model, train);
  const TuneResult tuned = tune_threshold(spec, model, bundle, train, holdout, Method::M1,
                                          5, 1000, FneConfig{}, EmConfig{}, 103, 105);
  CHECK(std::isnan(tuned.params.log_threshold));
  CHECK(tuned.params.gmm_components == 0);
  const PointCloud a = sample_estimate(tuned.estimate, 200, 1);
  const PointCloud b = sample_estimate(estimate_m1(bundle, train), 200, 1);
  CHECK(a.points == b.points);
}

TEST_CASE("m2 tuning returns the exhaustive-search argmin") {
  const ManifoldSpec spec = ManifoldSpec::builtin(ManifoldKind::Spiral2D);
  const PointCloud cloud = generate_dataset(spec, 400, 107);
  PointCloud train, holdout;
  split_train_holdout(cloud, 0.2, 109, train, holdout);
  const MoppcaModel model = fit_moppca(train, 6, 1, EmConfig{}, 111);
  const TangentBundle bundle = extract_tangent_bundle(model, train);
  const FneConfig fne;
  const EmConfig em;
  const int search_iters = 6;
  const Eigen::Index metric_m = 600;
  const std::uint64_t tune_seed = 113, estimate_seed = 115;

  const TuneResult tuned =
      tune_threshold(spec, model, bundle, train, holdout, Method::M2, search_iters,
                     metric_m, fne, em, tune_seed, estimate_seed);

  // Replay: rebuild the candidate machinery and score every draw explicitly.
  const PointCloud truth =
      sample_true_manifold(spec, static_cast<int>(metric_m), chain_seed(tune_seed, 101));
  const std::uint64_t sample_seed = chain_seed(tune_seed, 202);
  const Eigen::MatrixXd resp = responsibilities(model, holdout);
  std::vector<int> holdout_frame(resp.rows());
  for (Eigen::Index i = 0; i < resp.rows(); ++i) {
    int best = 0;
    for (Eigen::Index j = 1; j < resp.cols(); ++j)
      if (resp(i, j) > resp(i, best)) best = static_cast<int>(j);
    holdout_frame[i] = best;
  }
  std::vector<M2Cores> cores;
  std::vector<std::pair<double, double>> ranges;
  for (int c = 1; c <= 3; ++c) {
    cores.push_back(build_m2_cores(bundle, train, c, fne, em, chain_seed(estimate_seed, c)));
    std::vector<double> pool;
    for (Eigen::Index i = 0; i < holdout.size(); ++i)
      for (const auto& f : cores.back().frames)
        if (f.frame_index == holdout_frame[i]) {
          pool.push_back(f.latent_density.log_density(
              f.chart.forward(holdout.points.row(i).transpose())));
          break;
        }
    REQUIRE_FALSE(pool.empty());
    ranges.emplace_back(detail::percentile(pool, 1.0), detail::percentile(pool, 60.0));
  }

  Pcg32 rng(tune_seed);
  bool found = false;
  double best_score = 0.0, best_threshold = 0.0;
  int best_comps = 0;
  for (int iter = 0; iter < search_iters; ++iter) {
    const int comps = 1 + static_cast<int>(rng.uniform_int(3));
    const double u = rng.next_double();
    const auto [lo, hi] = ranges[comps - 1];
    const double threshold = lo + u * (hi - lo);
    try {
      const ManifoldEstimate est = assemble_m2(cores[comps - 1], threshold);
      const double score =
          symmetric_ere(truth, sample_estimate(est, metric_m, sample_seed));
      if (!found || score < best_score) {
        found = true;
        best_score = score;
        best_threshold = threshold;
        best_comps = comps;
      }
    } catch (const std::exception&) {
    }
  }
  REQUIRE(found);
  CHECK(tuned.params.log_threshold == best_threshold);
  CHECK(tuned.params.gmm_components == best_comps);
  const PointCloud a = sample_estimate(tuned.estimate, 200, 3);
  const PointCloud b =
      sample_estimate(assemble_m2(cores[best_comps - 1], best_threshold), 200, 3);
  CHECK(a.points == b.points);
}

TEST_CASE("m3 tuning draws thresholds from the holdout density percentiles") {
  const ManifoldSpec spec = ManifoldSpec::builtin(ManifoldKind::Spiral2D);
  const PointCloud cloud = generate_dataset(spec, 300, 117);
  PointCloud train, holdout;
  split_train_holdout(cloud, 0.2, 119, train, holdout);
  const MoppcaModel model = fit_moppca(train, 4, 1, EmConfig{}, 121);
  const TangentBundle bundle = extract_tangent_bundle(model, train);
  const TuneResult tuned = tune_threshold(spec, model, bundle, train, holdout, Method::M3,
                                          4, 500, FneConfig{}, EmConfig{}, 123, 125);
  CHECK(tuned.params.gmm_components == 0);
  CHECK(tuned.estimate.method == Method::M3);

  const GmmModel ambient = to_gmm(model);
  std::vector<double> pool(holdout.size());
  for (Eigen::Index i = 0; i < holdout.size(); ++i)
    pool[i] = ambient.log_density(holdout.points.row(i).transpose());
  CHECK(tuned.params.log_threshold >= detail::percentile(pool, 1.0));
  CHECK(tuned.params.log_threshold <= detail::percentile(pool, 60.0));
}

TEST_CASE("experiments pin the documented seed chain and never lose rows") {
  ExperimentConfig cfg = small_config(ManifoldKind::Spiral2D, 200, 55, Method::M1);
  const ExperimentResult result = run_experiment(cfg);
  REQUIRE(result.rows.size() == 2);
  const std::uint64_t dataset_seed =
      chain_seed(cfg.master_seed, static_cast<std::uint64_t>(ManifoldKind::Spiral2D));
  for (int rep = 0; rep < 2; ++rep) {
    const RunRow& row = result.rows[rep];
    CHECK(row.seed == chain_seed(dataset_seed, static_cast<std::uint64_t>(rep)));
    CHECK(row.repetition == rep);
    CHECK(row.dataset == "spiral");
    CHECK(row.method == "m1");
    CHECK(row.k == 4);
    CHECK(row.error.empty());
    CHECK(row.report.symmetric_ere > 0.0);
    CHECK(row.report.seed_true == chain_seed(chain_seed(row.seed, stage::kEvaluate), 1));
    CHECK(row.wall_time_s == 0.0);  // record_wall_time = false
  }

  // n = 2 starves the fit; the failure is captured per row, not thrown.
  ExperimentConfig bad = small_config(ManifoldKind::Spiral2D, 2, 55, Method::M1);
  const ExperimentResult failed = run_experiment(bad);
  REQUIRE(failed.rows.size() == 2);
  for (const auto& row : failed.rows) {
    CHECK_FALSE(row.error.empty());
    CHECK(row.error.find("fit_moppca") != std::string::npos);
  }
}

TEST_CASE("sweeps are deterministic to the byte") {
  SweepConfig sweep;
  sweep.datasets = {ManifoldSpec::builtin(ManifoldKind::Spiral2D)};
  sweep.n_values = {200};
  sweep.n_over_k_values = {55, 95};
  sweep.methods = {Method::M1};
  sweep.repetitions = 2;
  sweep.search_iters = 2;
  sweep.metric_m = 300;
  sweep.master_seed = 606;
  sweep.record_wall_time = false;

  const SweepResult r1 = run_sweep(sweep);
  const SweepResult r2 = run_sweep(sweep);
  REQUIRE(r1.rows.size() == 4);  // 2 configs x 2 repetitions, config-major
  CHECK(r1.rows[0].n_over_k == 55);
  CHECK(r1.rows[1].repetition == 1);
  CHECK(r1.rows[2].n_over_k == 95);

  const std::string p1 = temp_path("tbme_sweep_a.csv");
  const std::string p2 = temp_path("tbme_sweep_b.csv");
  write_results_csv(r1.rows, p1);
  write_results_csv(r2.rows, p2);
  CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("report emission writes the full artifact set") {
  SweepConfig sweep;
  sweep.datasets = {ManifoldSpec::builtin(ManifoldKind::Spiral2D)};
  sweep.n_values = {250, 350};
  sweep.n_over_k_values = {55};
  sweep.methods = {Method::M1, Method::M2};
  sweep.repetitions = 1;
  sweep.search_iters = 2;
  sweep.metric_m = 200;
  sweep.master_seed = 707;
  sweep.record_wall_time = false;

  const SweepResult result = run_sweep(sweep);
  for (const auto& row : result.rows) CHECK(row.error.empty());

  const std::string dir = temp_path("tbme_test_reports");
  std::filesystem::remove_all(dir);
  emit_reports(result, dir);
  CHECK(std::filesystem::exists(dir + "/results.csv"));
  CHECK(std::filesystem::exists(dir + "/summary.json"));
  CHECK(std::filesystem::exists(dir + "/normalized_ere_hist.svg"));
  CHECK(std::filesystem::exists(dir + "/heatmap_spiral_m1.svg"));
  CHECK(std::filesystem::exists(dir + "/heatmap_spiral_m2.svg"));
  size_t overlays = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().filename().string().rfind("estimate_", 0) == 0) ++overlays;
  CHECK(overlays == result.plots.size());
  CHECK(overlays >= 1);

  const auto rows = read_results_csv(dir + "/results.csv");
  CHECK(rows.size() == result.rows.size());
  const json summary = load_json(dir + "/summary.json");
  CHECK(summary.at("configs").size() == 4);

  CHECK_THROWS_AS(emit_reports(SweepResult{}, dir), std::invalid_argument);
}

TEST_CASE("sweep configs parse from json with defaults") {
  const json j{{"datasets", {"spiral", "swissroll"}},
               {"n", {700, 1500}},
               {"n_over_k", {55, 95}},
               {"methods", {"m1", "m3"}},
               {"repetitions", 4},
               {"search_iters", 3},
               {"holdout_fraction", 0.25},
               {"metric_m", 1234},
               {"master_seed", 999},
               {"record_wall_time", false},
               {"box_margin", 0.3},
               {"m3_ambient_components", 5}};
  const SweepConfig cfg = sweep_config_from_json(j);
  REQUIRE(cfg.datasets.size() == 2);
  CHECK(cfg.datasets[0].kind == ManifoldKind::Spiral2D);
  CHECK(cfg.datasets[1].kind == ManifoldKind::SwissRoll3D);
  CHECK(cfg.n_values == std::vector<int>{700, 1500});
  CHECK(cfg.n_over_k_values == std::vector<int>{55, 95});
  REQUIRE(cfg.methods.size() == 2);
  CHECK(cfg.methods[1] == Method::M3);
  CHECK(cfg.repetitions == 4);
  CHECK(cfg.search_iters == 3);
  CHECK(cfg.holdout_fraction == 0.25);
  CHECK(cfg.metric_m == 1234);
  CHECK(cfg.master_seed == 999);
  CHECK_FALSE(cfg.record_wall_time);
  CHECK(cfg.fne.box_margin == 0.3);
  CHECK(cfg.fne.m3_ambient_components == 5);

  const json defaults{{"datasets", {"sine"}},
                      {"n", {300}},
                      {"n_over_k", {55}},
                      {"methods", {"m2"}}};
  const SweepConfig d = sweep_config_from_json(defaults);
  CHECK(d.repetitions == 10);
  CHECK(d.metric_m == 20000);
  CHECK(d.master_seed == 12345);

  CHECK_THROWS_AS(sweep_config_from_json(json{{"n", {100}}}), std::exception);

  const auto expanded = expand_sweep(cfg);
  CHECK(expanded.size() == 16);  // 2 x 2 x 2 x 2
  CHECK(expanded[0].dataset.kind == ManifoldKind::Spiral2D);
  CHECK(expanded[0].n == 700);
  CHECK(expanded.back().method == Method::M3);
}
