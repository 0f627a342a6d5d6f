#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "tbme/csv.hpp"
#include "tbme/dataset.hpp"
#include "tbme/fne.hpp"
#include "tbme/json_io.hpp"
#include "tbme/metrics.hpp"
#include "tbme/moppca.hpp"
#include "tbme/svg.hpp"

namespace tbme {

/// Stage tags for the documented seed chain
/// master -> dataset -> repetition -> stage.
namespace stage {
constexpr std::uint64_t kData = 1;
constexpr std::uint64_t kSplit = 2;
constexpr std::uint64_t kFit = 3;
constexpr std::uint64_t kTune = 4;
constexpr std::uint64_t kEstimate = 5;
constexpr std::uint64_t kEvaluate = 6;
constexpr std::uint64_t kPlot = 7;
}  // namespace stage

struct ExperimentConfig {
  ManifoldSpec dataset;
  int n = 0;
  int n_over_k = 55;
  Method method = Method::M1;
  int repetitions = 10;
  int search_iters = 10;
  double holdout_fraction = 0.2;
  Eigen::Index metric_m = 20000;
  std::uint64_t master_seed = 0;
  bool record_wall_time = true;  // false pins wall_time_s to 0 for byte-stable output
  FneConfig fne;
  EmConfig em;

  int k() const {
    return std::max(1, static_cast<int>(std::lround(static_cast<double>(n) / n_over_k)));
  }

  void validate() const {
    dataset.validate();
    if (n < 2) throw std::invalid_argument("ExperimentConfig: n >= 2 required");
    if (n_over_k < 1) throw std::invalid_argument("ExperimentConfig: n_over_k >= 1");
    if (repetitions < 1) throw std::invalid_argument("ExperimentConfig: repetitions >= 1");
    if (search_iters < 1) throw std::invalid_argument("ExperimentConfig: search_iters >= 1");
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
      throw std::invalid_argument("ExperimentConfig: holdout_fraction in (0,1)");
    if (metric_m < 1) throw std::invalid_argument("ExperimentConfig: metric_m >= 1");
  }
};

/// Hyperparameters chosen by random search. M1 has none; M3 has only the
/// threshold; gmm_components stays 0 when not applicable.
struct TunedParams {
  double log_threshold = std::numeric_limits<double>::quiet_NaN();
  int gmm_components = 0;
};

struct RunRow {
  std::string dataset;
  int n = 0;
  int n_over_k = 0;
  int k = 0;
  std::string method;
  int repetition = 0;
  std::uint64_t seed = 0;  // repetition seed; stage seeds chain off it
  TunedParams tuned;
  MetricReport report;  // meaningful only when error is empty
  double wall_time_s = 0.0;
  std::string error;
};

namespace detail {

/// Interpolated percentile of a sample, q in [0, 100].
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("percentile: empty sample");
  std::sort(v.begin(), v.end());
  const double idx = q / 100.0 * static_cast<double>(v.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(idx));
  const size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = idx - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

inline PointCloud subset(const PointCloud& cloud, const std::vector<Eigen::Index>& rows,
                         const char* source) {
  PointCloud out;
  out.points.resize(rows.size(), cloud.points.cols());
  for (size_t i = 0; i < rows.size(); ++i) out.points.row(i) = cloud.points.row(rows[i]);
  out.intrinsic_dim = cloud.intrinsic_dim;
  out.seed = cloud.seed;
  out.source = source;
  return out;
}

}  // namespace detail

/// Random permutation split; the holdout takes round(fraction * n) points,
/// clamped so both sides are non-empty.
inline void split_train_holdout(const PointCloud& cloud, double holdout_fraction,
                                std::uint64_t seed, PointCloud& train, PointCloud& holdout) {
  const Eigen::Index n = cloud.size();
  if (n < 2) throw std::invalid_argument("split_train_holdout: need at least 2 points");
  Eigen::Index n_hold = static_cast<Eigen::Index>(
      std::llround(holdout_fraction * static_cast<double>(n)));
  n_hold = std::clamp<Eigen::Index>(n_hold, 1, n - 1);
  std::vector<Eigen::Index> perm(n);
  for (Eigen::Index i = 0; i < n; ++i) perm[i] = i;
  Pcg32 rng(seed);
  for (Eigen::Index i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[rng.uniform_int(static_cast<std::uint64_t>(i + 1))]);
  const std::vector<Eigen::Index> train_rows(perm.begin(), perm.end() - n_hold);
  const std::vector<Eigen::Index> holdout_rows(perm.end() - n_hold, perm.end());
  train = detail::subset(cloud, train_rows, "train");
  holdout = detail::subset(cloud, holdout_rows, "holdout");
}

struct TuneResult {
  TunedParams params;
  ManifoldEstimate estimate;
};

/// Random-search tuning. Thresholds are drawn uniformly between the 1st and
/// 60th percentile of holdout log-densities under the candidate's density
/// model (per-frame latent GMMs for M2, sharing the frame of each holdout
/// point's responsibility argmax; the global ambient mixture for M3). M2 also
/// draws its latent component count from {1,2,3}. The winning candidate is
/// the one minimizing symmetric ERE against a fresh true-manifold sample of
/// min(metric_m, 5000) points; the returned estimate is assembled from cores
/// seeded by estimate_seed, so it is bit-identical to calling the estimator
/// directly with the tuned hyperparameters. M1 is returned untouched.
inline TuneResult tune_threshold(const ManifoldSpec& spec, const MoppcaModel& model,
                                 const TangentBundle& bundle, const PointCloud& train,
                                 const PointCloud& holdout, Method method, int search_iters,
                                 Eigen::Index metric_m, const FneConfig& fne_cfg,
                                 const EmConfig& em_cfg, std::uint64_t tune_seed,
                                 std::uint64_t estimate_seed) {
  if (method == Method::M1) return {TunedParams{}, estimate_m1(bundle, train)};
  if (holdout.size() == 0) throw std::invalid_argument("tune_threshold: empty holdout");

  const Eigen::Index m_tune = std::min<Eigen::Index>(metric_m, 5000);
  const PointCloud truth = sample_true_manifold(
      spec, static_cast<int>(m_tune), chain_seed(tune_seed, 101));
  const std::uint64_t sample_seed = chain_seed(tune_seed, 202);

  // Holdout frame assignment (responsibility argmax, ties to lowest index).
  const Eigen::MatrixXd resp = responsibilities(model, holdout);
  std::vector<int> holdout_frame(resp.rows());
  for (Eigen::Index i = 0; i < resp.rows(); ++i) {
    int best = 0;
    for (Eigen::Index j = 1; j < resp.cols(); ++j)
      if (resp(i, j) > resp(i, best)) best = static_cast<int>(j);
    holdout_frame[i] = best;
  }

  struct Candidate {
    double lo, hi;  // threshold range endpoints
    bool valid;
  };

  // Per-component-count machinery for M2; single entry for M3.
  std::vector<M2Cores> m2_cores;
  std::vector<Candidate> ranges;
  M3Cores m3_cores;
  constexpr int kM2MaxComponents = 3;
  if (method == Method::M2) {
    for (int c = 1; c <= kM2MaxComponents; ++c) {
      m2_cores.push_back(
          build_m2_cores(bundle, train, c, fne_cfg, em_cfg, chain_seed(estimate_seed, c)));
      const M2Cores& cores = m2_cores.back();
      std::map<int, const M2FrameCore*> by_frame;
      for (const auto& f : cores.frames) by_frame[f.frame_index] = &f;
      std::vector<double> pool;
      for (Eigen::Index i = 0; i < holdout.size(); ++i) {
        const auto it = by_frame.find(holdout_frame[i]);
        if (it == by_frame.end()) continue;  // frame empty in training split
        const Eigen::VectorXd y = it->second->chart.forward(holdout.points.row(i).transpose());
        pool.push_back(it->second->latent_density.log_density(y));
      }
      if (pool.empty()) {
        ranges.push_back({0.0, 0.0, false});
      } else {
        ranges.push_back(
            {detail::percentile(pool, 1.0), detail::percentile(pool, 60.0), true});
      }
    }
  } else {
    auto ambient =
        fne_cfg.m3_ambient_components > 0
            ? std::make_shared<const GmmModel>(
                  fit_gmm(train.points, fne_cfg.m3_ambient_components, em_cfg,
                          chain_seed(estimate_seed, 777))
                      .model)
            : std::make_shared<const GmmModel>(to_gmm(model));
    m3_cores = build_m3_cores(bundle, train, ambient, fne_cfg, estimate_seed);
    std::vector<double> pool(holdout.size());
    for (Eigen::Index i = 0; i < holdout.size(); ++i)
      pool[i] = m3_cores.ambient_density->log_density(holdout.points.row(i).transpose());
    ranges.push_back({detail::percentile(pool, 1.0), detail::percentile(pool, 60.0), true});
  }

  Pcg32 rng(tune_seed);
  bool have_best = false;
  double best_score = std::numeric_limits<double>::infinity();
  TuneResult best;
  for (int iter = 0; iter < search_iters; ++iter) {
    // Draws happen unconditionally so failed candidates do not shift the
    // stream for later iterations.
    int comps = 0;
    if (method == Method::M2)
      comps = 1 + static_cast<int>(rng.uniform_int(kM2MaxComponents));
    const double u = rng.next_double();
    const Candidate& range = ranges[method == Method::M2 ? comps - 1 : 0];
    if (!range.valid) continue;
    const double threshold = range.lo + u * (range.hi - range.lo);
    try {
      ManifoldEstimate est = method == Method::M2
                                 ? assemble_m2(m2_cores[comps - 1], threshold)
                                 : assemble_m3(m3_cores, threshold);
      const PointCloud sample = sample_estimate(est, m_tune, sample_seed);
      const double score = symmetric_ere(truth, sample);
      if (!have_best || score < best_score) {
        have_best = true;
        best_score = score;
        best.params.log_threshold = threshold;
        best.params.gmm_components = comps;
        best.estimate = std::move(est);
      }
    } catch (const std::exception&) {
      // empty estimate or pathological threshold: candidate rejected
    }
  }
  if (!have_best)
    throw std::runtime_error("tune_threshold: all candidates produced empty estimates");
  return best;
}

struct ExperimentResult {
  std::vector<RunRow> rows;
  // Plot payload from the best repetition (training points + estimate sample).
  bool has_plot = false;
  Eigen::MatrixXd plot_train;
  Eigen::MatrixXd plot_sample;
};

/// Runs one configuration end to end for each repetition: generate, split,
/// fit, tune, estimate, evaluate. Failures are captured per row; the sweep
/// never aborts.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const ManifoldSpec& spec = cfg.dataset;
  const std::uint64_t dataset_seed =
      chain_seed(cfg.master_seed, static_cast<std::uint64_t>(spec.kind));
  ExperimentResult result;
  double best_score = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    RunRow row;
    row.dataset = manifold_kind_name(spec.kind);
    row.n = cfg.n;
    row.n_over_k = cfg.n_over_k;
    row.k = cfg.k();
    row.method = method_name(cfg.method);
    row.repetition = rep;
    row.seed = chain_seed(dataset_seed, static_cast<std::uint64_t>(rep));
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const PointCloud cloud =
          generate_dataset(spec, cfg.n, chain_seed(row.seed, stage::kData));
      PointCloud train, holdout;
      split_train_holdout(cloud, cfg.holdout_fraction, chain_seed(row.seed, stage::kSplit),
                          train, holdout);
      const MoppcaModel model = fit_moppca(train, cfg.k(), spec.intrinsic_dim, cfg.em,
                                           chain_seed(row.seed, stage::kFit));
      const TangentBundle bundle = extract_tangent_bundle(model, train);
      TuneResult tuned = tune_threshold(spec, model, bundle, train, holdout, cfg.method,
                                        cfg.search_iters, cfg.metric_m, cfg.fne, cfg.em,
                                        chain_seed(row.seed, stage::kTune),
                                        chain_seed(row.seed, stage::kEstimate));
      row.tuned = tuned.params;
      row.report = evaluate_estimate(spec, tuned.estimate, cfg.metric_m,
                                     chain_seed(row.seed, stage::kEvaluate));
      if (row.report.symmetric_ere < best_score) {
        best_score = row.report.symmetric_ere;
        try {
          result.plot_sample =
              sample_estimate(tuned.estimate, 2000, chain_seed(row.seed, stage::kPlot))
                  .points;
          result.plot_train = train.points;
          result.has_plot = true;
        } catch (const std::exception&) {
          // plotting payload is best-effort
        }
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    const auto t1 = std::chrono::steady_clock::now();
    row.wall_time_s =
        cfg.record_wall_time ? std::chrono::duration<double>(t1 - t0).count() : 0.0;
    result.rows.push_back(std::move(row));
  }
  return result;
}

/// (v - min) / (max - min); all-equal inputs map to all zeros.
inline std::vector<double> min_max_normalize(const std::vector<double>& values) {
  if (values.empty()) return {};
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<double> out(values.size(), 0.0);
  if (hi > lo)
    for (size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - lo) / (hi - lo);
  return out;
}

struct ConfigSummary {
  std::string dataset;
  int n = 0;
  int n_over_k = 0;
  int k = 0;
  std::string method;
  int successes = 0;
  int failures = 0;
  double mean_sym_ere = std::numeric_limits<double>::quiet_NaN();
  double std_sym_ere = std::numeric_limits<double>::quiet_NaN();
  double best_sym_ere = std::numeric_limits<double>::quiet_NaN();
  double mean_hausdorff = std::numeric_limits<double>::quiet_NaN();
};

/// Per-config mean/std (population) and best of symmetric ERE over the
/// successful repetitions, in first-appearance order.
inline std::vector<ConfigSummary> summarize(const std::vector<RunRow>& rows) {
  std::vector<ConfigSummary> out;
  std::vector<std::vector<double>> ere, haus;
  for (const auto& r : rows) {
    size_t gi = out.size();
    for (size_t i = 0; i < out.size(); ++i)
      if (out[i].dataset == r.dataset && out[i].n == r.n &&
          out[i].n_over_k == r.n_over_k && out[i].method == r.method) {
        gi = i;
        break;
      }
    if (gi == out.size()) {
      ConfigSummary s;
      s.dataset = r.dataset;
      s.n = r.n;
      s.n_over_k = r.n_over_k;
      s.k = r.k;
      s.method = r.method;
      out.push_back(std::move(s));
      ere.emplace_back();
      haus.emplace_back();
    }
    if (r.error.empty()) {
      ere[gi].push_back(r.report.symmetric_ere);
      haus[gi].push_back(r.report.hausdorff);
    } else {
      ++out[gi].failures;
    }
  }
  for (size_t gi = 0; gi < out.size(); ++gi) {
    auto& s = out[gi];
    s.successes = static_cast<int>(ere[gi].size());
    if (ere[gi].empty()) continue;
    double mean = 0.0;
    for (double v : ere[gi]) mean += v;
    mean /= static_cast<double>(ere[gi].size());
    double var = 0.0;
    for (double v : ere[gi]) var += (v - mean) * (v - mean);
    var /= static_cast<double>(ere[gi].size());
    s.mean_sym_ere = mean;
    s.std_sym_ere = std::sqrt(var);
    s.best_sym_ere = *std::min_element(ere[gi].begin(), ere[gi].end());
    double hmean = 0.0;
    for (double v : haus[gi]) hmean += v;
    s.mean_hausdorff = hmean / static_cast<double>(haus[gi].size());
  }
  return out;
}

struct SweepConfig {
  std::vector<ManifoldSpec> datasets;
  std::vector<int> n_values;
  std::vector<int> n_over_k_values;
  std::vector<Method> methods;
  int repetitions = 10;
  int search_iters = 10;
  double holdout_fraction = 0.2;
  Eigen::Index metric_m = 20000;
  std::uint64_t master_seed = 12345;
  bool record_wall_time = true;
  FneConfig fne;
  EmConfig em;
};

inline SweepConfig sweep_config_from_json(const json& j) {
  SweepConfig cfg;
  for (const auto& name : j.at("datasets"))
    cfg.datasets.push_back(ManifoldSpec::builtin(name.get<std::string>()));
  cfg.n_values = j.at("n").get<std::vector<int>>();
  cfg.n_over_k_values = j.at("n_over_k").get<std::vector<int>>();
  for (const auto& name : j.at("methods"))
    cfg.methods.push_back(parse_method(name.get<std::string>()));
  if (j.contains("repetitions")) cfg.repetitions = j.at("repetitions").get<int>();
  if (j.contains("search_iters")) cfg.search_iters = j.at("search_iters").get<int>();
  if (j.contains("holdout_fraction"))
    cfg.holdout_fraction = j.at("holdout_fraction").get<double>();
  if (j.contains("metric_m")) cfg.metric_m = j.at("metric_m").get<Eigen::Index>();
  if (j.contains("master_seed")) cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
  if (j.contains("record_wall_time"))
    cfg.record_wall_time = j.at("record_wall_time").get<bool>();
  if (j.contains("box_margin")) cfg.fne.box_margin = j.at("box_margin").get<double>();
  if (j.contains("m3_ambient_components"))
    cfg.fne.m3_ambient_components = j.at("m3_ambient_components").get<int>();
  return cfg;
}

struct EstimatePlot {
  std::string dataset;
  std::string method;
  int n = 0;
  int n_over_k = 0;
  Eigen::MatrixXd train;
  Eigen::MatrixXd sample;
};

struct SweepResult {
  std::vector<RunRow> rows;       // config-major, repetition-minor order
  std::vector<EstimatePlot> plots;
};

inline std::vector<ExperimentConfig> expand_sweep(const SweepConfig& sweep) {
  std::vector<ExperimentConfig> configs;
  for (const auto& ds : sweep.datasets)
    for (int n : sweep.n_values)
      for (int nok : sweep.n_over_k_values)
        for (Method m : sweep.methods) {
          ExperimentConfig cfg;
          cfg.dataset = ds;
          cfg.n = n;
          cfg.n_over_k = nok;
          cfg.method = m;
          cfg.repetitions = sweep.repetitions;
          cfg.search_iters = sweep.search_iters;
          cfg.holdout_fraction = sweep.holdout_fraction;
          cfg.metric_m = sweep.metric_m;
          cfg.master_seed = sweep.master_seed;
          cfg.record_wall_time = sweep.record_wall_time;
          cfg.fne = sweep.fne;
          cfg.em = sweep.em;
          configs.push_back(cfg);
        }
  return configs;
}

/// Runs all configs of the sweep. Configs execute on a small worker pool;
/// each writes into its own slot, and slots are merged in config order, so the
/// output is independent of scheduling.
inline SweepResult run_sweep(const SweepConfig& sweep) {
  const std::vector<ExperimentConfig> configs = expand_sweep(sweep);
  std::vector<ExperimentResult> results(configs.size());
  const unsigned workers = std::max(
      1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                             static_cast<unsigned>(configs.size())));
  std::atomic<size_t> next{0};
  auto work = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= configs.size()) return;
      results[i] = run_experiment(configs[i]);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  SweepResult out;
  for (size_t i = 0; i < configs.size(); ++i) {
    for (auto& row : results[i].rows) out.rows.push_back(std::move(row));
    if (results[i].has_plot)
      out.plots.push_back({manifold_kind_name(configs[i].dataset.kind),
                           method_name(configs[i].method), configs[i].n,
                           configs[i].n_over_k, std::move(results[i].plot_train),
                           std::move(results[i].plot_sample)});
  }
  return out;
}

namespace detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

/// Project to the two most informative coordinates: (x, y) in 2-D, (x, z)
/// in 3-D (the second coordinate of the surface datasets is the extruded one).
inline Eigen::MatrixXd plot_projection(const Eigen::MatrixXd& pts) {
  Eigen::MatrixXd out(pts.rows(), 2);
  out.col(0) = pts.col(0);
  out.col(1) = pts.cols() >= 3 ? pts.col(2) : pts.col(1);
  return out;
}

}  // namespace detail

inline const char* kResultsCsvHeader =
    "dataset,n,n_over_k,k,method,repetition,seed,threshold_log,gmm_components,"
    "sym_ere,hausdorff,asym_ere,wall_time_s,error";

inline void write_results_csv(const std::vector<RunRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_results_csv: cannot open " + path);
  out << kResultsCsvHeader << '\n';
  char wall[32];
  for (const auto& r : rows) {
    std::snprintf(wall, sizeof(wall), "%.6f", r.wall_time_s);
    out << r.dataset << ',' << r.n << ',' << r.n_over_k << ',' << r.k << ',' << r.method
        << ',' << r.repetition << ',' << r.seed << ',';
    if (!std::isnan(r.tuned.log_threshold)) out << detail::format_double(r.tuned.log_threshold);
    out << ',';
    if (r.tuned.gmm_components > 0) out << r.tuned.gmm_components;
    out << ',';
    if (r.error.empty()) {
      out << detail::format_double(r.report.symmetric_ere) << ','
          << detail::format_double(r.report.hausdorff) << ','
          << detail::format_double(r.report.asymmetric_ere) << ',';
    } else {
      out << ",,,";
    }
    out << wall << ',' << detail::csv_escape(r.error) << '\n';
  }
}

namespace detail {

/// Splits one CSV line honoring double-quote escaping (the error column may
/// contain commas).
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

}  // namespace detail

inline std::vector<RunRow> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_results_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kResultsCsvHeader)
    throw std::runtime_error("read_results_csv: unexpected header in " + path);
  std::vector<RunRow> rows;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 14)
      throw std::runtime_error("read_results_csv: bad column count on line " +
                               std::to_string(line_no));
    RunRow r;
    r.dataset = f[0];
    r.n = std::stoi(f[1]);
    r.n_over_k = std::stoi(f[2]);
    r.k = std::stoi(f[3]);
    r.method = f[4];
    r.repetition = std::stoi(f[5]);
    r.seed = std::stoull(f[6]);
    if (!f[7].empty()) r.tuned.log_threshold = std::stod(f[7]);
    if (!f[8].empty()) r.tuned.gmm_components = std::stoi(f[8]);
    r.error = f[13];
    if (r.error.empty()) {
      r.report.symmetric_ere = std::stod(f[9]);
      r.report.hausdorff = std::stod(f[10]);
      r.report.asymmetric_ere = std::stod(f[11]);
    }
    r.wall_time_s = std::stod(f[12]);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline json summary_to_json(const std::vector<ConfigSummary>& summaries) {
  json arr = json::array();
  for (const auto& s : summaries)
    arr.push_back(json{{"dataset", s.dataset},
                       {"n", s.n},
                       {"n_over_k", s.n_over_k},
                       {"k", s.k},
                       {"method", s.method},
                       {"successes", s.successes},
                       {"failures", s.failures},
                       {"mean_sym_ere", s.mean_sym_ere},
                       {"std_sym_ere", s.std_sym_ere},
                       {"best_sym_ere", s.best_sym_ere},
                       {"mean_hausdorff", s.mean_hausdorff}});
  return json{{"configs", arr}};
}

/// Writes results.csv, summary.json, per-config estimate overlays, the
/// per-method normalized-error histogram, and per-(dataset, method) mean-ERE
/// heatmaps over the (n, n/k) grid.
inline void emit_reports(const SweepResult& results, const std::string& out_dir) {
  if (results.rows.empty()) throw std::invalid_argument("emit_reports: no rows");
  std::filesystem::create_directories(out_dir);
  const auto path = [&](const std::string& name) { return out_dir + "/" + name; };
  write_results_csv(results.rows, path("results.csv"));
  const std::vector<ConfigSummary> summaries = summarize(results.rows);
  save_json(summary_to_json(summaries), path("summary.json"));

  for (const auto& p : results.plots) {
    std::vector<ScatterLayer> layers(2);
    layers[0] = {detail::plot_projection(p.train), "#555555", 1.6, 0.5, "training points"};
    layers[1] = {detail::plot_projection(p.sample), "#d62728", 1.2, 0.7, "estimate sample"};
    write_scatter_svg(path("estimate_" + p.dataset + "_" + p.method + "_n" +
                           std::to_string(p.n) + "_nok" + std::to_string(p.n_over_k) +
                           ".svg"),
                      layers, p.dataset + " " + p.method + " n=" + std::to_string(p.n) +
                                  " n/k=" + std::to_string(p.n_over_k));
  }

  // Normalized-error histogram: best sym ERE per (dataset, n, n/k) group,
  // min-max normalized across the methods present in that group.
  std::vector<std::string> methods;
  for (const auto& s : summaries)
    if (std::find(methods.begin(), methods.end(), s.method) == methods.end())
      methods.push_back(s.method);
  std::sort(methods.begin(), methods.end());
  if (methods.size() >= 2) {
    std::vector<std::pair<std::string, std::vector<double>>> series;
    for (const auto& m : methods) series.emplace_back(m, std::vector<double>{});
    struct GroupKey {
      std::string dataset;
      int n, nok;
      bool operator<(const GroupKey& o) const {
        return std::tie(dataset, n, nok) < std::tie(o.dataset, o.n, o.nok);
      }
    };
    std::map<GroupKey, std::vector<std::pair<std::string, double>>> groups;
    for (const auto& s : summaries)
      if (std::isfinite(s.best_sym_ere))
        groups[{s.dataset, s.n, s.n_over_k}].emplace_back(s.method, s.best_sym_ere);
    bool any = false;
    for (const auto& [key, entries] : groups) {
      if (entries.size() < 2) continue;
      std::vector<double> values;
      for (const auto& e : entries) values.push_back(e.second);
      const std::vector<double> norm = min_max_normalize(values);
      for (size_t i = 0; i < entries.size(); ++i)
        for (auto& s : series)
          if (s.first == entries[i].first) {
            s.second.push_back(norm[i]);
            any = true;
          }
    }
    if (any)
      write_histogram_svg(path("normalized_ere_hist.svg"), series, 10,
                          "normalized symmetric ERE by method");
  }

  // Heatmaps of mean sym ERE over the (n/k, n) grid per dataset and method.
  std::vector<std::pair<std::string, std::string>> groups;
  for (const auto& s : summaries) {
    const std::pair<std::string, std::string> g{s.dataset, s.method};
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
  }
  for (const auto& [ds, method] : groups) {
    std::vector<int> ns, noks;
    for (const auto& s : summaries)
      if (s.dataset == ds && s.method == method) {
        if (std::find(ns.begin(), ns.end(), s.n) == ns.end()) ns.push_back(s.n);
        if (std::find(noks.begin(), noks.end(), s.n_over_k) == noks.end())
          noks.push_back(s.n_over_k);
      }
    std::sort(ns.begin(), ns.end());
    std::sort(noks.begin(), noks.end());
    if (ns.size() < 2 && noks.size() < 2) continue;
    Eigen::MatrixXd grid = Eigen::MatrixXd::Constant(
        noks.size(), ns.size(), std::numeric_limits<double>::quiet_NaN());
    for (const auto& s : summaries)
      if (s.dataset == ds && s.method == method) {
        const auto r = std::find(noks.begin(), noks.end(), s.n_over_k) - noks.begin();
        const auto c = std::find(ns.begin(), ns.end(), s.n) - ns.begin();
        grid(r, c) = s.mean_sym_ere;
      }
    std::vector<std::string> row_labels, col_labels;
    for (int v : noks) row_labels.push_back("n/k=" + std::to_string(v));
    for (int v : ns) col_labels.push_back("n=" + std::to_string(v));
    write_heatmap_svg(path("heatmap_" + ds + "_" + method + ".svg"), grid, row_labels,
                      col_labels, ds + " " + method + " mean symmetric ERE");
  }
}

}  // namespace tbme
