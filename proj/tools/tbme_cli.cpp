// Command-line interface: generate/fit/estimate/sample/evaluate for single
// pipeline stages, sweep for the full experiment grid, plot to re-render
// figures from an existing results.csv.
#include <cstdint>
#include <cstdio>
#include <exception>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "tbme/tbme.hpp"

namespace {

tbme::ManifoldSpec spec_from_name(const std::string& name) {
  return tbme::ManifoldSpec::builtin(name);
}

int cmd_generate(const std::string& dataset, int n, std::uint64_t seed,
                 const std::string& out, bool noise_free) {
  const tbme::ManifoldSpec spec = spec_from_name(dataset);
  const tbme::PointCloud cloud = noise_free ? tbme::sample_true_manifold(spec, n, seed)
                                            : tbme::generate_dataset(spec, n, seed);
  tbme::write_csv(cloud, out, /*header=*/true);
  std::printf("wrote %lld points to %s\n", static_cast<long long>(cloud.size()),
              out.c_str());
  return 0;
}

int cmd_fit(const std::string& dataset, const std::string& in, int n_over_k, int k,
            std::uint64_t seed, const std::string& out) {
  const tbme::ManifoldSpec spec = spec_from_name(dataset);
  const tbme::PointCloud cloud = tbme::read_csv(in, spec.intrinsic_dim);
  if (k <= 0)
    k = std::max(1, static_cast<int>(std::lround(
                        static_cast<double>(cloud.size()) / n_over_k)));
  tbme::EmConfig em;
  const tbme::MoppcaModel model =
      tbme::fit_moppca(cloud, k, spec.intrinsic_dim, em, seed);
  tbme::save_json(tbme::to_json(model), out);
  std::printf("fit k=%d components, log-likelihood %.6f (%d iterations) -> %s\n", k,
              model.final_log_likelihood, model.iterations_used, out.c_str());
  return 0;
}

int cmd_estimate(const std::string& model_path, const std::string& in,
                 const std::string& method_name, double log_threshold, int components,
                 int ambient_components, std::uint64_t seed, const std::string& out) {
  const tbme::MoppcaModel model = tbme::moppca_from_json(tbme::load_json(model_path));
  const tbme::PointCloud cloud = tbme::read_csv(in, model.intrinsic_dim);
  const tbme::TangentBundle bundle = tbme::extract_tangent_bundle(model, cloud);
  const tbme::Method method = tbme::parse_method(method_name);
  tbme::FneConfig fne;
  tbme::EmConfig em;
  tbme::ManifoldEstimate est;
  switch (method) {
    case tbme::Method::M1:
      est = tbme::estimate_m1(bundle, cloud);
      break;
    case tbme::Method::M2:
      est = tbme::estimate_m2(bundle, cloud, components, log_threshold, fne, em, seed);
      break;
    case tbme::Method::M3: {
      auto ambient =
          ambient_components > 0
              ? std::make_shared<const tbme::GmmModel>(
                    tbme::fit_gmm(cloud.points, ambient_components, em,
                                  tbme::chain_seed(seed, 777))
                        .model)
              : std::make_shared<const tbme::GmmModel>(tbme::to_gmm(model));
      est = tbme::estimate_m3(bundle, cloud, std::move(ambient), log_threshold, fne, seed);
      break;
    }
  }
  tbme::save_json(tbme::to_json(est), out);
  std::printf("built %s estimate with %zu neighborhoods -> %s\n", method_name.c_str(),
              est.neighborhoods.size(), out.c_str());
  return 0;
}

int cmd_sample(const std::string& est_path, int m, std::uint64_t seed,
               const std::string& out) {
  const tbme::ManifoldEstimate est = tbme::estimate_from_json(tbme::load_json(est_path));
  const tbme::PointCloud cloud = tbme::sample_estimate(est, m, seed);
  tbme::write_csv(cloud, out, /*header=*/true);
  std::printf("sampled %d points -> %s\n", m, out.c_str());
  return 0;
}

int cmd_evaluate(const std::string& dataset, const std::string& est_path, int metric_m,
                 std::uint64_t seed, const std::string& out) {
  const tbme::ManifoldSpec spec = spec_from_name(dataset);
  const tbme::ManifoldEstimate est = tbme::estimate_from_json(tbme::load_json(est_path));
  const tbme::MetricReport report = tbme::evaluate_estimate(spec, est, metric_m, seed);
  tbme::save_json(tbme::to_json(report), out);
  std::printf("symmetric ERE %.6e, Hausdorff %.6e -> %s\n", report.symmetric_ere,
              report.hausdorff, out.c_str());
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir, int reps,
              long metric_m, long long seed) {
  tbme::SweepConfig cfg = tbme::sweep_config_from_json(tbme::load_json(config_path));
  if (reps > 0) cfg.repetitions = reps;
  if (metric_m > 0) cfg.metric_m = metric_m;
  if (seed >= 0) cfg.master_seed = static_cast<std::uint64_t>(seed);
  const tbme::SweepResult results = tbme::run_sweep(cfg);
  tbme::emit_reports(results, out_dir);
  int failures = 0;
  for (const auto& r : results.rows)
    if (!r.error.empty()) ++failures;
  std::printf("%zu rows (%d failed) -> %s\n", results.rows.size(), failures,
              out_dir.c_str());
  return failures == 0 ? 0 : 1;
}

int cmd_plot(const std::string& results_path, const std::string& out_dir) {
  tbme::SweepResult results;
  results.rows = tbme::read_results_csv(results_path);
  tbme::emit_reports(results, out_dir);
  std::printf("plots for %zu rows -> %s\n", results.rows.size(), out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Manifold estimation from a tangent bundle learner"};
  app.require_subcommand(1);

  std::string dataset = "spiral", in, out, model_path, est_path, method = "m1",
              config_path, results_path;
  int n = 1000, n_over_k = 55, k = 0, m = 20000, metric_m = 20000, components = 1,
      ambient_components = 0, reps = 0;
  long sweep_metric_m = 0;
  long long sweep_seed = -1;
  std::uint64_t seed = 0;
  double log_threshold = 0.0;
  bool noise_free = false;

  auto* generate = app.add_subcommand("generate", "Sample a synthetic dataset to CSV");
  generate->add_option("--dataset", dataset, "spiral|sine|scurve|swissroll")->required();
  generate->add_option("--n", n, "number of points")->required();
  generate->add_option("--seed", seed, "RNG seed");
  generate->add_option("--out", out, "output CSV path")->required();
  generate->add_flag("--true-manifold", noise_free, "sample without noise");

  auto* fit = app.add_subcommand("fit", "Fit the mixture model to a CSV dataset");
  fit->add_option("--dataset", dataset)->required();
  fit->add_option("--in", in, "input CSV")->required();
  fit->add_option("--n-over-k", n_over_k, "points per component (k = round(n / this))");
  fit->add_option("--k", k, "explicit component count (overrides --n-over-k)");
  fit->add_option("--seed", seed);
  fit->add_option("--out", out, "output model JSON")->required();

  auto* estimate = app.add_subcommand("estimate", "Build a manifold estimate");
  estimate->add_option("--model", model_path, "model JSON from fit")->required();
  estimate->add_option("--in", in, "training CSV used for the fit")->required();
  estimate->add_option("--method", method, "m1|m2|m3")->required();
  estimate->add_option("--threshold", log_threshold, "log-density threshold (m2/m3)");
  estimate->add_option("--components", components, "latent GMM components (m2)");
  estimate->add_option("--ambient-components", ambient_components,
                       "fit an independent ambient GMM for m3 (0 = reuse the mixture)");
  estimate->add_option("--seed", seed);
  estimate->add_option("--out", out, "output estimate JSON")->required();

  auto* sample = app.add_subcommand("sample", "Sample points from an estimate");
  sample->add_option("--estimate", est_path, "estimate JSON")->required();
  sample->add_option("--m", m, "number of samples");
  sample->add_option("--seed", seed);
  sample->add_option("--out", out, "output CSV path")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Metrics between truth and estimate");
  evaluate->add_option("--dataset", dataset)->required();
  evaluate->add_option("--estimate", est_path, "estimate JSON")->required();
  evaluate->add_option("--metric-m", metric_m, "sample size per side");
  evaluate->add_option("--seed", seed);
  evaluate->add_option("--out", out, "output metrics JSON")->required();

  auto* sweep = app.add_subcommand("sweep", "Run an experiment grid from a JSON config");
  sweep->add_option("--config", config_path, "sweep config JSON")->required();
  sweep->add_option("--out", out, "output directory")->required();
  sweep->add_option("--reps", reps, "override repetitions");
  sweep->add_option("--metric-m", sweep_metric_m, "override metric sample size");
  sweep->add_option("--seed", sweep_seed, "override master seed");

  auto* plot = app.add_subcommand("plot", "Re-render figures from results.csv");
  plot->add_option("--results", results_path, "results.csv path")->required();
  plot->add_option("--out", out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return cmd_generate(dataset, n, seed, out, noise_free);
    if (fit->parsed()) return cmd_fit(dataset, in, n_over_k, k, seed, out);
    if (estimate->parsed())
      return cmd_estimate(model_path, in, method, log_threshold, components,
                          ambient_components, seed, out);
    if (sample->parsed()) return cmd_sample(est_path, m, seed, out);
    if (evaluate->parsed()) return cmd_evaluate(dataset, est_path, metric_m, seed, out);
    if (sweep->parsed()) return cmd_sweep(config_path, out, reps, sweep_metric_m, sweep_seed);
    if (plot->parsed()) return cmd_plot(results_path, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
