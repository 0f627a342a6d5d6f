#pragma once

#include <Eigen/Core>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tbme/chart.hpp"
#include "tbme/dataset.hpp"
#include "tbme/fne.hpp"
#include "tbme/gmm.hpp"
#include "tbme/metrics.hpp"
#include "tbme/moppca.hpp"

namespace tbme {

using json = nlohmann::json;

namespace detail {

inline json vec_to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Eigen::VectorXd vec_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                           static_cast<Eigen::Index>(values.size()));
}

/// Matrices serialize as a list of rows.
inline json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    rows.push_back(vec_to_json(m.row(i).transpose()));
  return rows;
}

inline Eigen::MatrixXd mat_from_json(const json& j) {
  if (!j.is_array() || j.empty())
    throw std::invalid_argument("mat_from_json: expected non-empty array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != cols)
      throw std::invalid_argument("mat_from_json: ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

}  // namespace detail

inline json to_json(const ManifoldSpec& spec) {
  return json{{"kind", manifold_kind_name(spec.kind)},
              {"t_min", spec.t_min},
              {"t_max", spec.t_max},
              {"noise_sigmas", spec.noise_sigmas},
              {"ambient_dim", spec.ambient_dim},
              {"intrinsic_dim", spec.intrinsic_dim}};
}

inline ManifoldSpec manifold_spec_from_json(const json& j) {
  ManifoldSpec spec;
  spec.kind = manifold_kind_from_name(j.at("kind").get<std::string>());
  spec.t_min = j.at("t_min").get<double>();
  spec.t_max = j.at("t_max").get<double>();
  spec.noise_sigmas = j.at("noise_sigmas").get<std::vector<double>>();
  spec.ambient_dim = j.at("ambient_dim").get<int>();
  spec.intrinsic_dim = j.at("intrinsic_dim").get<int>();
  spec.validate();
  return spec;
}

inline json to_json(const GmmModel& model) {
  json comps = json::array();
  for (Eigen::Index j = 0; j < model.components(); ++j)
    comps.push_back(json{{"weight", model.weights()[j]},
                         {"mean", detail::vec_to_json(model.means().row(j).transpose())},
                         {"covariance", detail::mat_to_json(model.covariances()[j])}});
  return json{{"dim", model.dim()}, {"components", comps}};
}

inline GmmModel gmm_from_json(const json& j) {
  const auto& comps = j.at("components");
  const Eigen::Index m = static_cast<Eigen::Index>(comps.size());
  if (m == 0) throw std::invalid_argument("gmm_from_json: no components");
  const Eigen::Index p = j.at("dim").get<Eigen::Index>();
  Eigen::VectorXd weights(m);
  Eigen::MatrixXd means(m, p);
  std::vector<Eigen::MatrixXd> covs(m);
  for (Eigen::Index c = 0; c < m; ++c) {
    weights[c] = comps[c].at("weight").get<double>();
    means.row(c) = detail::vec_from_json(comps[c].at("mean"));
    covs[c] = detail::mat_from_json(comps[c].at("covariance"));
  }
  return GmmModel(weights, means, covs);
}

inline json to_json(const MoppcaModel& model) {
  json comps = json::array();
  for (const auto& c : model.components)
    comps.push_back(json{{"mixing_weight", c.mixing_weight},
                         {"mean", detail::vec_to_json(c.mean)},
                         {"loading", detail::mat_to_json(c.loading)},
                         {"noise_variance", c.noise_variance}});
  return json{{"intrinsic_dim", model.intrinsic_dim},
              {"ambient_dim", model.ambient_dim},
              {"final_log_likelihood", model.final_log_likelihood},
              {"iterations_used", model.iterations_used},
              {"components", comps}};
}

inline MoppcaModel moppca_from_json(const json& j) {
  MoppcaModel model;
  model.intrinsic_dim = j.at("intrinsic_dim").get<int>();
  model.ambient_dim = j.at("ambient_dim").get<int>();
  model.final_log_likelihood = j.at("final_log_likelihood").get<double>();
  model.iterations_used = j.at("iterations_used").get<int>();
  for (const auto& c : j.at("components")) {
    PpcaComponent comp;
    comp.mixing_weight = c.at("mixing_weight").get<double>();
    comp.mean = detail::vec_from_json(c.at("mean"));
    comp.loading = detail::mat_from_json(c.at("loading"));
    comp.noise_variance = c.at("noise_variance").get<double>();
    model.components.push_back(std::move(comp));
  }
  if (model.components.empty())
    throw std::invalid_argument("moppca_from_json: no components");
  return model;
}

inline json chart_to_json(const Chart& chart) {
  return json{{"anchor", detail::vec_to_json(chart.anchor())},
              {"basis", detail::mat_to_json(chart.basis())}};
}

inline Chart chart_from_json(const json& j) {
  return Chart(detail::vec_from_json(j.at("anchor")),
               detail::mat_from_json(j.at("basis")));
}

inline json to_json(const ManifoldEstimate& est) {
  json ns = json::array();
  for (const auto& n : est.neighborhoods) {
    json entry;
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          entry["frame_index"] = v.frame_index;
          entry["chart"] = chart_to_json(v.chart);
          if constexpr (std::is_same_v<T, HullNeighborhood>) {
            if (v.hull.dim == 1) {
              entry["region"] = json{{"type", "interval"}, {"lo", v.hull.lo}, {"hi", v.hull.hi}};
            } else {
              json poly = json::array();
              for (const auto& p : v.hull.polygon)
                poly.push_back(json::array({p.x(), p.y()}));
              entry["region"] = json{{"type", "polygon"}, {"vertices", poly}};
            }
          } else if constexpr (std::is_same_v<T, LatentDensityNeighborhood>) {
            entry["region"] = json{{"type", "latent_density"},
                                   {"gmm", to_json(v.latent_density)},
                                   {"log_threshold", v.log_threshold},
                                   {"box_lo", detail::vec_to_json(v.box_lo)},
                                   {"box_hi", detail::vec_to_json(v.box_hi)}};
          } else {
            entry["region"] = json{{"type", "ambient_density"},
                                   {"gmm", to_json(*v.ambient_density)},
                                   {"log_threshold", v.log_threshold},
                                   {"box_lo", detail::vec_to_json(v.box_lo)},
                                   {"box_hi", detail::vec_to_json(v.box_hi)}};
          }
        },
        n);
    ns.push_back(std::move(entry));
  }
  std::vector<double> weights(est.weights.data(), est.weights.data() + est.weights.size());
  return json{{"method", method_name(est.method)},
              {"intrinsic_dim", est.intrinsic_dim},
              {"ambient_dim", est.ambient_dim},
              {"neighborhoods", ns},
              {"weights", weights}};
}

inline ManifoldEstimate estimate_from_json(const json& j) {
  ManifoldEstimate est;
  est.method = parse_method(j.at("method").get<std::string>());
  est.intrinsic_dim = j.at("intrinsic_dim").get<int>();
  est.ambient_dim = j.at("ambient_dim").get<int>();
  est.weights = detail::vec_from_json(j.at("weights"));
  for (const auto& entry : j.at("neighborhoods")) {
    const int frame = entry.at("frame_index").get<int>();
    Chart chart = chart_from_json(entry.at("chart"));
    const auto& region = entry.at("region");
    const std::string type = region.at("type").get<std::string>();
    if (type == "interval") {
      LatentHull hull;
      hull.dim = 1;
      hull.empty = false;
      hull.lo = region.at("lo").get<double>();
      hull.hi = region.at("hi").get<double>();
      est.neighborhoods.push_back(HullNeighborhood{frame, std::move(chart), std::move(hull)});
    } else if (type == "polygon") {
      LatentHull hull;
      hull.dim = 2;
      hull.empty = false;
      for (const auto& p : region.at("vertices"))
        hull.polygon.emplace_back(p[0].get<double>(), p[1].get<double>());
      est.neighborhoods.push_back(HullNeighborhood{frame, std::move(chart), std::move(hull)});
    } else if (type == "latent_density") {
      est.neighborhoods.push_back(LatentDensityNeighborhood{
          frame, std::move(chart), gmm_from_json(region.at("gmm")),
          region.at("log_threshold").get<double>(),
          detail::vec_from_json(region.at("box_lo")),
          detail::vec_from_json(region.at("box_hi"))});
    } else if (type == "ambient_density") {
      est.neighborhoods.push_back(AmbientDensityNeighborhood{
          frame, std::move(chart),
          std::make_shared<const GmmModel>(gmm_from_json(region.at("gmm"))),
          region.at("log_threshold").get<double>(),
          detail::vec_from_json(region.at("box_lo")),
          detail::vec_from_json(region.at("box_hi"))});
    } else {
      throw std::invalid_argument("estimate_from_json: unknown region type '" + type + "'");
    }
  }
  if (est.neighborhoods.size() != static_cast<size_t>(est.weights.size()))
    throw std::invalid_argument("estimate_from_json: weights/neighborhood count mismatch");
  return est;
}

inline json to_json(const MetricReport& r) {
  return json{{"symmetric_ere", r.symmetric_ere},
              {"hausdorff", r.hausdorff},
              {"asymmetric_ere", r.asymmetric_ere},
              {"m_true", r.m_true},
              {"m_est", r.m_est},
              {"seed_true", r.seed_true},
              {"seed_est", r.seed_est}};
}

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_json: cannot open " + path);
  json j;
  in >> j;
  return j;
}

inline void save_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_json: cannot open " + path);
  out << j.dump(2) << '\n';
}

}  // namespace tbme
