#include "nfce/harness/pipeline.hpp"

#include <cmath>

namespace nfce::harness {

ScenarioConfig ScenarioConfig::toy() {
  ScenarioConfig c;
  c.system.n_antennas = 32;
  c.system.n_rf = 8;
  c.system.n_users = 1;
  c.system.n_subcarriers = 32;
  c.system.pilot_len = 8;
  c.system.n_paths = 3;
  c.dist_range = {1.5, 5.0};
  c.grid.d_min = 0.3;
  return c;
}

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& j) {
  ScenarioConfig c = toy();
  c.system = SystemConfig::from_json(j.contains("system") ? j["system"] : j);
  if (j.contains("dist_range_m")) c.dist_range = j["dist_range_m"].get<std::pair<double, double>>();
  if (j.contains("snr_range_db")) c.snr_range_db = j["snr_range_db"].get<std::pair<double, double>>();
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    c.grid.d_min = g.value("d_min", c.grid.d_min);
    c.grid.beta_delta = g.value("beta_delta", c.grid.beta_delta);
    c.grid.include_far_field = g.value("include_far_field", c.grid.include_far_field);
    c.grid.max_rings = g.value("max_rings", c.grid.max_rings);
  }
  c.on_grid = j.value("on_grid", c.on_grid);
  return c;
}

nlohmann::json ScenarioConfig::to_json() const {
  return {{"system", system.to_json()},
          {"dist_range_m", dist_range},
          {"snr_range_db", snr_range_db},
          {"grid",
           {{"d_min", grid.d_min},
            {"beta_delta", grid.beta_delta},
            {"include_far_field", grid.include_far_field},
            {"max_rings", grid.max_rings}}},
          {"on_grid", on_grid}};
}

Scenario::Scenario(ScenarioConfig cfg)
    : config(std::move(cfg)),
      geom(derive_geometry(config.system)),
      dict(build_transform(build_grid(geom, config.grid), geom)) {}

namespace {

constexpr int kMaxCombinerDraws = 64;

std::vector<PathParams> draw_on_grid(const Scenario& sc, Rng& rng) {
  std::vector<PathParams> paths(sc.config.system.n_paths);
  for (std::size_t l = 0; l < paths.size(); ++l) {
    const auto& atom = sc.dict.atoms[rng.uniform_int(0, static_cast<int>(sc.dict.size()) - 1)];
    paths[l].angle = atom.angle;
    paths[l].distance = atom.distance;
    paths[l].gain = rng.complex_normal(1.0);
    paths[l].is_los = l == 0;
  }
  return paths;
}

// On-grid channels reuse the dictionary's own atom model so they are exactly sparse.
ChannelMatrix assemble_on_grid(const Scenario& sc, const std::vector<PathParams>& paths) {
  const auto& g = sc.geom;
  const double scale = std::sqrt(static_cast<double>(g.n_antennas) / paths.size());
  ChannelMatrix ch;
  ch.paths = paths;
  ch.h = CMatrix::Zero(g.n_antennas, static_cast<Eigen::Index>(g.subcarrier_freqs.size()));
  for (const auto& p : paths) {
    const bool far = is_far_field(p.distance);
    const CVector a = far ? steering_vector(p.angle, 1.0, SteeringModel::planar, g)
                          : steering_vector(p.angle, p.distance, SteeringModel::fresnel, g);
    for (Eigen::Index k = 0; k < ch.h.cols(); ++k) {
      const double cycles = far ? 0.0 : g.subcarrier_freqs[k] * p.distance / kSpeedOfLight;
      const double phase = -2.0 * kPi * (cycles - std::floor(cycles));
      ch.h.col(k) += scale * p.gain * cdouble(std::cos(phase), std::sin(phase)) * a;
    }
  }
  return ch;
}

}  // namespace

Instance simulate(const Scenario& sc, double snr_db, Rng& rng, double noise_power) {
  Instance inst;
  inst.snr_db = snr_db;
  inst.noise_power = noise_power >= 0.0 ? noise_power : snr_to_noise_power(snr_db);
  if (sc.config.on_grid) {
    inst.truth = assemble_on_grid(sc, draw_on_grid(sc, rng));
  } else {
    inst.truth = assemble_channel(draw_paths(sc.config.system, sc.config.dist_range, rng), sc.geom,
                                  SteeringModel::exact);
  }
  // Random sign blocks are occasionally rank deficient for small N; redraw those.
  for (int attempt = 0;; ++attempt) {
    inst.combiners = draw_combiners(sc.config.system, rng);
    try {
      whitening_factor(inst.combiners);
      break;
    } catch (const NumericalError&) {
      if (attempt + 1 == kMaxCombinerDraws) throw;
    }
  }
  inst.raw = observe(inst.truth, inst.combiners, inst.noise_power, rng);
  inst.obs = whiten(inst.raw, inst.combiners, inst.noise_power, sc.dict);
  inst.sparse = somp_estimate(inst.obs, default_somp_options(sc.config.system, inst.noise_power));
  inst.somp = initial_estimate(sc.dict, inst.sparse);
  return inst;
}

double nmse(const CMatrix& truth, const CMatrix& estimate) {
  detail::require_shape(truth.rows() == estimate.rows() && truth.cols() == estimate.cols(),
                        "nmse: shape mismatch");
  const double denom = truth.squaredNorm();
  detail::require(denom > 0.0, "nmse: ground truth has zero norm");
  return (truth - estimate).squaredNorm() / denom;
}

double nmse(const std::vector<CMatrix>& truth, const std::vector<CMatrix>& estimate) {
  detail::require_shape(truth.size() == estimate.size() && !truth.empty(),
                        "nmse: batch sizes differ or are empty");
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) acc += nmse(truth[i], estimate[i]);
  return acc / static_cast<double>(truth.size());
}

}  // namespace nfce::harness
