#include "nfce/sysgeom.hpp"

#include <cmath>
#include <fstream>

namespace nfce {

void SystemConfig::validate() const {
  using detail::require;
  require(n_antennas >= 1, "n_antennas must be >= 1");
  require(n_rf >= 1 && n_rf <= n_antennas, "n_rf must lie in [1, n_antennas]");
  require(n_users >= 1, "n_users must be >= 1");
  require(carrier_hz > 0.0 && std::isfinite(carrier_hz), "carrier_hz must be positive");
  require(bandwidth_hz > 0.0 && std::isfinite(bandwidth_hz), "bandwidth_hz must be positive");
  require(n_subcarriers >= 1, "n_subcarriers must be >= 1");
  require(pilot_len >= 1, "pilot_len must be >= 1");
  require(n_paths >= 1, "n_paths must be >= 1");
  if (antenna_spacing) require(*antenna_spacing > 0.0, "antenna_spacing must be positive");
}

SystemConfig SystemConfig::from_json(const nlohmann::json& j) {
  SystemConfig c;
  c.n_antennas = j.value("n_antennas", c.n_antennas);
  c.n_rf = j.value("n_rf", c.n_rf);
  c.n_users = j.value("n_users", c.n_users);
  c.carrier_hz = j.value("carrier_hz", c.carrier_hz);
  c.bandwidth_hz = j.value("bandwidth_hz", c.bandwidth_hz);
  c.n_subcarriers = j.value("n_subcarriers", c.n_subcarriers);
  c.pilot_len = j.value("pilot_len", c.pilot_len);
  c.n_paths = j.value("n_paths", c.n_paths);
  if (j.contains("antenna_spacing") && !j["antenna_spacing"].is_null())
    c.antenna_spacing = j["antenna_spacing"].get<double>();
  c.rng_seed = j.value("rng_seed", c.rng_seed);
  c.validate();
  return c;
}

SystemConfig SystemConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file: " + path);
  return from_json(nlohmann::json::parse(in));
}

nlohmann::json SystemConfig::to_json() const {
  nlohmann::json j{{"n_antennas", n_antennas},       {"n_rf", n_rf},
                   {"n_users", n_users},             {"carrier_hz", carrier_hz},
                   {"bandwidth_hz", bandwidth_hz},   {"n_subcarriers", n_subcarriers},
                   {"pilot_len", pilot_len},         {"n_paths", n_paths},
                   {"rng_seed", rng_seed}};
  j["antenna_spacing"] = antenna_spacing ? nlohmann::json(*antenna_spacing) : nlohmann::json();
  return j;
}

Geometry derive_geometry(const SystemConfig& cfg) {
  cfg.validate();
  Geometry g;
  g.n_antennas = cfg.n_antennas;
  g.wavelength = cfg.wavelength();
  g.spacing = cfg.spacing();

  const int k_count = cfg.n_subcarriers;
  g.subcarrier_freqs.resize(k_count);
  for (int k = 1; k <= k_count; ++k)
    g.subcarrier_freqs[k - 1] =
        cfg.carrier_hz + cfg.bandwidth_hz * (2.0 * k - k_count - 1) / (2.0 * k_count);

  g.antenna_offsets.resize(cfg.n_antennas);
  for (int n = 0; n < cfg.n_antennas; ++n) g.antenna_offsets[n] = g.delta(n) * g.spacing;

  g.aperture = cfg.n_antennas * g.spacing;
  g.fraunhofer_m = 2.0 * g.aperture * g.aperture / g.wavelength;
  g.fresnel_m = 0.5 * g.aperture * std::sqrt(g.aperture / g.wavelength);
  return g;
}

}  // namespace nfce
