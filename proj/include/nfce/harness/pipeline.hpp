#pragma once

#include <memory>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nfce/channel.hpp"
#include "nfce/cs_init.hpp"
#include "nfce/measurement.hpp"
#include "nfce/polardict.hpp"
#include "nfce/sysgeom.hpp"

namespace nfce::harness {

/// Everything needed to simulate an estimation instance, beyond the SNR.
struct ScenarioConfig {
  SystemConfig system;
  std::pair<double, double> dist_range{1.5, 5.0};
  std::pair<double, double> snr_range_db{0.0, 15.0};
  GridOptions grid;
  /// Paths placed exactly on dictionary atoms (fresnel model) instead of drawn freely.
  bool on_grid = false;

  static ScenarioConfig toy();
  static ScenarioConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Scenario with its derived geometry and dictionary, shared across instances.
struct Scenario {
  ScenarioConfig config;
  Geometry geom;
  TransformMatrix dict;

  explicit Scenario(ScenarioConfig cfg);
};

struct Instance {
  ChannelMatrix truth;
  CombinerSet combiners;
  CMatrix raw;
  Observation obs;
  double noise_power = 0.0;
  double snr_db = 0.0;
  SparseEstimate sparse;
  ChannelMatrix somp;
};

inline double snr_to_noise_power(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

/// channel → observe → whiten → SOMP. noise_power overrides the SNR when non-negative.
Instance simulate(const Scenario& sc, double snr_db, Rng& rng, double noise_power = -1.0);

/// ‖H - Ĥ‖²_F / ‖H‖²_F.
double nmse(const CMatrix& truth, const CMatrix& estimate);
/// Mean of per-instance NMSE ratios.
double nmse(const std::vector<CMatrix>& truth, const std::vector<CMatrix>& estimate);
inline double to_db(double linear) { return 10.0 * std::log10(linear); }

}  // namespace nfce::harness
