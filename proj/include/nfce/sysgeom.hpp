#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nfce/types.hpp"

namespace nfce {

/// Wireless system setup. Defaults follow the full-scale configuration
/// (256-antenna ULA at 28 GHz, 100 MHz, 256 subcarriers).
struct SystemConfig {
  int n_antennas = 256;
  int n_rf = 16;
  int n_users = 16;
  double carrier_hz = 28e9;
  double bandwidth_hz = 100e6;
  int n_subcarriers = 256;
  int pilot_len = 8;
  int n_paths = 6;
  /// Element spacing in meters; unset means half a carrier wavelength.
  std::optional<double> antenna_spacing;
  std::uint64_t rng_seed = 0;

  void validate() const;
  double wavelength() const { return kSpeedOfLight / carrier_hz; }
  double spacing() const { return antenna_spacing.value_or(wavelength() / 2.0); }
  int n_measurements() const { return pilot_len * n_rf; }

  static SystemConfig from_json(const nlohmann::json& j);
  static SystemConfig load(const std::string& path);
  nlohmann::json to_json() const;
};

struct Geometry {
  int n_antennas = 0;
  double wavelength = 0.0;
  double spacing = 0.0;
  std::vector<double> subcarrier_freqs;
  /// δ_n·d for n = 0..N-1, symmetric about the array center.
  std::vector<double> antenna_offsets;
  double aperture = 0.0;
  double fraunhofer_m = 0.0;
  double fresnel_m = 0.0;

  /// δ_n = (2n - N + 1)/2.
  double delta(int n) const { return (2.0 * n - n_antennas + 1) / 2.0; }
};

Geometry derive_geometry(const SystemConfig& cfg);

}  // namespace nfce
