#include "nfce/channel.hpp"

#include <cmath>

namespace nfce {

namespace {

void check_path_inputs(double angle, double distance, SteeringModel model) {
  detail::require(std::isfinite(angle) && !std::isnan(distance), "steering inputs must not be NaN");
  detail::require(angle >= -kPi / 2 - 1e-12 && angle <= kPi / 2 + 1e-12,
                  "angle must lie in [-pi/2, pi/2]");
  if (model != SteeringModel::planar)
    detail::require(distance > 0.0 && std::isfinite(distance),
                    "near-field steering needs a positive finite distance");
}

}  // namespace

double path_difference(double angle, double distance, double offset, SteeringModel model) {
  switch (model) {
    case SteeringModel::exact: {
      // (d^(n))² - d² divided by d^(n) + d; avoids cancellation at large d.
      const double num = offset * offset - 2.0 * distance * offset * std::sin(angle);
      const double dn = std::sqrt(distance * distance + num);
      return num / (dn + distance);
    }
    case SteeringModel::fresnel: {
      const double c = std::cos(angle);
      return offset * offset * c * c / (2.0 * distance) - offset * std::sin(angle);
    }
    case SteeringModel::planar:
      return -offset * std::sin(angle);
  }
  return 0.0;
}

CVector steering_vector(double angle, double distance, SteeringModel model, const Geometry& geom) {
  check_path_inputs(angle, distance, model);
  const int n = geom.n_antennas;
  const double k0 = 2.0 * kPi / geom.wavelength;
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  CVector a(n);
  for (int i = 0; i < n; ++i) {
    const double phase = -k0 * path_difference(angle, distance, geom.antenna_offsets[i], model);
    a[i] = norm * cdouble(std::cos(phase), std::sin(phase));
  }
  return a;
}

std::vector<PathParams> draw_paths(const SystemConfig& cfg, std::pair<double, double> dist_range,
                                   Rng& rng) {
  detail::require(cfg.n_paths >= 1, "n_paths must be >= 1");
  const auto [d_min, d_max] = dist_range;
  detail::require(d_min > 0.0 && d_min <= d_max, "distance range must satisfy 0 < d_min <= d_max");

  std::vector<PathParams> paths(cfg.n_paths);
  for (int l = 0; l < cfg.n_paths; ++l) {
    auto& p = paths[l];
    p.angle = rng.uniform(-kPi / 2, kPi / 2);
    p.distance = d_min == d_max ? d_min : rng.uniform(d_min, d_max);
    p.gain = rng.complex_normal(1.0);
    p.is_los = (l == 0);
  }
  return paths;
}

ChannelMatrix assemble_channel(const std::vector<PathParams>& paths, const Geometry& geom,
                               SteeringModel model) {
  detail::require(!paths.empty(), "assemble_channel needs at least one path");
  const int n = geom.n_antennas;
  const auto k_count = static_cast<Eigen::Index>(geom.subcarrier_freqs.size());
  const double scale = std::sqrt(static_cast<double>(n) / static_cast<double>(paths.size()));

  ChannelMatrix ch;
  ch.paths = paths;
  ch.h = CMatrix::Zero(n, k_count);
  for (const auto& p : paths) {
    const CVector a = steering_vector(p.angle, p.distance, model, geom);
    for (Eigen::Index k = 0; k < k_count; ++k) {
      // Phase reduced modulo 2π first: 2πf d/c is ~10³ rad and loses digits otherwise.
      const double cycles = geom.subcarrier_freqs[k] * p.distance / kSpeedOfLight;
      const double phase = -2.0 * kPi * (cycles - std::floor(cycles));
      ch.h.col(k) += scale * p.gain * cdouble(std::cos(phase), std::sin(phase)) * a;
    }
  }
  return ch;
}

}  // namespace nfce
