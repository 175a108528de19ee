#pragma once

#include <utility>
#include <vector>

#include "nfce/rng.hpp"
#include "nfce/sysgeom.hpp"
#include "nfce/types.hpp"

namespace nfce {

enum class SteeringModel { exact, fresnel, planar };

struct PathParams {
  cdouble gain{1.0, 0.0};
  double angle = 0.0;     // rad, [-π/2, π/2]
  double distance = 1.0;  // m
  bool is_los = false;
};

/// Frequency-domain channel: column k is the N-antenna response at subcarrier k.
struct ChannelMatrix {
  CMatrix h;
  std::vector<PathParams> paths;

  Eigen::Index antennas() const { return h.rows(); }
  Eigen::Index subcarriers() const { return h.cols(); }
};

/// Per-antenna path difference d^(n) - d for a source at (angle, distance).
double path_difference(double angle, double distance, double offset, SteeringModel model);

/// Unit-norm array response, (1/√N)·exp(-j·2π/λ·(d^(n) - d)).
CVector steering_vector(double angle, double distance, SteeringModel model, const Geometry& geom);

std::vector<PathParams> draw_paths(const SystemConfig& cfg, std::pair<double, double> dist_range,
                                   Rng& rng);

/// Column k = √(N/L)·Σ_l g_l·exp(-j·2πf_k/c·d_l)·a(φ_l, d_l).
ChannelMatrix assemble_channel(const std::vector<PathParams>& paths, const Geometry& geom,
                               SteeringModel model = SteeringModel::exact);

}  // namespace nfce
