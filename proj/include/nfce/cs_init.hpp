#pragma once

#include <optional>
#include <vector>

#include "nfce/channel.hpp"
#include "nfce/image.hpp"
#include "nfce/measurement.hpp"
#include "nfce/polardict.hpp"

namespace nfce {

struct SparseEstimate {
  std::vector<int> support;
  CMatrix coeffs;  // S × K, nonzero only on support rows
  /// Frobenius residual norm before the first and after every iteration.
  std::vector<double> residual_history;
  bool ridge_used = false;
};

struct SompOptions {
  int max_atoms = 1;
  /// Stop once the Frobenius residual ‖R̃ - Φ̃Ĥ‖ is at or below this value.
  double tolerance = 0.0;
  double ridge_condition = 1e12;
  double ridge_scale = 1e-10;
};

/// Dual stopping rule default: max_atoms = L and ε = 1.1·σ·√(Q·N_RF·K).
SompOptions default_somp_options(const SystemConfig& cfg, double noise_power);

SparseEstimate somp_estimate(const Observation& obs, const SompOptions& opts);

/// Ĥ = P·Ĥ^AD.
ChannelMatrix initial_estimate(const TransformMatrix& dict, const SparseEstimate& est);

enum class BaselineMode { ls, genie_ls };

struct BaselineResult {
  ChannelMatrix channel;
  /// True when the LS system was underdetermined and the minimum-norm solution was returned.
  bool minimum_norm = false;
};

/// Per-subcarrier pseudo-inverse of the stacked combiner.
BaselineResult ls_estimate(const CMatrix& raw, const CombinerSet& combiners);

/// Whitened LS restricted to the exact steering vectors of the true paths.
BaselineResult genie_ls_estimate(const CMatrix& raw, const CombinerSet& combiners,
                                 const std::vector<PathParams>& true_paths, const Geometry& geom);

BaselineResult baseline_estimate(BaselineMode mode, const CMatrix& raw, const CombinerSet& combiners,
                                 const std::vector<PathParams>* true_paths = nullptr,
                                 const Geometry* geom = nullptr);

/// Channel 0 holds the real part and channel 1 the imaginary part of an N × K matrix.
Image pack_image(const CMatrix& h);
CMatrix unpack_image(const Image& img, int index = 0);

}  // namespace nfce
