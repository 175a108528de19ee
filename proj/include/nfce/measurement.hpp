#pragma once

#include <vector>

#include "nfce/channel.hpp"
#include "nfce/polardict.hpp"
#include "nfce/rng.hpp"
#include "nfce/types.hpp"

namespace nfce {

/// Analog combiners for Q pilot slots, each N_RF × N.
struct CombinerSet {
  std::vector<CMatrix> slots;

  int n_slots() const { return static_cast<int>(slots.size()); }
  Eigen::Index n_rf() const { return slots.empty() ? 0 : slots.front().rows(); }
  Eigen::Index n_antennas() const { return slots.empty() ? 0 : slots.front().cols(); }
  /// Slots stacked vertically, QN_RF × N.
  CMatrix stacked() const;
};

/// Whitened pilot observation.
struct Observation {
  CMatrix r;               // QN_RF × K
  CMatrix phi;             // QN_RF × S
  double noise_power = 0;  // σ²
  CMatrix xi;              // lower-triangular factor, Σ_c = σ²·Ξ·Ξᴴ
  CMatrix xi_inv;
};

/// Entries i.i.d. from {-1, +1}/√N with equal probability.
CombinerSet draw_combiners(const SystemConfig& cfg, Rng& rng);

/// Raw stacked measurements r_k = C·h_k + [C_q·n_{k,q}]_q with n ~ CN(0, σ²I).
CMatrix observe(const ChannelMatrix& channel, const CombinerSet& combiners, double noise_power,
                Rng& rng);

/// Per-slot Cholesky factor Ξ_q of C_q·C_qᴴ, assembled block-diagonally.
CMatrix whitening_factor(const CombinerSet& combiners);

Observation whiten(const CMatrix& raw, const CombinerSet& combiners, double noise_power,
                   const TransformMatrix& dict);

}  // namespace nfce
