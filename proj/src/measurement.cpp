#include "nfce/measurement.hpp"

#include <cmath>
#include <string>

namespace nfce {

CMatrix CombinerSet::stacked() const {
  const Eigen::Index rf = n_rf();
  CMatrix c(rf * n_slots(), n_antennas());
  for (int q = 0; q < n_slots(); ++q) c.middleRows(q * rf, rf) = slots[q];
  return c;
}

CombinerSet draw_combiners(const SystemConfig& cfg, Rng& rng) {
  cfg.validate();
  const double mag = 1.0 / std::sqrt(static_cast<double>(cfg.n_antennas));
  CombinerSet set;
  set.slots.reserve(cfg.pilot_len);
  for (int q = 0; q < cfg.pilot_len; ++q) {
    CMatrix cq(cfg.n_rf, cfg.n_antennas);
    for (Eigen::Index j = 0; j < cq.cols(); ++j)
      for (Eigen::Index i = 0; i < cq.rows(); ++i) cq(i, j) = rng.bernoulli() ? mag : -mag;
    set.slots.push_back(std::move(cq));
  }
  return set;
}

CMatrix observe(const ChannelMatrix& channel, const CombinerSet& combiners, double noise_power,
                Rng& rng) {
  detail::require(noise_power >= 0.0, "noise power must be non-negative");
  detail::require_shape(combiners.n_slots() > 0 && combiners.n_antennas() == channel.antennas(),
                        "combiner width must equal the antenna count");
  const CMatrix c = combiners.stacked();
  CMatrix raw = c * channel.h;
  if (noise_power == 0.0) return raw;

  const Eigen::Index n = channel.antennas();
  const Eigen::Index rf = combiners.n_rf();
  CVector noise(n);
  for (Eigen::Index k = 0; k < channel.subcarriers(); ++k) {
    for (int q = 0; q < combiners.n_slots(); ++q) {
      for (Eigen::Index i = 0; i < n; ++i) noise[i] = rng.complex_normal(noise_power);
      raw.block(q * rf, k, rf, 1) += combiners.slots[q] * noise;
    }
  }
  return raw;
}

CMatrix whitening_factor(const CombinerSet& combiners) {
  const Eigen::Index rf = combiners.n_rf();
  CMatrix xi = CMatrix::Zero(rf * combiners.n_slots(), rf * combiners.n_slots());
  for (int q = 0; q < combiners.n_slots(); ++q) {
    const CMatrix gram = combiners.slots[q] * combiners.slots[q].adjoint();
    Eigen::LLT<CMatrix> llt(gram);
    const CMatrix l = llt.matrixL();
    const double scale = gram.diagonal().real().maxCoeff();
    bool ok = llt.info() == Eigen::Success;
    for (Eigen::Index i = 0; ok && i < rf; ++i)
      ok = std::isfinite(l(i, i).real()) && l(i, i).real() > 1e-7 * std::sqrt(scale);
    if (!ok)
      throw NumericalError("combiner block for pilot slot q=" + std::to_string(q + 1) +
                           " is rank deficient; C_q C_q^H is not positive definite");
    xi.block(q * rf, q * rf, rf, rf) = l;
  }
  return xi;
}

Observation whiten(const CMatrix& raw, const CombinerSet& combiners, double noise_power,
                   const TransformMatrix& dict) {
  detail::require(noise_power >= 0.0, "noise power must be non-negative");
  const CMatrix c = combiners.stacked();
  detail::require_shape(raw.rows() == c.rows(), "raw measurement rows must equal Q·N_RF");
  detail::require_shape(dict.p.rows() == c.cols(), "dictionary rows must equal the antenna count");

  Observation obs;
  obs.noise_power = noise_power;
  obs.xi = whitening_factor(combiners);
  // Block-diagonal inverse, one triangular solve per slot.
  const Eigen::Index rf = combiners.n_rf();
  obs.xi_inv = CMatrix::Zero(obs.xi.rows(), obs.xi.cols());
  for (int q = 0; q < combiners.n_slots(); ++q) {
    const auto block = obs.xi.block(q * rf, q * rf, rf, rf);
    obs.xi_inv.block(q * rf, q * rf, rf, rf) =
        block.triangularView<Eigen::Lower>().solve(CMatrix::Identity(rf, rf));
  }
  obs.r = obs.xi_inv * raw;
  obs.phi = obs.xi_inv * (c * dict.p);
  return obs;
}

}  // namespace nfce
