#pragma once

#include <functional>
#include <vector>

#include "nfce/image.hpp"
#include "nfce/rng.hpp"

namespace nfce::diffusion {

/// Variance schedule over steps t = 1..T. Index 0 of alpha_bar is the ᾱ₀ = 1 convention.
class NoiseSchedule {
 public:
  explicit NoiseSchedule(std::vector<double> betas);

  int steps() const { return static_cast<int>(betas_.size()); }
  double beta(int t) const { return betas_.at(check(t, 1) - 1); }
  double alpha(int t) const { return 1.0 - beta(t); }
  double alpha_bar(int t) const { return alpha_bars_.at(check(t, 0)); }
  double beta_tilde(int t) const { return beta_tildes_.at(check(t, 1) - 1); }
  const std::vector<double>& betas() const { return betas_; }

 private:
  int check(int t, int lo) const;

  std::vector<double> betas_;
  std::vector<double> alpha_bars_;  // length T + 1
  std::vector<double> beta_tildes_;
};

/// β_t evenly spaced from beta_1 to beta_T.
NoiseSchedule linear_schedule(int steps, double beta_1, double beta_T);

enum class SigmaRule { zero, ddpm };

struct SamplerSpec {
  std::vector<int> steps;  // increasing, ends at T
  SigmaRule sigma = SigmaRule::zero;
  /// With the ddpm rule and the full sequence, run the Markovian update directly.
  bool markovian_when_full = true;
  /// Clamp each predicted H̃₀ to [0, 1] and continue with the ε implied by the clamped value.
  bool clip_x0 = false;
};

/// H_t = √ᾱ_t·H₀ + √(1-ᾱ_t)·ε.
Image forward_sample(const Image& h0, int t, const Image& eps, const NoiseSchedule& sched);

struct Posterior {
  Image mean;
  double variance;
};
/// Mean and variance of q(H_{t-1} | H_t, H₀).
Posterior posterior_params(const Image& h_t, const Image& h0, int t, const NoiseSchedule& sched);

/// H̃₀ = (H_t - √(1-ᾱ_t)·ε̂)/√ᾱ_t.
Image predict_x0(const Image& h_t, const Image& eps_hat, int t, const NoiseSchedule& sched);

/// Deterministic part of the Markovian reverse update.
Image ddpm_mean(const Image& h_t, const Image& eps_hat, int t, const NoiseSchedule& sched);
/// Markovian reverse update; injects √β̃_t·ε* for t > 1 only.
Image ddpm_step(const Image& h_t, const Image& eps_hat, int t, const NoiseSchedule& sched, Rng& rng);

/// Deterministic part of the non-Markovian update from t_cur to t_prev (t_prev may be 0).
Image nm_mean(const Image& h_t, const Image& eps_hat, int t_cur, int t_prev, double sigma,
              const NoiseSchedule& sched);
Image nm_step(const Image& h_t, const Image& eps_hat, int t_cur, int t_prev, double sigma,
              const NoiseSchedule& sched, Rng& rng);

/// σ_t with σ_t² = β̃_t, the value at which the non-Markovian update becomes Markovian.
double sigma_ddpm(int t, const NoiseSchedule& sched);
/// Stride-aware generalization: equals sigma_ddpm(t) when t_prev = t - 1.
double sigma_ddpm(int t_cur, int t_prev, const NoiseSchedule& sched);

/// Uniformly spaced increasing subsequence of [1..T] of length S ending at T.
std::vector<int> subsequence(int steps, int length);

/// ε̂ = f(H_t, Ĥ*, t) for a batch; t holds one step per batch entry.
using Denoiser = std::function<Image(const Image& h_t, const Image& side, const std::vector<int>& t)>;

/// Mean squared error between ε and the denoiser output at the forward-sampled H_t.
double training_loss(const Denoiser& denoiser, const Image& h0, const Image& side,
                     const std::vector<int>& t, const Image& eps, const NoiseSchedule& sched);

/// Reverse generation from H_T ~ N(0, I) along the reversed step subsequence.
Image sample(const Denoiser& denoiser, const Image& side, const NoiseSchedule& sched,
             const SamplerSpec& spec, Rng& rng);
/// Same, starting from a caller-provided H_T.
Image sample_from(const Denoiser& denoiser, const Image& side, Image h_T,
                  const NoiseSchedule& sched, const SamplerSpec& spec, Rng& rng);

Image standard_normal_like(const Image& shape, Rng& rng);

}  // namespace nfce::diffusion
