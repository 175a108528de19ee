#include "nfce/diffusion.hpp"

#include <cmath>
#include <string>

namespace nfce::diffusion {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  detail::require(!betas_.empty(), "schedule needs at least one step");
  alpha_bars_.assign(betas_.size() + 1, 1.0);
  beta_tildes_.resize(betas_.size());
  for (std::size_t i = 0; i < betas_.size(); ++i) {
    detail::require(betas_[i] > 0.0 && betas_[i] < 1.0, "every beta must lie in (0, 1)");
    alpha_bars_[i + 1] = alpha_bars_[i] * (1.0 - betas_[i]);
    beta_tildes_[i] = (1.0 - alpha_bars_[i]) / (1.0 - alpha_bars_[i + 1]) * betas_[i];
  }
}

int NoiseSchedule::check(int t, int lo) const {
  if (t < lo || t > steps())
    throw InvalidArgument("diffusion step " + std::to_string(t) + " outside [" +
                          std::to_string(lo) + ", " + std::to_string(steps()) + "]");
  return t;
}

NoiseSchedule linear_schedule(int steps, double beta_1, double beta_T) {
  detail::require(steps >= 1, "schedule needs T >= 1");
  detail::require(beta_1 > 0.0 && beta_1 <= beta_T && beta_T < 1.0,
                  "schedule bounds must satisfy 0 < beta_1 <= beta_T < 1");
  std::vector<double> betas(steps);
  for (int i = 0; i < steps; ++i)
    betas[i] = steps == 1 ? beta_1 : beta_1 + (beta_T - beta_1) * i / (steps - 1);
  return NoiseSchedule(std::move(betas));
}

Image forward_sample(const Image& h0, int t, const Image& eps, const NoiseSchedule& sched) {
  require_same_shape(h0, eps, "forward_sample");
  detail::require(t >= 1, "forward_sample needs t >= 1");
  const double ab = sched.alpha_bar(t);
  Image out = Image::zeros_like(h0);
  out.data = std::sqrt(ab) * h0.data + std::sqrt(1.0 - ab) * eps.data;
  return out;
}

Posterior posterior_params(const Image& h_t, const Image& h0, int t, const NoiseSchedule& sched) {
  require_same_shape(h_t, h0, "posterior_params");
  detail::require(t >= 1 && t <= sched.steps(), "posterior_params: t out of range");
  const double ab = sched.alpha_bar(t);
  const double b = sched.beta(t);
  Posterior post{Image::zeros_like(h_t), sched.beta_tilde(t)};
  const Eigen::ArrayXd eps = (h_t.data - std::sqrt(ab) * h0.data) / std::sqrt(1.0 - ab);
  post.mean.data = (h_t.data - b / std::sqrt(1.0 - ab) * eps) / std::sqrt(sched.alpha(t));
  return post;
}

Image predict_x0(const Image& h_t, const Image& eps_hat, int t, const NoiseSchedule& sched) {
  require_same_shape(h_t, eps_hat, "predict_x0");
  const double ab = sched.alpha_bar(t);
  Image out = Image::zeros_like(h_t);
  out.data = (h_t.data - std::sqrt(1.0 - ab) * eps_hat.data) / std::sqrt(ab);
  return out;
}

Image standard_normal_like(const Image& shape, Rng& rng) {
  Image out = Image::zeros_like(shape);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data[i] = rng.normal();
  return out;
}

Image ddpm_mean(const Image& h_t, const Image& eps_hat, int t, const NoiseSchedule& sched) {
  require_same_shape(h_t, eps_hat, "ddpm_step");
  const double a = sched.alpha(t);
  const double ab = sched.alpha_bar(t);
  Image out = Image::zeros_like(h_t);
  out.data = (h_t.data - (1.0 - a) / std::sqrt(1.0 - ab) * eps_hat.data) / std::sqrt(a);
  return out;
}

Image ddpm_step(const Image& h_t, const Image& eps_hat, int t, const NoiseSchedule& sched, Rng& rng) {
  Image out = ddpm_mean(h_t, eps_hat, t, sched);
  if (t > 1) out.data += std::sqrt(sched.beta_tilde(t)) * standard_normal_like(h_t, rng).data;
  return out;
}

Image nm_mean(const Image& h_t, const Image& eps_hat, int t_cur, int t_prev, double sigma,
              const NoiseSchedule& sched) {
  require_same_shape(h_t, eps_hat, "nm_step");
  detail::require(t_prev >= 0 && t_prev < t_cur, "nm_step needs 0 <= t_prev < t_cur");
  detail::require(sigma >= 0.0, "sigma must be non-negative");
  const double ab_prev = sched.alpha_bar(t_prev);
  const double dir2 = 1.0 - ab_prev - sigma * sigma;
  // Relative slack absorbs the round-off of the σ² = 1 - ᾱ_prev boundary.
  if (dir2 < -1e-12 * (1.0 - ab_prev + 1e-300))
    throw InvalidArgument("nm_step: sigma^2 exceeds 1 - alpha_bar(t_prev)");
  const Image x0 = predict_x0(h_t, eps_hat, t_cur, sched);
  Image out = Image::zeros_like(h_t);
  out.data = std::sqrt(ab_prev) * x0.data + std::sqrt(std::max(dir2, 0.0)) * eps_hat.data;
  return out;
}

Image nm_step(const Image& h_t, const Image& eps_hat, int t_cur, int t_prev, double sigma,
              const NoiseSchedule& sched, Rng& rng) {
  Image out = nm_mean(h_t, eps_hat, t_cur, t_prev, sigma, sched);
  if (sigma > 0.0) out.data += sigma * standard_normal_like(h_t, rng).data;
  return out;
}

double sigma_ddpm(int t, const NoiseSchedule& sched) { return std::sqrt(sched.beta_tilde(t)); }

double sigma_ddpm(int t_cur, int t_prev, const NoiseSchedule& sched) {
  detail::require(t_prev >= 0 && t_prev < t_cur, "sigma_ddpm needs 0 <= t_prev < t_cur");
  const double ab = sched.alpha_bar(t_cur);
  const double ab_prev = sched.alpha_bar(t_prev);
  return std::sqrt((1.0 - ab_prev) / (1.0 - ab) * (1.0 - ab / ab_prev));
}

std::vector<int> subsequence(int steps, int length) {
  detail::require(steps >= 1, "subsequence needs T >= 1");
  detail::require(length >= 1 && length <= steps, "subsequence length must lie in [1, T]");
  std::vector<int> seq(length);
  for (int i = 1; i <= length; ++i)
    seq[i - 1] = static_cast<int>((static_cast<long long>(i) * steps) / length);
  return seq;
}

double training_loss(const Denoiser& denoiser, const Image& h0, const Image& side,
                     const std::vector<int>& t, const Image& eps, const NoiseSchedule& sched) {
  require_same_shape(h0, eps, "training_loss");
  require_same_shape(h0, side, "training_loss");
  detail::require_shape(static_cast<int>(t.size()) == h0.batch, "one step per batch entry");
  Image h_t = Image::zeros_like(h0);
  for (int b = 0; b < h0.batch; ++b) {
    const double ab = sched.alpha_bar(t[b]);
    detail::require(t[b] >= 1, "training steps start at 1");
    h_t.sample(b) = std::sqrt(ab) * h0.sample(b) + std::sqrt(1.0 - ab) * eps.sample(b);
  }
  const Image pred = denoiser(h_t, side, t);
  require_same_shape(pred, eps, "denoiser output");
  return (pred.data - eps.data).square().mean();
}

Image sample(const Denoiser& denoiser, const Image& side, const NoiseSchedule& sched,
             const SamplerSpec& spec, Rng& rng) {
  Image h_T = standard_normal_like(side, rng);
  return sample_from(denoiser, side, std::move(h_T), sched, spec, rng);
}

Image sample_from(const Denoiser& denoiser, const Image& side, Image h, const NoiseSchedule& sched,
                  const SamplerSpec& spec, Rng& rng) {
  require_same_shape(h, side, "sample");
  const auto& seq = spec.steps;
  detail::require(!seq.empty() && seq.back() == sched.steps(),
                  "sampler subsequence must end at T");
  for (std::size_t i = 1; i < seq.size(); ++i)
    detail::require(seq[i] > seq[i - 1] && seq[i - 1] >= 1, "sampler subsequence must increase");

  const bool markovian = spec.sigma == SigmaRule::ddpm && spec.markovian_when_full &&
                         static_cast<int>(seq.size()) == sched.steps();
  std::vector<int> tb(static_cast<std::size_t>(h.batch));
  for (std::size_t i = seq.size(); i-- > 0;) {
    const int t_cur = seq[i];
    const int t_prev = i == 0 ? 0 : seq[i - 1];
    std::fill(tb.begin(), tb.end(), t_cur);
    Image eps_hat = denoiser(h, side, tb);
    if (spec.clip_x0) {
      const double ab = sched.alpha_bar(t_cur);
      const Eigen::ArrayXd x0 = predict_x0(h, eps_hat, t_cur, sched).data.max(0.0).min(1.0);
      eps_hat.data = (h.data - std::sqrt(ab) * x0) / std::sqrt(1.0 - ab);
    }
    if (markovian) {
      h = ddpm_step(h, eps_hat, t_cur, sched, rng);
    } else {
      const double sigma = spec.sigma == SigmaRule::zero ? 0.0 : sigma_ddpm(t_cur, t_prev, sched);
      h = nm_step(h, eps_hat, t_cur, t_prev, sigma, sched, rng);
    }
  }
  return h;
}

}  // namespace nfce::diffusion
