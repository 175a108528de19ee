#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nfce/harness/train.hpp"

namespace nfce::harness {

enum class SweepAxis { snr, antennas, pilots, distance, sampling_steps };
enum class Method { somp, ls, genie_ls, gdm, nm_gdm };

SweepAxis parse_axis(const std::string& s);
Method parse_method(const std::string& s);
std::string to_string(SweepAxis a);
std::string to_string(Method m);
bool is_diffusion(Method m);

struct SweepPoint {
  double value = 0.0;
  Method method = Method::somp;
  double nmse_linear = 0.0;
  int trials = 0;
  double nmse_db() const { return to_db(nmse_linear); }
};

struct SweepResult {
  SweepAxis axis = SweepAxis::snr;
  std::vector<SweepPoint> points;
  /// Fraunhofer distance of the active configuration (m); reported on distance sweeps.
  std::optional<double> fraunhofer_m;
};

struct EvalOptions {
  SweepAxis axis = SweepAxis::snr;
  std::vector<double> grid;
  std::vector<Method> methods{Method::somp};
  int trials = 200;
  /// Sampling steps S of nm_gdm (overridden by the grid on a sampling_steps sweep).
  int steps = 50;
  diffusion::SigmaRule sigma = diffusion::SigmaRule::zero;
  /// Clamp predicted H̃₀ to the normalized range during gdm and nm_gdm sampling.
  bool clip_x0 = false;
  /// SNR used when the swept axis is not SNR.
  double snr_db = 5.0;
  /// Half-width of the distance window around each distance grid value (m).
  double distance_halfwidth = 0.0;
  /// Instances refined per denoiser call.
  int batch = 50;
  bool use_ema = true;
  std::uint64_t seed = 0;
};

/// Pre-drawn instance set; reused across methods so every method sees the same channels.
std::vector<Instance> draw_instances(const Scenario& sc, int trials, double snr_db,
                                     std::uint64_t seed);

/// Reverse diffusion conditioned on raw-unit side images; returns raw-unit estimates.
Image refine_images(const Image& side_raw, const TrainState& ckpt, const diffusion::SamplerSpec& spec,
                    bool use_ema, int batch, std::uint64_t seed);

/// gdm: full-length Markovian chain; nm_gdm: S uniformly spaced steps with the given σ rule.
diffusion::SamplerSpec make_sampler(Method m, int T, int steps, diffusion::SigmaRule sigma);

/// Refines the SOMP estimate of each instance by reverse diffusion; returns complex channels.
std::vector<CMatrix> refine(const std::vector<Instance>& instances, const TrainState& ckpt,
                            const diffusion::SamplerSpec& spec, bool use_ema, int batch,
                            std::uint64_t seed);

/// Mean NMSE of one method over a given instance set.
double method_nmse(Method m, const Scenario& sc, const std::vector<Instance>& instances,
                   const TrainState* ckpt, const EvalOptions& opts, int steps);

SweepResult evaluate_sweep(const ScenarioConfig& base, const EvalOptions& opts,
                           const TrainState* ckpt);

void write_csv(const SweepResult& r, const std::filesystem::path& path);
SweepResult read_csv(const std::filesystem::path& path);
/// Line plot of NMSE (dB) against the swept axis, one series per method.
void write_svg(const SweepResult& r, const std::filesystem::path& path);

}  // namespace nfce::harness
