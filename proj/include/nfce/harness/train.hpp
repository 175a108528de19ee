#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "nfce/denoiser.hpp"
#include "nfce/diffusion.hpp"
#include "nfce/harness/dataset.hpp"

namespace nfce::harness {

struct ScheduleParams {
  int steps = 1000;
  double beta_1 = 1e-4;
  double beta_T = 0.02;

  diffusion::NoiseSchedule build() const { return diffusion::linear_schedule(steps, beta_1, beta_T); }
};

struct TrainOptions {
  double lr = 1e-4;
  int batch = 8;
  int iters = 1000;
  double ema = 0.9999;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  /// Progress callback every log_every iterations (0 disables).
  int log_every = 0;
  std::function<void(int iter, double loss)> on_log;
};

struct TrainState {
  DenoiserConfig denoiser;
  ScheduleParams schedule;
  ParameterStore<float> params;
  ParameterStore<float> ema;
  ParameterStore<float> adam_m;
  ParameterStore<float> adam_v;
  std::int64_t step = 0;
  Normalization norm;
  ScenarioConfig scenario;
  std::vector<double> loss_history;
};

/// Fresh state with initialized parameters, zero moments, and EMA equal to the parameters.
TrainState init_train_state(const DenoiserConfig& cfg, const ScheduleParams& sched,
                            const Dataset& ds, std::uint64_t seed);

/// Runs opts.iters iterations of noise-prediction training on the normalized training split.
void train(TrainState& state, const Dataset& ds, const TrainOptions& opts);

/// Training-mode loss of one batch, on normalized images; used by sanity checks.
double batch_loss(const UNetDenoiser<float>& net, const ParameterStore<float>& params,
                  const diffusion::NoiseSchedule& sched, const Image& side, const Image& target,
                  const std::vector<int>& t, const Image& eps);

void save_checkpoint(const TrainState& state, const std::filesystem::path& dir);
TrainState load_checkpoint(const std::filesystem::path& dir);

}  // namespace nfce::harness
