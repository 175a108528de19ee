#pragma once

#include <cstddef>
#include <filesystem>

#include "nfce/harness/train.hpp"

namespace nfce::harness {

/// Scenario, network, schedule and dataset size of one experiment.
struct RunConfig {
  ScenarioConfig scenario = ScenarioConfig::toy();
  DenoiserConfig denoiser;
  ScheduleParams schedule;
  std::size_t count = 2800;

  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Reads a run configuration; an empty path yields the defaults.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace nfce::harness
