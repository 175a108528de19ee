#include "nfce/harness/run_config.hpp"

#include "nfce/harness/io.hpp"

namespace nfce::harness {

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig rc;
  if (j.contains("scenario")) rc.scenario = ScenarioConfig::from_json(j["scenario"]);
  if (j.contains("denoiser")) rc.denoiser = DenoiserConfig::from_json(j["denoiser"]);
  if (j.contains("schedule")) {
    const auto& s = j["schedule"];
    rc.schedule.steps = s.value("steps", rc.schedule.steps);
    rc.schedule.beta_1 = s.value("beta_1", rc.schedule.beta_1);
    rc.schedule.beta_T = s.value("beta_T", rc.schedule.beta_T);
  }
  if (j.contains("dataset")) rc.count = j["dataset"].value("count", rc.count);
  rc.denoiser.validate();
  return rc;
}

nlohmann::json RunConfig::to_json() const {
  return {{"scenario", scenario.to_json()},
          {"denoiser", denoiser.to_json()},
          {"schedule", {{"steps", schedule.steps}, {"beta_1", schedule.beta_1}, {"beta_T", schedule.beta_T}}},
          {"dataset", {{"count", count}}}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (path.empty()) return RunConfig{};
  return RunConfig::from_json(io::read_json(path));
}

}  // namespace nfce::harness
