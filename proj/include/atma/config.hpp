#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "atma/gaze.hpp"
#include "atma/scenario.hpp"

namespace atma {

// Everything a run needs besides the driver script and gaze profile.
struct SimulationConfig {
  ScenarioConfig scenario;
  RoadSpec road;
  DynamicsSpec dynamics;
  CameraSpec camera;
  ScreenAreas areas;
  ScreenGeometry screen;
  IvtParams ivt;
  std::int64_t max_frames = 10800;     // 3 minutes
  std::int64_t exit_tail_frames = 30;  // frames recorded after reaching the exit

  void validate() const;
};

// Parses `key = value` lines; '#' starts a comment. Keys are the field names
// of ScenarioConfig at top level plus dotted groups (road., camera., area.,
// screen., ivt., dynamics.). Unknown keys and malformed values throw
// ConfigError naming the line.
SimulationConfig parse_simulation_config(std::string_view text);
SimulationConfig load_simulation_config(const std::string& path);

// Canonical key = value rendering; parse_simulation_config() inverts it.
std::string to_config_text(const SimulationConfig& config);

std::string read_text_file(const std::string& path);

}  // namespace atma
