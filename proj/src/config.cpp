#include "atma/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "text_util.hpp"

namespace atma {

void SimulationConfig::validate() const {
  scenario.validate();
  road.validate();
  camera.validate();
  if (max_frames <= 0) throw ConfigError("max_frames must be positive");
  if (exit_tail_frames < 0) throw ConfigError("exit_tail_frames must be non-negative");
  if (!(screen.width_mm > 0.0 && screen.height_mm > 0.0 && screen.distance_mm > 0.0))
    throw ConfigError("screen geometry must be positive");
  if (!(ivt.velocity_threshold_dps > 0.0)) throw ConfigError("ivt.velocity_threshold must be positive");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

struct Field {
  std::function<void(SimulationConfig&, std::string_view)> set;
  std::function<std::string(const SimulationConfig&)> get;
};

double to_double(std::string_view v) {
  double out = 0.0;
  if (!text::parse_double(v, out)) throw ConfigError("expected a number, got '" + std::string(v) + "'");
  return out;
}

std::int64_t to_int(std::string_view v) {
  std::int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw ConfigError("expected an integer, got '" + std::string(v) + "'");
  return out;
}

Rect to_rect(std::string_view v) {
  std::vector<double> xs;
  for (auto part : text::split(v, ',')) xs.push_back(to_double(text::trim(part)));
  if (xs.size() != 4) throw ConfigError("expected x0, y0, x1, y1, got '" + std::string(v) + "'");
  Rect r{xs[0], xs[1], xs[2], xs[3]};
  if (!(r.x0 <= r.x1 && r.y0 <= r.y1)) throw ConfigError("area rectangle has negative extent");
  return r;
}

std::string rect_text(const Rect& r) {
  return text::fmt_g(r.x0) + ", " + text::fmt_g(r.y0) + ", " + text::fmt_g(r.x1) + ", " + text::fmt_g(r.y1);
}

template <typename Member>
Field number(Member member) {
  return {[member](SimulationConfig& c, std::string_view v) {
            auto& ref = std::invoke(member, c);
            using T = std::remove_reference_t<decltype(ref)>;
            if constexpr (std::is_floating_point_v<T>)
              ref = to_double(v);
            else
              ref = static_cast<T>(to_int(v));
          },
          [member](const SimulationConfig& c) {
            const auto& ref = std::invoke(member, c);
            using T = std::remove_cvref_t<decltype(ref)>;
            if constexpr (std::is_floating_point_v<T>)
              return text::fmt_g(ref);
            else
              return std::to_string(ref);
          }};
}

template <typename Member>
Field area(Member member) {
  return {[member](SimulationConfig& c, std::string_view v) { std::invoke(member, c) = to_rect(v); },
          [member](const SimulationConfig& c) { return rect_text(std::invoke(member, c)); }};
}

#define ATMA_FIELD(expr) [](auto& c) -> auto& { return c.expr; }

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"traffic_volume",
       {[](SimulationConfig& c, std::string_view v) { c.scenario.traffic_volume = parse_traffic_volume(std::string(v)); },
        [](const SimulationConfig& c) { return to_string(c.scenario.traffic_volume); }}},
      {"atma_gap", number(ATMA_FIELD(scenario.atma_gap_ft))},
      {"ego_start_behind_atma", number(ATMA_FIELD(scenario.ego_start_behind_atma_ft))},
      {"npv_mean_spacing", number(ATMA_FIELD(scenario.npv_mean_spacing_ft))},
      {"npv_spacing_jitter", number(ATMA_FIELD(scenario.npv_spacing_jitter))},
      {"npv_speed", number(ATMA_FIELD(scenario.npv_speed_mph))},
      {"atma_speed", number(ATMA_FIELD(scenario.atma_speed_mph))},
      {"ego_initial_speed", number(ATMA_FIELD(scenario.ego_initial_speed_mph))},
      {"seed", number(ATMA_FIELD(scenario.seed))},
      {"max_frames", number(ATMA_FIELD(max_frames))},
      {"exit_tail_frames", number(ATMA_FIELD(exit_tail_frames))},
      {"road.length", number(ATMA_FIELD(road.length_ft))},
      {"road.lanes_per_direction", number(ATMA_FIELD(road.lanes_per_direction))},
      {"road.lane_width", number(ATMA_FIELD(road.lane_width_ft))},
      {"road.speed_limit", number(ATMA_FIELD(road.speed_limit_mph))},
      {"road.exit_position", number(ATMA_FIELD(road.exit_position_ft))},
      {"dynamics.ego_accel_max", number(ATMA_FIELD(dynamics.ego_accel_max_mphps))},
      {"dynamics.ego_brake_max", number(ATMA_FIELD(dynamics.ego_brake_max_mphps))},
      {"dynamics.drag_coeff", number(ATMA_FIELD(dynamics.drag_coeff))},
      {"dynamics.lateral_rate", number(ATMA_FIELD(dynamics.lateral_rate_ftps))},
      {"dynamics.atma_max_speed", number(ATMA_FIELD(dynamics.atma_max_speed_mph))},
      {"dynamics.atma_accel", number(ATMA_FIELD(dynamics.atma_accel_mphps))},
      {"dynamics.atma_gap_gain", number(ATMA_FIELD(dynamics.atma_gap_gain))},
      {"dynamics.npv_accel", number(ATMA_FIELD(dynamics.npv_accel_mphps))},
      {"dynamics.npv_brake", number(ATMA_FIELD(dynamics.npv_brake_mphps))},
      {"dynamics.npv_min_gap", number(ATMA_FIELD(dynamics.npv_min_gap_ft))},
      {"dynamics.npv_time_headway", number(ATMA_FIELD(dynamics.npv_time_headway_s))},
      {"camera.eye_back", number(ATMA_FIELD(camera.eye_back_ft))},
      {"camera.eye_up", number(ATMA_FIELD(camera.eye_up_ft))},
      {"camera.horizontal_fov", number(ATMA_FIELD(camera.horizontal_fov_deg))},
      {"camera.aspect", number(ATMA_FIELD(camera.aspect))},
      {"camera.near", number(ATMA_FIELD(camera.near_ft))},
      {"area.speedometer", area(ATMA_FIELD(areas.speedometer))},
      {"area.tachometer", area(ATMA_FIELD(areas.tachometer))},
      {"area.left_mirror", area(ATMA_FIELD(areas.left_mirror))},
      {"area.right_mirror", area(ATMA_FIELD(areas.right_mirror))},
      {"area.rear_mirror", area(ATMA_FIELD(areas.rear_mirror))},
      {"screen.width_mm", number(ATMA_FIELD(screen.width_mm))},
      {"screen.height_mm", number(ATMA_FIELD(screen.height_mm))},
      {"screen.distance_mm", number(ATMA_FIELD(screen.distance_mm))},
      {"ivt.velocity_threshold", number(ATMA_FIELD(ivt.velocity_threshold_dps))},
      {"ivt.window_ms", number(ATMA_FIELD(ivt.window_ms))},
      {"ivt.min_fixation_ms", number(ATMA_FIELD(ivt.min_fixation_ms))},
  };
  return table;
}

#undef ATMA_FIELD

}  // namespace

SimulationConfig parse_simulation_config(std::string_view text) {
  SimulationConfig c;
  int line_no = 0;
  for (auto raw : text::split(text, '\n')) {
    ++line_no;
    auto line = text::trim(text::strip_comment(raw));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const auto key = std::string(text::trim(line.substr(0, eq)));
    const auto value = text::trim(line.substr(eq + 1));
    const auto& table = fields();
    auto it = std::find_if(table.begin(), table.end(), [&](const auto& f) { return f.first == key; });
    if (it == table.end()) throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    try {
      it->second.set(c, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

SimulationConfig load_simulation_config(const std::string& path) { return parse_simulation_config(read_text_file(path)); }

std::string to_config_text(const SimulationConfig& config) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(config) + "\n";
  return out;
}

}  // namespace atma
