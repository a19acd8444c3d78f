#pragma once

#include <cstdint>

namespace atma {

// Simulation and eye tracker both run at 60 Hz.
inline constexpr int kFps = 60;
inline constexpr double kFramePeriodMs = 1000.0 / kFps;
inline constexpr double kHalfFramePeriodMs = kFramePeriodMs / 2.0;
inline constexpr double kDt = 1.0 / kFps;  // seconds

inline constexpr double kFeetPerMile = 5280.0;
inline constexpr double kFtPerSecPerMph = kFeetPerMile / 3600.0;  // 22/15

constexpr double mph_to_fps(double mph) { return mph * kFtPerSecPerMph; }
constexpr double fps_to_mph(double ftps) { return ftps / kFtPerSecPerMph; }

// Frame clock kept in thirds of a millisecond so that one frame is exactly
// 50 ticks and the frame spacing never accumulates rounding error.
class FrameClock {
 public:
  static constexpr std::int64_t kTicksPerMs = 3;
  static constexpr std::int64_t kTicksPerFrame = 50;

  static constexpr std::int64_t ticks(std::int64_t frame) { return frame * kTicksPerFrame; }
  static constexpr double time_ms(std::int64_t frame) {
    return static_cast<double>(ticks(frame)) / static_cast<double>(kTicksPerMs);
  }
};

}  // namespace atma
