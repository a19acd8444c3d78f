#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "atma/agents.hpp"
#include "atma/config.hpp"
#include "atma/gaze.hpp"
#include "atma/session.hpp"

namespace atma {

inline constexpr const char* kSessionFormat = "atma-session";
inline constexpr const char* kSessionVersion = "1.0";

class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& message, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Which channels a session actually carries. Simulated sessions carry all of
// them; external exports often carry only some.
struct Channels {
  bool operation = true;  // brake, accelerator, speed
  bool positions = true;  // p_e, p_f, p_l
  bool quads = true;
  bool lateral = true;
  bool gaze = true;
  bool pupils = true;

  friend bool operator==(const Channels&, const Channels&) = default;
};

// Unknown JSON members of a record, kept as (name, compact JSON) in file order.
using Extras = std::vector<std::pair<std::string, std::string>>;

struct SessionHeader {
  std::string version = kSessionVersion;
  int fps = 60;
  SimulationConfig config;
  std::string gaze_source = "synthetic";  // synthetic, mouse, tracker, external, none
  Channels channels;
  Extras extras;
};

struct SessionData {
  SessionHeader header;
  std::vector<FrameRecord> frames;
  std::vector<GazeSample> gaze;
  // Parallel to frames / gaze when any record had unknown members, else empty.
  std::vector<Extras> frame_extras;
  std::vector<Extras> gaze_extras;
  // Whole records of unknown type, re-emitted verbatim (compact) at the end.
  std::vector<std::string> unknown_records;
};

// Session data for a finished scripted run. Gaze channels are marked present
// only when the run synthesized gaze.
SessionData session_from_run(const ScriptedRun& run);

// Newline-delimited JSON: one header line, then frame lines, then gaze lines.
std::string session_to_string(const SessionData& session);
SessionData session_from_string(std::string_view text);

void write_session(const SessionData& session, const std::string& path);
SessionData read_session(const std::string& path);

std::string ledger_to_json(const GroundTruthLedger& ledger);
GroundTruthLedger ledger_from_json(std::string_view text);
void write_ledger(const GroundTruthLedger& ledger, const std::string& path);

// Column map for delimited exports. Text form, `key = value` per line:
//   delimiter = ,            (single character, or "tab")
//   time = <column>          (required)
//   time_unit = ms | s | us
//   gaze_x, gaze_y = <column>
//   gaze_scale_x, gaze_scale_y = <number>   divide raw gaze by this (pixels)
//   pupil_left, pupil_right, valid_left, valid_right = <column>
//   brake, accel, speed, p_e, p_f, p_l, lateral = <column>
// Columns are named by header text. A mapped column missing from the file is
// an error; unmapped channels are reported absent.
struct ColumnMap {
  char delimiter = ',';
  std::string time;
  double time_scale_ms = 1.0;
  std::string gaze_x, gaze_y;
  double gaze_scale_x = 1.0, gaze_scale_y = 1.0;
  std::string pupil_left, pupil_right, valid_left, valid_right;
  std::string brake, accel, speed, p_e, p_f, p_l, lateral;

  static ColumnMap parse(std::string_view text);
};

// RFC 4180 records (quoted fields, doubled quotes, embedded newlines).
std::vector<std::vector<std::string>> parse_delimited(std::string_view text, char delimiter = ',');

// Rows are sorted by timestamp; duplicate timestamps are rejected. With
// simulation channels mapped, each row also becomes a frame numbered from 0.
SessionData ingest_external(const std::string& path, const ColumnMap& map);
SessionData ingest_external_text(std::string_view text, const ColumnMap& map);

}  // namespace atma
