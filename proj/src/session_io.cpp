#include "atma/session_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "text_util.hpp"

namespace atma {

using nlohmann::json;
// Parsed records keep member order so unknown fields re-emit in place.
using ordered = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Writing. Hand-rolled so that number formatting is fixed at nine
// significant digits and member order never changes.

struct Writer {
  std::string s;

  void raw(std::string_view v) { s += v; }
  void str(std::string_view v) { s += json(std::string(v)).dump(); }
  void num(double v) {
    if (!std::isfinite(v)) throw IoError("cannot serialize non-finite value");
    s += text::fmt9(v);
  }
  void integer(std::int64_t v) { s += std::to_string(v); }
  void boolean(bool v) { s += v ? "true" : "false"; }
  void key(std::string_view k) {
    if (s.back() != '{') s += ',';
    str(k);
    s += ':';
  }
  void opt(const std::optional<double>& v) {
    if (v)
      num(*v);
    else
      s += "null";
  }
  void extras(const Extras& ex) {
    for (const auto& [k, v] : ex) {
      key(k);
      s += v;
    }
  }
};

const char* channel_names[] = {"operation", "positions", "quads", "lateral", "gaze", "pupils"};

bool* channel_flag(Channels& c, std::size_t k) {
  bool* flags[] = {&c.operation, &c.positions, &c.quads, &c.lateral, &c.gaze, &c.pupils};
  return flags[k];
}

std::vector<std::pair<std::string, std::string>> config_entries(const SimulationConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  const auto rendered = to_config_text(config);
  for (auto line : text::split(rendered, '\n')) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) continue;
    out.emplace_back(std::string(text::trim(line.substr(0, eq))), std::string(text::trim(line.substr(eq + 1))));
  }
  return out;
}

void write_quad(Writer& w, const ScreenQuad& q) {
  w.raw("[");
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (k) w.raw(",");
    w.raw("[");
    w.num(q[k].x);
    w.raw(",");
    w.num(q[k].y);
    w.raw(q[k].visible ? ",1]" : ",0]");
  }
  w.raw("]");
}

void write_header(Writer& w, const SessionHeader& h) {
  w.raw("{");
  w.key("type");
  w.str("header");
  w.key("format");
  w.str(kSessionFormat);
  w.key("version");
  w.str(h.version);
  w.key("fps");
  w.integer(h.fps);
  w.key("seed");
  w.integer(static_cast<std::int64_t>(h.config.scenario.seed));
  w.key("gaze_source");
  w.str(h.gaze_source);
  w.key("channels");
  w.raw("[");
  Channels c = h.channels;
  bool first = true;
  for (std::size_t k = 0; k < std::size(channel_names); ++k) {
    if (!*channel_flag(c, k)) continue;
    if (!first) w.raw(",");
    w.str(channel_names[k]);
    first = false;
  }
  w.raw("]");
  w.key("config");
  w.raw("{");
  for (const auto& [k, v] : config_entries(h.config)) {
    w.key(k);
    w.str(v);
  }
  w.raw("}");
  w.extras(h.extras);
  w.raw("}\n");
}

void write_frame(Writer& w, const FrameRecord& f, const Extras* ex) {
  w.raw("{");
  w.key("type");
  w.str("frame");
  w.key("i");
  w.integer(f.i);
  w.key("t");
  w.num(f.time_ms);
  w.key("O");
  w.raw("[");
  w.num(f.op.brake);
  w.raw(",");
  w.num(f.op.accel);
  w.raw(",");
  w.num(f.op.speed_mph);
  w.raw("]");
  w.key("P");
  w.raw("[");
  w.num(f.pos.p_e);
  w.raw(",");
  w.num(f.pos.p_f);
  w.raw(",");
  w.num(f.pos.p_l);
  w.raw("]");
  w.key("D");
  w.raw("{");
  w.key("follower");
  write_quad(w, f.quads.follower);
  w.key("lead");
  write_quad(w, f.quads.lead);
  w.key("follower_sign");
  write_quad(w, f.quads.follower_sign);
  w.key("lead_sign");
  write_quad(w, f.quads.lead_sign);
  w.raw("}");
  w.key("lane");
  w.integer(f.lane);
  w.key("lat");
  w.raw("[");
  w.num(f.lateral_offset_ft);
  w.raw(",");
  w.num(f.lateral_ft);
  w.raw("]");
  w.key("steer");
  w.num(f.steer);
  w.key("ind");
  w.raw(f.indicator_left ? "[1," : "[0,");
  w.raw(f.indicator_right ? "1]" : "0]");
  if (ex) w.extras(*ex);
  w.raw("}\n");
}

void write_gaze(Writer& w, const GazeSample& g, const Extras* ex) {
  w.raw("{");
  w.key("type");
  w.str("gaze");
  w.key("t");
  w.num(g.t_ms);
  w.key("G");
  w.raw("[");
  w.num(g.gx);
  w.raw(",");
  w.num(g.gy);
  w.raw("]");
  w.key("U");
  w.raw("[");
  w.opt(g.pupil_left_mm);
  w.raw(",");
  w.opt(g.pupil_right_mm);
  w.raw("]");
  w.key("valid");
  w.raw(g.valid_left ? "[1," : "[0,");
  w.raw(g.valid_right ? "1]" : "0]");
  if (ex) w.extras(*ex);
  w.raw("}\n");
}

// ---------------------------------------------------------------------------
// Reading

struct LineReader {
  std::size_t line = 0;

  [[noreturn]] void fail(const std::string& msg) const { throw FormatError(msg, line); }

  const ordered& member(const ordered& obj, const char* name) const {
    auto it = obj.find(name);
    if (it == obj.end()) fail(std::string("missing field '") + name + "'");
    return *it;
  }
  double number(const ordered& v, const char* what) const {
    if (!v.is_number()) fail(std::string("'") + what + "' must be a number");
    return v.get<double>();
  }
  std::int64_t integer(const ordered& v, const char* what) const {
    if (!v.is_number_integer()) fail(std::string("'") + what + "' must be an integer");
    return v.get<std::int64_t>();
  }
  bool flag(const ordered& v, const char* what) const {
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)) return v.get<int>() == 1;
    fail(std::string("'") + what + "' must be 0 or 1");
  }
  const ordered& array(const ordered& v, std::size_t n, const char* what) const {
    if (!v.is_array() || v.size() != n) fail(std::string("'") + what + "' must be an array of " + std::to_string(n));
    return v;
  }
  std::optional<double> opt(const ordered& v, const char* what) const {
    if (v.is_null()) return std::nullopt;
    return number(v, what);
  }

  ScreenQuad quad(const ordered& v, const char* what) const {
    array(v, 8, what);
    ScreenQuad q{};
    for (std::size_t k = 0; k < 8; ++k) {
      const auto& vert = array(v[k], 3, what);
      q[k] = {number(vert[0], what), number(vert[1], what), flag(vert[2], what)};
    }
    return q;
  }
};

SessionHeader read_header(const LineReader& r, const ordered& obj) {
  SessionHeader h;
  const ordered& j = obj;
  const auto& format = r.member(j, "format");
  if (!format.is_string() || format.get<std::string>() != kSessionFormat) r.fail("not an atma session file");
  const auto& version = r.member(j, "version");
  if (!version.is_string()) r.fail("'version' must be a string");
  h.version = version.get<std::string>();
  if (!h.version.starts_with("1.")) r.fail("unsupported session version '" + h.version + "'; this reader handles 1.x");
  h.fps = static_cast<int>(r.integer(r.member(j, "fps"), "fps"));
  if (h.fps != kFps) r.fail("header fps is " + std::to_string(h.fps) + "; analysis requires 60 fps");
  const auto& src = r.member(j, "gaze_source");
  if (!src.is_string()) r.fail("'gaze_source' must be a string");
  h.gaze_source = src.get<std::string>();

  const auto& ch = r.member(j, "channels");
  if (!ch.is_array()) r.fail("'channels' must be an array");
  h.channels = {false, false, false, false, false, false};
  for (const auto& c : ch) {
    if (!c.is_string()) r.fail("channel names must be strings");
    const auto name = c.get<std::string>();
    auto it = std::find(std::begin(channel_names), std::end(channel_names), name);
    if (it == std::end(channel_names)) continue;  // newer channel, ignored
    *channel_flag(h.channels, static_cast<std::size_t>(it - std::begin(channel_names))) = true;
  }

  const auto& cfg = obj.at("config");
  if (!cfg.is_object()) r.fail("'config' must be an object");
  std::string text;
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    if (!it.value().is_string()) r.fail("config value '" + it.key() + "' must be a string");
    text += it.key() + " = " + it.value().get<std::string>() + "\n";
  }
  try {
    h.config = parse_simulation_config(text);
  } catch (const ConfigError& e) {
    r.fail(std::string("header config: ") + e.what());
  }
  const auto seed = r.integer(r.member(j, "seed"), "seed");
  if (static_cast<std::uint64_t>(seed) != h.config.scenario.seed) r.fail("header seed disagrees with config seed");

  for (auto it = obj.begin(); it != obj.end(); ++it) {
    static const char* known[] = {"type", "format", "version", "fps", "seed", "gaze_source", "channels", "config"};
    if (std::find(std::begin(known), std::end(known), it.key()) != std::end(known)) continue;
    h.extras.emplace_back(it.key(), it.value().dump());
  }
  return h;
}

Extras ordered_extras(const ordered& obj, std::initializer_list<const char*> known) {
  Extras out;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return it.key() == k; }) != known.end())
      continue;
    out.emplace_back(it.key(), it.value().dump());
  }
  return out;
}

FrameRecord read_frame(const LineReader& r, const ordered& j) {
  FrameRecord f;
  f.i = r.integer(r.member(j, "i"), "i");
  f.time_ms = r.number(r.member(j, "t"), "t");
  const auto& o = r.array(r.member(j, "O"), 3, "O");
  f.op = {r.number(o[0], "O"), r.number(o[1], "O"), r.number(o[2], "O")};
  const auto& p = r.array(r.member(j, "P"), 3, "P");
  f.pos = {r.number(p[0], "P"), r.number(p[1], "P"), r.number(p[2], "P")};
  const auto& d = r.member(j, "D");
  if (!d.is_object()) r.fail("'D' must be an object");
  f.quads.follower = r.quad(r.member(d, "follower"), "D.follower");
  f.quads.lead = r.quad(r.member(d, "lead"), "D.lead");
  f.quads.follower_sign = r.quad(r.member(d, "follower_sign"), "D.follower_sign");
  f.quads.lead_sign = r.quad(r.member(d, "lead_sign"), "D.lead_sign");
  f.lane = static_cast<int>(r.integer(r.member(j, "lane"), "lane"));
  const auto& lat = r.array(r.member(j, "lat"), 2, "lat");
  f.lateral_offset_ft = r.number(lat[0], "lat");
  f.lateral_ft = r.number(lat[1], "lat");
  f.steer = r.number(r.member(j, "steer"), "steer");
  const auto& ind = r.array(r.member(j, "ind"), 2, "ind");
  f.indicator_left = r.flag(ind[0], "ind");
  f.indicator_right = r.flag(ind[1], "ind");
  return f;
}

GazeSample read_gaze(const LineReader& r, const ordered& j) {
  GazeSample g;
  g.t_ms = r.number(r.member(j, "t"), "t");
  const auto& gg = r.array(r.member(j, "G"), 2, "G");
  g.gx = r.number(gg[0], "G");
  g.gy = r.number(gg[1], "G");
  const auto& u = r.array(r.member(j, "U"), 2, "U");
  g.pupil_left_mm = r.opt(u[0], "U");
  g.pupil_right_mm = r.opt(u[1], "U");
  const auto& v = r.array(r.member(j, "valid"), 2, "valid");
  g.valid_left = r.flag(v[0], "valid");
  g.valid_right = r.flag(v[1], "valid");
  return g;
}

void check_frame_spacing(const std::vector<FrameRecord>& frames, std::size_t line_of_first) {
  for (std::size_t k = 1; k < frames.size(); ++k) {
    const double dt = frames[k].time_ms - frames[k - 1].time_ms;
    if (std::abs(dt - kFramePeriodMs) > 0.01 * kFramePeriodMs)
      throw FormatError("frame " + std::to_string(frames[k].i) + " is " + text::fmt_g(dt) +
                            " ms after its predecessor; 60 fps requires " + text::fmt_g(kFramePeriodMs),
                        line_of_first + k);
  }
}

}  // namespace

SessionData session_from_run(const ScriptedRun& run) {
  SessionData s;
  s.header.config = run.config;
  const bool gaze = !run.gaze.empty();
  s.header.gaze_source = gaze ? "synthetic" : "none";
  s.header.channels.gaze = gaze;
  s.header.channels.pupils = gaze;
  s.frames = run.frames;
  s.gaze = run.gaze;
  return s;
}

std::string session_to_string(const SessionData& session) {
  if (!session.frame_extras.empty() && session.frame_extras.size() != session.frames.size())
    throw IoError("frame extras do not match the frame count");
  if (!session.gaze_extras.empty() && session.gaze_extras.size() != session.gaze.size())
    throw IoError("gaze extras do not match the gaze count");
  Writer w;
  w.s.reserve(session.frames.size() * 900 + session.gaze.size() * 100 + 4096);
  write_header(w, session.header);
  for (std::size_t k = 0; k < session.frames.size(); ++k)
    write_frame(w, session.frames[k], session.frame_extras.empty() ? nullptr : &session.frame_extras[k]);
  for (std::size_t k = 0; k < session.gaze.size(); ++k)
    write_gaze(w, session.gaze[k], session.gaze_extras.empty() ? nullptr : &session.gaze_extras[k]);
  for (const auto& rec : session.unknown_records) {
    w.raw(rec);
    w.raw("\n");
  }
  return std::move(w.s);
}

SessionData session_from_string(std::string_view text) {
  SessionData out;
  LineReader r;
  bool have_header = false;
  bool any_frame_extras = false, any_gaze_extras = false;
  std::size_t first_frame_line = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++r.line;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (text::trim(line).empty()) continue;

    ordered obj;
    try {
      obj = ordered::parse(line);
    } catch (const ordered::parse_error& e) {
      r.fail(std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) r.fail("record is not a JSON object");
    auto type_it = obj.find("type");
    if (type_it == obj.end() || !type_it->is_string()) r.fail("record has no 'type'");
    const auto type = type_it->get<std::string>();

    if (!have_header) {
      if (type != "header") r.fail("first record must be the header");
      out.header = read_header(r, obj);
      have_header = true;
      continue;
    }
    const ordered& j = obj;
    if (type == "frame") {
      auto f = read_frame(r, j);
      const auto expected = static_cast<std::int64_t>(out.frames.size());
      if (f.i != expected)
        r.fail("frame index " + std::to_string(f.i) + " breaks the sequence (expected " + std::to_string(expected) + ")");
      if (out.frames.empty()) first_frame_line = r.line;
      out.frames.push_back(f);
      out.frame_extras.push_back(ordered_extras(obj, {"type", "i", "t", "O", "P", "D", "lane", "lat", "steer", "ind"}));
      any_frame_extras = any_frame_extras || !out.frame_extras.back().empty();
    } else if (type == "gaze") {
      out.gaze.push_back(read_gaze(r, j));
      out.gaze_extras.push_back(ordered_extras(obj, {"type", "t", "G", "U", "valid"}));
      any_gaze_extras = any_gaze_extras || !out.gaze_extras.back().empty();
    } else if (type == "header") {
      r.fail("second header record");
    } else {
      out.unknown_records.push_back(obj.dump());
    }
  }
  if (!have_header) throw FormatError("empty session file: no header");
  if (!any_frame_extras) out.frame_extras.clear();
  if (!any_gaze_extras) out.gaze_extras.clear();
  check_frame_spacing(out.frames, first_frame_line);
  return out;
}

void write_session(const SessionData& session, const std::string& path) {
  const auto text = session_to_string(session);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write to '" + path + "' failed");
}

SessionData read_session(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return session_from_string(text);
}

// ---------------------------------------------------------------------------
// Ground-truth ledger

std::string ledger_to_json(const GroundTruthLedger& ledger) {
  json j;
  j["type"] = "ledger";
  j["brakes"] = json::array();
  for (const auto& b : ledger.brakes) j["brakes"].push_back({{"start", b.start}, {"end", b.end}, {"level", b.level}});
  j["lane_changes"] = json::array();
  for (const auto& c : ledger.lane_changes)
    j["lane_changes"].push_back({{"intent", c.intent},
                                 {"start", c.start},
                                 {"end", c.end},
                                 {"from", c.from},
                                 {"to", c.to},
                                 {"completed", c.completed}});
  j["dwells"] = json::array();
  for (const auto& d : ledger.dwells)
    j["dwells"].push_back({{"target", to_string(d.target)}, {"start", d.start}, {"end", d.end}});
  j["fired"] = json::array();
  for (const auto& f : ledger.fired) j["fired"].push_back({{"step", f.step}, {"frame", f.frame}});
  j["gaze_truth"] = json::array();
  for (const auto& g : ledger.gaze_truth)
    j["gaze_truth"].push_back({to_string(g.target), to_string(g.label), g.valid});
  return j.dump(1) + "\n";
}

GroundTruthLedger ledger_from_json(std::string_view text) {
  GroundTruthLedger l;
  try {
    const auto j = json::parse(text);
    for (const auto& b : j.at("brakes")) l.brakes.push_back({b.at("start"), b.at("end"), b.at("level")});
    for (const auto& c : j.at("lane_changes"))
      l.lane_changes.push_back({c.at("intent"), c.at("start"), c.at("end"), c.at("from"), c.at("to"), c.at("completed")});
    for (const auto& d : j.at("dwells"))
      l.dwells.push_back({parse_gaze_target(d.at("target").get<std::string>()), d.at("start"), d.at("end")});
    for (const auto& f : j.at("fired")) l.fired.push_back({f.at("step"), f.at("frame")});
    for (const auto& g : j.at("gaze_truth")) {
      const auto label = g.at(1).get<std::string>();
      const auto sl = label == "fixation"  ? SampleLabel::fixation_point
                      : label == "saccade" ? SampleLabel::saccade_point
                                           : SampleLabel::unclassified;
      l.gaze_truth.push_back({parse_gaze_target(g.at(0).get<std::string>()), sl, g.at(2).get<bool>()});
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("ledger: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("ledger: ") + e.what());
  }
  return l;
}

void write_ledger(const GroundTruthLedger& ledger, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << ledger_to_json(ledger);
  if (!out) throw IoError("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// External exports

ColumnMap ColumnMap::parse(std::string_view text) {
  ColumnMap m;
  std::map<std::string, std::string*> columns = {
      {"time", &m.time},           {"gaze_x", &m.gaze_x},         {"gaze_y", &m.gaze_y},
      {"pupil_left", &m.pupil_left}, {"pupil_right", &m.pupil_right}, {"valid_left", &m.valid_left},
      {"valid_right", &m.valid_right}, {"brake", &m.brake},        {"accel", &m.accel},
      {"speed", &m.speed},         {"p_e", &m.p_e},               {"p_f", &m.p_f},
      {"p_l", &m.p_l},             {"lateral", &m.lateral}};
  int line_no = 0;
  for (auto raw : text::split(text, '\n')) {
    ++line_no;
    const auto line = text::trim(text::strip_comment(raw));
    if (line.empty()) continue;
    auto fail = [&](const std::string& msg) {
      throw ConfigError("column map line " + std::to_string(line_no) + ": " + msg);
    };
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected key = value");
    const auto key = std::string(text::trim(line.substr(0, eq)));
    const auto value = std::string(text::trim(line.substr(eq + 1)));
    if (auto it = columns.find(key); it != columns.end()) {
      *it->second = value;
    } else if (key == "delimiter") {
      if (value == "tab")
        m.delimiter = '\t';
      else if (value.size() == 1)
        m.delimiter = value[0];
      else
        fail("delimiter must be one character or 'tab'");
    } else if (key == "time_unit") {
      if (value == "ms")
        m.time_scale_ms = 1.0;
      else if (value == "s")
        m.time_scale_ms = 1000.0;
      else if (value == "us")
        m.time_scale_ms = 0.001;
      else
        fail("time_unit must be ms, s or us");
    } else if (key == "gaze_scale_x" || key == "gaze_scale_y") {
      double v = 0.0;
      if (!text::parse_double(value, v) || !(v > 0.0)) fail(key + " must be a positive number");
      (key == "gaze_scale_x" ? m.gaze_scale_x : m.gaze_scale_y) = v;
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  if (m.time.empty()) throw ConfigError("column map must name the time column");
  if (m.gaze_x.empty() != m.gaze_y.empty()) throw ConfigError("column map must name both gaze_x and gaze_y");
  return m;
}

std::vector<std::vector<std::string>> parse_delimited(std::string_view text, char delim) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, field_started = false;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == delim) {
      end_field();
    } else if (c == '\n') {
      end_row();
    } else if (c == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') continue;
      end_row();
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw FormatError("unterminated quoted field");
  if (field_started || !row.empty()) end_row();
  return rows;
}

SessionData ingest_external_text(std::string_view text, const ColumnMap& map) {
  auto rows = parse_delimited(text, map.delimiter);
  if (rows.empty()) throw FormatError("external file is empty");
  const auto& head = rows.front();
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    if (name.empty()) return std::nullopt;
    auto it = std::find_if(head.begin(), head.end(), [&](const std::string& h) { return text::trim(h) == name; });
    if (it == head.end()) throw FormatError("mapped column '" + name + "' not found in the header row", 1);
    return static_cast<std::size_t>(it - head.begin());
  };
  const auto c_time = column(map.time);
  const auto c_gx = column(map.gaze_x), c_gy = column(map.gaze_y);
  const auto c_pl = column(map.pupil_left), c_pr = column(map.pupil_right);
  const auto c_vl = column(map.valid_left), c_vr = column(map.valid_right);
  const auto c_brake = column(map.brake), c_accel = column(map.accel), c_speed = column(map.speed);
  const auto c_pe = column(map.p_e), c_pf = column(map.p_f), c_pl_pos = column(map.p_l);
  const auto c_lat = column(map.lateral);

  SessionData out;
  auto& ch = out.header.channels;
  ch.gaze = c_gx.has_value();
  ch.pupils = c_pl.has_value() || c_pr.has_value();
  ch.operation = c_brake && c_accel && c_speed;
  ch.positions = c_pe && c_pf && c_pl_pos;
  ch.lateral = c_lat.has_value();
  ch.quads = false;
  const bool frames = ch.operation || ch.positions || ch.lateral;
  out.header.gaze_source = ch.gaze ? "external" : "none";

  struct Row {
    double t;
    std::size_t line;
    const std::vector<std::string>* cells;
  };
  std::vector<Row> data;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    double t = 0.0;
    if (rows[k].size() <= *c_time || !text::parse_double(rows[k][*c_time], t))
      throw FormatError("bad timestamp", k + 1);
    data.push_back({t * map.time_scale_ms, k + 1, &rows[k]});
  }
  std::stable_sort(data.begin(), data.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
  for (std::size_t k = 1; k < data.size(); ++k)
    if (data[k].t == data[k - 1].t)
      throw FormatError("duplicate timestamp " + text::fmt_g(data[k].t) + " ms", data[k].line);

  auto num = [&](const Row& r, const std::optional<std::size_t>& c, double fallback) -> std::optional<double> {
    if (!c) return fallback;
    if (r.cells->size() <= *c) throw FormatError("row too short", r.line);
    const auto cell = text::trim((*r.cells)[*c]);
    if (cell.empty()) return std::nullopt;
    double v = 0.0;
    if (!text::parse_double(cell, v)) throw FormatError("cannot parse '" + std::string(cell) + "'", r.line);
    return v;
  };

  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto& r = data[k];
    if (ch.gaze) {
      GazeSample g;
      g.t_ms = r.t;
      const auto x = num(r, c_gx, 0.0);
      const auto y = num(r, c_gy, 0.0);
      const bool have = x && y;
      g.gx = have ? *x / map.gaze_scale_x : 0.0;
      g.gy = have ? *y / map.gaze_scale_y : 0.0;
      if (c_pl) g.pupil_left_mm = num(r, c_pl, 0.0);
      if (c_pr) g.pupil_right_mm = num(r, c_pr, 0.0);
      g.valid_left = have && (c_vl ? num(r, c_vl, 0.0).value_or(0.0) != 0.0 : true);
      g.valid_right = have && (c_vr ? num(r, c_vr, 0.0).value_or(0.0) != 0.0 : true);
      out.gaze.push_back(g);
    }
    if (frames) {
      FrameRecord f;
      f.i = static_cast<std::int64_t>(k);
      f.time_ms = r.t;
      auto req = [&](const std::optional<std::size_t>& c) {
        auto v = num(r, c, 0.0);
        if (!v) throw FormatError("empty simulation channel value", r.line);
        return *v;
      };
      f.op = {req(c_brake), req(c_accel), req(c_speed)};
      f.pos = {req(c_pe), req(c_pf), req(c_pl_pos)};
      f.lateral_ft = req(c_lat);
      f.lane = out.header.config.road.nearest_lane(f.lateral_ft);
      f.lateral_offset_ft = f.lateral_ft - out.header.config.road.lane_center(f.lane);
      out.frames.push_back(f);
    }
  }
  if (!frames) {
    ch.operation = ch.positions = ch.lateral = false;
  }
  check_frame_spacing(out.frames, 2);
  return out;
}

SessionData ingest_external(const std::string& path, const ColumnMap& map) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return ingest_external_text(text, map);
}

}  // namespace atma
