#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "atma/session_io.hpp"

using namespace atma;
namespace fs = std::filesystem;

namespace {

const ScriptedRun& sample_run() {
  static const ScriptedRun run = [] {
    SimulationConfig cfg;
    cfg.scenario.seed = 5;
    cfg.max_frames = 400;
    return run_scripted_session(cfg,
                                DriverScript::parse("when frame >= 10 : cruise 30\nwhen frame >= 100 : brake 0.4\n"
                                                    "when frame >= 150 : cruise 20 lane left\n"),
                                GazeProfile::parse("noise_std = 0.01\ndwell road 500\ndwell follower 300\n"));
  }();
  return run;
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const auto nl = s.find('\n', pos);
    out.push_back(s.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) s += l + "\n";
  return s;
}

std::size_t error_line(const std::string& text) {
  try {
    session_from_string(text);
  } catch (const FormatError& e) {
    return e.line();
  }
  return 0;
}

// Numbers are written with nine significant digits.
bool close9(double a, double b) { return std::abs(a - b) <= 1e-8 * std::max(1.0, std::abs(a)); }

}  // namespace

TEST_CASE("session round trip is byte stable") {
  const auto s = session_from_run(sample_run());
  const auto text = session_to_string(s);
  const auto back = session_from_string(text);
  CHECK(session_to_string(back) == text);
  REQUIRE(back.frames.size() == s.frames.size());
  REQUIRE(back.gaze.size() == s.gaze.size());
  for (std::size_t k = 0; k < s.frames.size(); ++k) {
    const auto &a = s.frames[k], &b = back.frames[k];
    CHECK(close9(a.op.speed_mph, b.op.speed_mph));
    CHECK(close9(a.pos.p_l, b.pos.p_l));
    CHECK(close9(a.quads.lead_sign[5].x, b.quads.lead_sign[5].x));
    CHECK(a.quads.follower[0].visible == b.quads.follower[0].visible);
    CHECK(close9(a.lateral_ft, b.lateral_ft));
    CHECK(a.indicator_left == b.indicator_left);
  }
  for (std::size_t k = 0; k < s.gaze.size(); ++k) {
    CHECK(close9(s.gaze[k].gx, back.gaze[k].gx));
    REQUIRE(s.gaze[k].pupil_right_mm.has_value() == back.gaze[k].pupil_right_mm.has_value());
    if (s.gaze[k].pupil_right_mm) CHECK(close9(*s.gaze[k].pupil_right_mm, *back.gaze[k].pupil_right_mm));
  }
  CHECK(back.header.config.scenario.seed == 5);
  CHECK(back.header.channels == s.header.channels);
  CHECK(back.header.gaze_source == "synthetic");
}

TEST_CASE("every record is one JSON object per line") {
  const auto lines = lines_of(session_to_string(session_from_run(sample_run())));
  const auto header = nlohmann::json::parse(lines[0]);
  CHECK(header["type"] == "header");
  CHECK(header["format"] == kSessionFormat);
  CHECK(header["fps"] == 60);
  const auto frame = nlohmann::json::parse(lines[1]);
  CHECK(frame["type"] == "frame");
  CHECK(frame["O"].size() == 3);
  CHECK(frame["D"]["follower"].size() == 8);
  CHECK(nlohmann::json::parse(lines.back())["type"] == "gaze");
}

TEST_CASE("unknown fields and records survive a round trip") {
  auto lines = lines_of(session_to_string(session_from_run(sample_run())));
  lines[0].insert(lines[0].size() - 1, ",\"operator\":\"lab 3\"");
  lines[2].insert(lines[2].size() - 1, ",\"wheel\":{\"deg\":1.5}");
  lines.push_back(R"({"type":"marker","label":"horn"})");
  const auto text = join(lines);
  const auto s = session_from_string(text);
  REQUIRE(s.header.extras.size() == 1);
  CHECK(s.header.extras[0].first == "operator");
  REQUIRE(s.frame_extras.size() == s.frames.size());
  CHECK(s.frame_extras[1][0].first == "wheel");
  CHECK(s.frame_extras[0].empty());
  REQUIRE(s.unknown_records.size() == 1);
  CHECK(session_to_string(s) == text);
}

TEST_CASE("format errors name the offending line") {
  const auto lines = lines_of(session_to_string(session_from_run(sample_run())));
  auto edit = [&](std::size_t k, const std::string& l) {
    auto copy = lines;
    copy[k] = l;
    return join(copy);
  };
  CHECK(error_line(edit(3, "{not json")) == 4);
  CHECK(error_line(edit(3, R"({"type":"frame","i":2})")) == 4);
  auto bad_index = lines[4];
  bad_index.replace(bad_index.find("\"i\":3"), 5, "\"i\":9");
  CHECK(error_line(edit(4, bad_index)) == 5);
  auto v2 = lines[0];
  v2.replace(v2.find("\"1.0\""), 5, "\"2.0\"");
  CHECK(error_line(edit(0, v2)) == 1);
  auto fps = lines[0];
  fps.replace(fps.find("\"fps\":60"), 8, "\"fps\":30");
  CHECK(error_line(edit(0, fps)) == 1);
  auto seed = lines[0];
  seed.replace(seed.find("\"seed\":5"), 8, "\"seed\":6");
  CHECK(error_line(edit(0, seed)) == 1);
  CHECK(error_line(edit(0, lines[1])) == 1);  // frame before header
  auto t = lines[10];
  const auto tpos = t.find("\"t\":");
  t.replace(tpos, t.find(',', tpos) - tpos, "\"t\":170.5");
  CHECK(error_line(edit(10, t)) == 11);  // breaks the 60 fps spacing
  CHECK_THROWS_AS(session_from_string(""), FormatError);
  CHECK_THROWS_AS(session_from_string(R"({"type":"header","format":"other"})"), FormatError);
}

TEST_CASE("minor versions and unknown channels are accepted") {
  auto lines = lines_of(session_to_string(session_from_run(sample_run())));
  lines[0].replace(lines[0].find("\"1.0\""), 5, "\"1.3\"");
  lines[0].replace(lines[0].find("\"channels\":["), 12, "\"channels\":[\"heart_rate\",");
  const auto s = session_from_string(join(lines));
  CHECK(s.header.version == "1.3");
  CHECK(s.header.channels.gaze);
}

TEST_CASE("session files") {
  const auto dir = fs::temp_directory_path() / "atma-test-session-io";
  fs::create_directories(dir);
  const auto path = (dir / "s.ndjson").string();
  const auto s = session_from_run(sample_run());
  write_session(s, path);
  CHECK(session_to_string(read_session(path)) == session_to_string(s));
  CHECK_THROWS_AS(read_session((dir / "missing.ndjson").string()), IoError);
  CHECK_THROWS_AS(write_session(s, (dir / "no" / "such" / "dir.ndjson").string()), IoError);
  fs::remove_all(dir);
}

TEST_CASE("ledger round trip") {
  const auto& run = sample_run();
  const auto text = ledger_to_json(run.ledger);
  const auto back = ledger_from_json(text);
  CHECK(ledger_to_json(back) == text);
  REQUIRE(back.brakes.size() == run.ledger.brakes.size());
  CHECK(back.brakes[0].start == run.ledger.brakes[0].start);
  CHECK(back.lane_changes.size() == run.ledger.lane_changes.size());
  CHECK(back.dwells.size() == run.ledger.dwells.size());
  CHECK_THROWS_AS(ledger_from_json("[1,2"), FormatError);
}

TEST_CASE("simulation config text") {
  SimulationConfig c;
  c.scenario.traffic_volume = TrafficVolume::high;
  c.scenario.seed = 77;
  c.road.exit_position_ft = 9000;
  c.camera.horizontal_fov_deg = 75;
  c.ivt.velocity_threshold_dps = 45;
  const auto text = to_config_text(c);
  const auto back = parse_simulation_config(text);
  CHECK(to_config_text(back) == text);
  CHECK(back.scenario.traffic_volume == TrafficVolume::high);
  CHECK(back.road.exit_position_ft == 9000);
  CHECK(back.ivt.velocity_threshold_dps == 45);

  const auto loaded = load_simulation_config(std::string(ATMA_DATA_DIR) + "/configs/default.cfg");
  CHECK_NOTHROW(loaded.validate());

  CHECK_THROWS_AS(parse_simulation_config("bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_simulation_config("seed = x\n"), ConfigError);
  CHECK_THROWS_AS(parse_simulation_config("traffic_volume = jammed\n"), ConfigError);
  CHECK_THROWS_AS(parse_simulation_config("camera.aspect = -1\n"), ConfigError);
  try {
    parse_simulation_config("# c\n\nseed = 1\nroad.lanes = x\n");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
}

TEST_CASE("delimited parsing follows RFC 4180") {
  const auto rows = parse_delimited("a,b,c\r\n1,\"x, y\",\"say \"\"hi\"\"\"\n2,\"multi\nline\",\n");
  REQUIRE(rows.size() == 3);
  CHECK(rows[1][1] == "x, y");
  CHECK(rows[1][2] == "say \"hi\"");
  CHECK(rows[2][1] == "multi\nline");
  CHECK(rows[2][2].empty());
  CHECK(parse_delimited("a\tb\n", '\t')[0][1] == "b");
  CHECK_THROWS_AS(parse_delimited("\"open\n"), FormatError);
}

TEST_CASE("column maps") {
  const auto m = ColumnMap::parse("delimiter = tab\ntime = ts\ntime_unit = s\ngaze_x = gx\ngaze_y = gy\n"
                                  "gaze_scale_x = 1920\ngaze_scale_y = 1080\n");
  CHECK(m.delimiter == '\t');
  CHECK(m.time_scale_ms == 1000.0);
  CHECK(m.gaze_scale_x == 1920);
  CHECK_THROWS_AS(ColumnMap::parse("gaze_x = a\ngaze_y = b\n"), ConfigError);
  CHECK_THROWS_AS(ColumnMap::parse("time = t\ngaze_x = a\n"), ConfigError);
  CHECK_THROWS_AS(ColumnMap::parse("time = t\ntime_unit = fortnight\n"), ConfigError);
  CHECK_THROWS_AS(ColumnMap::parse("time = t\ncolour = red\n"), ConfigError);
}

TEST_CASE("external gaze exports") {
  const auto m = ColumnMap::parse("time = ts\ntime_unit = ms\ngaze_x = x\ngaze_y = y\ngaze_scale_x = 1920\n"
                                  "gaze_scale_y = 1080\npupil_left = pl\nvalid_left = vl\n");
  const auto s = ingest_external_text("ts,x,y,pl,vl\n33.4,960,540,3.1,1\n16.7,0,1080,3.0,1\n50,,,,0\n", m);
  CHECK(s.header.gaze_source == "external");
  CHECK(s.header.channels.gaze);
  CHECK_FALSE(s.header.channels.operation);
  CHECK(s.frames.empty());
  REQUIRE(s.gaze.size() == 3);
  CHECK(s.gaze[0].t_ms == doctest::Approx(16.7));  // sorted by time
  CHECK(s.gaze[0].gy == doctest::Approx(1.0));
  CHECK(s.gaze[1].gx == doctest::Approx(0.5));
  CHECK(s.gaze[1].valid_left);
  CHECK_FALSE(s.gaze[2].gaze_valid());
  CHECK_FALSE(s.gaze[2].pupil_left_mm.has_value());

  CHECK_THROWS_AS(ingest_external_text("ts,x\n1,2\n", m), FormatError);  // missing mapped column
  try {
    ingest_external_text("ts,x,y,pl,vl\n1,1,1,1,1\n2,1,1,1,1\n1,1,1,1,1\n", m);
    FAIL("duplicate accepted");
  } catch (const FormatError& e) {
    CHECK(e.line() == 4);
  }
  CHECK_THROWS_AS(ingest_external_text("ts,x,y,pl,vl\n1,abc,1,1,1\n", m), FormatError);
}

TEST_CASE("external exports with simulation channels") {
  const auto m = ColumnMap::parse("time = t\nbrake = b\naccel = a\nspeed = v\np_e = pe\np_f = pf\np_l = pl\n"
                                  "lateral = y\n");
  std::string csv = "t,b,a,v,pe,pf,pl,y\n";
  for (int k = 0; k < 5; ++k) csv += std::to_string(k * 1000.0 / 60.0) + ",0,0.5,30,1000,500,600,11.5\n";
  const auto s = ingest_external_text(csv, m);
  REQUIRE(s.frames.size() == 5);
  CHECK(s.header.channels.operation);
  CHECK(s.header.channels.positions);
  CHECK_FALSE(s.header.channels.quads);
  CHECK(s.frames[2].i == 2);
  CHECK(s.frames[2].lane == 1);
  CHECK(s.frames[2].lateral_offset_ft == doctest::Approx(-0.5));
  // Rows at 30 Hz are not frames at 60 fps.
  std::string slow = "t,b,a,v,pe,pf,pl,y\n0,0,0,0,0,0,0,0\n33.3,0,0,0,0,0,0,0\n";
  CHECK_THROWS_AS(ingest_external_text(slow, m), FormatError);
}
