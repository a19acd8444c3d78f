#include <doctest.h>

#include <filesystem>
#include <thread>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "atma/report.hpp"
#include "atma/serve.hpp"
#include "support/ws_client.hpp"

using namespace atma;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("atma_serve_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  return d;
}

// Server running on its own thread, stopped on scope exit.
struct Running {
  Server server;
  std::thread thread;
  explicit Running(ServeOptions o) : server(std::move(o)), thread([this] { server.run(); }) {}
  ~Running() {
    server.stop();
    thread.join();
  }
};

}  // namespace

TEST_CASE("hello describes the session") {
  LiveSession s({});
  const auto h = json::parse(s.hello_message());
  CHECK(h["type"] == "hello");
  CHECK(h["protocol"] == kProtocolVersion);
  CHECK(h["fps"] == 60);
  CHECK(h["traffic_volume"] == "low");
  CHECK(h["config"].is_object());
  CHECK(h["areas"]["speedometer"].size() == 4);
  CHECK(h["camera"]["horizontal_fov"].is_number());
}

TEST_CASE("malformed messages are rejected") {
  LiveSession s({});
  CHECK(s.receive("{"));
  CHECK(s.receive("[1,2]"));
  CHECK(s.receive(R"({"type":"honk"})"));
  CHECK(s.receive(R"({"type":"input","accel":1.5})"));
  CHECK(s.receive(R"({"type":"input","steer":"left"})"));
  CHECK(s.receive(R"({"type":"input","indicators":{"left":1}})"));
  CHECK(s.receive(R"({"type":"input","seq":1.5})"));
  CHECK(s.receive(R"({"type":"gaze","x":0.5})"));
  CHECK_FALSE(s.receive(R"({"type":"input"})"));
  CHECK_FALSE(s.receive(R"({"type":"gaze","x":0.5,"y":0.5})"));
  // Rejected messages leave the held inputs alone.
  s.tick();
  CHECK(s.held_inputs().accel == 0.0);
}

TEST_CASE("inputs hold until replaced") {
  LiveSession s({});
  auto st = json::parse(s.tick());
  CHECK(st["frame"] == 0);
  CHECK(st["input_seq"].is_null());
  REQUIRE_FALSE(s.receive(R"({"type":"input","accel":0.6,"indicators":{"left":true},"seq":7})"));
  REQUIRE_FALSE(s.receive(R"({"type":"input","brake":0.0,"seq":8})"));
  st = json::parse(s.tick());
  CHECK(st["frame"] == 1);
  CHECK(st["input_seq"] == 8);
  CHECK(st["hud"]["indicators"]["left"] == true);
  CHECK(s.held_inputs().accel == 0.6);
  double speed = st["ego"]["speed_mph"];
  for (int f = 2; f < 30; ++f) {
    st = json::parse(s.tick());
    CHECK(st["frame"] == f);
    CHECK(st["time_ms"].get<double>() == doctest::Approx(f * kFramePeriodMs));
    CHECK(st["ego"]["speed_mph"].get<double>() > speed);
    speed = st["ego"]["speed_mph"];
    CHECK(st["input_seq"] == 8);
  }
  CHECK(s.held_inputs().accel == 0.6);
  CHECK(s.held_inputs().indicator_left);
  CHECK(s.frames_recorded() == 30);
  CHECK(st["quads"]["follower"].size() == 8);
  CHECK(st["positions"]["p_f"].is_number());
}

TEST_CASE("gaze is recorded once it arrives") {
  LiveSession s({});
  s.tick();
  REQUIRE_FALSE(s.receive(R"({"type":"gaze","x":0.25,"y":0.75})"));
  s.tick();
  REQUIRE_FALSE(s.receive(R"({"type":"gaze","x":1.5,"y":0.5})"));
  s.tick();
  s.tick();
  const auto d = s.session();
  CHECK(d.header.gaze_source == "mouse");
  CHECK(d.header.channels.gaze);
  CHECK_FALSE(d.header.channels.pupils);
  REQUIRE(d.gaze.size() == 3);
  CHECK(d.gaze[0].t_ms == doctest::Approx(kFramePeriodMs));
  CHECK(d.gaze[0].gx == 0.25);
  CHECK(d.gaze[0].gaze_valid());
  CHECK_FALSE(d.gaze[1].gaze_valid());  // off screen
  CHECK(d.gaze[2].gx == 1.5);            // held
}

TEST_CASE("a live drive ends after the exit and analyzes") {
  SimulationConfig cfg;
  LiveSession s(cfg);
  s.tick();  // the recording starts at the first accelerator change
  REQUIRE_FALSE(s.receive(R"({"type":"input","accel":1,"steer":-1})"));
  REQUIRE_FALSE(s.receive(R"({"type":"gaze","x":0.5,"y":0.45})"));
  std::int64_t frames = 1;
  while (!s.finished() && frames < cfg.max_frames) {
    const auto st = json::parse(s.tick());
    ++frames;
    if (frames == 600) REQUIRE_FALSE(s.receive(R"({"type":"input","steer":0})"));
    if (s.finished()) CHECK(st["positions"]["p_e"] == 0.0);
  }
  REQUIRE(s.finished());
  CHECK_THROWS_AS(s.tick(), std::logic_error);
  const auto d = s.session();
  CHECK(static_cast<std::int64_t>(d.frames.size()) == s.frames_recorded());
  const auto a = analyze_session(session_from_string(session_to_string(d)), "live");
  REQUIRE_FALSE(a.error);
  CHECK(a.absent.contains("pupils"));
  CHECK(check_invariants(a).empty());
}

TEST_CASE("websocket bridge") {
  const auto dir = temp_dir("ws");
  ServeOptions o;
  o.port = 0;
  o.out_dir = dir.string();
  Running r(o);
  const auto port = r.server.port();
  CHECK(port != 0);
  CHECK_THROWS_AS(([&] {
                    ServeOptions same = o;
                    same.port = port;
                    Server second(same);
                  }()),
                  PortBusyError);

  {
    wsclient::Client a("127.0.0.1", port), b("127.0.0.1", port);
    const auto hello = a.receive();
    CHECK(hello["type"] == "hello");
    CHECK(b.receive()["type"] == "hello");
    a.send_raw("nonsense");
    CHECK(a.receive_type("error")["message"] == "message is not valid JSON");
    a.send(json{{"type", "input"}, {"accel", 1.0}, {"seq", 3}});
    json st;
    do st = a.receive_type("state");
    while (st["input_seq"] != 3);
    // The other client's drive is untouched.
    const auto other = b.receive_type("state");
    CHECK(other["input_seq"].is_null());
    CHECK(other["ego"]["speed_mph"] == 0.0);
    b.send(json{{"type", "input"}, {"accel", 0.5}, {"seq", 1}});
    do st = b.receive_type("state");
    while (st["input_seq"] != 1);
    a.close();
    b.close();
  }
  // Both sessions are written once the clients leave.
  for (int k = 0; k < 200 && r.server.written().size() < 2; ++k)
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  const auto written = r.server.written();
  REQUIRE(written.size() == 2);
  for (const auto& p : written) {
    CHECK(fs::exists(p));
    const auto d = read_session(p);
    CHECK_FALSE(d.frames.empty());
    CHECK_FALSE(analyze_session(d, "ws").error);
  }
  fs::remove_all(dir);
}

TEST_CASE("the bridge paces frames at 60 Hz") {
  ServeOptions o;
  o.port = 0;
  o.out_dir = temp_dir("pace").string();
  Running r(o);
  wsclient::Client c("127.0.0.1", r.server.port());
  c.receive_type("hello");
  const auto first = c.receive_type("state");
  const auto t0 = std::chrono::steady_clock::now();
  json last;
  do last = c.receive_type("state");
  while (last["frame"].get<int>() - first["frame"].get<int>() < 60);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(elapsed == doctest::Approx(1.0).epsilon(0.1));
  c.close();
  fs::remove_all(o.out_dir);
}
