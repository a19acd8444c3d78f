#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "atma/config.hpp"
#include "atma/session_io.hpp"

namespace atma {

inline constexpr int kProtocolVersion = 1;

class PortBusyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One live drive, independent of the network. Messages received between two
// ticks are applied, in order, at the next tick; inputs and gaze hold their
// last value when nothing new arrives.
//
// Client to server:
//   {"type":"input","accel":0..1,"brake":0..1,"steer":-1..1,
//    "indicators":{"left":bool,"right":bool},"seq":n}   (every field optional)
//   {"type":"gaze","x":0..1,"y":0..1}
// Server to client:
//   {"type":"hello","protocol":1,"fps":60,"config":{...},...}  once
//   {"type":"state","frame":i,"time_ms":t,"ego":{...},"quads":{...},
//    "positions":{...},"hud":{...},"input_seq":n}              every frame
//   {"type":"error","message":...}                             bad message
//   {"type":"end","frames":n}                                  session over
class LiveSession {
 public:
  explicit LiveSession(SimulationConfig config);

  std::string hello_message() const;

  // Validates and queues a client message; returns an error text when the
  // message is rejected.
  std::optional<std::string> receive(std::string_view text);

  // Applies queued messages, records the current frame and advances the
  // world one step. Returns the state message of the recorded frame.
  std::string tick();

  bool finished() const { return finished_; }
  std::int64_t frames_recorded() const { return static_cast<std::int64_t>(frames_.size()); }
  const EgoInputs& held_inputs() const { return held_; }

  SessionData session() const;

 private:
  SimulationConfig config_;
  WorldState world_;
  EgoInputs held_;
  std::optional<std::int64_t> seq_;
  std::optional<Point2> gaze_;
  std::deque<std::string> queue_;
  std::vector<FrameRecord> frames_;
  std::vector<GazeSample> gaze_samples_;
  std::int64_t tail_ = -1;
  bool finished_ = false;
};

struct ServeOptions {
  SimulationConfig config;
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
  std::string out_dir = ".";
  std::function<void(const std::string& path)> on_session_written;
};

// WebSocket bridge: one LiveSession per connection, stepped at 60 Hz from
// absolute deadlines. The session file is written when the client leaves.
class Server {
 public:
  explicit Server(ServeOptions options);  // binds; throws PortBusyError
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  unsigned short port() const;
  void run();   // blocks until stop()
  void stop();  // thread-safe; finalizes open sessions
  std::vector<std::string> written() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace atma
