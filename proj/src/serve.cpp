#include "atma/serve.hpp"

#include <chrono>
#include <filesystem>
#include <set>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

#include "text_util.hpp"

namespace atma {

using nlohmann::json;

namespace {

json config_echo(const SimulationConfig& config) {
  json out = json::object();
  const auto rendered = to_config_text(config);
  for (auto line : text::split(rendered, '\n')) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) continue;
    out[std::string(text::trim(line.substr(0, eq)))] = std::string(text::trim(line.substr(eq + 1)));
  }
  return out;
}

json quad_json(const ScreenQuad& q) {
  json out = json::array();
  for (const auto& v : q) out.push_back({v.x, v.y, v.visible ? 1 : 0});
  return out;
}

std::optional<std::string> expect_number(const json& msg, const char* key, double lo, double hi) {
  auto it = msg.find(key);
  if (it == msg.end()) return std::nullopt;
  if (!it->is_number()) return std::string("'") + key + "' must be a number";
  const double v = it->get<double>();
  if (!(v >= lo && v <= hi))
    return std::string("'") + key + "' must lie in [" + text::fmt_g(lo) + ", " + text::fmt_g(hi) + "]";
  return std::nullopt;
}

}  // namespace

LiveSession::LiveSession(SimulationConfig config)
    : config_(std::move(config)), world_(spawn_scenario(config_.scenario, config_.road, config_.dynamics)) {}

std::string LiveSession::hello_message() const {
  const auto& c = config_.camera;
  json areas = json::object();
  const std::pair<const char*, const Rect*> rects[] = {{"speedometer", &config_.areas.speedometer},
                                                       {"tachometer", &config_.areas.tachometer},
                                                       {"left_mirror", &config_.areas.left_mirror},
                                                       {"right_mirror", &config_.areas.right_mirror},
                                                       {"rear_mirror", &config_.areas.rear_mirror}};
  for (const auto& [name, r] : rects) areas[name] = {r->x0, r->y0, r->x1, r->y1};
  json hello{{"type", "hello"},
             {"protocol", kProtocolVersion},
             {"fps", kFps},
             {"traffic_volume", to_string(config_.scenario.traffic_volume)},
             {"config", config_echo(config_)},
             {"camera",
              {{"eye_back", c.eye_back_ft},
               {"eye_up", c.eye_up_ft},
               {"horizontal_fov", c.horizontal_fov_deg},
               {"aspect", c.aspect}}},
             {"areas", areas}};
  return hello.dump();
}

std::optional<std::string> LiveSession::receive(std::string_view text) {
  json msg;
  try {
    msg = json::parse(text);
  } catch (const json::parse_error&) {
    return "message is not valid JSON";
  }
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) return "message has no type";
  const auto type = msg["type"].get<std::string>();
  if (type == "input") {
    for (auto err : {expect_number(msg, "accel", 0.0, 1.0), expect_number(msg, "brake", 0.0, 1.0),
                     expect_number(msg, "steer", -1.0, 1.0)})
      if (err) return err;
    if (msg.contains("indicators")) {
      const auto& ind = msg["indicators"];
      if (!ind.is_object()) return "'indicators' must be an object";
      for (const char* side : {"left", "right"})
        if (ind.contains(side) && !ind[side].is_boolean()) return std::string("'indicators.") + side + "' must be a boolean";
    }
    if (msg.contains("seq") && !msg["seq"].is_number_integer()) return "'seq' must be an integer";
  } else if (type == "gaze") {
    if (!msg.contains("x") || !msg.contains("y")) return "gaze needs x and y";
    for (auto err : {expect_number(msg, "x", -1.0, 2.0), expect_number(msg, "y", -1.0, 2.0)})
      if (err) return err;
  } else {
    return "unknown message type '" + type + "'";
  }
  queue_.emplace_back(text);
  return std::nullopt;
}

std::string LiveSession::tick() {
  if (finished_) throw std::logic_error("tick after the session finished");
  for (const auto& text : queue_) {
    const auto msg = json::parse(text);
    if (msg["type"] == "input") {
      if (msg.contains("accel")) held_.accel = msg["accel"].get<double>();
      if (msg.contains("brake")) held_.brake = msg["brake"].get<double>();
      if (msg.contains("steer")) held_.steer = msg["steer"].get<double>();
      if (msg.contains("indicators")) {
        held_.indicator_left = msg["indicators"].value("left", held_.indicator_left);
        held_.indicator_right = msg["indicators"].value("right", held_.indicator_right);
      }
      if (msg.contains("seq")) seq_ = msg["seq"].get<std::int64_t>();
    } else {
      gaze_ = Point2{msg["x"].get<double>(), msg["y"].get<double>()};
    }
  }
  queue_.clear();

  const FrameRecord rec = make_frame_record(world_, held_, config_.camera);
  if (gaze_) {
    GazeSample g;
    g.t_ms = rec.time_ms;
    g.gx = gaze_->x;
    g.gy = gaze_->y;
    const bool on_screen = g.gx >= 0.0 && g.gx <= 1.0 && g.gy >= 0.0 && g.gy <= 1.0;
    g.valid_left = g.valid_right = on_screen;
    gaze_samples_.push_back(g);
  }
  frames_.push_back(rec);

  json state{{"type", "state"},
             {"frame", rec.i},
             {"time_ms", rec.time_ms},
             {"ego", {{"speed_mph", rec.op.speed_mph}, {"lane", rec.lane}, {"lateral_offset", rec.lateral_offset_ft}}},
             {"quads",
              {{"follower", quad_json(rec.quads.follower)},
               {"lead", quad_json(rec.quads.lead)},
               {"follower_sign", quad_json(rec.quads.follower_sign)},
               {"lead_sign", quad_json(rec.quads.lead_sign)}}},
             {"positions", {{"p_e", rec.pos.p_e}, {"p_f", rec.pos.p_f}, {"p_l", rec.pos.p_l}}},
             {"hud",
              {{"speed", rec.op.speed_mph},
               {"indicators", {{"left", rec.indicator_left}, {"right", rec.indicator_right}}}}},
             {"input_seq", seq_ ? json(*seq_) : json(nullptr)}};

  if (rec.pos.p_e == 0.0 && tail_ < 0) tail_ = config_.exit_tail_frames;
  if (tail_ == 0 || frames_recorded() >= config_.max_frames) finished_ = true;
  if (tail_ > 0) --tail_;
  if (!finished_) world_ = step_frame(world_, held_);
  return state.dump();
}

SessionData LiveSession::session() const {
  SessionData s;
  s.header.config = config_;
  s.header.gaze_source = gaze_samples_.empty() ? "none" : "mouse";
  s.header.channels.gaze = !gaze_samples_.empty();
  s.header.channels.pupils = false;
  s.frames = frames_;
  s.gaze = gaze_samples_;
  return s;
}

// ---------------------------------------------------------------------------
// Network side. Everything runs on one io_context thread, so connections
// never touch each other's state.

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

class Connection;

struct Server::Impl {
  ServeOptions options;
  net::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::set<std::shared_ptr<Connection>> live;
  mutable std::mutex written_mutex;
  std::vector<std::string> written;
  std::uint64_t next_id = 1;
  bool stopping = false;

  void accept();
  std::string session_path();
  void finished(const std::shared_ptr<Connection>& c, const std::string& path);
};

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(Server::Impl& server, tcp::socket socket)
      : server_(server), ws_(std::move(socket)), timer_(server.ioc), session_(server.options.config) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return self->finalize();
      self->ws_.text(true);
      self->send(self->session_.hello_message(), false);
      self->read();
      self->start_ = std::chrono::steady_clock::now();
      self->schedule();
    });
  }

  // Closes the socket and writes the session; safe to call repeatedly.
  void finalize() {
    if (done_) return;
    done_ = true;
    timer_.cancel();
    beast::error_code ignored;
    beast::get_lowest_layer(ws_).socket().close(ignored);
    std::string path;
    if (session_.frames_recorded() > 0) {
      path = server_.session_path();
      try {
        write_session(session_.session(), path);
      } catch (const std::exception&) {
        path.clear();
      }
    }
    server_.finished(shared_from_this(), path);
  }

 private:
  void schedule() {
    // Absolute deadline for the next frame: no drift from handler latency.
    const auto ticks = session_.frames_recorded() * FrameClock::kTicksPerFrame;
    const auto due = start_ + std::chrono::nanoseconds(ticks * 1'000'000 / 3);
    timer_.expires_at(due);
    timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (ec || self->done_) return;
      self->send(self->session_.tick(), true);
      if (self->session_.finished()) {
        self->send(json{{"type", "end"}, {"frames", self->session_.frames_recorded()}}.dump(), false);
        self->closing_ = true;
        self->flush();
        return;
      }
      self->schedule();
    });
  }

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->finalize();
      const auto text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      if (auto err = self->session_.receive(text)) self->send(json{{"type", "error"}, {"message", *err}}.dump(), false);
      self->read();
    });
  }

  // A newer state replaces an unsent one so a slow client never builds a
  // backlog; other messages are always delivered.
  void send(std::string msg, bool is_state) {
    if (done_) return;
    if (is_state && !outbox_.empty() && outbox_.back().second) outbox_.back().first = std::move(msg);
    else outbox_.emplace_back(std::move(msg), is_state);
    flush();
  }

  void flush() {
    if (writing_ || done_) return;
    if (outbox_.empty()) {
      if (closing_) {
        ws_.async_close(websocket::close_code::normal,
                        [self = shared_from_this()](beast::error_code) { self->finalize(); });
      }
      return;
    }
    writing_ = true;
    current_ = std::move(outbox_.front().first);
    outbox_.pop_front();
    ws_.async_write(net::buffer(current_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) return self->finalize();
      self->flush();
    });
  }

  Server::Impl& server_;
  websocket::stream<beast::tcp_stream> ws_;
  net::steady_timer timer_;
  beast::flat_buffer buffer_;
  LiveSession session_;
  std::chrono::steady_clock::time_point start_;
  std::deque<std::pair<std::string, bool>> outbox_;
  std::string current_;
  bool writing_ = false;
  bool closing_ = false;
  bool done_ = false;
};

void Server::Impl::accept() {
  acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
    if (ec || stopping) return;
    auto c = std::make_shared<Connection>(*this, std::move(socket));
    live.insert(c);
    c->start();
    accept();
  });
}

std::string Server::Impl::session_path() {
  namespace fs = std::filesystem;
  fs::create_directories(options.out_dir);
  while (true) {
    auto p = fs::path(options.out_dir) / ("live-" + std::to_string(next_id++) + ".ndjson");
    if (!fs::exists(p)) return p.string();
  }
}

void Server::Impl::finished(const std::shared_ptr<Connection>& c, const std::string& path) {
  live.erase(c);
  if (path.empty()) return;
  {
    std::lock_guard lock(written_mutex);
    written.push_back(path);
  }
  if (options.on_session_written) options.on_session_written(path);
}

Server::Server(ServeOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  beast::error_code ec;
  const auto address = net::ip::make_address(impl_->options.address, ec);
  if (ec) throw ConfigError("bad listen address '" + impl_->options.address + "'");
  const tcp::endpoint ep(address, impl_->options.port);
  impl_->acceptor.open(ep.protocol(), ec);
  if (!ec) impl_->acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) impl_->acceptor.bind(ep, ec);
  if (ec == net::error::address_in_use) throw PortBusyError("port " + std::to_string(impl_->options.port) + " is busy");
  if (!ec) impl_->acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) throw std::runtime_error("cannot listen on port " + std::to_string(impl_->options.port) + ": " + ec.message());
  impl_->accept();
}

Server::~Server() = default;

unsigned short Server::port() const { return impl_->acceptor.local_endpoint().port(); }

void Server::run() { impl_->ioc.run(); }

void Server::stop() {
  net::post(impl_->ioc, [impl = impl_.get()] {
    impl->stopping = true;
    beast::error_code ignored;
    impl->acceptor.close(ignored);
    auto open = impl->live;
    for (const auto& c : open) c->finalize();
    impl->ioc.stop();
  });
}

std::vector<std::string> Server::written() const {
  std::lock_guard lock(impl_->written_mutex);
  return impl_->written;
}

}  // namespace atma
