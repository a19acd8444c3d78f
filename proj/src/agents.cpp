#include "atma/agents.hpp"

#include <algorithm>
#include <cmath>

#include "text_util.hpp"

namespace atma {

Observation observe(const WorldState& world) {
  const auto& ego = world.ego();
  return {world.frame, compute_positions(world), ego.speed_mph, ego.lane};
}

bool Trigger::eval(const Observation& obs) const {
  double x = 0.0;
  switch (var) {
    case TriggerVar::frame: x = static_cast<double>(obs.frame); break;
    case TriggerVar::time_s: x = FrameClock::time_ms(obs.frame) / 1000.0; break;
    case TriggerVar::p_e: x = obs.pos.p_e; break;
    case TriggerVar::p_f: x = obs.pos.p_f; break;
    case TriggerVar::p_l: x = obs.pos.p_l; break;
    case TriggerVar::speed: x = obs.speed_mph; break;
  }
  switch (op) {
    case CompareOp::lt: return x < value;
    case CompareOp::le: return x <= value;
    case CompareOp::gt: return x > value;
    case CompareOp::ge: return x >= value;
  }
  return false;
}

namespace {

const char* var_name(TriggerVar v) {
  switch (v) {
    case TriggerVar::frame: return "frame";
    case TriggerVar::time_s: return "time";
    case TriggerVar::p_e: return "p_e";
    case TriggerVar::p_f: return "p_f";
    case TriggerVar::p_l: return "p_l";
    case TriggerVar::speed: return "speed";
  }
  return "frame";
}

const char* op_name(CompareOp op) {
  switch (op) {
    case CompareOp::lt: return "<";
    case CompareOp::le: return "<=";
    case CompareOp::gt: return ">";
    case CompareOp::ge: return ">=";
  }
  return ">=";
}

[[noreturn]] void script_error(int line, const std::string& msg) {
  throw ConfigError("script line " + std::to_string(line) + ": " + msg);
}

double unit_value(std::string_view tok, int line) {
  double v = 0.0;
  if (!text::parse_double(tok, v)) script_error(line, "expected a number, got '" + std::string(tok) + "'");
  return v;
}

}  // namespace

void DriverScript::validate() const {
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const auto& a = steps[k].action;
    auto in_unit = [](const std::optional<double>& v) { return !v || (*v >= 0.0 && *v <= 1.0); };
    if (!in_unit(a.accel) || !in_unit(a.brake))
      throw ConfigError("script step " + std::to_string(k + 1) + ": pedal values must lie in [0, 1]");
    if (a.cruise_mph && *a.cruise_mph < 0.0)
      throw ConfigError("script step " + std::to_string(k + 1) + ": cruise speed must be non-negative");
  }
}

DriverScript DriverScript::parse(std::string_view source) {
  DriverScript script;
  int line_no = 0;
  for (auto raw : text::split(source, '\n')) {
    ++line_no;
    auto line = text::trim(text::strip_comment(raw));
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) script_error(line_no, "expected 'when <condition> : <actions>'");
    const auto cond = text::split_ws(line.substr(0, colon));
    if (cond.size() != 4 || cond[0] != "when") script_error(line_no, "expected 'when <var> <op> <value>'");

    ScriptStep step;
    const std::pair<std::string_view, TriggerVar> vars[] = {{"frame", TriggerVar::frame}, {"time", TriggerVar::time_s},
                                                            {"p_e", TriggerVar::p_e},     {"p_f", TriggerVar::p_f},
                                                            {"p_l", TriggerVar::p_l},     {"speed", TriggerVar::speed}};
    auto vit = std::find_if(std::begin(vars), std::end(vars), [&](const auto& v) { return v.first == cond[1]; });
    if (vit == std::end(vars)) script_error(line_no, "unknown trigger variable '" + std::string(cond[1]) + "'");
    step.trigger.var = vit->second;
    const std::pair<std::string_view, CompareOp> ops[] = {
        {"<", CompareOp::lt}, {"<=", CompareOp::le}, {">", CompareOp::gt}, {">=", CompareOp::ge}};
    auto oit = std::find_if(std::begin(ops), std::end(ops), [&](const auto& o) { return o.first == cond[2]; });
    if (oit == std::end(ops)) script_error(line_no, "unknown comparison '" + std::string(cond[2]) + "'");
    step.trigger.op = oit->second;
    step.trigger.value = unit_value(cond[3], line_no);

    const auto toks = text::split_ws(line.substr(colon + 1));
    if (toks.empty()) script_error(line_no, "no actions");
    auto& a = step.action;
    for (std::size_t t = 0; t < toks.size(); ++t) {
      const auto word = toks[t];
      auto arg = [&]() -> std::string_view {
        if (t + 1 >= toks.size()) script_error(line_no, "'" + std::string(word) + "' needs an argument");
        return toks[++t];
      };
      if (word == "accel") {
        a.accel = unit_value(arg(), line_no);
      } else if (word == "brake") {
        a.brake = unit_value(arg(), line_no);
      } else if (word == "coast") {
        a.accel = 0.0;
        a.brake = 0.0;
      } else if (word == "cruise") {
        a.cruise_mph = unit_value(arg(), line_no);
      } else if (word == "lane") {
        const auto v = arg();
        if (v == "left")
          a.lane_shift = 1;
        else if (v == "right")
          a.lane_shift = -1;
        else
          a.lane_absolute = static_cast<int>(unit_value(v, line_no));
      } else if (word == "indicator") {
        const auto v = arg();
        if (v == "left") {
          a.indicator_left = true;
          a.indicator_right = false;
        } else if (v == "right") {
          a.indicator_left = false;
          a.indicator_right = true;
        } else if (v == "off") {
          a.indicator_left = false;
          a.indicator_right = false;
        } else {
          script_error(line_no, "indicator takes left, right or off");
        }
      } else {
        script_error(line_no, "unknown action '" + std::string(word) + "'");
      }
    }
    script.steps.push_back(step);
    try {
      DriverScript{{step}}.validate();
    } catch (const ConfigError& e) {
      const std::string what = e.what();
      script_error(line_no, what.substr(what.find(": ") + 2));
    }
  }
  return script;
}

std::string DriverScript::to_text() const {
  std::string out;
  for (const auto& s : steps) {
    out += "when ";
    out += var_name(s.trigger.var);
    out += " ";
    out += op_name(s.trigger.op);
    out += " " + text::fmt_g(s.trigger.value) + " :";
    const auto& a = s.action;
    if (a.accel) out += " accel " + text::fmt_g(*a.accel);
    if (a.brake) out += " brake " + text::fmt_g(*a.brake);
    if (a.cruise_mph) out += " cruise " + text::fmt_g(*a.cruise_mph);
    if (a.lane_shift) out += *a.lane_shift > 0 ? " lane left" : " lane right";
    if (a.lane_absolute) out += " lane " + std::to_string(*a.lane_absolute);
    if (a.indicator_left || a.indicator_right) {
      if (a.indicator_left.value_or(false))
        out += " indicator left";
      else if (a.indicator_right.value_or(false))
        out += " indicator right";
      else
        out += " indicator off";
    }
    out += "\n";
  }
  return out;
}

DriverScript load_driver_script(const std::string& path) { return DriverScript::parse(read_text_file(path)); }

ScriptedDriver::ScriptedDriver(DriverScript script, DynamicsSpec dynamics)
    : script_(std::move(script)), dynamics_(dynamics) {
  script_.validate();
}

EgoInputs ScriptedDriver::step(const Observation& obs) {
  while (next_ < script_.steps.size() && script_.steps[next_].trigger.eval(obs)) {
    const auto& a = script_.steps[next_].action;
    if (a.accel) {
      accel_ = *a.accel;
      cruise_.reset();
    }
    if (a.brake) {
      brake_ = *a.brake;
      if (brake_ > 0.0) cruise_.reset();
    }
    if (a.cruise_mph) {
      cruise_ = *a.cruise_mph;
      brake_ = 0.0;
    }
    if (a.lane_shift) target_lane_ = obs.lane + *a.lane_shift;
    if (a.lane_absolute) target_lane_ = *a.lane_absolute;
    if (a.indicator_left) indicator_left_ = *a.indicator_left;
    if (a.indicator_right) indicator_right_ = *a.indicator_right;
    fired_.push_back({next_, obs.frame});
    ++next_;
  }

  EgoInputs in;
  in.brake = brake_;
  in.accel = accel_;
  if (cruise_) {
    const double needed = dynamics_.drag(*cruise_) + 1.0 * (*cruise_ - obs.speed_mph);
    in.accel = std::clamp(needed / dynamics_.ego_accel_max_mphps, 0.0, 1.0);
  }
  in.target_lane = target_lane_;
  in.indicator_left = indicator_left_;
  in.indicator_right = indicator_right_;
  return in;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::pair<std::string_view, GazeTarget> kTargets[] = {
    {"follower", GazeTarget::follower},       {"lead", GazeTarget::lead},
    {"follower_sign", GazeTarget::follower_sign}, {"lead_sign", GazeTarget::lead_sign},
    {"speedometer", GazeTarget::speedometer}, {"tachometer", GazeTarget::tachometer},
    {"left_mirror", GazeTarget::left_mirror}, {"right_mirror", GazeTarget::right_mirror},
    {"rear_mirror", GazeTarget::rear_mirror}, {"road", GazeTarget::road},
};

}  // namespace

const char* to_string(GazeTarget t) {
  for (const auto& [name, v] : kTargets)
    if (v == t) return name.data();
  return "road";
}

GazeTarget parse_gaze_target(std::string_view s) {
  for (const auto& [name, v] : kTargets)
    if (name == s) return v;
  throw ConfigError("unknown gaze target '" + std::string(s) + "'");
}

bool is_truck_target(GazeTarget t) {
  return t == GazeTarget::follower || t == GazeTarget::lead || t == GazeTarget::follower_sign ||
         t == GazeTarget::lead_sign;
}

void GazeProfile::validate() const {
  for (const auto& d : dwells) {
    if (!(d.duration_ms >= kFramePeriodMs - 1e-9))
      throw ConfigError("gaze dwell shorter than one sample period");
    if (d.noise_std && *d.noise_std < 0.0) throw ConfigError("gaze dwell noise must be non-negative");
  }
  if (noise_std < 0.0) throw ConfigError("gaze noise_std must be non-negative");
  if (!(pupil.base_left_mm > 0.0 && pupil.base_right_mm > 0.0))
    throw ConfigError("pupil base diameters must be positive");
  if (pupil.noise_std_mm < 0.0) throw ConfigError("pupil noise must be non-negative");
  for (double p : {pupil.left_dropout, pupil.right_dropout})
    if (p < 0.0 || p > 1.0) throw ConfigError("pupil dropout must lie in [0, 1]");
}

GazeProfile GazeProfile::parse(std::string_view source) {
  GazeProfile g;
  int line_no = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw ConfigError("gaze profile line " + std::to_string(line_no) + ": " + msg);
  };
  auto num = [&](std::string_view v) {
    double out = 0.0;
    if (!text::parse_double(v, out)) fail("expected a number, got '" + std::string(v) + "'");
    return out;
  };
  for (auto raw : text::split(source, '\n')) {
    ++line_no;
    auto line = text::trim(text::strip_comment(raw));
    if (line.empty()) continue;
    if (line.starts_with("dwell")) {
      const auto toks = text::split_ws(line);
      if (toks.size() < 3 || toks.size() > 4) fail("expected 'dwell <target> <ms> [noise]'");
      DwellSegment d;
      try {
        d.target = parse_gaze_target(toks[1]);
      } catch (const ConfigError& e) {
        fail(e.what());
      }
      d.duration_ms = num(toks[2]);
      if (toks.size() == 4) d.noise_std = num(toks[3]);
      g.dwells.push_back(d);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected key = value or a dwell line");
    const auto key = text::trim(line.substr(0, eq));
    const auto value = text::trim(line.substr(eq + 1));
    if (key == "noise_std")
      g.noise_std = num(value);
    else if (key == "repeat") {
      if (value != "true" && value != "false") fail("repeat takes true or false");
      g.repeat = value == "true";
    } else if (key == "road_x")
      g.road_point.x = num(value);
    else if (key == "road_y")
      g.road_point.y = num(value);
    else if (key == "pupil_base_left")
      g.pupil.base_left_mm = num(value);
    else if (key == "pupil_base_right")
      g.pupil.base_right_mm = num(value);
    else if (key == "pupil_passing_increment")
      g.pupil.passing_increment_mm = num(value);
    else if (key == "pupil_noise_std")
      g.pupil.noise_std_mm = num(value);
    else if (key == "pupil_left_dropout")
      g.pupil.left_dropout = num(value);
    else if (key == "pupil_right_dropout")
      g.pupil.right_dropout = num(value);
    else
      fail("unknown key '" + std::string(key) + "'");
  }
  g.validate();
  return g;
}

std::string GazeProfile::to_text() const {
  std::string out;
  out += "noise_std = " + text::fmt_g(noise_std) + "\n";
  out += std::string("repeat = ") + (repeat ? "true" : "false") + "\n";
  out += "road_x = " + text::fmt_g(road_point.x) + "\n";
  out += "road_y = " + text::fmt_g(road_point.y) + "\n";
  out += "pupil_base_left = " + text::fmt_g(pupil.base_left_mm) + "\n";
  out += "pupil_base_right = " + text::fmt_g(pupil.base_right_mm) + "\n";
  out += "pupil_passing_increment = " + text::fmt_g(pupil.passing_increment_mm) + "\n";
  out += "pupil_noise_std = " + text::fmt_g(pupil.noise_std_mm) + "\n";
  out += "pupil_left_dropout = " + text::fmt_g(pupil.left_dropout) + "\n";
  out += "pupil_right_dropout = " + text::fmt_g(pupil.right_dropout) + "\n";
  for (const auto& d : dwells) {
    out += std::string("dwell ") + to_string(d.target) + " " + text::fmt_g(d.duration_ms);
    if (d.noise_std) out += " " + text::fmt_g(*d.noise_std);
    out += "\n";
  }
  return out;
}

GazeProfile load_gaze_profile(const std::string& path) { return GazeProfile::parse(read_text_file(path)); }

namespace {

std::int64_t hold_frames(const DwellSegment& d) {
  return std::max<std::int64_t>(1, std::llround(d.duration_ms / kFramePeriodMs));
}

}  // namespace

GazeSynthesizer::GazeSynthesizer(GazeProfile profile, std::uint64_t seed) : profile_(std::move(profile)), rng_(seed) {
  profile_.validate();
  if (profile_.dwells.empty()) profile_.dwells.push_back({GazeTarget::road, kFramePeriodMs, std::nullopt});
  hold_left_ = hold_frames(profile_.dwells.front());
}

std::optional<Point2> GazeSynthesizer::resolve(GazeTarget target, const ScreenQuadSet& quads,
                                               const ScreenAreas& areas) const {
  auto from_quad = [](const ScreenQuad& q) -> std::optional<Point2> {
    const auto hull = visible_hull(q);
    if (hull.empty()) return std::nullopt;
    const Point2 c = hull_centroid(hull);
    if (c.x < 0.0 || c.x > 1.0 || c.y < 0.0 || c.y > 1.0) return std::nullopt;
    return c;
  };
  switch (target) {
    case GazeTarget::follower: return from_quad(quads.follower);
    case GazeTarget::lead: return from_quad(quads.lead);
    case GazeTarget::follower_sign: return from_quad(quads.follower_sign);
    case GazeTarget::lead_sign: return from_quad(quads.lead_sign);
    case GazeTarget::speedometer: return areas.speedometer.center();
    case GazeTarget::tachometer: return areas.tachometer.center();
    case GazeTarget::left_mirror: return areas.left_mirror.center();
    case GazeTarget::right_mirror: return areas.right_mirror.center();
    case GazeTarget::rear_mirror: return areas.rear_mirror.center();
    case GazeTarget::road: return profile_.road_point;
  }
  return std::nullopt;
}

void GazeSynthesizer::advance() {
  if (sweep_left_ > 0) {
    --sweep_left_;
    return;
  }
  if (finished_ || --hold_left_ > 0) return;
  if (segment_ + 1 < profile_.dwells.size()) {
    ++segment_;
  } else if (profile_.repeat) {
    segment_ = 0;
  } else {
    finished_ = true;  // keep resting on the final target
    return;
  }
  hold_left_ = hold_frames(profile_.dwells[segment_]);
  sweep_left_ = kSweepSamples;
  sweep_from_.reset();
}

GazeSample GazeSynthesizer::step(const ScreenQuadSet& quads, const ScreenAreas& areas, std::int64_t frame,
                                 bool passing) {
  const auto& seg = profile_.dwells[segment_];
  const double noise = seg.noise_std.value_or(profile_.noise_std);

  // Fixed draw order per sample keeps the stream reproducible.
  std::normal_distribution<double> unit_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double nx = unit_normal(rng_), ny = unit_normal(rng_);
  const double npl = unit_normal(rng_), npr = unit_normal(rng_);
  const double ul = unit(rng_), ur = unit(rng_);

  GazeSample s;
  s.t_ms = FrameClock::time_ms(frame);
  truth_ = {seg.target, sweep_left_ > 0 ? SampleLabel::saccade_point : SampleLabel::fixation_point, false};

  const auto target = resolve(seg.target, quads, areas);
  if (target) {
    Point2 p = *target;
    if (sweep_left_ > 0) {
      if (!sweep_from_) sweep_from_ = last_point_.value_or(*target);
      const double k = static_cast<double>(kSweepSamples - sweep_left_ + 1) / kSweepSamples;
      p = {sweep_from_->x + (target->x - sweep_from_->x) * k, sweep_from_->y + (target->y - sweep_from_->y) * k};
    }
    last_point_ = p;
    p.x += noise * nx;
    p.y += noise * ny;
    const bool on_screen = p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0;
    s.valid_left = on_screen && ul >= profile_.pupil.left_dropout;
    s.valid_right = on_screen && ur >= profile_.pupil.right_dropout;
    if (s.gaze_valid()) {
      s.gx = p.x;
      s.gy = p.y;
      const double inc = passing ? profile_.pupil.passing_increment_mm : 0.0;
      if (s.valid_left)
        s.pupil_left_mm = std::max(0.5, profile_.pupil.base_left_mm + inc + profile_.pupil.noise_std_mm * npl);
      if (s.valid_right)
        s.pupil_right_mm = std::max(0.5, profile_.pupil.base_right_mm + inc + profile_.pupil.noise_std_mm * npr);
    }
    truth_.valid = s.gaze_valid();
  }
  advance();
  return s;
}

// ---------------------------------------------------------------------------

ScriptedRun run_scripted_session(const SimulationConfig& config, const DriverScript& script,
                                 const std::optional<GazeProfile>& profile, const RunOptions& options) {
  config.validate();
  ScriptedRun run;
  run.config = config;
  WorldState world = spawn_scenario(config.scenario, config.road, config.dynamics);
  ScriptedDriver driver(script, config.dynamics);
  std::optional<GazeSynthesizer> synth;
  if (profile) synth.emplace(*profile, config.scenario.seed * 0x9E3779B97F4A7C15ULL + 0x5EEDULL);

  std::int64_t tail = -1;
  std::optional<LedgerDwell> dwell;
  std::optional<LedgerBrake> brake;
  while (static_cast<std::int64_t>(run.frames.size()) < config.max_frames) {
    const EgoInputs inputs = driver.step(observe(world));
    FrameRecord rec = make_frame_record(world, inputs, config.camera);

    if (inputs.brake > 0.0 && !brake) brake = LedgerBrake{rec.i, rec.i, inputs.brake};
    if (inputs.brake == 0.0 && brake) {
      brake->end = rec.i;
      run.ledger.brakes.push_back(*brake);
      brake.reset();
    }

    if (synth) {
      GazeSample g = synth->step(rec.quads, config.areas, rec.i, rec.lane != 0);
      g.t_ms += options.gaze_time_offset_ms;
      const GazeTruth& truth = synth->last_truth();
      run.ledger.gaze_truth.push_back(truth);
      if (truth.label == SampleLabel::fixation_point) {
        if (dwell && dwell->target == truth.target && dwell->end + 1 == rec.i) {
          dwell->end = rec.i;
        } else {
          if (dwell) run.ledger.dwells.push_back(*dwell);
          dwell = LedgerDwell{truth.target, rec.i, rec.i};
        }
      }
      run.gaze.push_back(g);
    }
    run.frames.push_back(rec);

    if (rec.pos.p_e == 0.0 && tail < 0) {
      run.reached_exit = true;
      tail = config.exit_tail_frames;
    }
    if (tail == 0) break;
    if (tail > 0) --tail;
    world = step_frame(world, inputs);
  }
  if (brake) {
    brake->end = run.frames.back().i + 1;
    run.ledger.brakes.push_back(*brake);
  }
  if (dwell) run.ledger.dwells.push_back(*dwell);
  run.ledger.fired = driver.fired();

  // Lane changes from the exact lateral trace: an episode is a maximal run of
  // frames whose lateral position differs from the previous frame's.
  const auto& fr = run.frames;
  const auto& road = config.road;
  std::size_t i = 1;
  while (i < fr.size()) {
    if (fr[i].lateral_ft == fr[i - 1].lateral_ft) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < fr.size() && fr[j + 1].lateral_ft != fr[j].lateral_ft) ++j;
    LedgerLaneChange lc;
    lc.start = fr[i].i;
    lc.end = fr[j].i;
    lc.from = road.nearest_lane(fr[i - 1].lateral_ft);
    lc.to = road.nearest_lane(fr[j].lateral_ft);
    lc.completed = lc.from != lc.to && fr[j].lateral_ft == road.lane_center(lc.to);
    lc.intent = lc.start - 1;
    for (const auto& f : run.ledger.fired) {
      const auto& a = driver.script().steps[f.step].action;
      if ((a.lane_shift || a.lane_absolute) && f.frame < lc.start) lc.intent = f.frame;
    }
    run.ledger.lane_changes.push_back(lc);
    i = j + 1;
  }
  return run;
}

}  // namespace atma
