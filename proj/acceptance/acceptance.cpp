// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
// primary criterion fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "atma/agents.hpp"
#include "atma/measures.hpp"
#include "atma/report.hpp"
#include "atma/serve.hpp"
#include "atma/session_io.hpp"
#include "support/oracles.hpp"
#include "support/suite.hpp"
#include "support/ws_client.hpp"

using namespace atma;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
  void require(bool ok, const std::string& why) {
    if (!ok) fail(why);
  }
};

std::string fmt(double v, int prec = 3) {
  std::ostringstream o;
  o.precision(prec);
  o << v;
  return o.str();
}

fs::path scratch_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("atma-acceptance-" + std::to_string(::getpid()) + "-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SimulationConfig config_for(TrafficVolume v, std::uint64_t seed = 1) {
  SimulationConfig c;
  c.scenario.traffic_volume = v;
  c.scenario.seed = seed;
  return c;
}

GazeProfile scan_profile() {
  return GazeProfile::parse(
      "noise_std = 0.001\n"
      "dwell road 900\ndwell follower 400\ndwell speedometer 250\ndwell lead 350\n"
      "dwell road 600\ndwell left_mirror 300\ndwell follower_sign 300\n");
}

// ---------------------------------------------------------------------------

Outcome scenario_fidelity() {
  Outcome o;
  double worst_gap = 0, worst_atma = 0, worst_offset = 0, worst_spacing = 0;
  for (auto volume : {TrafficVolume::low, TrafficVolume::high}) {
    ScenarioConfig sc;
    sc.traffic_volume = volume;
    sc.seed = 1;
    WorldState w = spawn_scenario(sc);
    const double target = volume == TrafficVolume::low ? 650.0 : 160.0;
    const double offset = compute_positions(w).p_f;
    worst_offset = std::max(worst_offset, std::abs(offset - 1800.0));
    o.require(std::abs(offset - 1800.0) <= 50.0, "ego offset " + fmt(offset) + " ft");
    const std::size_t count = w.vehicles.size();
    for (int f = 0; f <= 7200; ++f) {
      if (f > 0) {
        const std::int64_t before = FrameClock::ticks(w.frame);
        w = step_frame(w, {});
        o.require(FrameClock::ticks(w.frame) - before == FrameClock::kTicksPerFrame, "frame clock drift");
      }
      o.require(w.vehicles.size() == count, "vehicle set changed");
      const double gap = w.lead().rear() - w.follower().s;
      worst_gap = std::max(worst_gap, std::abs(gap - 100.0));
      worst_atma = std::max({worst_atma, w.lead().speed_mph, w.follower().speed_mph});
      for (const auto& v : w.vehicles) o.require(v.speed_mph >= 0.0, "negative speed");
      std::vector<double> left;
      for (const auto& v : w.vehicles)
        if (v.kind == VehicleKind::npv && v.lane == 1) left.push_back(v.s);
      std::sort(left.begin(), left.end());
      const double mean = (left.back() - left.front()) / static_cast<double>(left.size() - 1);
      worst_spacing = std::max(worst_spacing, std::abs(mean / target - 1.0));
    }
  }
  o.require(worst_gap <= 5.0, "ATMA gap off by " + fmt(worst_gap) + " ft");
  o.require(worst_atma <= 15.0, "ATMA speed " + fmt(worst_atma) + " mph");
  o.require(worst_spacing <= 0.10, "NPV spacing off by " + fmt(100 * worst_spacing) + "%");
  if (o.pass)
    o.detail = "gap err " + fmt(worst_gap) + " ft, ATMA max " + fmt(worst_atma) + " mph, offset err " +
               fmt(worst_offset) + " ft, NPV spacing err " + fmt(100 * worst_spacing) + "%";
  return o;
}

Outcome determinism() {
  Outcome o;
  const auto script = DriverScript::parse(suite::event_suite()[0].text);
  const auto dir = scratch_dir("det");
  std::string bytes[2];
  for (int k = 0; k < 2; ++k) {
    const auto run = run_scripted_session(config_for(TrafficVolume::high, 7), script, scan_profile());
    const auto path = (dir / ("run" + std::to_string(k) + ".ndjson")).string();
    write_session(session_from_run(run), path);
    bytes[k] = read_text_file(path);
  }
  fs::remove_all(dir);
  o.require(!bytes[0].empty() && bytes[0] == bytes[1], "session files differ");
  o.detail = std::to_string(bytes[0].size()) + " bytes identical";
  return o;
}

Outcome geometry_oracle() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t compared = 0, skipped = 0;
  for (int h = 0; h < 100 && o.pass; ++h) {
    const int n = 3 + static_cast<int>(u(rng) * 40);
    const double cx = u(rng), cy = u(rng), sx = 0.05 + 0.5 * u(rng), sy = 0.05 + 0.5 * u(rng);
    std::vector<Point2> pts;
    for (int i = 0; i < n; ++i) pts.push_back({cx + sx * (u(rng) - 0.5), cy + sy * (u(rng) - 0.5)});
    const auto hull = convex_hull(pts);
    if (hull.size() < 3) continue;
    const oracle::Raster raster(hull, 1024);
    for (int q = 0; q < 10000; ++q) {
      const Point2 p{cx + 1.4 * sx * (u(rng) - 0.5), cy + 1.4 * sy * (u(rng) - 0.5)};
      if (!raster.off_boundary(p)) {
        ++skipped;
        continue;
      }
      ++compared;
      if (hull_contains(hull, p) != raster.contains(p)) {
        o.fail("containment disagrees at (" + fmt(p.x, 9) + ", " + fmt(p.y, 9) + ")");
        break;
      }
    }
  }
  std::size_t hulls = 0;
  for (int t = 0; t < 2000 && o.pass; ++t) {
    const int n = 1 + static_cast<int>(u(rng) * 10);
    std::vector<Point2> pts;
    const bool lattice = t % 2 == 0;  // small integer grid: duplicates and collinear runs
    for (int i = 0; i < n; ++i)
      pts.push_back(lattice ? Point2{std::floor(u(rng) * 4), std::floor(u(rng) * 4)} : Point2{u(rng), u(rng)});
    auto got = convex_hull(pts);
    auto want = oracle::brute_force_hull(pts);
    auto sorted = got;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != want) {
      o.fail("hull differs from brute force for n = " + std::to_string(n));
      break;
    }
    for (std::size_t i = 0; got.size() >= 3 && i < got.size(); ++i)
      o.require(cross(got[i], got[(i + 1) % got.size()], got[(i + 2) % got.size()]) > 0, "hull not counterclockwise");
    ++hulls;
  }
  if (o.pass)
    o.detail = std::to_string(compared) + " points agree (" + std::to_string(skipped) + " near edges), " +
               std::to_string(hulls) + " hulls equal brute force";
  return o;
}

Outcome projection_oracle() {
  Outcome o;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CameraSpec cam;
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    ScenarioConfig sc;
    sc.ego_start_behind_atma_ft = 150 + 1500 * u(rng);
    WorldState w = spawn_scenario(sc);
    w.ego().s = 100 * u(rng);
    w.ego().lane = u(rng) < 0.5 ? 0 : 1;
    w.ego().lateral_offset = 3 * (u(rng) - 0.5);
    const auto quads = project_cuboids(w, cam);
    const auto& e = w.ego();
    const std::array<double, 3> eye{e.s - cam.eye_back_ft, e.y(w.road), cam.eye_up_ft};
    auto check = [&](const ScreenQuad& q, const Cuboid& c) {
      for (int k = 0; k < 8; ++k) {
        const auto want = oracle::pinhole(eye, cam.horizontal_fov_deg, cam.aspect, cam.near_ft, c.vertex(k));
        o.require(want.visible == q[k].visible, "visibility differs");
        if (want.visible) worst = std::max({worst, std::abs(want.x - q[k].x), std::abs(want.y - q[k].y)});
      }
    };
    check(quads.follower, truck_cuboid(w.follower(), w.road));
    check(quads.lead, truck_cuboid(w.lead(), w.road));
    check(quads.follower_sign, sign_cuboid(w.follower(), w.road));
    check(quads.lead_sign, sign_cuboid(w.lead(), w.road));
  }
  o.require(worst <= 1e-6, "vertex error " + fmt(worst));

  // Pinhole scaling: a small cuboid on the optical axis at d and 2d.
  WorldState w = spawn_scenario({});
  double worst_ratio = 0;
  for (double d : {50.0, 200.0, 800.0}) {
    auto height = [&](double dist) {
      const double s0 = w.ego().s - cam.eye_back_ft + dist;
      const Cuboid c{s0 - 0.5, s0 + 0.5, -0.5, 0.5, cam.eye_up_ft - 0.5, cam.eye_up_ft + 0.5};
      const auto q = project_cuboid(w, cam, c);
      double lo = 1e9, hi = -1e9;
      for (const auto& v : q) {
        lo = std::min(lo, v.y);
        hi = std::max(hi, v.y);
      }
      return hi - lo;
    };
    worst_ratio = std::max(worst_ratio, std::abs(height(d) / height(2 * d) - 2.0) / 2.0);
  }
  o.require(worst_ratio <= 0.01, "distance doubling ratio off by " + fmt(100 * worst_ratio) + "%");
  if (o.pass) o.detail = "max vertex error " + fmt(worst) + ", scaling error " + fmt(100 * worst_ratio) + "%";
  return o;
}

struct Analyzed {
  SessionData data;
  SessionDataset ds;
  std::vector<BrakeEvent> brakes;
  LaneChangeDetection lanes;
  PassingPhase phase;
};

Analyzed analyze_run(const ScriptedRun& run) {
  Analyzed a;
  a.data = session_from_string(session_to_string(session_from_run(run)));
  a.ds = trim_and_align(a.data.frames, a.data.gaze);
  a.brakes = detect_brakes(a.ds);
  a.lanes = detect_lane_changes(a.ds);
  a.phase = passing_phase(a.lanes.changes, a.ds);
  return a;
}

Outcome event_detection() {
  Outcome o;
  const auto scripts = suite::event_suite();
  int k = 0, brakes = 0, changes = 0, max_lane_err = 0, passes = 0, incomplete = 0;
  for (const auto& s : scripts) {
    const auto volume = k++ % 2 ? TrafficVolume::high : TrafficVolume::low;
    const auto run = run_scripted_session(config_for(volume, 100 + k), DriverScript::parse(s.text), std::nullopt);
    const auto a = analyze_run(run);
    std::vector<LedgerBrake> lb;
    for (const auto& b : run.ledger.brakes)
      if (b.start >= a.ds.start_frame && b.start <= a.ds.end_frame) lb.push_back(b);
    if (lb.size() != a.brakes.size()) {
      o.fail(s.name + ": " + std::to_string(a.brakes.size()) + " brakes detected, ledger has " +
             std::to_string(lb.size()));
      continue;
    }
    for (std::size_t i = 0; i < lb.size(); ++i)
      o.require(std::abs(a.brakes[i].start - lb[i].start) <= 1, s.name + ": brake start off");
    brakes += static_cast<int>(lb.size());

    std::vector<LedgerLaneChange> ll;
    for (const auto& c : run.ledger.lane_changes)
      if (c.completed) ll.push_back(c);
    if (ll.size() != a.lanes.changes.size()) {
      o.fail(s.name + ": " + std::to_string(a.lanes.changes.size()) + " lane changes, ledger has " +
             std::to_string(ll.size()));
      continue;
    }
    for (std::size_t i = 0; i < ll.size(); ++i) {
      const int err = static_cast<int>(std::max(std::abs(a.lanes.changes[i].start - ll[i].start),
                                                std::abs(a.lanes.changes[i].end - ll[i].end)));
      max_lane_err = std::max(max_lane_err, err);
      o.require(err <= 3, s.name + ": lane change off by " + std::to_string(err) + " frames");
    }
    changes += static_cast<int>(ll.size());

    if (s.passes) {
      o.require(a.phase.complete, s.name + ": pass not complete");
      if (a.phase.complete) {
        ++passes;
        o.require(a.ds.at(a.phase.t_s).pos.p_f > 0.0 && a.ds.at(a.phase.t_e).pos.p_l < 0.0 && a.phase.t_s < a.phase.t_e,
                  s.name + ": passing conditions violated");
      }
    } else {
      o.require(!a.phase.complete, s.name + ": aborted pass reported complete");
      if (!a.phase.complete) ++incomplete;
    }
  }
  if (o.pass)
    o.detail = std::to_string(scripts.size()) + " scripts, " + std::to_string(brakes) + " brakes exact, " +
               std::to_string(changes) + " lane changes (max err " + std::to_string(max_lane_err) + " frames), " +
               std::to_string(passes) + " passes, " + std::to_string(incomplete) + " incomplete flagged";
  return o;
}

Outcome harsh_brake() {
  Outcome o;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<BrakeEvent> events;
  std::vector<std::vector<double>> pedals, speeds;
  int wrong = 0;
  for (int c = 0; c < 50; ++c) {
    double rate = 2.0 + 18.0 * u(rng);
    if (std::abs(rate - kHarshBrakeMphps) < 1e-3) rate += 0.01;
    const int n = 400, b = 50 + static_cast<int>(u(rng) * 100), q = 20 + static_cast<int>(u(rng) * 100);
    const double v0 = 30.0 + 30.0 * u(rng);
    std::vector<double> pedal(n, 0.0), speed(n, v0);
    for (int i = 0; i < n; ++i) {
      if (i >= b && i < b + q) pedal[i] = 0.2 + 0.6 * u(rng);
      const int into = std::clamp(i - b, 0, q);
      speed[i] = v0 - rate * into / 60.0;
    }
    const auto found = detect_brakes(pedal, speed, 0);
    if (found.size() != 1) {
      o.fail("case " + std::to_string(c) + ": " + std::to_string(found.size()) + " events");
      continue;
    }
    const bool analytic = (speed[b] - speed[b + q]) / (q / 60.0) > kHarshBrakeMphps;
    if (found[0].harsh != analytic) ++wrong;
    pedals.push_back(pedal);
    speeds.push_back(speed);
  }
  o.require(wrong == 0, std::to_string(wrong) + " misclassified");
  // Lowering the threshold never clears a harsh verdict.
  std::size_t last = 0;
  for (double alpha = 30.0; alpha >= 0.0; alpha -= 0.25) {
    BrakeParams p;
    p.harsh_mphps = alpha;
    std::size_t harsh = 0;
    for (std::size_t c = 0; c < pedals.size(); ++c)
      for (const auto& e : detect_brakes(pedals[c], speeds[c], 0, p)) harsh += e.harsh;
    o.require(harsh >= last, "harsh count fell when lowering the threshold to " + fmt(alpha));
    last = harsh;
  }
  if (o.pass) o.detail = "50 cases, 0 misclassified, monotone over 121 thresholds";
  return o;
}

Outcome correlation_structure() {
  Outcome o;
  const auto run = run_scripted_session(config_for(TrafficVolume::low), DriverScript::parse(suite::correlation_script().text),
                                        std::nullopt);
  const auto a = analyze_run(run);
  const auto corr = segment_correlations(a.ds.frames);
  o.require(corr.size() == 21, "segment count");
  for (int k = 0; k < 21; ++k) o.require(corr[static_cast<std::size_t>(k)].segment == k - 10, "segment order");
  // Layout: 10 + 1 + 10 bins of 100 ft.
  const std::pair<Positions, std::optional<int>> layout[] = {
      {{0, 0.001, 0}, -1},    {{0, 100, 0}, -1},    {{0, 100.001, 0}, -2}, {{0, 1000, 0}, -10},
      {{0, 1000.01, 0}, {}},  {{0, 0, 5}, 0},       {{0, -3, 0}, 0},       {{0, -50, -0.001}, 1},
      {{0, -50, -100}, 1},    {{0, -150, -100.5}, 2}, {{0, -1100, -1000}, 10}, {{0, -1100, -1000.5}, {}}};
  for (const auto& [p, want] : layout) o.require(correlation_segment(p) == want, "bin layout mismatch");
  const auto behind = corr[8].r, ahead = corr[12].r;
  o.require(behind && *behind > 0.85, "behind-follower r = " + (behind ? fmt(*behind) : std::string("undefined")));
  o.require(ahead && *ahead < -0.85, "ahead-of-lead r = " + (ahead ? fmt(*ahead) : std::string("undefined")));

  double worst = 0;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> x, y;
    const double slope = u(rng) * 10, icept = u(rng) * 100;
    for (int i = 0; i < 50; ++i) {
      x.push_back(500 * u(rng));
      y.push_back(icept + slope * x.back());
    }
    if (std::abs(slope) < 1e-6) continue;
    const auto r = pearson(x, y);
    worst = std::max(worst, r ? std::abs(std::abs(*r) - 1.0) : 1.0);
    o.require(r && (*r > 0) == (slope > 0), "sign of r");
  }
  o.require(worst <= 1e-9, "linear |r| error " + fmt(worst));
  if (o.pass)
    o.detail = "r(100-200 ft behind) = " + fmt(*behind) + ", r(100-200 ft ahead) = " + fmt(*ahead) +
               ", linear error " + fmt(worst);
  return o;
}

Outcome statistics_oracle() {
  Outcome o;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0;
  for (int c = 0; c < 25; ++c) {
    const int na = 5 + static_cast<int>(u(rng) * 60), nb = 5 + static_cast<int>(u(rng) * 60);
    std::normal_distribution<double> da(3.0 + 0.3 * u(rng), 0.05 + 0.4 * u(rng));
    std::normal_distribution<double> db(3.0 + 0.3 * u(rng), 0.05 + 0.4 * u(rng));
    std::vector<double> a, b;
    for (int i = 0; i < na; ++i) a.push_back(da(rng));
    for (int i = 0; i < nb; ++i) b.push_back(db(rng));
    const auto got = welch_one_sided(a, b);
    const auto want = oracle::welch(a, b);
    if (!got) {
      o.fail("no result");
      break;
    }
    worst = std::max(worst, std::abs(got->p - want.p));
    const auto swapped = welch_one_sided(b, a);
    o.require(std::abs(got->p + swapped->p - 1.0) <= 1e-12, "label swap is not p -> 1 - p");
  }
  o.require(worst <= 1e-6, "p differs from numerical integration by " + fmt(worst));
  const std::vector<double> x{2.9, 3.0, 3.1, 3.2};
  const auto zero = welch_one_sided(x, x);
  o.require(zero && zero->t == 0.0 && zero->p == 0.5, "t = 0 does not give p = 0.5");
  std::normal_distribution<double> n(3.0, 0.1);
  std::vector<double> pa, pb;
  for (int i = 0; i < 1000; ++i) {
    pa.push_back(n(rng) + 1.0);
    pb.push_back(n(rng));
  }
  const auto shift = welch_one_sided(pa, pb);
  o.require(shift && shift->p < 1e-10, "+1 mm shift p = " + (shift ? fmt(shift->p) : std::string("none")));
  if (o.pass) o.detail = "25 cases, max |dp| = " + fmt(worst) + ", +1 mm shift p = " + fmt(shift->p);
  return o;
}

Outcome ivt_filter() {
  Outcome o;
  // Dwell/saccade stream over fixed screen targets with known labels.
  const auto profile = GazeProfile::parse(
      "noise_std = 0.0015\nrepeat = true\n"
      "dwell road 700\ndwell speedometer 300\ndwell left_mirror 450\ndwell road 500\n"
      "dwell rear_mirror 200\ndwell right_mirror 350\ndwell tachometer 120\n");
  GazeSynthesizer synth(profile, 17);
  const ScreenAreas areas;
  std::vector<GazeSample> stream;
  std::vector<SampleLabel> truth;
  for (int f = 0; f < 6000; ++f) {
    stream.push_back(synth.step({}, areas, f, false));
    truth.push_back(synth.last_truth().label);
  }
  const auto labels = ivt_classify(stream);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) agree += labels[i] == truth[i];
  const double agreement = static_cast<double>(agree) / static_cast<double>(labels.size());
  o.require(agreement >= 0.99, "label agreement " + fmt(100 * agreement) + "%");

  // Each dwell's hold run is one fixation of the dwell's length.
  std::vector<std::pair<std::size_t, std::size_t>> dwells;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] != SampleLabel::fixation_point) continue;
    if (!dwells.empty() && dwells.back().second + 1 == i)
      dwells.back().second = i;
    else
      dwells.push_back({i, i});
  }
  const auto fixations = group_fixations(labels, stream, 0.0);
  double worst = 0;
  std::size_t matched = 0;
  for (const auto& [s, e] : dwells) {
    const double want = static_cast<double>(e - s + 1) * kFramePeriodMs;
    for (const auto& f : fixations)
      if (f.start <= e && f.end >= s) {
        worst = std::max(worst, std::abs(f.duration_ms - want));
        ++matched;
      }
  }
  o.require(matched == dwells.size(), "fixations do not map one to one onto dwells");
  o.require(worst <= kFramePeriodMs + 1e-9, "fixation duration off by " + fmt(worst) + " ms");

  std::size_t last = 0;
  for (double th = 0.0; th <= 2000.0; th += 5.0) {
    IvtParams p;
    p.velocity_threshold_dps = th;
    const auto l = ivt_classify(stream, p);
    const auto n = static_cast<std::size_t>(std::count(l.begin(), l.end(), SampleLabel::fixation_point));
    o.require(n >= last, "fixation count fell at threshold " + fmt(th));
    last = n;
  }
  if (o.pass)
    o.detail = "agreement " + fmt(100 * agreement, 5) + "%, " + std::to_string(dwells.size()) +
               " dwells, max duration error " + fmt(worst) + " ms";
  return o;
}

Outcome heatmap_proportions() {
  Outcome o;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0;
  for (int t = 0; t < 500; ++t) {
    std::vector<Fixation> fx;
    const int n = 1 + static_cast<int>(u(rng) * 50);
    for (int i = 0; i < n; ++i) fx.push_back({0, 0, {u(rng), u(rng)}, 50 + 3000 * u(rng)});
    const auto g = fixation_heatmap(fx);
    double sum = 0;
    for (double p : g.percent) sum += p;
    worst = std::max(worst, std::abs(sum - 100.0));
  }
  o.require(worst <= 1e-9, "heat map sums off by " + fmt(worst));

  // 16 scripted sessions whose gaze rests on the follower for 12 of every
  // 120 fixation samples. A leading road dwell of random length, spent while
  // the ego is still far outside the bins, randomizes each session's phase.
  // Road gaze sits above the truck so close range does not count as follower.
  const auto scripts = suite::cohort_scripts();
  std::vector<std::array<std::optional<double>, kProportionBins>> sessions;
  std::uniform_real_distribution<double> lead_in(50.0, 50.0 + 124 * kFramePeriodMs);
  for (std::size_t k = 0; k < 16; ++k) {
    std::string text = "noise_std = 0.0005\nrepeat = false\nroad_y = 0.2\ndwell road " + fmt(lead_in(rng), 6) + "\n";
    for (int c = 0; c < 120; ++c) text += "dwell follower 200\ndwell road 1800\n";
    const auto profile = GazeProfile::parse(text);
    const auto run = run_scripted_session(config_for(k % 2 ? TrafficVolume::high : TrafficVolume::low, 40 + k),
                                          DriverScript::parse(scripts[k].text), profile);
    auto ds = trim_and_align(run.frames, run.gaze);
    attribute_gaze(ds, {});
    sessions.push_back(session_proportions(ds, AtmaObject::follower));
  }
  const auto est = cohort_proportions(sessions);
  std::string summary;
  for (const auto& e : est) {
    const double se = e.half_width / 1.96;
    o.require(e.sessions >= 2, "bin " + std::to_string(e.bin) + " has too few sessions");
    o.require(std::abs(e.mean - 0.10) <= 2 * se, "bin " + std::to_string(e.bin) + " mean " + fmt(e.mean) +
                                                    " vs 0.10 with SE " + fmt(se));
    summary += (summary.empty() ? "" : " ") + fmt(100 * e.mean) + "%";
  }
  if (o.pass) o.detail = "sums within " + fmt(worst) + "; follower share by bin: " + summary;
  return o;
}

Outcome end_to_end() {
  Outcome o;
  const auto dir = scratch_dir("cohort");
  const auto scripts = suite::cohort_scripts();
  const auto profile = scan_profile();
  std::vector<SessionAnalysis> results;
  std::size_t violations = 0, errors = 0;
  std::uint64_t seed = 500;
  for (const auto& s : scripts)
    for (auto volume : {TrafficVolume::low, TrafficVolume::high}) {
      const auto run = run_scripted_session(config_for(volume, seed++), DriverScript::parse(s.text), profile);
      const auto path = (dir / (s.name + "-" + to_string(volume) + ".ndjson")).string();
      write_session(session_from_run(run), path);
      write_ledger(run.ledger, path + ".ledger.json");
      const auto data = read_session(path);
      results.push_back(analyze_session(data, s.name + "-" + to_string(volume)));
      if (results.back().error) {
        ++errors;
        o.fail(results.back().name + ": " + *results.back().error);
      }
      for (const auto& v : check_invariants(results.back())) {
        ++violations;
        o.fail(results.back().name + ": " + v);
      }
    }
  const auto cohort = summarize_cohort(results);
  for (const auto& v : check_invariants(cohort)) {
    ++violations;
    o.fail("cohort: " + v);
  }
  const auto files = write_report_bundle((dir / "bundle").string(), results, cohort);
  const std::vector<std::string> expected{"sessions.csv", "brakes.csv", "lane_changes.csv", "passing.csv",
                                          "correlation.csv", "correlation_grid.csv", "proportions.csv",
                                          "pupils.csv", "shifts.csv", "heatmap.csv", "brake_distance.csv",
                                          "change_distance.csv", "report.json"};
  for (const auto& f : expected) o.require(fs::exists(dir / "bundle" / f), "bundle lacks " + f);
  const auto grid = read_text_file((dir / "bundle" / "correlation_grid.csv").string());
  const auto header = grid.substr(0, grid.find('\r'));
  o.require(std::count(header.begin(), header.end(), ',') == 22, "correlation grid is not 21 segments wide");
  o.require(results.size() == 32, "session count");
  fs::remove_all(dir);
  if (o.pass)
    o.detail = std::to_string(results.size()) + " sessions, " + std::to_string(cohort.complete_passes) +
               " complete passes, " + std::to_string(files.size()) + " files, 0 violations";
  (void)errors;
  return o;
}

Outcome live_loop() {
  Outcome o;
  const auto dir = scratch_dir("live");
  ServeOptions opt;
  opt.port = 0;
  opt.out_dir = dir.string();
  Server server(opt);
  std::thread io([&] { server.run(); });

  std::vector<double> arrivals;
  int worst_lag = 0;
  std::int64_t frames = 0;
  try {
    wsclient::Client client("127.0.0.1", server.port());
    const auto hello = client.receive_type("hello");
    o.require(hello.value("protocol", 0) == kProtocolVersion, "protocol version");
    const auto t0 = std::chrono::steady_clock::now();
    std::int64_t seq = 0;
    std::int64_t sent_at_frame = -1;
    std::int64_t pending = -1;
    while (std::chrono::steady_clock::now() - t0 < std::chrono::seconds(30)) {
      const auto m = client.receive();
      if (m.value("type", "") != "state") continue;
      const auto frame = m["frame"].get<std::int64_t>();
      frames = frame + 1;
      arrivals.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      if (pending >= 0 && !m["input_seq"].is_null() && m["input_seq"].get<std::int64_t>() >= pending) {
        worst_lag = std::max(worst_lag, static_cast<int>(frame - sent_at_frame));
        pending = -1;
      }
      if (pending < 0 && frame % 2 == 0) {
        const double phase = static_cast<double>(frame % 600) / 600.0;
        client.send({{"type", "input"}, {"accel", phase < 0.6 ? 0.6 : 0.0}, {"brake", phase > 0.8 ? 0.3 : 0.0},
                     {"seq", ++seq}});
        client.send({{"type", "gaze"}, {"x", 0.5 + 0.2 * std::sin(frame / 40.0)}, {"y", 0.45}});
        pending = seq;
        sent_at_frame = frame;
      }
    }
    client.close();
  } catch (const std::exception& e) {
    o.fail(std::string("client: ") + e.what());
  }
  for (int i = 0; i < 100 && server.written().empty(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.stop();
  io.join();

  double rate = 0;
  if (arrivals.size() > 120) rate = static_cast<double>(arrivals.size() - 61) / (arrivals.back() - arrivals[60]);
  o.require(std::abs(rate - 60.0) <= 2.0, "state rate " + fmt(rate) + " Hz");
  o.require(worst_lag <= 2, "input applied after " + std::to_string(worst_lag) + " frames");
  const auto written = server.written();
  o.require(written.size() == 1, "session file not written");
  if (written.size() == 1) {
    const auto data = read_session(written[0]);
    const auto a = analyze_session(data, "live");
    o.require(!a.error, "analysis failed: " + a.error.value_or(""));
    const auto v = check_invariants(a);
    o.require(v.empty(), v.empty() ? "" : v.front());
  }
  fs::remove_all(dir);
  if (o.pass)
    o.detail = std::to_string(frames) + " frames at " + fmt(rate, 4) + " Hz, input lag <= " +
               std::to_string(worst_lag) + " frames, session analyzed";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    const char* name;
    double budget_s;
    bool primary;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria{
      {"scenario fidelity", 5, true, scenario_fidelity},
      {"determinism", 10, true, determinism},
      {"geometry oracle", 30, true, geometry_oracle},
      {"projection oracle", 1, true, projection_oracle},
      {"event detection vs ledger", 60, true, event_detection},
      {"harsh-brake rule", 5, true, harsh_brake},
      {"correlation structure", 10, true, correlation_structure},
      {"statistics oracle", 5, true, statistics_oracle},
      {"I-VT filter", 5, true, ivt_filter},
      {"heat map and proportions", 30, true, heatmap_proportions},
      {"end-to-end cohort", 300, true, end_to_end},
      {"live loop", 60, false, live_loop},
  };
  const bool skip_secondary = argc > 1 && std::string(argv[1]) == "--primary";
  int failed = 0;
  for (const auto& c : criteria) {
    if (!c.primary && skip_secondary) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) o.fail("took " + fmt(secs) + " s, budget " + fmt(c.budget_s) + " s");
    std::printf("%s [%s] %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.primary ? "PRIMARY" : "SECONDARY", c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
