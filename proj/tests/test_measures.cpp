#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "atma/measures.hpp"
#include "support/oracles.hpp"

using namespace atma;

namespace {

std::vector<FrameRecord> frames(std::size_t n, std::int64_t first = 0) {
  std::vector<FrameRecord> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    out[k].i = first + static_cast<std::int64_t>(k);
    out[k].time_ms = FrameClock::time_ms(out[k].i);
    out[k].pos.p_e = 5000.0 - static_cast<double>(k);
  }
  return out;
}

GazeSample sample_at(double t, double x = 0.5, double y = 0.5) {
  GazeSample g;
  g.t_ms = t;
  g.gx = x;
  g.gy = y;
  g.valid_left = g.valid_right = true;
  return g;
}

// Lateral trace: hold, ramp at `rate` ft/s to `to`, hold.
std::vector<double> lateral(double from, double to, std::size_t hold, double rate = 6.0, std::size_t tail = 60) {
  std::vector<double> y(hold, from);
  const double step = rate / 60.0 * (to > from ? 1 : -1);
  double v = from;
  while (std::abs(to - v) > 1e-9) {
    v = std::abs(to - v) <= rate / 60.0 ? to : v + step;
    y.push_back(v);
  }
  y.insert(y.end(), tail, to);
  return y;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("trim bounds") {
  auto f = frames(100);
  for (std::size_t k = 10; k < 100; ++k) f[k].op.accel = 0.4;
  for (std::size_t k = 80; k < 100; ++k) f[k].pos.p_e = 0.0;
  const auto [s, e] = trim_bounds(f);
  CHECK(s == 10);
  CHECK(e == 80);  // first frame attaining the minimum
  CHECK(trim_bounds(f, false).second == 99);
  CHECK_THROWS_AS(trim_bounds(frames(50)), NoSessionError);
}

TEST_CASE("alignment matches within half a frame") {
  auto f = frames(200);
  for (std::size_t k = 20; k < 200; ++k) f[k].op.accel = 0.5;
  std::vector<GazeSample> g;
  for (int k = 0; k < 200; ++k) g.push_back(sample_at(FrameClock::time_ms(k) + 3.0));
  g.push_back(sample_at(FrameClock::time_ms(100) - 2.0));  // competes for frame 100
  std::sort(g.begin(), g.end(), [](auto& a, auto& b) { return a.t_ms < b.t_ms; });
  const auto ds = trim_and_align(f, g);
  CHECK(ds.start_frame == 20);
  CHECK(ds.stats.gaze_total == 201);
  CHECK(ds.stats.outside_trim == 20);
  CHECK(ds.stats.duplicates == 1);
  CHECK(ds.stats.matched == 180);
  CHECK(ds.stats.matched + ds.stats.outside_trim + ds.stats.unmatched + ds.stats.duplicates == ds.stats.gaze_total);
  for (const auto& s : ds.gaze) CHECK(std::abs(s.gaze.t_ms - FrameClock::time_ms(s.frame)) <= kHalfFramePeriodMs);
  const auto& s100 = ds.gaze[static_cast<std::size_t>(100 - 20)];
  CHECK(s100.gaze.t_ms == doctest::Approx(FrameClock::time_ms(100) - 2.0));
}

TEST_CASE("alignment rejects thin gaze and gaps") {
  auto f = frames(200);
  for (auto& r : f) r.op.accel = 0.5;
  f[0].op.accel = 0;
  std::vector<GazeSample> g;
  for (int k = 0; k < 40; ++k) g.push_back(sample_at(FrameClock::time_ms(k)));
  CHECK_THROWS_AS(trim_and_align(f, g), AlignmentError);
  auto broken = f;
  broken.erase(broken.begin() + 50);
  CHECK_THROWS_AS(trim_and_align(broken, {}), AnalysisError);
  // Samples between frames, off by more than half a period, are unmatched.
  g.clear();
  for (int k = 0; k < 200; ++k) g.push_back(sample_at(FrameClock::time_ms(k) + (k % 10 == 0 ? 8.4 : 0.0)));
  const auto ds = trim_and_align(f, g);
  CHECK(ds.stats.unmatched == 0);  // 8.4 ms lands within half a period of the next frame
  CHECK(ds.stats.duplicates > 0);
}

// ---------------------------------------------------------------------------

TEST_CASE("brake rest value is the mode") {
  CHECK(estimate_brake_rest(std::vector<double>{0.05, 0.05, 0.0, 0.05, 0.3}) == doctest::Approx(0.05));
  CHECK(estimate_brake_rest(std::vector<double>{}) == 0.0);
}

TEST_CASE("brake events") {
  std::vector<double> pedal(100, 0.0), speed(100, 40.0);
  for (int i = 10; i < 40; ++i) pedal[i] = 0.5;
  for (int i = 60; i < 62; ++i) pedal[i] = 0.03;  // above rest + 0.02
  pedal[80] = 0.015;                                // inside the hysteresis band
  for (int i = 10; i <= 40; ++i) speed[i] = 40.0 - (i - 10) * 0.2;  // 12 mph/s
  for (int i = 41; i < 100; ++i) speed[i] = speed[40];
  const auto ev = detect_brakes(pedal, speed, 1000);
  REQUIRE(ev.size() == 2);
  CHECK(ev[0].start == 1010);
  CHECK(ev[0].duration == 30);
  CHECK(*ev[0].speed_rate_mphps == doctest::Approx(12.0));
  CHECK(ev[0].harsh);
  CHECK(ev[0].pedal_rate_mphps == doctest::Approx(0.5 * 20.0 / 0.5));
  CHECK(ev[0].harsh_pedal);
  CHECK(ev[1].start == 1060);
  CHECK_FALSE(ev[1].harsh);
  // Disjoint and ordered.
  CHECK(ev[0].start + ev[0].duration <= ev[1].start);

  BrakeParams p;
  p.rest = 0.03;
  CHECK(detect_brakes(pedal, speed, 0, p).size() == 1);
  CHECK_THROWS_AS(detect_brakes(pedal, std::vector<double>(3), 0), std::invalid_argument);
  // Without speed the pedal verdict decides.
  const auto blind = detect_brakes(pedal, {}, 0);
  CHECK_FALSE(blind[0].speed_rate_mphps.has_value());
  CHECK(blind[0].harsh == blind[0].harsh_pedal);
}

TEST_CASE("harsh threshold boundary") {
  for (double rate : {10.6, 10.7}) {
    std::vector<double> pedal(200, 0.0), speed(200, 50.0);
    for (int i = 20; i < 80; ++i) pedal[i] = 0.6;
    for (int i = 20; i < 200; ++i) speed[i] = 50.0 - rate * std::min(i - 20, 60) / 60.0;
    const auto ev = detect_brakes(pedal, speed, 0);
    REQUIRE(ev.size() == 1);
    CHECK(ev[0].harsh == (rate > kHarshBrakeMphps));
  }
}

TEST_CASE("a brake running to the end of the session") {
  std::vector<double> pedal(50, 0.0), speed(50, 30.0);
  for (int i = 40; i < 50; ++i) {
    pedal[i] = 1.0;
    speed[i] = 30.0 - (i - 40);
  }
  const auto ev = detect_brakes(pedal, speed, 0);
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].duration == 10);
  CHECK(*ev[0].speed_rate_mphps == doctest::Approx(9.0 / (9.0 / 60.0)));
}

// ---------------------------------------------------------------------------

TEST_CASE("lane change detection on a clean ramp") {
  const auto y = lateral(0.0, 12.0, 100);
  const auto d = detect_lane_changes(y, 500);
  REQUIRE(d.changes.size() == 1);
  CHECK(d.aborts.empty());
  const auto& c = d.changes[0];
  CHECK(c.start == 500 + 100);  // first frame that moved
  CHECK(c.end == 500 + 100 + 119);  // first frame at the target
  CHECK(c.direction == LaneDirection::left);
  CHECK(c.from_lane == 0);
  CHECK(c.to_lane == 1);
  CHECK_FALSE(c.truncated);
}

TEST_CASE("lane change back to the right and an aborted change") {
  auto y = lateral(12.0, 0.0, 30);
  auto d = detect_lane_changes(y, 0);
  REQUIRE(d.changes.size() == 1);
  CHECK(d.changes[0].direction == LaneDirection::right);

  // Drift 3 ft left and return: an abort, not a change.
  y = lateral(0.0, 3.0, 30, 6.0, 0);
  const auto back = lateral(3.0, 0.0, 0);
  y.insert(y.end(), back.begin(), back.end());
  d = detect_lane_changes(y, 0);
  CHECK(d.changes.empty());
  REQUIRE(d.aborts.size() == 1);
  CHECK(d.aborts[0].from_lane == d.aborts[0].to_lane);
}

TEST_CASE("lane detector ignores slow drift and jitter") {
  std::vector<double> y;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 0.05);
  for (int i = 0; i < 600; ++i) y.push_back(0.3 * std::sin(i / 50.0) + n(rng) * 0.1);
  CHECK(detect_lane_changes(y, 0).changes.empty());
  // Slow drift past the dead band is not a departure.
  y.clear();
  for (int i = 0; i < 600; ++i) y.push_back(i * 0.5 / 60.0);
  CHECK(detect_lane_changes(y, 0).changes.empty());
}

TEST_CASE("truncated lane change at the end of the trace") {
  auto y = lateral(0.0, 12.0, 20, 6.0, 0);
  y.resize(80);
  const auto d = detect_lane_changes(y, 0);
  REQUIRE(d.changes.size() == 1);
  CHECK(d.changes[0].truncated);
  CHECK(d.changes[0].to_lane == 1);
}

TEST_CASE("passing phase") {
  SessionDataset ds;
  ds.frames = frames(1000);
  ds.start_frame = 0;
  ds.end_frame = 999;
  for (auto& f : ds.frames) {
    f.pos.p_f = 400.0 - static_cast<double>(f.i);
    f.pos.p_l = f.pos.p_f + 175.5;
  }
  std::vector<LaneChange> changes{{100, 220, LaneDirection::left, 0, 1, false},
                                  {700, 820, LaneDirection::right, 1, 0, false}};
  auto p = passing_phase(changes, ds);
  CHECK(p.complete);
  CHECK(p.t_s == 100);
  CHECK(p.t_e == 820);
  CHECK(ds.at(p.t_s).pos.p_f > 0);
  CHECK(ds.at(p.t_e).pos.p_l < 0);
  CHECK(p.contains(500));
  CHECK_FALSE(p.contains(99));
  CHECK(*passing_change_distance(changes, p, ds) == doctest::Approx(300.0));

  // Return before clearing the lead: no t_e.
  changes[1].end = 500;
  p = passing_phase(changes, ds);
  CHECK_FALSE(p.complete);
  CHECK_FALSE(passing_change_distance(changes, p, ds).has_value());
  CHECK(passing_phase(std::vector<LaneChange>{}, ds).t_s == -1);
}

// ---------------------------------------------------------------------------

TEST_CASE("pearson") {
  const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 4, 5, 4, 5};
  CHECK(*pearson(x, y) == doctest::Approx(oracle::pearson(x, y)).epsilon(1e-12));
  CHECK_FALSE(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}).has_value());
  CHECK_FALSE(pearson(x, std::vector<double>(5, 3.0)).has_value());
  CHECK_FALSE(pearson(std::vector<double>(5, 1e6), x).has_value());

  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0, 1);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> a, b;
    for (int i = 0; i < 30; ++i) {
      a.push_back(n(rng));
      b.push_back(0.5 * a.back() + n(rng));
    }
    const double r = *pearson(a, b);
    CHECK(r == doctest::Approx(oracle::pearson(a, b)).epsilon(1e-10));
    CHECK(std::abs(r) <= 1.0);
    // Affine invariance, sign flips with negative slope.
    std::vector<double> c;
    for (double v : b) c.push_back(-3.0 * v + 7.0);
    CHECK(*pearson(a, c) == doctest::Approx(-r).epsilon(1e-10));
  }
}

TEST_CASE("correlation segments") {
  CHECK(correlation_segment({0, 50, 200}) == -1);
  CHECK(correlation_segment({0, 100, 200}) == -1);
  CHECK(correlation_segment({0, 100.5, 200}) == -2);
  CHECK(correlation_segment({0, 1000, 1200}) == -10);
  CHECK_FALSE(correlation_segment({0, 1000.5, 1200}).has_value());
  CHECK(correlation_segment({0, 0, 0}) == 0);
  CHECK(correlation_segment({0, -80, 10}) == 0);
  CHECK(correlation_segment({0, -200, -0.5}) == 1);
  CHECK(correlation_segment({0, -1200, -1000}) == 10);
  CHECK_FALSE(correlation_segment({0, -1200, -1000.5}).has_value());

  // A linear approach gives r = -1 or +1 per segment depending on direction.
  auto f = frames(2000);
  for (auto& r : f) {
    r.pos.p_f = 900.0 - static_cast<double>(r.i);
    r.pos.p_l = r.pos.p_f + 175.5;
    r.op.speed_mph = 30.0 + 0.01 * static_cast<double>(r.i);
  }
  const auto corr = segment_correlations(f);
  for (const auto& c : corr) {
    if (c.sample_count < 3) continue;
    CHECK(std::abs(*c.r) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(*c.r < 0);
  }
  CHECK(corr[0].sample_count == 0);
  CHECK(corr[1].sample_count == 100);
}

// ---------------------------------------------------------------------------

TEST_CASE("approach distance") {
  const Positions p{0, 250, 400};
  CHECK(approach_distance(AtmaObject::follower, p) == 250);
  CHECK(approach_distance(AtmaObject::follower_sign, p) == 250);
  CHECK(approach_distance(AtmaObject::lead, p) == doctest::Approx(400 - 30 - 15.5));
}

TEST_CASE("session proportions") {
  SessionDataset ds;
  ds.frames = frames(600);
  for (auto& f : ds.frames) f.pos.p_f = 650.0 - static_cast<double>(f.i);
  for (std::size_t k = 0; k < 600; ++k) {
    AlignedSample s;
    s.frame = static_cast<std::int64_t>(k);
    s.frame_offset = k;
    s.label = k % 7 == 0 ? SampleLabel::saccade_point : SampleLabel::fixation_point;
    s.objects.follower = k % 4 == 0;
    ds.gaze.push_back(s);
  }
  const auto p = session_proportions(ds, AtmaObject::follower);
  for (int b = 0; b < kProportionBins; ++b) {
    std::size_t total = 0, hits = 0;
    for (std::size_t k = 0; k < 600; ++k) {
      const double d = 650.0 - static_cast<double>(k);
      if (k % 7 == 0 || d <= b * 100.0 || d > (b + 1) * 100.0) continue;
      ++total;
      hits += k % 4 == 0;
    }
    REQUIRE(p[b].has_value());
    CHECK(*p[b] == doctest::Approx(static_cast<double>(hits) / total));
  }
  CHECK_FALSE(session_proportions(SessionDataset{}, AtmaObject::lead)[0].has_value());
}

TEST_CASE("cohort proportions") {
  using Row = std::array<std::optional<double>, kProportionBins>;
  std::vector<Row> rows(4);
  for (auto& r : rows) r[0] = 1.0;
  rows[0][1] = 0.1;
  rows[1][1] = 0.3;
  const auto e = cohort_proportions(rows);
  CHECK(e[0].mean == 1.0);
  CHECK(e[0].half_width == 0.0);  // every session agrees
  CHECK(e[0].sessions == 4);
  CHECK(e[1].sessions == 2);
  CHECK(e[1].mean == doctest::Approx(0.2));
  CHECK(e[1].half_width == doctest::Approx(1.96 * std::sqrt(0.02) / std::sqrt(2.0)));
  CHECK(e[2].sessions == 0);
}

// ---------------------------------------------------------------------------

TEST_CASE("welch test against numerical integration") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0, 1);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> a, b;
    for (int i = 0; i < 4 + t; ++i) a.push_back(3 + 0.2 * n(rng));
    for (int i = 0; i < 30 - t; ++i) b.push_back(3.05 + 0.5 * n(rng));
    const auto r = welch_one_sided(a, b);
    const auto o = oracle::welch(a, b);
    REQUIRE(r);
    CHECK(r->t == doctest::Approx(o.t).epsilon(1e-12));
    CHECK(r->df == doctest::Approx(o.df).epsilon(1e-12));
    CHECK(std::abs(r->p - o.p) < 1e-9);
    CHECK(r->p + welch_one_sided(b, a)->p == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_FALSE(welch_one_sided(std::vector<double>{1}, std::vector<double>{1, 2}).has_value());
  const auto flat = welch_one_sided(std::vector<double>{2, 2}, std::vector<double>{1, 1});
  CHECK(flat->p == 0.0);
  const auto same = welch_one_sided(std::vector<double>{2, 2}, std::vector<double>{2, 2});
  CHECK(same->p == 0.5);
}

TEST_CASE("pupil test splits samples by phase") {
  SessionDataset ds;
  ds.frames = frames(400);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 0.05);
  for (std::size_t k = 0; k < 400; ++k) {
    AlignedSample s;
    s.frame = static_cast<std::int64_t>(k);
    s.frame_offset = k;
    s.gaze = sample_at(0);
    const bool passing = k >= 100 && k <= 300;
    s.gaze.pupil_left_mm = 3.0 + (passing ? 0.3 : 0.0) + n(rng);
    s.gaze.valid_right = false;
    ds.gaze.push_back(s);
  }
  PassingPhase phase{100, 300, true};
  const auto r = pupil_ttest(ds, phase);
  CHECK(r.left.available);
  CHECK(r.left.result.n_a == 201);
  CHECK(r.left.result.p < 1e-10);
  CHECK_FALSE(r.right.available);
  CHECK_FALSE(pupil_ttest(ds, PassingPhase{}).left.available);
}

// ---------------------------------------------------------------------------

TEST_CASE("gaze shift patterns") {
  auto F = [] { ObjectFlags f; f.follower = true; return f; };
  auto FS = [] { ObjectFlags f; f.follower_sign = true; return f; };
  auto L = [] { ObjectFlags f; f.lead = true; return f; };
  auto N = [] { return ObjectFlags{}; };
  auto B = [] { ObjectFlags f; f.follower = f.lead = true; return f; };
  const std::vector<ObjectFlags> flags{F(), FS(), N(), N(), L(), B(), L(), N(), F()};
  const auto r = gaze_shift_patterns(flags);
  CHECK(r.pattern == "FT>LT>FT");
  CHECK(r.shifts == 2);
  CHECK(r.any_shift);
  REQUIRE(r.runs.size() == 3);
  CHECK(r.runs[0].last == 1);
  CHECK(r.runs[1].first == 4);
  CHECK(r.runs[1].last == 6);

  const auto gapped = gaze_shift_patterns(flags, 1);
  CHECK(gapped.pattern == "FT | LT>FT");
  CHECK(gapped.shifts == 1);
  CHECK_FALSE(gaze_shift_patterns(std::vector<ObjectFlags>{F(), N(), F()}).any_shift);
  CHECK(gaze_shift_patterns(std::vector<ObjectFlags>{}).pattern.empty());
}

// ---------------------------------------------------------------------------

TEST_CASE("heat maps") {
  const std::vector<Fixation> fx{{0, 0, {0.1, 0.1}, 100}, {0, 0, {0.5, 0.5}, 300}, {0, 0, {0.99, 0.99}, 100},
                                 {0, 0, {1.0, 0.0}, 500}};
  const auto g = fixation_heatmap(fx);
  CHECK(g.total_ms == 1000);
  CHECK(g.at(0, 0) == doctest::Approx(10));
  CHECK(g.at(1, 1) == doctest::Approx(30));
  CHECK(g.at(2, 2) == doctest::Approx(10));
  CHECK(g.at(0, 2) == doctest::Approx(50));  // x = 1 falls in the last column
  CHECK(std::accumulate(g.percent.begin(), g.percent.end(), 0.0) == doctest::Approx(100));

  const auto empty = fixation_heatmap(std::vector<Fixation>{});
  CHECK(std::accumulate(empty.percent.begin(), empty.percent.end(), 0.0) == 0.0);

  const Rect region{0.0, 0.0, 0.5, 0.5};
  const auto sub = fixation_heatmap(fx, 2, 2, region);
  CHECK(sub.total_ms == 400);
  CHECK(sub.at(0, 0) == doctest::Approx(25));
  CHECK(sub.at(1, 1) == doctest::Approx(75));
  CHECK_THROWS_AS(fixation_heatmap(fx, 0, 3), std::invalid_argument);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 200; ++t) {
    std::vector<Fixation> r;
    for (int i = 0; i < 1 + t % 20; ++i) r.push_back({0, 0, {u(rng), u(rng)}, 60 + 1000 * u(rng)});
    const auto h = fixation_heatmap(r, 1 + t % 4, 1 + t % 5);
    CHECK(std::abs(std::accumulate(h.percent.begin(), h.percent.end(), 0.0) - 100.0) <= 1e-9);
  }
}

TEST_CASE("heat maps by phase") {
  SessionDataset ds;
  ds.frames = frames(100);
  for (std::size_t k = 0; k < 100; ++k) {
    AlignedSample s;
    s.frame = static_cast<std::int64_t>(k);
    s.frame_offset = k;
    ds.gaze.push_back(s);
  }
  const std::vector<Fixation> fx{{10, 20, {0.1, 0.1}, 100}, {45, 55, {0.9, 0.9}, 200}};
  const auto h = fixation_heatmaps_by_phase(ds, fx, PassingPhase{40, 60, true});
  CHECK(h.passing.total_ms == 200);
  CHECK(h.non_passing.total_ms == 100);
  CHECK(h.passing.at(2, 2) == doctest::Approx(100));
}

// ---------------------------------------------------------------------------

TEST_CASE("brake distance histogram") {
  BrakeHistogram h;
  CHECK(h.bins() == 30);
  h.add(-1000, false);
  h.add(-1000.1, true);
  h.add(250, true);
  h.add(299.99, false);
  h.add(2000, true);
  CHECK(h.all[0] == 1);
  CHECK(h.below == 1);
  CHECK(h.below_harsh == 1);
  CHECK(h.all[12] == 2);
  CHECK(h.harsh[12] == 1);
  CHECK(h.above_harsh == 1);
  CHECK(h.total() == 5);
  BrakeHistogram g;
  g.add(250, false);
  g.merge(h);
  CHECK(g.all[12] == 3);
  CHECK(g.total() == 6);
  CHECK(h.bin_lo(12) == 200);
}

TEST_CASE("type 7 quantiles") {
  const std::vector<double> x{1, 2, 3, 4};
  CHECK(quantile_sorted(x, 0.25) == doctest::Approx(1.75));
  CHECK(quantile_sorted(x, 0.5) == doctest::Approx(2.5));
  CHECK(quantile_sorted(x, 0.75) == doctest::Approx(3.25));
  CHECK(quantile_sorted(x, 1.0) == 4);
  CHECK(quantile_sorted(std::vector<double>{7}, 0.3) == 7);
  const std::vector<std::optional<double>> per{300.0, std::nullopt, 100.0, 200.0, 400.0, 500.0};
  const auto s = distance_stats(per);
  CHECK(s.n == 5);
  CHECK(s.excluded == 1);
  CHECK(s.median == 300);
  CHECK(s.q1 == 200);
  CHECK(s.q3 == 400);
}
