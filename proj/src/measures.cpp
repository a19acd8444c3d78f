#include "atma/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

namespace atma {

// ---------------------------------------------------------------------------
// Trimming and alignment

const FrameRecord& SessionDataset::at(std::int64_t frame) const {
  if (frames.empty() || frame < frames.front().i || frame > frames.back().i)
    throw std::out_of_range("frame " + std::to_string(frame) + " outside the trimmed session");
  return frames[static_cast<std::size_t>(frame - frames.front().i)];
}

std::pair<std::int64_t, std::int64_t> trim_bounds(std::span<const FrameRecord> sim, bool end_at_exit) {
  std::size_t first = 0;
  for (std::size_t k = 1; k < sim.size(); ++k) {
    if (sim[k].op.accel != sim[k - 1].op.accel) {
      first = k;
      break;
    }
  }
  if (first == 0) throw NoSessionError("accelerator input never changes; no session recorded");
  if (!end_at_exit) return {sim[first].i, sim.back().i};
  std::size_t last = first;
  for (std::size_t k = first + 1; k < sim.size(); ++k)
    if (sim[k].pos.p_e < sim[last].pos.p_e) last = k;
  return {sim[first].i, sim[last].i};
}

SessionDataset trim_and_align(std::span<const FrameRecord> sim, std::span<const GazeSample> gaze,
                              bool end_at_exit) {
  for (std::size_t k = 1; k < sim.size(); ++k)
    if (sim[k].i != sim[k - 1].i + 1) throw AnalysisError("simulation frames are not contiguous");

  const auto [start, end] = trim_bounds(sim, end_at_exit);
  const auto first = static_cast<std::size_t>(start - sim.front().i);
  const auto last = static_cast<std::size_t>(end - sim.front().i);

  SessionDataset ds;
  ds.start_frame = start;
  ds.end_frame = end;
  ds.frames.assign(sim.begin() + static_cast<std::ptrdiff_t>(first), sim.begin() + static_cast<std::ptrdiff_t>(last) + 1);
  std::vector<double> pre;
  pre.reserve(first);
  for (std::size_t k = 0; k < first; ++k) pre.push_back(sim[k].op.brake);
  ds.brake_rest = estimate_brake_rest(pre);

  ds.has_gaze = !gaze.empty();
  ds.stats.gaze_total = gaze.size();
  if (gaze.empty()) return ds;

  const double t0 = ds.frames.front().time_ms;
  const double t1 = ds.frames.back().time_ms;
  const double tol = kHalfFramePeriodMs + 1e-9;

  std::vector<double> times;
  times.reserve(ds.frames.size());
  for (const auto& f : ds.frames) times.push_back(f.time_ms);

  // Best candidate per frame: (|dt|, sample index).
  std::vector<std::pair<double, std::size_t>> best(ds.frames.size(), {std::numeric_limits<double>::infinity(), 0});
  double g_min = std::numeric_limits<double>::infinity();
  double g_max = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < gaze.size(); ++k) {
    const double t = gaze[k].t_ms;
    g_min = std::min(g_min, t);
    g_max = std::max(g_max, t);
    if (t < t0 - tol || t > t1 + tol) {
      ++ds.stats.outside_trim;
      continue;
    }
    auto it = std::lower_bound(times.begin(), times.end(), t);
    std::size_t idx = static_cast<std::size_t>(it - times.begin());
    if (idx == times.size() || (idx > 0 && t - times[idx - 1] <= times[idx] - t)) --idx;
    const double dt = std::abs(t - times[idx]);
    if (dt > tol) {
      ++ds.stats.unmatched;
      continue;
    }
    if (best[idx].first != std::numeric_limits<double>::infinity()) ++ds.stats.duplicates;
    if (dt < best[idx].first) best[idx] = {dt, k};
  }

  for (std::size_t idx = 0; idx < best.size(); ++idx) {
    if (best[idx].first == std::numeric_limits<double>::infinity()) continue;
    AlignedSample s;
    s.gaze = gaze[best[idx].second];
    s.frame = ds.frames[idx].i;
    s.frame_offset = idx;
    ds.gaze.push_back(s);
  }
  ds.stats.matched = ds.gaze.size();

  const double span = t1 - t0;
  const double overlap = std::min(t1, g_max) - std::max(t0, g_min);
  ds.stats.coverage = span > 0.0 ? std::clamp(overlap / span, 0.0, 1.0) : (overlap >= 0.0 ? 1.0 : 0.0);
  if (ds.stats.coverage < 0.5)
    throw AlignmentError("gaze covers only " + std::to_string(ds.stats.coverage * 100.0) +
                         "% of the trimmed session");
  return ds;
}

void attribute_gaze(SessionDataset& dataset, const AttributionParams& params) {
  std::vector<GazeSample> stream;
  stream.reserve(dataset.gaze.size());
  for (const auto& s : dataset.gaze) stream.push_back(s.gaze);
  const auto labels = ivt_classify(stream, params.ivt, params.screen);
  for (std::size_t k = 0; k < dataset.gaze.size(); ++k) {
    auto& s = dataset.gaze[k];
    s.label = labels[k];
    s.areas = gaze_area_flags(s.gaze, params.areas);
    s.objects = gaze_object_flags(s.gaze, dataset.frames[s.frame_offset].quads);
  }
}

// ---------------------------------------------------------------------------
// Brakes

double estimate_brake_rest(std::span<const double> pedal) {
  if (pedal.empty()) return 0.0;
  std::map<long long, std::size_t> counts;
  for (double v : pedal) ++counts[std::llround(v * 1000.0)];
  auto best = std::max_element(counts.begin(), counts.end(),
                               [](const auto& a, const auto& b) { return a.second < b.second; });
  return static_cast<double>(best->first) / 1000.0;
}

std::vector<BrakeEvent> detect_brakes(std::span<const double> pedal, std::span<const double> speed,
                                      std::int64_t first_frame, const BrakeParams& params) {
  if (!speed.empty() && speed.size() != pedal.size())
    throw std::invalid_argument("brake and speed series differ in length");
  const double threshold = params.rest + params.hysteresis;
  const std::size_t n = pedal.size();
  std::vector<BrakeEvent> out;
  std::size_t i = 0;
  while (i < n) {
    if (!(pedal[i] > threshold)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && pedal[j] > threshold) ++j;
    BrakeEvent e;
    e.start = first_frame + static_cast<std::int64_t>(i);
    e.duration = static_cast<std::int64_t>(j - i);
    const double seconds = static_cast<double>(e.duration) / kFps;
    const double release = j < n ? pedal[j] : params.rest;
    e.pedal_rate_mphps = (pedal[i] - release) * params.pedal_scale_mphps / seconds;
    e.harsh_pedal = e.pedal_rate_mphps > params.harsh_mphps;
    if (!speed.empty()) {
      const std::size_t k = std::min(j, n - 1);
      if (k > i) e.speed_rate_mphps = (speed[i] - speed[k]) / (static_cast<double>(k - i) / kFps);
    }
    e.harsh = e.speed_rate_mphps ? *e.speed_rate_mphps > params.harsh_mphps : e.harsh_pedal;
    out.push_back(e);
    i = j;
  }
  return out;
}

std::vector<BrakeEvent> detect_brakes(const SessionDataset& dataset, BrakeParams params) {
  std::vector<double> pedal, speed;
  pedal.reserve(dataset.frames.size());
  speed.reserve(dataset.frames.size());
  for (const auto& f : dataset.frames) {
    pedal.push_back(f.op.brake);
    speed.push_back(f.op.speed_mph);
  }
  params.rest = dataset.brake_rest;
  return detect_brakes(pedal, speed, dataset.start_frame, params);
}

// ---------------------------------------------------------------------------
// Lane changes

const char* to_string(LaneDirection d) { return d == LaneDirection::left ? "left" : "right"; }

LaneChangeDetection detect_lane_changes(std::span<const double> y, std::int64_t first_frame,
                                        const LaneChangeParams& params) {
  LaneChangeDetection out;
  const std::size_t n = y.size();
  if (n < 2) return out;
  auto center = [&](int lane) { return lane * params.lane_width_ft; };
  auto nearest = [&](double v) {
    return std::clamp(static_cast<int>(std::lround(v / params.lane_width_ft)), 0, params.lanes - 1);
  };
  auto sign = [](double v) { return (v > 0.0) - (v < 0.0); };

  int home = nearest(y[0]);
  bool moving = false;
  std::size_t start = 0;
  int dir = 0;
  for (std::size_t i = 1; i < n; ++i) {
    const double v_back = (y[i] - y[i - 1]) * kFps;
    if (!moving) {
      if (std::abs(y[i] - center(home)) > params.dead_band_ft && std::abs(v_back) > params.velocity_threshold_ftps) {
        dir = sign(v_back);
        std::size_t k = i;
        while (k > 1 && sign(y[k - 1] - y[k - 2]) == dir &&
               std::abs(y[k - 1] - y[k - 2]) * kFps > params.onset_velocity_ftps)
          --k;
        start = k;
        moving = true;
      }
      continue;
    }
    const int lane = nearest(y[i]);
    const double v_fwd = i + 1 < n ? (y[i + 1] - y[i]) * kFps : 0.0;
    if (std::abs(y[i] - center(lane)) <= params.dead_band_ft && std::abs(v_fwd) <= params.velocity_threshold_ftps) {
      LaneChange c;
      c.start = first_frame + static_cast<std::int64_t>(start);
      c.end = first_frame + static_cast<std::int64_t>(i);
      c.from_lane = home;
      c.to_lane = lane;
      c.direction = (lane > home || (lane == home && dir > 0)) ? LaneDirection::left : LaneDirection::right;
      (lane != home ? out.changes : out.aborts).push_back(c);
      home = lane;
      moving = false;
    }
  }
  if (moving) {
    LaneChange c;
    c.start = first_frame + static_cast<std::int64_t>(start);
    c.end = first_frame + static_cast<std::int64_t>(n - 1);
    c.from_lane = home;
    c.to_lane = std::clamp(home + dir, 0, params.lanes - 1);
    c.direction = dir > 0 ? LaneDirection::left : LaneDirection::right;
    c.truncated = true;
    out.changes.push_back(c);
  }
  return out;
}

LaneChangeDetection detect_lane_changes(const SessionDataset& dataset, const LaneChangeParams& params) {
  std::vector<double> y;
  y.reserve(dataset.frames.size());
  for (const auto& f : dataset.frames) y.push_back(f.lateral_ft);
  return detect_lane_changes(y, dataset.start_frame, params);
}

PassingPhase passing_phase(std::span<const LaneChange> changes, const SessionDataset& dataset) {
  auto inside = [&](std::int64_t f) {
    return !dataset.frames.empty() && f >= dataset.frames.front().i && f <= dataset.frames.back().i;
  };
  std::optional<std::int64_t> ts, te;
  for (const auto& c : changes) {
    if (inside(c.start) && dataset.at(c.start).pos.p_f > 0.0) ts = std::max(ts.value_or(c.start), c.start);
    if (inside(c.end) && dataset.at(c.end).pos.p_l < 0.0) te = std::min(te.value_or(c.end), c.end);
  }
  PassingPhase phase;
  if (ts) phase.t_s = *ts;
  if (te) phase.t_e = *te;
  phase.complete = ts && te && *ts < *te;
  return phase;
}

// ---------------------------------------------------------------------------
// Correlation

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 3) return std::nullopt;
  const double nn = static_cast<double>(n);
  double mx = 0.0, my = 0.0, sx = 1.0, sy = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
    sx = std::max(sx, std::abs(x[i]));
    sy = std::max(sy, std::abs(y[i]));
  }
  mx /= nn;
  my /= nn;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  // Variance indistinguishable from round-off counts as zero.
  const double tiny = 1e-10;
  if (sxx <= nn * (tiny * sx) * (tiny * sx) || syy <= nn * (tiny * sy) * (tiny * sy)) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<int> correlation_segment(const Positions& p) {
  if (p.p_f > 0.0) {
    if (p.p_f > kSegmentsPerSide * kSegmentFt) return std::nullopt;
    return -static_cast<int>(std::ceil(p.p_f / kSegmentFt));
  }
  if (p.p_l >= 0.0) return 0;
  if (-p.p_l > kSegmentsPerSide * kSegmentFt) return std::nullopt;
  return static_cast<int>(std::ceil(-p.p_l / kSegmentFt));
}

std::array<SegmentCorrelation, kSegmentCount> segment_correlations(std::span<const FrameRecord> frames) {
  std::array<std::vector<double>, kSegmentCount> speed, dist;
  for (const auto& f : frames) {
    const auto seg = correlation_segment(f.pos);
    if (!seg) continue;
    const auto k = static_cast<std::size_t>(*seg + kSegmentsPerSide);
    speed[k].push_back(f.op.speed_mph);
    dist[k].push_back(0.5 * (f.pos.p_f + f.pos.p_l));
  }
  std::array<SegmentCorrelation, kSegmentCount> out;
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].segment = static_cast<int>(k) - kSegmentsPerSide;
    out[k].sample_count = speed[k].size();
    out[k].r = pearson(speed[k], dist[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fixation proportions

const char* to_string(AtmaObject o) {
  switch (o) {
    case AtmaObject::follower: return "follower";
    case AtmaObject::follower_sign: return "follower_sign";
    case AtmaObject::lead: return "lead";
    case AtmaObject::lead_sign: return "lead_sign";
  }
  return "follower";
}

double approach_distance(AtmaObject object, const Positions& p) {
  if (object == AtmaObject::follower || object == AtmaObject::follower_sign) return p.p_f;
  return p.p_l - dims::kTruckLengthFt - dims::kCarLengthFt;
}

namespace {

bool flag_for(AtmaObject o, const ObjectFlags& m) {
  switch (o) {
    case AtmaObject::follower: return m.follower;
    case AtmaObject::follower_sign: return m.follower_sign;
    case AtmaObject::lead: return m.lead;
    case AtmaObject::lead_sign: return m.lead_sign;
  }
  return false;
}

}  // namespace

std::array<std::optional<double>, kProportionBins> session_proportions(const SessionDataset& dataset,
                                                                       AtmaObject object) {
  std::array<std::size_t, kProportionBins> total{}, hits{};
  for (const auto& s : dataset.gaze) {
    if (s.label != SampleLabel::fixation_point) continue;
    const double d = approach_distance(object, dataset.frames[s.frame_offset].pos);
    if (!(d > 0.0) || d > kProportionBins * kSegmentFt) continue;
    const auto bin = static_cast<std::size_t>(std::ceil(d / kSegmentFt)) - 1;
    ++total[bin];
    if (flag_for(object, s.objects)) ++hits[bin];
  }
  std::array<std::optional<double>, kProportionBins> out;
  for (std::size_t b = 0; b < out.size(); ++b)
    if (total[b] > 0) out[b] = static_cast<double>(hits[b]) / static_cast<double>(total[b]);
  return out;
}

std::array<ProportionEstimate, kProportionBins> cohort_proportions(
    std::span<const std::array<std::optional<double>, kProportionBins>> sessions) {
  std::array<ProportionEstimate, kProportionBins> out;
  for (int b = 0; b < kProportionBins; ++b) {
    std::vector<double> xs;
    for (const auto& s : sessions)
      if (s[static_cast<std::size_t>(b)]) xs.push_back(*s[static_cast<std::size_t>(b)]);
    auto& e = out[static_cast<std::size_t>(b)];
    e.bin = b;
    e.sessions = xs.size();
    if (xs.empty()) continue;
    const double n = static_cast<double>(xs.size());
    e.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    if (xs.size() > 1) {
      double ss = 0.0;
      for (double x : xs) ss += (x - e.mean) * (x - e.mean);
      e.half_width = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pupil test

std::optional<WelchResult> welch_one_sided(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) return std::nullopt;
  auto moments = [](std::span<const double> xs) {
    const double n = static_cast<double>(xs.size());
    const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::pair{m, ss / (n - 1.0)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());

  WelchResult r;
  r.mean_a = ma;
  r.mean_b = mb;
  r.n_a = a.size();
  r.n_b = b.size();
  const double qa = va / na;
  const double qb = vb / nb;
  const double se2 = qa + qb;
  if (!(se2 > 0.0)) {
    r.df = na + nb - 2.0;
    const double d = ma - mb;
    r.t = d > 0.0 ? std::numeric_limits<double>::infinity() : d < 0.0 ? -std::numeric_limits<double>::infinity() : 0.0;
    r.p = d > 0.0 ? 0.0 : d < 0.0 ? 1.0 : 0.5;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
  const boost::math::students_t_distribution<double> dist(r.df);
  r.p = boost::math::cdf(boost::math::complement(dist, r.t));
  return r;
}

PupilTestResult pupil_ttest(const SessionDataset& dataset, const PassingPhase& phase) {
  PupilTestResult out;
  if (!phase.complete) return out;
  std::vector<double> lp, ln, rp, rn;
  for (const auto& s : dataset.gaze) {
    const bool passing = phase.contains(s.frame);
    if (s.gaze.valid_left && s.gaze.pupil_left_mm && *s.gaze.pupil_left_mm > 0.0)
      (passing ? lp : ln).push_back(*s.gaze.pupil_left_mm);
    if (s.gaze.valid_right && s.gaze.pupil_right_mm && *s.gaze.pupil_right_mm > 0.0)
      (passing ? rp : rn).push_back(*s.gaze.pupil_right_mm);
  }
  if (auto r = welch_one_sided(lp, ln)) out.left = {true, *r};
  if (auto r = welch_one_sided(rp, rn)) out.right = {true, *r};
  return out;
}

// ---------------------------------------------------------------------------
// Gaze shifts

GazeShiftResult gaze_shift_patterns(std::span<const ObjectFlags> flags, std::optional<std::size_t> max_gap) {
  GazeShiftResult out;
  std::optional<std::size_t> last_truck_sample;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    const bool f = flags[i].on_follower_truck();
    const bool l = flags[i].on_lead_truck();
    if (f == l) continue;  // neither, or ambiguous
    const Truck truck = f ? Truck::follower : Truck::lead;
    const bool linked = last_truck_sample && (!max_gap || i - *last_truck_sample - 1 <= *max_gap);
    if (linked && out.runs.back().truck == truck) {
      out.runs.back().last = i;
    } else {
      out.runs.push_back({truck, i, i, linked});
      if (linked) ++out.shifts;
    }
    last_truck_sample = i;
  }
  out.any_shift = out.shifts > 0;
  for (std::size_t k = 0; k < out.runs.size(); ++k) {
    if (k > 0) out.pattern += out.runs[k].linked ? ">" : " | ";
    out.pattern += out.runs[k].truck == Truck::follower ? "FT" : "LT";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Heat maps

HeatGrid fixation_heatmap(std::span<const Fixation> fixations, int rows, int cols, const std::optional<Rect>& region) {
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("heat map grid must be at least 1x1");
  HeatGrid g;
  g.rows = rows;
  g.cols = cols;
  std::vector<double> ms(static_cast<std::size_t>(rows * cols), 0.0);
  for (const auto& f : fixations) {
    Point2 c = f.center;
    if (region) {
      if (!region->contains(c)) continue;
      const double w = region->x1 - region->x0;
      const double h = region->y1 - region->y0;
      c = {w > 0.0 ? (c.x - region->x0) / w : 0.0, h > 0.0 ? (c.y - region->y0) / h : 0.0};
    }
    const int col = std::clamp(static_cast<int>(std::floor(c.x * cols)), 0, cols - 1);
    const int row = std::clamp(static_cast<int>(std::floor(c.y * rows)), 0, rows - 1);
    ms[static_cast<std::size_t>(row * cols + col)] += f.duration_ms;
    g.total_ms += f.duration_ms;
  }
  g.percent.resize(ms.size(), 0.0);
  if (g.total_ms > 0.0)
    for (std::size_t k = 0; k < ms.size(); ++k) g.percent[k] = 100.0 * ms[k] / g.total_ms;
  return g;
}

PhaseHeatmaps fixation_heatmaps_by_phase(const SessionDataset& dataset, std::span<const Fixation> fixations,
                                         const PassingPhase& phase, int rows, int cols,
                                         const std::optional<Rect>& region) {
  std::vector<Fixation> in, out;
  for (const auto& f : fixations) {
    const std::size_t mid = (f.start + f.end) / 2;
    (phase.contains(dataset.gaze.at(mid).frame) ? in : out).push_back(f);
  }
  return {fixation_heatmap(in, rows, cols, region), fixation_heatmap(out, rows, cols, region)};
}

// ---------------------------------------------------------------------------
// Distance distributions

BrakeHistogram::BrakeHistogram() {
  const auto n = static_cast<std::size_t>(std::lround((hi_ft - lo_ft) / bin_ft));
  all.assign(n, 0);
  harsh.assign(n, 0);
}

void BrakeHistogram::add(double p_f, bool is_harsh) {
  if (p_f < lo_ft) {
    ++below;
    if (is_harsh) ++below_harsh;
    return;
  }
  if (p_f >= hi_ft) {
    ++above;
    if (is_harsh) ++above_harsh;
    return;
  }
  const auto k = std::min(all.size() - 1, static_cast<std::size_t>(std::floor((p_f - lo_ft) / bin_ft)));
  ++all[k];
  if (is_harsh) ++harsh[k];
}

void BrakeHistogram::merge(const BrakeHistogram& other) {
  for (std::size_t k = 0; k < all.size() && k < other.all.size(); ++k) {
    all[k] += other.all[k];
    harsh[k] += other.harsh[k];
  }
  below += other.below;
  above += other.above;
  below_harsh += other.below_harsh;
  above_harsh += other.above_harsh;
}

std::size_t BrakeHistogram::total() const {
  return std::accumulate(all.begin(), all.end(), std::size_t{0}) + below + above;
}

BrakeHistogram brake_distance_histogram(std::span<const BrakeEvent> brakes, const SessionDataset& dataset) {
  BrakeHistogram h;
  for (const auto& b : brakes) h.add(dataset.at(b.start).pos.p_f, b.harsh);
  return h;
}

std::optional<double> passing_change_distance(std::span<const LaneChange> changes, const PassingPhase& phase,
                                              const SessionDataset& dataset) {
  if (!phase.complete) return std::nullopt;
  for (const auto& c : changes)
    if (c.start == phase.t_s) return dataset.at(c.start).pos.p_f;
  return std::nullopt;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

DistanceStats distance_stats(std::span<const std::optional<double>> per_session) {
  std::vector<double> xs;
  DistanceStats s;
  for (const auto& v : per_session) {
    if (v)
      xs.push_back(*v);
    else
      ++s.excluded;
  }
  std::sort(xs.begin(), xs.end());
  s.n = xs.size();
  s.median = quantile_sorted(xs, 0.5);
  s.q1 = quantile_sorted(xs, 0.25);
  s.q3 = quantile_sorted(xs, 0.75);
  return s;
}

}  // namespace atma
