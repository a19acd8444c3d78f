#include "atma/report.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "text_util.hpp"

namespace atma {

using nlohmann::json;

MeasureFilter MeasureFilter::parse(const std::string& list) {
  MeasureFilter f{false, false, false, false, false, false, false, false, false};
  const std::pair<const char*, bool MeasureFilter::*> names[] = {
      {"brakes", &MeasureFilter::brakes},         {"lane_changes", &MeasureFilter::lane_changes},
      {"passing", &MeasureFilter::passing},       {"correlation", &MeasureFilter::correlation},
      {"proportions", &MeasureFilter::proportions}, {"pupils", &MeasureFilter::pupils},
      {"shifts", &MeasureFilter::shifts},         {"heatmaps", &MeasureFilter::heatmaps},
      {"distances", &MeasureFilter::distances}};
  for (auto part : text::split(list, ',')) {
    const auto name = text::trim(part);
    if (name.empty()) continue;
    if (name == "all") return all();
    bool found = false;
    for (const auto& [n, member] : names) {
      if (name == n) {
        f.*member = true;
        found = true;
      }
    }
    if (!found) throw ConfigError("unknown measure '" + std::string(name) + "'");
  }
  return f;
}

namespace {

constexpr AtmaObject kObjects[] = {AtmaObject::follower, AtmaObject::follower_sign, AtmaObject::lead,
                                   AtmaObject::lead_sign};

// Raw I-VT labels and fixations over a gaze stream without frames.
std::vector<Fixation> fixations_of(std::span<const GazeSample> stream, const SimulationConfig& cfg) {
  const auto labels = ivt_classify(stream, cfg.ivt, cfg.screen);
  return group_fixations(labels, stream, cfg.ivt.min_fixation_ms);
}

}  // namespace

std::vector<LaneChange> parse_lane_annotations(std::string_view csv, const SessionData& session) {
  const auto rows = parse_delimited(csv);
  if (rows.empty()) throw FormatError("lane annotation file is empty");
  auto col = [&](const char* name) -> std::optional<std::size_t> {
    for (std::size_t k = 0; k < rows[0].size(); ++k)
      if (text::trim(rows[0][k]) == name) return k;
    return std::nullopt;
  };
  const auto c_start = col("start"), c_end = col("end"), c_dir = col("direction");
  if (!c_start || !c_end) throw FormatError("lane annotations need 'start' and 'end' columns", 1);
  const auto& road = session.header.config.road;
  const bool lateral = session.header.channels.lateral;
  auto lane_at = [&](std::int64_t f) {
    f = std::clamp<std::int64_t>(f, 0, static_cast<std::int64_t>(session.frames.size()) - 1);
    return road.nearest_lane(session.frames[static_cast<std::size_t>(f)].lateral_ft);
  };
  std::vector<LaneChange> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    double s = 0.0, e = 0.0;
    if (rows[r].size() <= std::max(*c_start, *c_end) || !text::parse_double(rows[r][*c_start], s) ||
        !text::parse_double(rows[r][*c_end], e) || s > e)
      throw FormatError("bad lane annotation", r + 1);
    LaneChange c;
    c.start = static_cast<std::int64_t>(s);
    c.end = static_cast<std::int64_t>(e);
    std::string dir = c_dir && rows[r].size() > *c_dir ? std::string(text::trim(rows[r][*c_dir])) : "";
    if (lateral && !session.frames.empty()) {
      c.from_lane = lane_at(c.start - 1);
      c.to_lane = lane_at(c.end);
      if (dir.empty()) dir = c.to_lane >= c.from_lane ? "left" : "right";
    }
    if (dir != "left" && dir != "right") throw FormatError("lane annotation needs a direction", r + 1);
    c.direction = dir == "left" ? LaneDirection::left : LaneDirection::right;
    if (!lateral) {
      c.from_lane = c.direction == LaneDirection::left ? 0 : 1;
      c.to_lane = 1 - c.from_lane;
    }
    out.push_back(c);
  }
  std::sort(out.begin(), out.end(), [](const LaneChange& a, const LaneChange& b) { return a.start < b.start; });
  return out;
}

SessionAnalysis analyze_session(const SessionData& session, const std::string& name, const AnalysisOptions& options,
                                const std::optional<std::vector<LaneChange>>& manual_changes) {
  SessionAnalysis a;
  a.name = name;
  const auto& cfg = session.header.config;
  const auto& ch = session.header.channels;
  const auto& want = options.filter;
  a.volume = to_string(cfg.scenario.traffic_volume);
  a.gaze_source = session.header.gaze_source;
  a.channels = ch;
  const bool gaze = ch.gaze && !session.gaze.empty();

  auto absent = [&](const char* measure, bool selected, const std::string& why) {
    if (selected) a.absent[measure] = why;
  };

  if (!ch.operation || session.frames.empty()) {
    const std::string why = "session has no simulation channels";
    absent("brakes", want.brakes, why);
    absent("lane_changes", want.lane_changes, why);
    absent("passing", want.passing, why);
    absent("correlation", want.correlation, why);
    absent("proportions", want.proportions, why);
    absent("pupils", want.pupils, why);
    absent("shifts", want.shifts, why);
    absent("distances", want.distances, why);
    if (want.heatmaps) {
      if (gaze) {
        const auto fx = fixations_of(session.gaze, cfg);
        a.fixation_count = fx.size();
        a.heat_all = fixation_heatmap(fx, options.heat_rows, options.heat_cols);
      } else {
        absent("heatmaps", true, "session has no gaze");
      }
    }
    return a;
  }

  SessionDataset ds;
  try {
    ds = trim_and_align(session.frames, gaze ? std::span<const GazeSample>(session.gaze) : std::span<const GazeSample>{},
                        ch.positions);
  } catch (const AnalysisError& e) {
    a.error = e.what();
    return a;
  }
  if (gaze) attribute_gaze(ds, {cfg.ivt, cfg.screen, cfg.areas});
  a.start_frame = ds.start_frame;
  a.end_frame = ds.end_frame;
  a.frame_count = ds.frames.size();
  a.alignment = ds.stats;
  a.brake_rest = ds.brake_rest;

  if (want.brakes || want.distances) {
    a.brakes = detect_brakes(ds, options.brake);
    if (ch.positions)
      for (const auto& b : a.brakes) a.brake_p_f.push_back(ds.at(b.start).pos.p_f);
  }

  LaneChangeParams lane = options.lane;
  lane.lane_width_ft = cfg.road.lane_width_ft;
  lane.lanes = cfg.road.lanes_per_direction;
  const bool lanes_known = ch.lateral || manual_changes.has_value();
  if (manual_changes) {
    a.manual_lane_changes = true;
    for (const auto& c : *manual_changes)
      if (c.start >= ds.start_frame && c.end <= ds.end_frame) a.lanes.changes.push_back(c);
  } else if (lanes_known) {
    a.lanes = detect_lane_changes(ds, lane);
  }
  if (lanes_known) {
    if (ch.positions)
      for (const auto& c : a.lanes.changes) a.lane_p.emplace_back(ds.at(c.start).pos.p_f, ds.at(c.end).pos.p_l);
  } else {
    absent("lane_changes", want.lane_changes, "session has no lateral channel");
  }
  const bool phase_known = lanes_known && ch.positions;
  if (phase_known)
    a.phase = passing_phase(a.lanes.changes, ds);
  else
    absent("passing", want.passing, "passing needs lateral and position channels");

  if (want.correlation) {
    if (ch.positions)
      a.correlation = segment_correlations(ds.frames);
    else
      absent("correlation", true, "session has no position channel");
  }

  if (want.proportions) {
    if (gaze && ch.quads && ch.positions)
      for (auto obj : kObjects) a.proportions[obj] = session_proportions(ds, obj);
    else
      absent("proportions", true, "proportions need gaze, projected objects and positions");
  }

  if (want.pupils) {
    if (!gaze || !ch.pupils)
      absent("pupils", true, "session has no pupil channel");
    else if (!a.phase.complete)
      absent("pupils", true, "passing phase incomplete");
    else
      a.pupils = pupil_ttest(ds, a.phase);
  }

  if (want.shifts) {
    if (gaze && ch.quads) {
      std::vector<ObjectFlags> flags;
      flags.reserve(ds.gaze.size());
      for (const auto& s : ds.gaze) flags.push_back(s.objects);
      a.shifts = gaze_shift_patterns(flags, options.shift_max_gap);
    } else {
      absent("shifts", true, "shifts need gaze and projected objects");
    }
  }

  if (want.heatmaps) {
    if (gaze) {
      std::vector<GazeSample> stream;
      std::vector<SampleLabel> labels;
      for (const auto& s : ds.gaze) {
        stream.push_back(s.gaze);
        labels.push_back(s.label);
      }
      const auto fx = group_fixations(labels, stream, cfg.ivt.min_fixation_ms);
      a.fixation_count = fx.size();
      a.heat_all = fixation_heatmap(fx, options.heat_rows, options.heat_cols);
      if (a.phase.complete)
        a.heat_phase = fixation_heatmaps_by_phase(ds, fx, a.phase, options.heat_rows, options.heat_cols);
    } else {
      absent("heatmaps", true, "session has no gaze");
    }
  }

  if (want.distances) {
    if (ch.positions) {
      a.brake_hist = brake_distance_histogram(a.brakes, ds);
      if (lanes_known) a.change_distance = passing_change_distance(a.lanes.changes, a.phase, ds);
    } else {
      absent("distances", true, "session has no position channel");
    }
  }
  if (!want.brakes) a.brakes.clear(), a.brake_p_f.clear();
  return a;
}

// ---------------------------------------------------------------------------
// Cohort

namespace {

HeatGrid merge_heat(const std::vector<const HeatGrid*>& grids, int rows, int cols) {
  HeatGrid out;
  out.rows = rows;
  out.cols = cols;
  std::vector<double> ms(static_cast<std::size_t>(rows * cols), 0.0);
  for (const auto* g : grids) {
    if (g->rows != rows || g->cols != cols || g->percent.size() != ms.size()) continue;
    for (std::size_t k = 0; k < ms.size(); ++k) ms[k] += g->percent[k] / 100.0 * g->total_ms;
    out.total_ms += g->total_ms;
  }
  out.percent.assign(ms.size(), 0.0);
  if (out.total_ms > 0.0)
    for (std::size_t k = 0; k < ms.size(); ++k) out.percent[k] = 100.0 * ms[k] / out.total_ms;
  return out;
}

int r_bin(double r) {
  return std::clamp(static_cast<int>(std::floor((r + 1.0) / (2.0 / kCorrelationRBins))), 0, kCorrelationRBins - 1);
}

}  // namespace

CohortReport summarize_cohort(const std::vector<SessionAnalysis>& sessions, const AnalysisOptions& options) {
  CohortReport c;
  c.sessions = sessions.size();
  std::map<AtmaObject, std::vector<std::array<std::optional<double>, kProportionBins>>> props;
  std::vector<std::optional<double>> change;
  std::map<std::string, std::vector<std::optional<double>>> change_by_volume;
  std::vector<const HeatGrid*> hp, hn;
  for (const auto& s : sessions) {
    if (s.error) continue;
    ++c.analyzed;
    if (s.phase.complete) ++c.complete_passes;
    if (s.shifts.any_shift) ++c.sessions_with_shift;
    for (const auto& [obj, arr] : s.proportions) props[obj].push_back(arr);
    if (!s.absent.contains("correlation") && options.filter.correlation) {
      for (std::size_t k = 0; k < s.correlation.size(); ++k) {
        if (s.correlation[k].r)
          ++c.correlation_grid[static_cast<std::size_t>(r_bin(*s.correlation[k].r))][k];
        else
          ++c.correlation_undefined[k];
      }
    }
    c.brake_hist.merge(s.brake_hist);
    c.brake_hist_by_volume[s.volume].merge(s.brake_hist);
    if (!s.absent.contains("distances") && options.filter.distances) {
      change.push_back(s.change_distance);
      change_by_volume[s.volume].push_back(s.change_distance);
    }
    if (s.phase.complete && !s.heat_phase.passing.percent.empty()) {
      hp.push_back(&s.heat_phase.passing);
      hn.push_back(&s.heat_phase.non_passing);
    }
    if (s.pupils.left.available && s.pupils.left.result.p < 0.05) ++c.pupil_left_significant;
    if (s.pupils.right.available && s.pupils.right.result.p < 0.05) ++c.pupil_right_significant;
  }
  for (const auto& [obj, arrs] : props) c.proportions[obj] = cohort_proportions(arrs);
  c.change_distance = distance_stats(change);
  for (const auto& [volume, v] : change_by_volume) c.change_distance_by_volume[volume] = distance_stats(v);
  c.heat_passing = merge_heat(hp, options.heat_rows, options.heat_cols);
  c.heat_non_passing = merge_heat(hn, options.heat_rows, options.heat_cols);
  return c;
}

// ---------------------------------------------------------------------------
// Invariants

namespace {

void check_heat(const HeatGrid& g, const std::string& what, std::vector<std::string>& out) {
  if (g.total_ms <= 0.0) return;
  const double sum = std::accumulate(g.percent.begin(), g.percent.end(), 0.0);
  if (std::abs(sum - 100.0) > 1e-9) out.push_back(what + " shares sum to " + text::fmt_g(sum));
  for (double p : g.percent)
    if (p < 0.0 || p > 100.0) out.push_back(what + " share out of range");
}

}  // namespace

std::vector<std::string> check_invariants(const SessionAnalysis& a) {
  std::vector<std::string> v;
  if (a.error) return v;
  if (a.start_frame > a.end_frame) v.push_back("trim start after end");
  if (a.frame_count != static_cast<std::size_t>(a.end_frame - a.start_frame + 1) && a.frame_count != 0)
    v.push_back("trimmed frame count disagrees with bounds");
  std::int64_t prev_end = a.start_frame - 1;
  for (const auto& b : a.brakes) {
    if (b.duration <= 0) v.push_back("brake with non-positive duration");
    if (b.start <= prev_end) v.push_back("overlapping brake events");
    if (b.start < a.start_frame || b.start + b.duration - 1 > a.end_frame) v.push_back("brake outside the session");
    prev_end = b.start + b.duration - 1;
  }
  for (const auto& c : a.lanes.changes) {
    if (c.start > c.end) v.push_back("lane change ends before it starts");
    if (c.start < a.start_frame || c.end > a.end_frame) v.push_back("lane change outside the session");
  }
  if (a.phase.complete) {
    if (a.phase.t_s >= a.phase.t_e) v.push_back("passing phase not ordered");
    bool ts_ok = false, te_ok = false;
    for (std::size_t k = 0; k < a.lanes.changes.size() && k < a.lane_p.size(); ++k) {
      if (a.lanes.changes[k].start == a.phase.t_s && a.lane_p[k].first > 0.0) ts_ok = true;
      if (a.lanes.changes[k].end == a.phase.t_e && a.lane_p[k].second < 0.0) te_ok = true;
    }
    if (!ts_ok) v.push_back("passing start lacks p_f > 0");
    if (!te_ok) v.push_back("passing end lacks p_l < 0");
  }
  std::size_t corr_n = 0;
  for (std::size_t k = 0; k < a.correlation.size(); ++k) {
    const auto& s = a.correlation[k];
    corr_n += s.sample_count;
    if (s.segment != static_cast<int>(k) - kSegmentsPerSide) v.push_back("correlation segment mislabeled");
    if (s.r && (*s.r < -1.0 || *s.r > 1.0)) v.push_back("correlation out of [-1, 1]");
    if (s.r && s.sample_count < 3) v.push_back("correlation defined on fewer than 3 samples");
  }
  if (corr_n > a.frame_count) v.push_back("correlation samples exceed frames");
  for (const auto& [obj, arr] : a.proportions)
    for (const auto& p : arr)
      if (p && (*p < 0.0 || *p > 1.0)) v.push_back(std::string("proportion out of range for ") + to_string(obj));
  for (const auto* eye : {&a.pupils.left, &a.pupils.right})
    if (eye->available && (eye->result.p < 0.0 || eye->result.p > 1.0)) v.push_back("pupil p-value out of range");
  std::size_t shifts = 0;
  for (std::size_t k = 1; k < a.shifts.runs.size(); ++k) {
    const auto& r = a.shifts.runs[k];
    if (r.linked && r.truck != a.shifts.runs[k - 1].truck) ++shifts;
    if (r.linked && r.truck == a.shifts.runs[k - 1].truck) v.push_back("adjacent runs on the same truck");
  }
  if (shifts != a.shifts.shifts) v.push_back("shift count disagrees with runs");
  check_heat(a.heat_all, "heat map", v);
  check_heat(a.heat_phase.passing, "passing heat map", v);
  check_heat(a.heat_phase.non_passing, "non-passing heat map", v);
  if (!a.absent.contains("distances") && a.brake_hist.total() != a.brake_p_f.size() && !a.brakes.empty())
    v.push_back("brake histogram count disagrees with brakes");
  return v;
}

std::vector<std::string> check_invariants(const CohortReport& c) {
  std::vector<std::string> v;
  if (c.analyzed > c.sessions) v.push_back("more analyzed sessions than sessions");
  for (std::size_t k = 0; k < kSegmentCount; ++k) {
    std::size_t n = c.correlation_undefined[k];
    for (const auto& row : c.correlation_grid) n += row[k];
    if (n > c.analyzed) v.push_back("correlation grid column overfull");
  }
  for (const auto& [obj, arr] : c.proportions)
    for (const auto& e : arr)
      if (e.sessions > c.analyzed || e.mean < 0.0 || e.mean > 1.0 || e.half_width < 0.0)
        v.push_back(std::string("cohort proportion invalid for ") + to_string(obj));
  check_heat(c.heat_passing, "cohort passing heat map", v);
  check_heat(c.heat_non_passing, "cohort non-passing heat map", v);
  if (c.change_distance.q1 > c.change_distance.median || c.change_distance.median > c.change_distance.q3)
    v.push_back("change distance quartiles out of order");
  return v;
}

// ---------------------------------------------------------------------------
// Bundle

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_row(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (k) out += ',';
    out += csv_field(cells[k]);
  }
  return out + "\r\n";
}

namespace {

struct Table {
  std::vector<std::string> names;
  std::vector<std::string> units;
  std::vector<std::vector<std::string>> rows = {};

  std::string render() const {
    std::string out = csv_row(names) + csv_row(units);
    for (const auto& r : rows) out += csv_row(r);
    return out;
  }
};

std::string num(double v) { return std::isfinite(v) ? text::fmt_g(v) : (v > 0 ? "inf" : v < 0 ? "-inf" : "nan"); }
std::string opt(const std::optional<double>& v) { return v ? num(*v) : ""; }
// Distances in feet carry two decimals, p-values are scientific.
std::string ft(double v) { return std::isfinite(v) ? text::fmt_fixed(v, 2) : num(v); }
std::string opt_ft(const std::optional<double>& v) { return v ? ft(*v) : ""; }
std::string pval(double v) { return std::isfinite(v) ? text::fmt_sci(v) : num(v); }
std::string b01(bool b) { return b ? "1" : "0"; }
std::string i64(std::int64_t v) { return std::to_string(v); }

json jnum(double v) { return std::isfinite(v) ? json(v) : json(v > 0 ? "inf" : v < 0 ? "-inf" : "nan"); }
json jopt(const std::optional<double>& v) { return v ? jnum(*v) : json(nullptr); }

void heat_rows(Table& t, const std::string& scope, const std::string& phase, const HeatGrid& g) {
  if (g.percent.empty()) return;
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) t.rows.push_back({scope, phase, i64(r), i64(c), num(g.at(r, c)), num(g.total_ms)});
}

}  // namespace

std::vector<std::string> write_report_bundle(const std::string& out_dir, const std::vector<SessionAnalysis>& sessions,
                                             const CohortReport& cohort, const AnalysisOptions& options) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir + "': " + ec.message());
  const auto& want = options.filter;
  std::vector<std::string> written;
  json tables = json::object();

  auto emit = [&](const std::string& file, const Table& t) {
    const auto path = (fs::path(out_dir) / file).string();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << t.render();
    written.push_back(path);
    tables[file] = "written";
  };
  // A table is absent when no session could supply it.
  auto available = [&](const char* measure) {
    return std::any_of(sessions.begin(), sessions.end(),
                       [&](const SessionAnalysis& s) { return !s.error && !s.absent.contains(measure); });
  };
  auto emit_or_absent = [&](const char* measure, const std::string& file, const Table& t) {
    if (available(measure))
      emit(file, t);
    else
      tables[file] = "absent";
  };

  {
    Table t{{"session", "volume", "gaze_source", "start_frame", "end_frame", "frames", "gaze_matched", "brakes",
             "harsh_brakes", "lane_changes", "aborts", "passing_complete", "t_s", "t_e", "change_distance",
             "shift_pattern", "shifts", "error"},
            {"", "", "", "frame", "frame", "count", "count", "count", "count", "count", "count", "bool", "frame",
             "frame", "ft", "", "count", ""}};
    for (const auto& s : sessions) {
      const auto harsh = std::count_if(s.brakes.begin(), s.brakes.end(), [](const BrakeEvent& b) { return b.harsh; });
      t.rows.push_back({s.name, s.volume, s.gaze_source, i64(s.start_frame), i64(s.end_frame), i64(s.frame_count),
                        i64(s.alignment.matched), i64(s.brakes.size()), i64(harsh), i64(s.lanes.changes.size()),
                        i64(s.lanes.aborts.size()), b01(s.phase.complete), s.phase.complete ? i64(s.phase.t_s) : "",
                        s.phase.complete ? i64(s.phase.t_e) : "", opt_ft(s.change_distance), s.shifts.pattern,
                        i64(s.shifts.shifts), s.error.value_or("")});
    }
    emit("sessions.csv", t);
  }

  if (want.brakes) {
    Table t{{"session", "start", "duration", "p_f_start", "speed_rate", "pedal_rate", "harsh", "harsh_pedal"},
            {"", "frame", "frame", "ft", "mph/s", "mph/s", "bool", "bool"}};
    for (const auto& s : sessions)
      for (std::size_t k = 0; k < s.brakes.size(); ++k) {
        const auto& b = s.brakes[k];
        t.rows.push_back({s.name, i64(b.start), i64(b.duration), k < s.brake_p_f.size() ? ft(s.brake_p_f[k]) : "",
                          opt(b.speed_rate_mphps), num(b.pedal_rate_mphps), b01(b.harsh), b01(b.harsh_pedal)});
      }
    emit_or_absent("brakes", "brakes.csv", t);
  }

  if (want.lane_changes) {
    Table t{{"session", "start", "end", "direction", "from_lane", "to_lane", "truncated", "aborted", "p_f_start",
             "p_l_end"},
            {"", "frame", "frame", "", "lane", "lane", "bool", "bool", "ft", "ft"}};
    for (const auto& s : sessions) {
      for (std::size_t k = 0; k < s.lanes.changes.size(); ++k) {
        const auto& c = s.lanes.changes[k];
        t.rows.push_back({s.name, i64(c.start), i64(c.end), to_string(c.direction), i64(c.from_lane), i64(c.to_lane),
                          b01(c.truncated), "0", k < s.lane_p.size() ? ft(s.lane_p[k].first) : "",
                          k < s.lane_p.size() ? ft(s.lane_p[k].second) : ""});
      }
      for (const auto& c : s.lanes.aborts)
        t.rows.push_back({s.name, i64(c.start), i64(c.end), to_string(c.direction), i64(c.from_lane), i64(c.to_lane),
                          "0", "1", "", ""});
    }
    emit_or_absent("lane_changes", "lane_changes.csv", t);
  }

  if (want.passing) {
    Table t{{"session", "complete", "t_s", "t_e", "duration"}, {"", "bool", "frame", "frame", "s"}};
    for (const auto& s : sessions) {
      if (s.error || s.absent.contains("passing")) continue;
      const auto& p = s.phase;
      t.rows.push_back({s.name, b01(p.complete), p.complete ? i64(p.t_s) : "", p.complete ? i64(p.t_e) : "",
                        p.complete ? num(static_cast<double>(p.t_e - p.t_s) / kFps) : ""});
    }
    emit_or_absent("passing", "passing.csv", t);
  }

  if (want.correlation) {
    Table t{{"session", "segment", "from_ft", "to_ft", "samples", "r"}, {"", "", "ft", "ft", "count", "1"}};
    for (const auto& s : sessions) {
      if (s.error || s.absent.contains("correlation")) continue;
      for (const auto& c : s.correlation) {
        const double lo = (std::abs(c.segment) - 1) * kSegmentFt;
        const std::string from = c.segment == 0 ? "" : ft(lo);
        const std::string to = c.segment == 0 ? "" : ft(lo + kSegmentFt);
        t.rows.push_back({s.name, i64(c.segment), from, to, i64(c.sample_count), opt(c.r)});
      }
    }
    emit_or_absent("correlation", "correlation.csv", t);

    Table g{{"r_from", "r_to"}, {"1", "1"}};
    for (int k = -kSegmentsPerSide; k <= kSegmentsPerSide; ++k) {
      g.names.push_back("segment_" + std::to_string(k));
      g.units.push_back("count");
    }
    for (int r = kCorrelationRBins - 1; r >= 0; --r) {
      std::vector<std::string> row{num(-1.0 + r * 2.0 / kCorrelationRBins), num(-1.0 + (r + 1) * 2.0 / kCorrelationRBins)};
      for (std::size_t k = 0; k < kSegmentCount; ++k) row.push_back(i64(cohort.correlation_grid[static_cast<std::size_t>(r)][k]));
      g.rows.push_back(row);
    }
    std::vector<std::string> undef{"undefined", ""};
    for (auto n : cohort.correlation_undefined) undef.push_back(i64(n));
    g.rows.push_back(undef);
    emit_or_absent("correlation", "correlation_grid.csv", g);
  }

  if (want.proportions) {
    Table t{{"object", "bin", "from_ft", "to_ft", "sessions", "mean", "ci95_half_width"},
            {"", "", "ft", "ft", "count", "fraction", "fraction"}};
    for (const auto& [obj, arr] : cohort.proportions)
      for (const auto& e : arr)
        t.rows.push_back({to_string(obj), i64(e.bin), ft(e.bin * kSegmentFt), ft((e.bin + 1) * kSegmentFt),
                          i64(e.sessions), num(e.mean), num(e.half_width)});
    emit_or_absent("proportions", "proportions.csv", t);

    Table ps{{"session", "object", "bin", "proportion"}, {"", "", "", "fraction"}};
    for (const auto& s : sessions)
      for (const auto& [obj, arr] : s.proportions)
        for (std::size_t b = 0; b < arr.size(); ++b) ps.rows.push_back({s.name, to_string(obj), i64(static_cast<std::int64_t>(b)), opt(arr[b])});
    emit_or_absent("proportions", "proportions_sessions.csv", ps);
  }

  if (want.pupils) {
    Table t{{"session", "eye", "available", "mean_passing", "mean_other", "n_passing", "n_other", "t", "df", "p"},
            {"", "", "bool", "mm", "mm", "count", "count", "1", "1", "1"}};
    for (const auto& s : sessions) {
      if (s.error || s.absent.contains("pupils")) continue;
      for (const auto& [eye, test] : {std::pair{"left", &s.pupils.left}, std::pair{"right", &s.pupils.right}}) {
        const auto& r = test->result;
        if (!test->available) {
          t.rows.push_back({s.name, eye, "0", "", "", "", "", "", "", ""});
          continue;
        }
        t.rows.push_back({s.name, eye, "1", num(r.mean_a), num(r.mean_b), i64(r.n_a), i64(r.n_b), num(r.t), num(r.df),
                          pval(r.p)});
      }
    }
    emit_or_absent("pupils", "pupils.csv", t);
  }

  if (want.shifts) {
    Table t{{"session", "runs", "shifts", "any_shift", "pattern"}, {"", "count", "count", "bool", ""}};
    for (const auto& s : sessions) {
      if (s.error || s.absent.contains("shifts")) continue;
      t.rows.push_back({s.name, i64(s.shifts.runs.size()), i64(s.shifts.shifts), b01(s.shifts.any_shift), s.shifts.pattern});
    }
    emit_or_absent("shifts", "shifts.csv", t);
  }

  if (want.heatmaps) {
    Table t{{"scope", "phase", "row", "col", "percent", "total_duration"}, {"", "", "", "", "%", "ms"}};
    heat_rows(t, "cohort", "passing", cohort.heat_passing);
    heat_rows(t, "cohort", "non_passing", cohort.heat_non_passing);
    for (const auto& s : sessions) {
      if (s.error || s.absent.contains("heatmaps")) continue;
      heat_rows(t, s.name, "all", s.heat_all);
      if (s.phase.complete) {
        heat_rows(t, s.name, "passing", s.heat_phase.passing);
        heat_rows(t, s.name, "non_passing", s.heat_phase.non_passing);
      }
    }
    emit_or_absent("heatmaps", "heatmap.csv", t);
  }

  if (want.distances) {
    Table t{{"volume", "bin", "from_ft", "to_ft", "brakes", "harsh_brakes"}, {"", "", "ft", "ft", "count", "count"}};
    auto hist_rows = [&](const std::string& volume, const BrakeHistogram& h) {
      t.rows.push_back({volume, "below", "", ft(h.lo_ft), i64(h.below), i64(h.below_harsh)});
      for (std::size_t k = 0; k < h.bins(); ++k)
        t.rows.push_back({volume, i64(static_cast<std::int64_t>(k)), ft(h.bin_lo(k)), ft(h.bin_lo(k) + h.bin_ft),
                          i64(h.all[k]), i64(h.harsh[k])});
      t.rows.push_back({volume, "above", ft(h.hi_ft), "", i64(h.above), i64(h.above_harsh)});
    };
    hist_rows("all", cohort.brake_hist);
    for (const auto& [volume, h] : cohort.brake_hist_by_volume) hist_rows(volume, h);
    emit_or_absent("distances", "brake_distance.csv", t);

    Table c{{"session", "volume", "p_f_at_change"}, {"", "", "ft"}};
    for (const auto& s : sessions)
      if (!s.error && !s.absent.contains("distances")) c.rows.push_back({s.name, s.volume, opt_ft(s.change_distance)});
    emit_or_absent("distances", "change_distance.csv", c);

    Table cs{{"volume", "n", "excluded", "median", "q1", "q3"}, {"", "count", "count", "ft", "ft", "ft"}};
    auto stat_row = [&](const std::string& volume, const DistanceStats& d) {
      const bool any = d.n > 0;
      cs.rows.push_back({volume, i64(static_cast<std::int64_t>(d.n)), i64(static_cast<std::int64_t>(d.excluded)),
                         any ? ft(d.median) : "", any ? ft(d.q1) : "", any ? ft(d.q3) : ""});
    };
    stat_row("all", cohort.change_distance);
    for (const auto& [volume, d] : cohort.change_distance_by_volume) stat_row(volume, d);
    emit_or_absent("distances", "change_distance_summary.csv", cs);
  }

  // Summary.
  json j;
  j["type"] = "atma-report";
  j["sessions"] = json::array();
  for (const auto& s : sessions) {
    json e{{"name", s.name}, {"volume", s.volume}, {"gaze_source", s.gaze_source}};
    if (s.error) {
      e["error"] = *s.error;
      j["sessions"].push_back(e);
      continue;
    }
    e["start_frame"] = s.start_frame;
    e["end_frame"] = s.end_frame;
    e["gaze"] = {{"total", s.alignment.gaze_total},   {"matched", s.alignment.matched},
                 {"outside_trim", s.alignment.outside_trim}, {"unmatched", s.alignment.unmatched},
                 {"duplicates", s.alignment.duplicates}, {"coverage", s.alignment.coverage}};
    e["brakes"] = s.brakes.size();
    e["harsh_brakes"] = std::count_if(s.brakes.begin(), s.brakes.end(), [](const BrakeEvent& b) { return b.harsh; });
    e["lane_changes"] = s.lanes.changes.size();
    e["passing"] = {{"complete", s.phase.complete}};
    if (s.phase.complete) {
      e["passing"]["t_s"] = s.phase.t_s;
      e["passing"]["t_e"] = s.phase.t_e;
    }
    e["change_distance_ft"] = jopt(s.change_distance);
    e["shift_pattern"] = s.shifts.pattern;
    e["any_shift"] = s.shifts.any_shift;
    for (const auto& [eye, test] : {std::pair{"pupil_left", &s.pupils.left}, std::pair{"pupil_right", &s.pupils.right}})
      if (test->available) e[eye] = {{"t", jnum(test->result.t)}, {"df", jnum(test->result.df)}, {"p", jnum(test->result.p)}};
    e["absent"] = s.absent;
    const auto violations = check_invariants(s);
    e["invariant_violations"] = violations;
    j["sessions"].push_back(e);
  }
  json cj;
  cj["sessions"] = cohort.sessions;
  cj["analyzed"] = cohort.analyzed;
  cj["complete_passes"] = cohort.complete_passes;
  cj["sessions_with_shift"] = cohort.sessions_with_shift;
  cj["pupil_left_significant"] = cohort.pupil_left_significant;
  cj["pupil_right_significant"] = cohort.pupil_right_significant;
  cj["brakes"] = cohort.brake_hist.total();
  cj["change_distance"] = {{"n", cohort.change_distance.n},
                           {"excluded", cohort.change_distance.excluded},
                           {"median_ft", cohort.change_distance.median},
                           {"q1_ft", cohort.change_distance.q1},
                           {"q3_ft", cohort.change_distance.q3}};
  for (const auto& [volume, d] : cohort.change_distance_by_volume)
    cj["change_distance_by_volume"][volume] = {
        {"n", d.n}, {"excluded", d.excluded}, {"median_ft", d.median}, {"q1_ft", d.q1}, {"q3_ft", d.q3}};
  for (const auto& [volume, h] : cohort.brake_hist_by_volume) {
    std::size_t harsh = h.below_harsh + h.above_harsh;
    for (auto n : h.harsh) harsh += n;
    cj["brakes_by_volume"][volume] = {{"brakes", h.total()}, {"harsh", harsh}};
  }
  cj["invariant_violations"] = check_invariants(cohort);
  j["cohort"] = cj;
  j["tables"] = tables;

  const auto path = (fs::path(out_dir) / "report.json").string();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
  written.push_back(path);
  return written;
}

std::string render_report(const std::string& report_json_text) {
  json j;
  try {
    j = json::parse(report_json_text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("report.json: ") + e.what());
  }
  if (j.value("type", "") != "atma-report") throw FormatError("not an atma report");
  std::string out;
  const auto& c = j.at("cohort");
  out += "sessions: " + std::to_string(c.at("sessions").get<int>()) + " (" +
         std::to_string(c.at("analyzed").get<int>()) + " analyzed)\n";
  out += "complete passes: " + std::to_string(c.at("complete_passes").get<int>()) + "\n";
  out += "sessions with a gaze shift between trucks: " + std::to_string(c.at("sessions_with_shift").get<int>()) + "\n";
  out += "brakes: " + std::to_string(c.at("brakes").get<int>()) + "\n";
  const auto& cd = c.at("change_distance");
  if (cd.at("n").get<int>() > 0)
    out += "lane change distance to follower: median " + text::fmt_fixed(cd.at("median_ft").get<double>(), 1) +
           " ft (IQR " + text::fmt_fixed(cd.at("q1_ft").get<double>(), 1) + " to " +
           text::fmt_fixed(cd.at("q3_ft").get<double>(), 1) + "), n = " + std::to_string(cd.at("n").get<int>()) + "\n";
  out += "pupil left/right significant at 0.05: " + std::to_string(c.at("pupil_left_significant").get<int>()) + " / " +
         std::to_string(c.at("pupil_right_significant").get<int>()) + "\n";
  out += "\n";
  for (const auto& s : j.at("sessions")) {
    out += s.at("name").get<std::string>() + " [" + s.at("volume").get<std::string>() + "]";
    if (s.contains("error")) {
      out += ": " + s.at("error").get<std::string>() + "\n";
      continue;
    }
    out += ": " + std::to_string(s.at("brakes").get<int>()) + " brakes, " +
           std::to_string(s.at("lane_changes").get<int>()) + " lane changes, pass " +
           (s.at("passing").at("complete").get<bool>() ? "complete" : "incomplete");
    const auto pattern = s.at("shift_pattern").get<std::string>();
    if (!pattern.empty()) out += ", gaze " + pattern;
    out += "\n";
  }
  for (auto it = j.at("tables").begin(); it != j.at("tables").end(); ++it)
    if (it.value() == "absent") out += "table " + it.key() + ": absent\n";
  return out;
}

}  // namespace atma
