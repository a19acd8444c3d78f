#include "atma/cli.hpp"

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <thread>

#include <CLI11.hpp>

#include "atma/agents.hpp"
#include "atma/report.hpp"
#include "atma/serve.hpp"
#include "atma/session_io.hpp"
#include "text_util.hpp"

namespace atma {

namespace fs = std::filesystem;

namespace {

struct SimulateArgs {
  std::string config, script, gaze_profile, out = ".";
  std::optional<std::uint64_t> seed;
  std::string volumes;
};

struct AnalyzeArgs {
  std::vector<std::string> sessions;
  std::string session_dir, out_dir = "report", measure = "all", ingest_map;
  std::optional<std::size_t> shift_max_gap;
};

struct ReportArgs {
  std::string bundle, out;
};

struct ServeArgs {
  std::string config, address = "127.0.0.1", out_dir = ".";
  unsigned short port = 8765;
  double duration_s = 0.0;
};

int simulate(const SimulateArgs& a, std::ostream& out) {
  SimulationConfig config = a.config.empty() ? SimulationConfig{} : load_simulation_config(a.config);
  const DriverScript script = load_driver_script(a.script);
  std::optional<GazeProfile> profile;
  if (!a.gaze_profile.empty()) profile = load_gaze_profile(a.gaze_profile);
  if (a.seed) config.scenario.seed = *a.seed;

  std::vector<TrafficVolume> volumes;
  if (a.volumes.empty()) {
    volumes.push_back(config.scenario.traffic_volume);
  } else {
    for (auto v : text::split(a.volumes, ',')) volumes.push_back(parse_traffic_volume(std::string(text::trim(v))));
  }
  config.validate();

  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) throw IoError("cannot create '" + a.out + "': " + ec.message());
  const auto stem = fs::path(a.script).stem().string();
  for (auto volume : volumes) {
    SimulationConfig c = config;
    c.scenario.traffic_volume = volume;
    const auto run = run_scripted_session(c, script, profile);
    const auto base = fs::path(a.out) / (stem + "-" + to_string(volume) + "-s" + std::to_string(c.scenario.seed));
    write_session(session_from_run(run), base.string() + ".ndjson");
    write_ledger(run.ledger, base.string() + ".ledger.json");
    out << base.string() << ".ndjson: " << run.frames.size() << " frames, " << run.gaze.size() << " gaze samples"
        << (run.reached_exit ? "" : ", exit not reached") << "\n";
  }
  return kExitOk;
}

int analyze(const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
  AnalysisOptions options;
  options.filter = MeasureFilter::parse(a.measure);
  options.shift_max_gap = a.shift_max_gap;

  std::vector<std::string> paths = a.sessions;
  if (!a.session_dir.empty()) {
    if (!fs::is_directory(a.session_dir)) {
      err << "error: '" << a.session_dir << "' is not a directory\n";
      return kExitConfig;
    }
    std::vector<std::string> found;
    for (const auto& e : fs::directory_iterator(a.session_dir))
      if (e.path().extension() == ".ndjson") found.push_back(e.path().string());
    std::sort(found.begin(), found.end());
    paths.insert(paths.end(), found.begin(), found.end());
  }
  if (paths.empty()) {
    err << "error: no sessions given\n";
    return kExitConfig;
  }
  std::optional<ColumnMap> map;
  if (!a.ingest_map.empty()) map = ColumnMap::parse(read_text_file(a.ingest_map));

  std::vector<SessionAnalysis> results;
  for (const auto& p : paths) {
    SessionData data;
    std::optional<std::vector<LaneChange>> manual;
    try {
      const auto ext = fs::path(p).extension().string();
      if (ext == ".csv" || ext == ".tsv" || ext == ".txt") {
        if (!map) throw ConfigError("'" + p + "' is a delimited export; pass --ingest-map");
        data = ingest_external(p, *map);
      } else {
        data = read_session(p);
      }
      // Manual labels next to the session override lane-change detection.
      const auto sidecar = fs::path(p).replace_extension(".lanes.csv");
      if (fs::exists(sidecar)) manual = parse_lane_annotations(read_text_file(sidecar.string()), data);
    } catch (const std::exception& e) {
      err << "error: " << p << ": " << e.what() << "\n";
      return kExitConfig;
    }
    results.push_back(analyze_session(data, fs::path(p).stem().string(), options, manual));
    const auto& r = results.back();
    if (r.error) out << r.name << ": not analyzed (" << *r.error << ")\n";
    else if (!r.phase.complete && !r.absent.contains("passing")) out << r.name << ": passing phase incomplete\n";
  }
  const auto cohort = summarize_cohort(results, options);
  const auto files = write_report_bundle(a.out_dir, results, cohort, options);
  out << "wrote " << files.size() << " files to " << a.out_dir << "\n";
  return kExitOk;
}

int report(const ReportArgs& a, std::ostream& out) {
  const auto text = read_text_file((fs::path(a.bundle) / "report.json").string());
  const auto rendered = render_report(text);
  if (a.out.empty()) {
    out << rendered;
  } else {
    std::ofstream f(a.out, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write '" + a.out + "'");
    f << rendered;
  }
  return kExitOk;
}

int serve(const ServeArgs& a, std::ostream& out) {
  ServeOptions options;
  options.config = a.config.empty() ? SimulationConfig{} : load_simulation_config(a.config);
  options.address = a.address;
  options.port = a.port;
  options.out_dir = a.out_dir;
  options.on_session_written = [&out](const std::string& path) { out << "session written: " << path << std::endl; };

  // Signals are taken synchronously by a watcher thread; the server is only
  // ever touched through its thread-safe stop().
  sigset_t set, old;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, &old);

  std::unique_ptr<Server> server;
  try {
    server = std::make_unique<Server>(options);
  } catch (...) {
    pthread_sigmask(SIG_SETMASK, &old, nullptr);
    throw;
  }
  out << "listening on ws://" << a.address << ":" << server->port() << std::endl;

  std::atomic<bool> done{false};
  std::thread watcher([&] {
    const auto start = std::chrono::steady_clock::now();
    const timespec poll{0, 100'000'000};
    while (!done) {
      if (sigtimedwait(&set, nullptr, &poll) > 0) break;
      if (a.duration_s > 0.0 &&
          std::chrono::steady_clock::now() - start >= std::chrono::duration<double>(a.duration_s))
        break;
    }
    server->stop();
  });
  server->run();
  done = true;
  watcher.join();
  pthread_sigmask(SIG_SETMASK, &old, nullptr);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Work-zone ATMA driving simulator and gaze analysis"};
  app.name("atma");
  app.require_subcommand(1, 1);

  SimulateArgs sim;
  auto* cmd_sim = app.add_subcommand("simulate", "Run scripted sessions and write session files and ledgers");
  cmd_sim->add_option("--config", sim.config, "Scenario config file (defaults when omitted)");
  cmd_sim->add_option("--script", sim.script, "Driver script")->required();
  cmd_sim->add_option("--gaze-profile", sim.gaze_profile, "Synthetic gaze profile");
  cmd_sim->add_option("--seed", sim.seed, "Override the scenario seed");
  cmd_sim->add_option("--volumes", sim.volumes, "Comma-separated traffic volumes to batch (low,high)");
  cmd_sim->add_option("--out", sim.out, "Output directory");

  AnalyzeArgs ana;
  auto* cmd_ana = app.add_subcommand("analyze", "Compute the measures and write a report bundle");
  cmd_ana->add_option("--session", ana.sessions, "Session file (repeatable)");
  cmd_ana->add_option("--session-dir", ana.session_dir, "Analyze every .ndjson file in a directory");
  cmd_ana->add_option("--out-dir", ana.out_dir, "Bundle directory");
  cmd_ana->add_option("--measure", ana.measure,
                      "Comma-separated subset of brakes, lane_changes, passing, correlation, proportions, pupils, "
                      "shifts, heatmaps, distances");
  cmd_ana->add_option("--ingest-map", ana.ingest_map, "Column map for delimited exports");
  cmd_ana->add_option("--shift-max-gap", ana.shift_max_gap, "Max non-truck samples between adjacent truck runs");

  ReportArgs rep;
  auto* cmd_rep = app.add_subcommand("report", "Print a summary of a report bundle");
  cmd_rep->add_option("--bundle", rep.bundle, "Bundle directory written by analyze")->required();
  cmd_rep->add_option("--out", rep.out, "Write to a file instead of stdout");

  ServeArgs srv;
  auto* cmd_srv = app.add_subcommand("serve", "Live-drive WebSocket bridge");
  cmd_srv->add_option("--config", srv.config, "Scenario config file");
  cmd_srv->add_option("--port", srv.port, "TCP port (0 picks one)");
  cmd_srv->add_option("--address", srv.address, "Listen address");
  cmd_srv->add_option("--out-dir", srv.out_dir, "Directory for session files");
  cmd_srv->add_option("--duration", srv.duration_s, "Stop after this many seconds (0 runs until interrupted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*cmd_sim) return simulate(sim, out);
    if (*cmd_ana) return analyze(ana, out, err);
    if (*cmd_rep) return report(rep, out);
    if (*cmd_srv) return serve(srv, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const PortBusyError& e) {
    err << "error: " << e.what() << "\n";
    return kExitPortBusy;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace atma
