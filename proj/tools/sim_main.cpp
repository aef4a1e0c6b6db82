// sim: command line front end.
//
//   sim run     --config c.ini [--waypoints w.txt]          scripted flight, logs to --log-dir
//   sim serve   --config c.ini [--duration s]               TCP endpoint for a planner
//   sim bench   --config c.ini [--poses 10] [--out b.csv]   render timing
//   sim genmap  --kind room --out map.pcd                   synthetic map + primitives JSON
//   sim render  --config c.ini --pose x,y,z,qw,qx,qy,qz     one scan to PCD
//
// Exit codes: 0 ok, 1 error, 2 usage, 3 collision with --fail-on-collision.

#include "lidarsim/sim/bench.hpp"
#include "lidarsim/sim/net.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <iostream>

using namespace lidarsim;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitCollision = 3;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string log_dir;
  std::string sensor;
  bool fail_on_collision = false;
};

void add_common(CLI::App* app, CommonFlags& f, bool config_required) {
  auto* opt = app->add_option("--config", f.config, "simulation config file (INI)");
  if (config_required) opt->required()->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "override sim.seed");
  app->add_option("--log-dir", f.log_dir, "directory for logs and reports");
  app->add_option("--sensor", f.sensor, "override sensor.name (catalog name or file[:section])");
  app->add_flag("--fail-on-collision", f.fail_on_collision, "stop with exit code 3 on the first collision");
}

SimConfig load_effective_config(const CommonFlags& f) {
  std::vector<std::string> defaults;
  SimConfig cfg = load_config(f.config, &defaults);
  for (const auto& d : defaults) std::cerr << "[config] default " << d << "\n";
  if (f.seed) cfg.seed = *f.seed;
  if (!f.sensor.empty()) cfg.sensor = f.sensor;
  if (f.fail_on_collision) cfg.fail_on_collision = true;
  validate_config(cfg);
  return cfg;
}

std::filesystem::path ensure_log_dir(const std::string& dir) {
  std::filesystem::path p = dir.empty() ? std::filesystem::path("sim_logs") : std::filesystem::path(dir);
  std::filesystem::create_directories(p);
  return p;
}

std::shared_ptr<const PointMap> timed_map(const SimConfig& cfg, double& seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  auto map = load_map(cfg);
  seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << "[map] " << map->size() << " points, preprocessing " << seconds << " s\n";
  return map;
}

Pose parse_pose(const std::string& s) {
  std::vector<double> v;
  for (const auto& item : detail::split_list(s)) {
    double x = 0.0;
    if (!detail::parse_double(item, x)) throw Error("bad number in --pose: '" + item + "'");
    v.push_back(x);
  }
  if (v.size() != 7) throw Error("--pose expects x,y,z,qw,qx,qy,qz");
  Pose p;
  p.position = Vec3(v[0], v[1], v[2]);
  Quat q(v[3], v[4], v[5], v[6]);
  if (!(q.norm() > 1e-9)) throw Error("--pose quaternion must be non-zero");
  p.orientation = q.normalized();
  return p;
}

int cmd_run(const CommonFlags& f, const std::string& waypoint_file) {
  const SimConfig cfg = load_effective_config(f);
  double pre = 0.0;
  Simulation sim(cfg, timed_map(cfg, pre));
  std::vector<Waypoint> wps;
  if (waypoint_file.empty()) wps.push_back({cfg.start, cfg.start_yaw, 0.0});
  else wps = parse_waypoints(read_file_bytes(waypoint_file));

  std::unique_ptr<PeerSync> peers;
  Stepper stepper;
  if (!cfg.peer_bind.empty()) {
    peers = std::make_unique<PeerSync>(cfg, cfg.uav_id);
    stepper = [&](Simulation& s) { return step_with_peers(s, *peers); };
  }
  const RunReport report = run_scripted(sim, wps, stepper);
  const auto dir = ensure_log_dir(f.log_dir);
  write_file_bytes((dir / "run.jsonl").string(), report.log);
  write_file_bytes((dir / "report.json").string(), report.to_json());
  write_file_bytes((dir / "config.ini").string(), write_config(cfg));
  std::cerr << "[run] " << report.duration << " s simulated, " << report.scans << " scans, "
            << report.collisions.size() << " collisions, logs in " << dir.string() << "\n";
  for (const auto& c : report.collisions)
    std::cerr << "[collision] t=" << c.t << " " << offender_name(c.offender) << " d=" << c.distance << "\n";
  return report.aborted ? kExitCollision : 0;
}

int cmd_serve(const CommonFlags& f, double duration) {
  const SimConfig cfg = load_effective_config(f);
  double pre = 0.0;
  Simulation sim(cfg, timed_map(cfg, pre));
  std::unique_ptr<PeerSync> peers;
  if (!cfg.peer_bind.empty()) peers = std::make_unique<PeerSync>(cfg, cfg.uav_id);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  ServeOptions opt;
  opt.duration = duration > 0.0 ? duration : kInf;
  opt.stop = &g_stop;
  opt.peers = peers.get();
  opt.stop_on_collision = cfg.fail_on_collision;
  opt.on_listen = [](std::uint16_t port) { std::cerr << "[serve] listening on port " << port << "\n"; };
  const ServeStats stats = serve_endpoint(sim, opt);
  std::cerr << "[serve] " << stats.sim_time << " s simulated, " << stats.connections << " connections, "
            << stats.setpoints << " setpoints, " << stats.malformed << " malformed lines\n";
  if (!f.log_dir.empty()) {
    nlohmann::json j = {{"sim_time", stats.sim_time},     {"connections", stats.connections},
                        {"setpoints", stats.setpoints},   {"malformed", stats.malformed},
                        {"sent", stats.sent_messages},    {"dropped", stats.dropped_messages},
                        {"collisions", stats.collisions.size()}};
    write_file_bytes((ensure_log_dir(f.log_dir) / "serve.json").string(), j.dump(1) + "\n");
  }
  return cfg.fail_on_collision && !stats.collisions.empty() ? kExitCollision : 0;
}

int cmd_bench(const CommonFlags& f, std::size_t poses, const std::string& out) {
  const SimConfig cfg = load_effective_config(f);
  double pre = 0.0;
  const auto map = timed_map(cfg, pre);
  RenderOptions ro;
  ro.noise = cfg.sensor_noise;
  ro.raster.planarity_threshold = cfg.planarity_threshold;
  const BenchReport r = run_bench(*map, cfg.sensor_model(), poses, cfg.seed, pre, ro);
  const std::string csv = r.to_csv();
  if (!out.empty()) write_file_bytes(out, csv);
  else if (!f.log_dir.empty()) write_file_bytes((ensure_log_dir(f.log_dir) / "bench.csv").string(), csv);
  else std::cout << csv;
  std::cerr << "[bench] " << r.sensor << " mean " << r.mean_ms << " ms, p95 " << r.p95_ms << " ms, peak RSS "
            << r.peak_rss_mb << " MiB\n";
  return 0;
}

int cmd_genmap(const CommonFlags& f, const std::string& kind, double resolution, const std::string& size,
               std::size_t objects, const std::string& out, bool ascii) {
  GenParams g;
  g.kind = parse_map_kind(kind);
  g.resolution = resolution;
  if (!size.empty()) {
    IniEntry e{"", "--size", size, 0};
    g.size = detail::entry_vec3(e);
  }
  g.objects = objects;
  g.seed = f.seed.value_or(1);
  const Scene scene = generate_scene(g);
  const RawCloud cloud = sample_scene(scene);
  write_file_bytes(out, write_pcd(cloud.points, !ascii));
  std::filesystem::path scene_path(out);
  scene_path.replace_extension(".scene.json");
  write_file_bytes(scene_path.string(), scene_to_json(scene));
  std::cerr << "[genmap] " << map_kind_name(g.kind) << " " << cloud.size() << " points -> " << out << ", "
            << scene_path.string() << "\n";
  return 0;
}

int cmd_render(const CommonFlags& f, const std::string& pose_text, const std::string& out, double t) {
  const SimConfig cfg = load_effective_config(f);
  double pre = 0.0;
  const auto map = timed_map(cfg, pre);
  RenderOptions ro;
  ro.seed = cfg.seed;
  ro.noise = cfg.sensor_noise;
  ro.raster.planarity_threshold = cfg.planarity_threshold;
  const ScanRenderer renderer(cfg.sensor_model(), ro);
  const Pose body = parse_pose(pose_text);
  const auto t0 = std::chrono::steady_clock::now();
  const ScanCloud scan = renderer.render_scan(*map, nullptr, body.compose(cfg.mount()), t);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  std::string path = out;
  if (path.empty()) path = (ensure_log_dir(f.log_dir) / "scan.pcd").string();
  write_file_bytes(path, write_pcd(scan.points, true));
  std::cerr << "[render] " << scan.size() << " points in " << ms << " ms -> " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR and quadrotor simulator over point cloud maps"};
  app.require_subcommand(1);

  CommonFlags run_f, serve_f, bench_f, gen_f, render_f;

  auto* run = app.add_subcommand("run", "scripted flight through a waypoint list");
  add_common(run, run_f, true);
  std::string waypoints;
  run->add_option("--waypoints", waypoints, "waypoint file: 'x y z [yaw] [duration]' per line")
      ->check(CLI::ExistingFile);

  auto* serve = app.add_subcommand("serve", "run the planner endpoint");
  add_common(serve, serve_f, true);
  double serve_duration = 0.0;
  serve->add_option("--duration", serve_duration, "simulated seconds to run (default: until interrupted)");

  auto* bench = app.add_subcommand("bench", "render timing at random poses");
  add_common(bench, bench_f, true);
  std::size_t poses = 10;
  std::string bench_out;
  bench->add_option("--poses", poses, "number of random poses");
  bench->add_option("--out", bench_out, "CSV output path");

  auto* gen = app.add_subcommand("genmap", "generate a synthetic map");
  add_common(gen, gen_f, false);
  std::string kind = "room", size, gen_out = "map.pcd";
  double resolution = 0.05;
  std::size_t objects = 6;
  bool ascii = false;
  gen->add_option("--kind", kind, "room, forest or corridor");
  gen->add_option("--resolution", resolution, "sampling resolution r_map, m")->check(CLI::PositiveNumber);
  gen->add_option("--size", size, "extent x,y,z in m");
  gen->add_option("--objects", objects, "boxes (room, corridor) or trees (forest)");
  gen->add_option("--out", gen_out, "output PCD path; primitives go to <stem>.scene.json");
  gen->add_flag("--ascii", ascii, "write ASCII PCD");

  auto* render = app.add_subcommand("render", "render one scan to PCD");
  add_common(render, render_f, true);
  std::string pose, render_out;
  double render_t = 0.0;
  render->add_option("--pose", pose, "body pose x,y,z,qw,qx,qy,qz")->required();
  render->add_option("--out", render_out, "output PCD path");
  render->add_option("--time", render_t, "scan time, s (selects the pattern phase)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and --version report success; every other parse failure is a usage error
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run) return cmd_run(run_f, waypoints);
    if (*serve) return cmd_serve(serve_f, serve_duration);
    if (*bench) return cmd_bench(bench_f, poses, bench_out);
    if (*gen) return cmd_genmap(gen_f, kind, resolution, size, objects, gen_out, ascii);
    if (*render) return cmd_render(render_f, pose, render_out, render_t);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
