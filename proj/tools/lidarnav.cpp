// lidarnav: dataset generation, autoencoder training, reconstruction
// evaluation, RL training/evaluation, and figure-data emission for the
// 2D-lidar navigation pipeline. Owns every on-disk artifact format.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lidarnav/checkpoint.hpp"
#include "lidarnav/csv.hpp"
#include "lidarnav/dataset.hpp"
#include "lidarnav/errors.hpp"
#include "lidarnav/evaluate.hpp"
#include "lidarnav/image_io.hpp"
#include "lidarnav/metrics.hpp"
#include "lidarnav/plot.hpp"
#include "lidarnav/preprocess.hpp"
#include "lidarnav/rl.hpp"
#include "lidarnav/vae.hpp"
#include "lidarnav/world.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lidarnav;

namespace {

// ------------------------------------------------------------ config layer

struct CliArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  bool desk = false;
  int parallel_trials = 1;
};

json load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  json j = json::parse(is, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON: " + path);
  if (!j.is_object()) throw ConfigError("config root must be a JSON object: " + path);
  return j;
}

// Strict overlay: every user key must exist in the defaults tree, so typos
// fail loudly instead of silently running with defaults.
void overlay(json& base, const json& user, const std::string& prefix = "") {
  for (const auto& [k, v] : user.items()) {
    if (!base.contains(k)) throw ConfigError("unknown config key: " + prefix + k);
    if (base[k].is_object() && v.is_object()) {
      overlay(base[k], v, prefix + k + ".");
    } else {
      base[k] = v;
    }
  }
}

json resolve_config(const CliArgs& cli, json defaults) {
  if (!cli.config_path.empty())
    overlay(defaults, load_config_file(cli.config_path));
  if (cli.seed) defaults["seed"] = *cli.seed;
  return defaults;
}

void write_sidecar(const std::string& path, const json& resolved) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write config sidecar: " + path);
  os << resolved.dump(2) << "\n";
}

std::string out_path(const CliArgs& cli, const std::string& file) {
  fs::create_directories(cli.out_dir);
  return (fs::path(cli.out_dir) / file).string();
}

json sensor_defaults() {
  SensorSpec s;
  return {{"beam_count", s.beam_count},
          {"max_range", s.max_range},
          {"angle_span", s.angle_span},
          {"noise_sigma", s.noise_sigma},
          {"invalid_fraction", s.invalid_fraction}};
}

SensorSpec sensor_from_json(const json& j) {
  SensorSpec s;
  s.beam_count = j.at("beam_count").get<int>();
  s.max_range = j.at("max_range").get<double>();
  s.angle_span = j.at("angle_span").get<double>();
  s.noise_sigma = j.at("noise_sigma").get<double>();
  s.invalid_fraction = j.at("invalid_fraction").get<double>();
  if (s.beam_count < 1) throw ConfigError("sensor.beam_count must be >= 1");
  if (s.max_range <= 0.0) throw ConfigError("sensor.max_range must be > 0");
  if (s.invalid_fraction < 0.0 || s.invalid_fraction > 1.0)
    throw ConfigError("sensor.invalid_fraction must lie in [0, 1]");
  return s;
}

// ------------------------------------------------------------ VAE loading

ImageVae load_image_vae(const std::string& path) {
  const json meta = read_checkpoint_meta(path);
  if (meta.value("kind", "") != "image_vae")
    throw DataError("checkpoint is not an image VAE: " + path);
  ImageVaeConfig cfg;
  cfg.resolution = meta.at("resolution").get<int>();
  cfg.latent_dim = meta.at("latent_dim").get<int>();
  cfg.beta = meta.at("beta").get<double>();
  ImageVae vae(cfg, 0);
  load_checkpoint(path, vae.graph_spec(), vae.params());
  return vae;
}

RawVae load_raw_vae(const std::string& path) {
  const json meta = read_checkpoint_meta(path);
  if (meta.value("kind", "") != "raw_vae")
    throw DataError("checkpoint is not a raw VAE: " + path);
  RawVaeConfig cfg;
  cfg.beam_count = meta.at("beam_count").get<int>();
  cfg.latent_dim = meta.at("latent_dim").get<int>();
  cfg.beta = meta.at("beta").get<double>();
  RawVae vae(cfg, 0);
  load_checkpoint(path, vae.graph_spec(), vae.params());
  return vae;
}

// ------------------------------------------------------------- gen-data

int cmd_gen_data(const CliArgs& cli) {
  json user = json::object();
  if (!cli.config_path.empty()) user = load_config_file(cli.config_path);
  const std::string env = user.value("env", "simple");
  if (env != "simple" && env != "main")
    throw ConfigError("gen-data: env must be 'simple' or 'main'");

  SimpleRoomConfig sr;
  MainRoomConfig mr;
  RandomWalkConfig wk;
  json defaults = {
      {"env", env},
      {"rooms", env == "simple" ? 250 : 100},
      {"trajectories_per_room", env == "simple" ? 10 : 250},
      {"max_steps_per_trajectory", 100},
      {"step_rate_hz", 5.0},
      {"seed", 1},
      {"name", env},
      {"sensor", sensor_defaults()},
      {"walk",
       {{"speed", wk.speed},
        {"max_turn", wk.max_turn},
        {"robot_radius", wk.robot_radius},
        {"spawn_attempts", wk.spawn_attempts}}},
      {"simple_room",
       {{"side_min", sr.side_min},
        {"side_max", sr.side_max},
        {"pole_diameter", sr.pole_diameter},
        {"wall_clearance", sr.wall_clearance},
        {"max_attempts", sr.max_attempts}}},
      {"main_room",
       {{"side_min", mr.side_min},
        {"side_max", mr.side_max},
        {"interior_walls_min", mr.interior_walls_min},
        {"interior_walls_max", mr.interior_walls_max},
        {"door_width", mr.door_width},
        {"pole_size_min", mr.pole_size_min},
        {"pole_size_max", mr.pole_size_max},
        {"pole_density_min", mr.pole_density_min},
        {"pole_density_max", mr.pole_density_max},
        {"cluster_prob", mr.cluster_prob},
        {"wall_clearance", mr.wall_clearance},
        {"pole_gap", mr.pole_gap},
        {"max_attempts", mr.max_attempts}}}};
  if (cli.desk) {
    defaults["rooms"] = 50;
    defaults["trajectories_per_room"] = 4;
    defaults["max_steps_per_trajectory"] = 50;
  }
  const json cfg = resolve_config(cli, defaults);

  const int rooms = cfg.at("rooms").get<int>();
  const int trajectories = cfg.at("trajectories_per_room").get<int>();
  const int max_steps = cfg.at("max_steps_per_trajectory").get<int>();
  const double rate = cfg.at("step_rate_hz").get<double>();
  if (rooms < 1 || trajectories < 1 || max_steps < 1)
    throw ConfigError("gen-data: rooms, trajectories, and steps must be >= 1");

  const json& sj = cfg.at("simple_room");
  sr.side_min = sj.at("side_min").get<double>();
  sr.side_max = sj.at("side_max").get<double>();
  sr.pole_diameter = sj.at("pole_diameter").get<double>();
  sr.wall_clearance = sj.at("wall_clearance").get<double>();
  sr.max_attempts = sj.at("max_attempts").get<int>();
  const json& mj = cfg.at("main_room");
  mr.side_min = mj.at("side_min").get<double>();
  mr.side_max = mj.at("side_max").get<double>();
  mr.interior_walls_min = mj.at("interior_walls_min").get<int>();
  mr.interior_walls_max = mj.at("interior_walls_max").get<int>();
  mr.door_width = mj.at("door_width").get<double>();
  mr.pole_size_min = mj.at("pole_size_min").get<double>();
  mr.pole_size_max = mj.at("pole_size_max").get<double>();
  mr.pole_density_min = mj.at("pole_density_min").get<double>();
  mr.pole_density_max = mj.at("pole_density_max").get<double>();
  mr.cluster_prob = mj.at("cluster_prob").get<double>();
  mr.wall_clearance = mj.at("wall_clearance").get<double>();
  mr.pole_gap = mj.at("pole_gap").get<double>();
  mr.max_attempts = mj.at("max_attempts").get<int>();
  const json& wj = cfg.at("walk");
  wk.speed = wj.at("speed").get<double>();
  wk.max_turn = wj.at("max_turn").get<double>();
  wk.robot_radius = wj.at("robot_radius").get<double>();
  wk.spawn_attempts = wj.at("spawn_attempts").get<int>();

  DatasetArchive d;
  d.sensor = sensor_from_json(cfg.at("sensor"));
  d.generation = cfg;

  Rng root(cfg.at("seed").get<std::uint64_t>());
  for (int r = 0; r < rooms; ++r) {
    Rng room_rng = root.split(static_cast<std::uint64_t>(r));
    const WorldModel world = env == "simple" ? generate_simple_room(room_rng, sr)
                                             : generate_main_room(room_rng, mr);
    for (int t = 0; t < trajectories; ++t) {
      const auto traj =
          random_walk_trajectory(world, d.sensor, room_rng, max_steps, rate, wk);
      for (const auto& [pose, scan] : traj) d.append(scan, pose);
    }
    if ((r + 1) % 10 == 0 || r + 1 == rooms)
      std::printf("gen-data: %d/%d rooms, %d scans\n", r + 1, rooms, d.scan_count);
  }

  const std::string name = cfg.at("name").get<std::string>();
  const std::string archive = out_path(cli, name + ".l2ds");
  write_dataset(archive, d);
  json sidecar = cfg;
  sidecar["scan_count"] = d.scan_count;
  sidecar["archive"] = archive;
  write_sidecar(archive + ".json", sidecar);
  std::printf("gen-data: wrote %s (%d scans)\n", archive.c_str(), d.scan_count);
  return 0;
}

// ------------------------------------------------- train-vae / train-raw-vae

void write_epoch_csv(const std::string& path, const std::vector<EpochLog>& logs) {
  CsvWriter csv(path);
  csv.row({"epoch", "loss", "recon", "kl"});
  for (std::size_t i = 0; i < logs.size(); ++i)
    csv.row({csv_num(static_cast<std::int64_t>(i + 1)), csv_num(logs[i].loss),
             csv_num(logs[i].recon), csv_num(logs[i].kl)});
}

int cmd_train_vae(const CliArgs& cli) {
  json defaults = {{"dataset", ""},     {"resolution", 320}, {"latent_dim", 16},
                   {"beta", 1.0},       {"epochs", 20},      {"batch_size", 64},
                   {"lr", 1e-4},        {"holdout", 500},    {"seed", 2},
                   {"name", "vae"},     {"recon_samples", 4}};
  if (cli.desk) defaults["resolution"] = 128;
  const json cfg = resolve_config(cli, defaults);
  const std::string dataset_path = cfg.at("dataset").get<std::string>();
  if (dataset_path.empty()) throw ConfigError("train-vae: 'dataset' is required");

  const DatasetArchive d = read_dataset(dataset_path);
  const int holdout = cfg.at("holdout").get<int>();
  const int n_train = d.scan_count - holdout;
  if (n_train < 1)
    throw DataError("train-vae: dataset smaller than holdout reservation");

  ImageVaeConfig vc;
  vc.resolution = cfg.at("resolution").get<int>();
  vc.latent_dim = cfg.at("latent_dim").get<int>();
  vc.beta = cfg.at("beta").get<double>();
  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
  ImageVae vae(vc, seed);

  const ImageBatchSource train = make_image_source(d, vc.resolution, 0, n_train);
  VaeTrainConfig tc;
  tc.epochs = cfg.at("epochs").get<int>();
  tc.batch_size = cfg.at("batch_size").get<int>();
  tc.lr = cfg.at("lr").get<double>();
  tc.seed = seed;

  const std::string name = cfg.at("name").get<std::string>();
  const std::string ckpt = out_path(cli, name + ".nnck");
  json meta = {{"kind", "image_vae"},       {"resolution", vc.resolution},
               {"latent_dim", vc.latent_dim}, {"beta", vc.beta},
               {"seed", seed},              {"dataset", dataset_path},
               {"train_scans", n_train}};
  write_sidecar(out_path(cli, name + ".config.json"), cfg);

  std::printf("train-vae: %d scans, %dpx, k=%d, beta=%g, %d epochs\n", n_train,
              vc.resolution, vc.latent_dim, vc.beta, tc.epochs);
  const auto logs = train_image_vae(
      vae, train, tc, ckpt, meta, [](int epoch, const EpochLog& el) {
        std::printf("  epoch %d: loss %.3f recon %.3f kl %.3f\n", epoch + 1,
                    el.loss, el.recon, el.kl);
        std::fflush(stdout);
      });
  write_epoch_csv(out_path(cli, name + "_log.csv"), logs);

  // Fig. 3-style inspection pairs from the first held-out scans
  const int samples = std::min(cfg.at("recon_samples").get<int>(),
                               d.scan_count - n_train);
  for (int i = 0; i < samples; ++i) {
    const ImageBatchSource one =
        make_image_source(d, vc.resolution, n_train + i, n_train + i + 1);
    Tensor x;
    one.gather({0}, x);
    const Tensor probs = vae.decode_probs(vae.encode_mean(x));
    LocalOccupancyImage img;
    img.resolution_px = vc.resolution;
    img.pixels = one.pixels;
    write_pgm(out_path(cli, name + "_recon" + std::to_string(i) + "_input.pgm"),
              vc.resolution, vc.resolution, occupancy_to_bytes(img));
    write_pgm(out_path(cli, name + "_recon" + std::to_string(i) + "_prob.pgm"),
              vc.resolution, vc.resolution,
              probability_to_bytes(std::vector<double>(
                  probs.data(), probs.data() + probs.size())));
  }
  std::printf("train-vae: wrote %s\n", ckpt.c_str());
  return 0;
}

int cmd_train_raw_vae(const CliArgs& cli) {
  json defaults = {{"dataset", ""},   {"latent_dim", 16}, {"beta", 1.0},
                   {"epochs", 20},    {"batch_size", 64}, {"lr", 1e-4},
                   {"holdout", 500},  {"seed", 2},        {"name", "raw_vae"},
                   {"recon_samples", 4}, {"pgm_resolution", 320}};
  if (cli.desk) defaults["pgm_resolution"] = 128;
  const json cfg = resolve_config(cli, defaults);
  const std::string dataset_path = cfg.at("dataset").get<std::string>();
  if (dataset_path.empty())
    throw ConfigError("train-raw-vae: 'dataset' is required");

  const DatasetArchive d = read_dataset(dataset_path);
  const int holdout = cfg.at("holdout").get<int>();
  const int n_train = d.scan_count - holdout;
  if (n_train < 1)
    throw DataError("train-raw-vae: dataset smaller than holdout reservation");

  RawVaeConfig vc;
  vc.beam_count = d.sensor.beam_count;
  vc.latent_dim = cfg.at("latent_dim").get<int>();
  vc.beta = cfg.at("beta").get<double>();
  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
  RawVae vae(vc, seed);

  const RawBatchSource train = make_raw_source(d, 0, n_train);
  VaeTrainConfig tc;
  tc.epochs = cfg.at("epochs").get<int>();
  tc.batch_size = cfg.at("batch_size").get<int>();
  tc.lr = cfg.at("lr").get<double>();
  tc.seed = seed;

  const std::string name = cfg.at("name").get<std::string>();
  const std::string ckpt = out_path(cli, name + ".nnck");
  json meta = {{"kind", "raw_vae"},   {"beam_count", vc.beam_count},
               {"latent_dim", vc.latent_dim}, {"beta", vc.beta},
               {"seed", seed},        {"dataset", dataset_path},
               {"train_scans", n_train}};
  write_sidecar(out_path(cli, name + ".config.json"), cfg);

  std::printf("train-raw-vae: %d scans, %d beams, k=%d, beta=%g, %d epochs\n",
              n_train, vc.beam_count, vc.latent_dim, vc.beta, tc.epochs);
  const auto logs = train_raw_vae(
      vae, train, tc, ckpt, meta, [](int epoch, const EpochLog& el) {
        std::printf("  epoch %d: loss %.3f recon %.3f kl %.3f\n", epoch + 1,
                    el.loss, el.recon, el.kl);
        std::fflush(stdout);
      });
  write_epoch_csv(out_path(cli, name + "_log.csv"), logs);

  // inspection pairs: input image vs image rasterized from the decoded
  // per-beam mean ranges
  const int res = cfg.at("pgm_resolution").get<int>();
  const int samples = std::min(cfg.at("recon_samples").get<int>(),
                               d.scan_count - n_train);
  for (int i = 0; i < samples; ++i) {
    const ImageBatchSource target =
        make_image_source(d, res, n_train + i, n_train + i + 1);
    const RawBatchSource one = make_raw_source(d, n_train + i, n_train + i + 1);
    Tensor x;
    one.gather({0}, x);
    Tensor mean, stddev;
    vae.decode(vae.encode_mean(x), mean, stddev);
    NormalizedScan ns;
    ns.values.assign(mean.data(), mean.data() + mean.size());
    for (double& v : ns.values) v = std::clamp(v, 0.0, 1.0);
    ns.angle_span = d.sensor.angle_span;
    const LocalOccupancyImage rec = scan_to_local_image(
        ns, res, 2.0 * d.sensor.max_range, d.sensor.max_range);
    LocalOccupancyImage in_img;
    in_img.resolution_px = res;
    in_img.pixels = target.pixels;
    write_pgm(out_path(cli, name + "_recon" + std::to_string(i) + "_input.pgm"),
              res, res, occupancy_to_bytes(in_img));
    write_pgm(out_path(cli, name + "_recon" + std::to_string(i) + "_mean.pgm"),
              res, res, occupancy_to_bytes(rec));
  }
  std::printf("train-raw-vae: wrote %s\n", ckpt.c_str());
  return 0;
}

// ------------------------------------------------------------- eval-recon

int cmd_eval_recon(const CliArgs& cli) {
  json defaults = {{"dataset", ""},           {"image_checkpoint", ""},
                   {"raw_checkpoint", ""},    {"holdout", 500},
                   {"env_label", "simple"},   {"seed", 3},
                   {"name", "recon"},         {"significance", 0.01}};
  const json cfg = resolve_config(cli, defaults);
  for (const char* key : {"dataset", "image_checkpoint", "raw_checkpoint"})
    if (cfg.at(key).get<std::string>().empty())
      throw ConfigError(std::string("eval-recon: '") + key + "' is required");

  const DatasetArchive d = read_dataset(cfg.at("dataset").get<std::string>());
  const int holdout = cfg.at("holdout").get<int>();
  if (holdout < 2 || holdout > d.scan_count)
    throw DataError("eval-recon: holdout must lie in [2, scan_count]");
  const int begin = d.scan_count - holdout;

  ImageVae image_vae = load_image_vae(cfg.at("image_checkpoint").get<std::string>());
  RawVae raw_vae = load_raw_vae(cfg.at("raw_checkpoint").get<std::string>());
  if (raw_vae.config().beam_count != d.sensor.beam_count)
    throw DataError("eval-recon: raw checkpoint beam count does not match dataset");

  const int res = image_vae.config().resolution;
  const ImageBatchSource images = make_image_source(d, res, begin, d.scan_count);
  const RawBatchSource raws = make_raw_source(d, begin, d.scan_count);

  Rng root(cfg.at("seed").get<std::uint64_t>());
  Rng rng_image = root.split(1), rng_raw = root.split(2);
  std::printf("eval-recon: %d held-out scans at %dpx\n", holdout, res);
  ReconReport image_report = eval_image_recon(image_vae, images, rng_image);
  ReconReport raw_report =
      eval_raw_recon(raw_vae, raws, images, d.sensor.max_range, rng_raw);

  const std::string name = cfg.at("name").get<std::string>();
  const std::string env = cfg.at("env_label").get<std::string>();
  write_sidecar(out_path(cli, name + ".config.json"), cfg);
  {
    CsvWriter csv(out_path(cli, name + "_metrics.csv"));
    csv.row({"env", "method", "fp", "fn", "mse", "n"});
    csv.row({env, "image", csv_num(image_report.fp), csv_num(image_report.fn),
             csv_num(image_report.mse),
             csv_num(static_cast<std::int64_t>(image_report.per_scan_mse.size()))});
    csv.row({env, "raw", csv_num(raw_report.fp), csv_num(raw_report.fn),
             csv_num(raw_report.mse),
             csv_num(static_cast<std::int64_t>(raw_report.per_scan_mse.size()))});
  }
  const double alpha = cfg.at("significance").get<double>();
  {
    CsvWriter csv(out_path(cli, name + "_ttest.csv"));
    csv.row({"env", "pair", "metric", "t", "dof", "p", "significant"});
    const struct {
      const char* metric;
      const std::vector<double>*a, *b;
    } rows[] = {
        {"mse", &image_report.per_scan_mse, &raw_report.per_scan_mse},
        {"fp", &image_report.per_scan_fp, &raw_report.per_scan_fp},
        {"fn", &image_report.per_scan_fn, &raw_report.per_scan_fn}};
    for (const auto& r : rows) {
      const WelchResult w = welch_t_test(*r.a, *r.b);
      csv.row({env, "image-vs-raw", r.metric, csv_num(w.t), csv_num(w.dof),
               csv_num(w.p), w.p < alpha ? "1" : "0"});
    }
  }
  std::printf(
      "eval-recon[%s]: image fp %.2f fn %.2f mse %.2f | raw fp %.2f fn %.2f "
      "mse %.2f (n=%d)\n",
      env.c_str(), image_report.fp, image_report.fn, image_report.mse,
      raw_report.fp, raw_report.fn, raw_report.mse, holdout);
  return 0;
}

// ---------------------------------------------------- train-rl / eval-rl

json env_defaults() {
  NavEnvConfig e;
  SimpleRoomConfig r;
  return {{"action_bound", e.action_bound},
          {"goal_threshold", e.goal_threshold},
          {"robot_radius", e.robot_radius},
          {"max_steps", e.max_steps},
          {"r_goal", e.r_goal},
          {"r_collision", e.r_collision},
          {"sensor", sensor_defaults()},
          {"room",
           {{"side_min", r.side_min},
            {"side_max", r.side_max},
            {"pole_diameter", r.pole_diameter},
            {"wall_clearance", r.wall_clearance},
            {"max_attempts", r.max_attempts}}}};
}

NavEnvConfig env_from_json(const json& j) {
  NavEnvConfig e;
  e.action_bound = j.at("action_bound").get<double>();
  e.goal_threshold = j.at("goal_threshold").get<double>();
  e.robot_radius = j.at("robot_radius").get<double>();
  e.max_steps = j.at("max_steps").get<int>();
  e.r_goal = j.at("r_goal").get<double>();
  e.r_collision = j.at("r_collision").get<double>();
  e.sensor = sensor_from_json(j.at("sensor"));
  const json& r = j.at("room");
  e.room.side_min = r.at("side_min").get<double>();
  e.room.side_max = r.at("side_max").get<double>();
  e.room.pole_diameter = r.at("pole_diameter").get<double>();
  e.room.wall_clearance = r.at("wall_clearance").get<double>();
  e.room.max_attempts = r.at("max_attempts").get<int>();
  if (e.max_steps < 1) throw ConfigError("env.max_steps must be >= 1");
  return e;
}

json td3_defaults() {
  Td3Config t;
  return {{"gamma", t.gamma},
          {"tau", t.tau},
          {"policy_delay", t.policy_delay},
          {"policy_noise", t.policy_noise},
          {"noise_clip", t.noise_clip},
          {"explore_noise", t.explore_noise},
          {"action_bound", t.action_bound},
          {"batch_size", t.batch_size},
          {"lr", t.lr},
          {"hidden", t.hidden}};
}

Td3Config td3_from_json(const json& j) {
  Td3Config t;
  t.gamma = j.at("gamma").get<double>();
  t.tau = j.at("tau").get<double>();
  t.policy_delay = j.at("policy_delay").get<int>();
  t.policy_noise = j.at("policy_noise").get<double>();
  t.noise_clip = j.at("noise_clip").get<double>();
  t.explore_noise = j.at("explore_noise").get<double>();
  t.action_bound = j.at("action_bound").get<double>();
  t.batch_size = j.at("batch_size").get<int>();
  t.lr = j.at("lr").get<double>();
  t.hidden = j.at("hidden").get<int>();
  return t;
}

// Builds the frozen state pipeline for one RL setup. no-pretrain derives a
// random raw encoder from pipeline_seed; the others load a checkpoint.
std::unique_ptr<StatePipeline> build_pipeline(const std::string& setup,
                                              const std::string& encoder_path,
                                              int beam_count, int latent_dim,
                                              std::uint64_t pipeline_seed) {
  if (setup == "no-pretrain") {
    RawVaeConfig rc;
    rc.beam_count = beam_count;
    rc.latent_dim = latent_dim;
    return std::make_unique<RawVaePipeline>(rc, pipeline_seed);
  }
  if (encoder_path.empty())
    throw ConfigError("rl: 'encoder_checkpoint' is required for setup " + setup);
  if (setup == "image-vae") {
    const json meta = read_checkpoint_meta(encoder_path);
    if (meta.value("kind", "") != "image_vae")
      throw DataError("rl: checkpoint is not an image VAE: " + encoder_path);
    ImageVaeConfig cfg;
    cfg.resolution = meta.at("resolution").get<int>();
    cfg.latent_dim = meta.at("latent_dim").get<int>();
    cfg.beta = meta.at("beta").get<double>();
    auto p = std::make_unique<ImageVaePipeline>(cfg, 0);
    load_checkpoint(encoder_path, p->vae.graph_spec(), p->vae.params());
    return p;
  }
  if (setup == "raw-ae") {
    const json meta = read_checkpoint_meta(encoder_path);
    if (meta.value("kind", "") != "raw_vae")
      throw DataError("rl: checkpoint is not a raw VAE: " + encoder_path);
    RawVaeConfig cfg;
    cfg.beam_count = meta.at("beam_count").get<int>();
    cfg.latent_dim = meta.at("latent_dim").get<int>();
    cfg.beta = meta.at("beta").get<double>();
    auto p = std::make_unique<RawVaePipeline>(cfg, 0);
    load_checkpoint(encoder_path, p->vae.graph_spec(), p->vae.params());
    return p;
  }
  throw ConfigError("rl: setup must be no-pretrain, raw-ae, or image-vae");
}

struct TrialCurve {
  std::vector<EpochEval> evals;
};

void write_trial_csv(const std::string& path, int trial,
                     const std::vector<EpochEval>& evals) {
  CsvWriter csv(path);
  csv.row({"trial", "epoch", "mean_eval_reward", "min", "max"});
  for (std::size_t e = 0; e < evals.size(); ++e)
    csv.row({csv_num(static_cast<std::int64_t>(trial)),
             csv_num(static_cast<std::int64_t>(e + 1)), csv_num(evals[e].mean),
             csv_num(evals[e].min), csv_num(evals[e].max)});
}

std::vector<EpochEval> read_trial_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open trial curve: " + path);
  std::string line;
  if (!std::getline(is, line)) throw DataError("empty trial curve: " + path);
  std::vector<EpochEval> out;
  while (std::getline(is, line)) {
    EpochEval ev;
    int trial = 0, epoch = 0;
    if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf,%lf", &trial, &epoch, &ev.mean,
                    &ev.min, &ev.max) != 5)
      throw DataError("malformed trial curve row in " + path);
    out.push_back(ev);
  }
  return out;
}

// aggregate curves: (epoch, mean, min, max)
std::vector<EpochEval> read_aggregate_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open curve: " + path);
  std::string line;
  if (!std::getline(is, line)) throw DataError("empty curve: " + path);
  std::vector<EpochEval> out;
  while (std::getline(is, line)) {
    EpochEval ev;
    int epoch = 0;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf", &epoch, &ev.mean, &ev.min,
                    &ev.max) != 4)
      throw DataError("malformed curve row in " + path);
    out.push_back(ev);
  }
  return out;
}

int cmd_train_rl(const CliArgs& cli) {
  json defaults = {{"setup", "image-vae"},
                   {"encoder_checkpoint", ""},
                   {"trials", 3},
                   {"epochs", 100},
                   {"steps_per_epoch", 500},
                   {"eval_episodes", 20},
                   {"warmup_steps", 1000},
                   {"replay_capacity", 1000000},
                   {"latent_dim", 16},
                   {"seed", 4},
                   {"name", "rl"},
                   {"svg", true},
                   {"td3", td3_defaults()},
                   {"env", env_defaults()}};
  const json cfg = resolve_config(cli, defaults);

  const std::string setup = cfg.at("setup").get<std::string>();
  const std::string encoder_path = cfg.at("encoder_checkpoint").get<std::string>();
  const NavEnvConfig env_cfg = env_from_json(cfg.at("env"));
  const int trials = cfg.at("trials").get<int>();
  if (trials < 1) throw ConfigError("train-rl: trials must be >= 1");
  const std::string name = cfg.at("name").get<std::string>();
  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
  write_sidecar(out_path(cli, name + ".config.json"), cfg);

  auto trial_csv_path = [&](int t) {
    return out_path(cli, name + "_trial" + std::to_string(t) + ".csv");
  };
  auto run_trial = [&](int t) {
    const std::uint64_t tseed = Rng(seed).split(0xF00 + static_cast<std::uint64_t>(t)).seed();
    const std::uint64_t pipe_seed = Rng(tseed).split(0xAE).seed();
    auto pipeline =
        build_pipeline(setup, encoder_path, env_cfg.sensor.beam_count,
                       cfg.at("latent_dim").get<int>(), pipe_seed);
    RlTrainConfig rc;
    rc.td3 = td3_from_json(cfg.at("td3"));
    rc.epochs = cfg.at("epochs").get<int>();
    rc.steps_per_epoch = cfg.at("steps_per_epoch").get<int>();
    rc.eval_episodes = cfg.at("eval_episodes").get<int>();
    rc.warmup_steps = cfg.at("warmup_steps").get<int>();
    rc.replay_capacity = cfg.at("replay_capacity").get<std::size_t>();
    rc.seed = tseed;
    json meta = {{"kind", "td3_agent"},
                 {"setup", setup},
                 {"state_dim", pipeline->state_dim()},
                 {"action_dim", 2},
                 {"trial", t},
                 {"seed", tseed},
                 {"pipeline_seed", pipe_seed},
                 {"encoder_checkpoint", encoder_path},
                 {"latent_dim", cfg.at("latent_dim").get<int>()},
                 {"td3", cfg.at("td3")}};
    const auto evals = train_agent(
        *pipeline, env_cfg, rc,
        out_path(cli, name + "_trial" + std::to_string(t) + "_agent.nnck"),
        meta, [&](int epoch, const EpochEval& ev) {
          std::printf("rl[%s] trial %d epoch %d: mean %.3f min %.3f max %.3f\n",
                      setup.c_str(), t, epoch + 1, ev.mean, ev.min, ev.max);
          std::fflush(stdout);
        });
    write_trial_csv(trial_csv_path(t), t, evals);
  };

  std::printf("train-rl: setup=%s trials=%d epochs=%d x %d steps\n",
              setup.c_str(), trials, cfg.at("epochs").get<int>(),
              cfg.at("steps_per_epoch").get<int>());
  if (cli.parallel_trials > 1) {
    int next = 0, running = 0, exit_code = 0;
    std::vector<std::pair<pid_t, int>> active;
    while (next < trials || running > 0) {
      while (next < trials && running < cli.parallel_trials) {
        std::fflush(stdout);
        const pid_t pid = fork();
        if (pid < 0) throw DataError("train-rl: fork failed");
        if (pid == 0) {
          try {
            run_trial(next);
          } catch (const ConfigError& e) {
            std::fprintf(stderr, "trial %d: %s\n", next, e.what());
            _exit(1);
          } catch (const DataError& e) {
            std::fprintf(stderr, "trial %d: %s\n", next, e.what());
            _exit(2);
          } catch (const NumericError& e) {
            std::fprintf(stderr, "trial %d: %s\n", next, e.what());
            _exit(3);
          } catch (const std::exception& e) {
            std::fprintf(stderr, "trial %d: %s\n", next, e.what());
            _exit(2);
          }
          _exit(0);
        }
        active.emplace_back(pid, next);
        ++next;
        ++running;
      }
      int status = 0;
      const pid_t done = waitpid(-1, &status, 0);
      if (done < 0) throw DataError("train-rl: waitpid failed");
      --running;
      const int rc = WIFEXITED(status) ? WEXITSTATUS(status) : 2;
      if (rc != 0 && exit_code == 0) exit_code = rc;
    }
    if (exit_code != 0) return exit_code;
  } else {
    for (int t = 0; t < trials; ++t) run_trial(t);
  }

  // aggregate mean/min/max across trials per epoch
  std::vector<std::vector<EpochEval>> curves;
  for (int t = 0; t < trials; ++t) curves.push_back(read_trial_csv(trial_csv_path(t)));
  const std::size_t epochs = curves[0].size();
  for (const auto& c : curves)
    if (c.size() != epochs) throw DataError("train-rl: trial curves disagree in length");
  CurveSeries agg;
  {
    CsvWriter csv(out_path(cli, name + "_curve.csv"));
    csv.row({"epoch", "mean_eval_reward", "min", "max"});
    for (std::size_t e = 0; e < epochs; ++e) {
      double mean = 0.0, lo = curves[0][e].mean, hi = curves[0][e].mean;
      for (const auto& c : curves) {
        mean += c[e].mean;
        lo = std::min(lo, c[e].mean);
        hi = std::max(hi, c[e].mean);
      }
      mean /= static_cast<double>(trials);
      csv.row({csv_num(static_cast<std::int64_t>(e + 1)), csv_num(mean),
               csv_num(lo), csv_num(hi)});
      agg.x.push_back(static_cast<double>(e + 1));
      agg.mean.push_back(mean);
      agg.min.push_back(lo);
      agg.max.push_back(hi);
    }
  }
  if (cfg.at("svg").get<bool>()) {
    agg.label = setup;
    agg.color = "#2ca02c";
    write_curve_svg(out_path(cli, name + "_curve.svg"),
                    "Evaluation reward (" + setup + ")", "epoch",
                    "mean evaluation reward", {agg});
  }
  std::printf("train-rl: wrote %s\n", out_path(cli, name + "_curve.csv").c_str());
  return 0;
}

int cmd_eval_rl(const CliArgs& cli) {
  json defaults = {{"agent_checkpoint", ""}, {"encoder_checkpoint", ""},
                   {"episodes", 20},         {"seed", 5},
                   {"name", "eval_rl"},      {"env", env_defaults()}};
  const json cfg = resolve_config(cli, defaults);
  const std::string agent_path = cfg.at("agent_checkpoint").get<std::string>();
  if (agent_path.empty())
    throw ConfigError("eval-rl: 'agent_checkpoint' is required");

  const json meta = read_checkpoint_meta(agent_path);
  if (meta.value("kind", "") != "td3_agent")
    throw DataError("eval-rl: checkpoint is not a TD3 agent: " + agent_path);
  const std::string setup = meta.at("setup").get<std::string>();
  std::string encoder_path = cfg.at("encoder_checkpoint").get<std::string>();
  if (encoder_path.empty())
    encoder_path = meta.value("encoder_checkpoint", "");
  const NavEnvConfig env_cfg = env_from_json(cfg.at("env"));

  auto pipeline = build_pipeline(
      setup, encoder_path, env_cfg.sensor.beam_count,
      meta.at("latent_dim").get<int>(),
      meta.value("pipeline_seed", static_cast<std::uint64_t>(0)));
  const Td3Config tc = td3_from_json(meta.at("td3"));
  Td3Agent agent(meta.at("state_dim").get<int>(),
                 meta.at("action_dim").get<int>(), tc, 0);
  load_checkpoint(agent_path, agent.graph_spec(), agent.params());

  const int episodes = cfg.at("episodes").get<int>();
  const auto rewards =
      evaluate_policy(agent, env_cfg, *pipeline, episodes,
                      Rng(cfg.at("seed").get<std::uint64_t>()));
  double mean = 0.0;
  const std::string name = cfg.at("name").get<std::string>();
  write_sidecar(out_path(cli, name + ".config.json"), cfg);
  CsvWriter csv(out_path(cli, name + ".csv"));
  csv.row({"episode", "reward"});
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    csv.row({csv_num(static_cast<std::int64_t>(i + 1)), csv_num(rewards[i])});
    mean += rewards[i];
  }
  mean /= static_cast<double>(rewards.size());
  csv.row({"mean", csv_num(mean)});
  std::printf("eval-rl[%s]: mean reward %.3f over %d episodes\n", setup.c_str(),
              mean, episodes);
  return 0;
}

// ------------------------------------------------------------------ plot

int cmd_plot(const CliArgs& cli) {
  if (cli.config_path.empty())
    throw ConfigError("plot: --config with a 'curves' list is required");
  const json user = load_config_file(cli.config_path);
  json cfg = {{"title", "Evaluation reward per epoch"},
              {"x_label", "epoch"},
              {"y_label", "mean evaluation reward"},
              {"name", "reward_curve"},
              {"curves", json::array()}};
  overlay(cfg, user);
  const json& curves = cfg.at("curves");
  if (!curves.is_array() || curves.empty())
    throw ConfigError("plot: 'curves' must be a non-empty array");

  static const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                   "#9467bd", "#8c564b"};
  std::vector<CurveSeries> series;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const json& c = curves[i];
    if (!c.contains("path")) throw ConfigError("plot: curve entry needs 'path'");
    CurveSeries s;
    s.label = c.value("label", "setup " + std::to_string(i + 1));
    s.color = c.value("color", std::string(kPalette[i % 6]));
    const auto evals = read_aggregate_csv(c.at("path").get<std::string>());
    for (std::size_t e = 0; e < evals.size(); ++e) {
      s.x.push_back(static_cast<double>(e + 1));
      s.mean.push_back(evals[e].mean);
      s.min.push_back(evals[e].min);
      s.max.push_back(evals[e].max);
    }
    series.push_back(std::move(s));
  }
  const std::string svg = out_path(cli, cfg.at("name").get<std::string>() + ".svg");
  write_curve_svg(svg, cfg.at("title").get<std::string>(),
                  cfg.at("x_label").get<std::string>(),
                  cfg.at("y_label").get<std::string>(), series);
  write_sidecar(out_path(cli, cfg.at("name").get<std::string>() + ".config.json"), cfg);
  std::printf("plot: wrote %s\n", svg.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"2D-lidar autoencoding and navigation-RL pipeline"};
  app.require_subcommand(1);

  CliArgs cli;
  app.add_option("--config", cli.config_path, "JSON config file");
  app.add_option("--seed", cli.seed, "override config seed");
  app.add_flag("--desk", cli.desk, "apply desk-scale profile overrides");
  app.add_option("--out", cli.out_dir, "output directory (default: out)");
  app.add_option("--parallel-trials", cli.parallel_trials,
                 "fork N parallel RL trials");

  for (const char* name :
       {"gen-data", "train-vae", "train-raw-vae", "eval-recon", "train-rl",
        "eval-rl", "plot"})
    app.add_subcommand(name)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;  // config error unless it was --help
  }

  try {
    if (app.got_subcommand("gen-data")) return cmd_gen_data(cli);
    if (app.got_subcommand("train-vae")) return cmd_train_vae(cli);
    if (app.got_subcommand("train-raw-vae")) return cmd_train_raw_vae(cli);
    if (app.got_subcommand("eval-recon")) return cmd_eval_recon(cli);
    if (app.got_subcommand("train-rl")) return cmd_train_rl(cli);
    if (app.got_subcommand("eval-rl")) return cmd_eval_rl(cli);
    if (app.got_subcommand("plot")) return cmd_plot(cli);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
