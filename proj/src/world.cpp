#include "lidarnav/world.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lidarnav/errors.hpp"

namespace lidarnav {

namespace {

std::vector<Segment> rectangle_walls(const Aabb& b) {
  return {
      {{b.lo.x, b.lo.y}, {b.hi.x, b.lo.y}},
      {{b.hi.x, b.lo.y}, {b.hi.x, b.hi.y}},
      {{b.hi.x, b.hi.y}, {b.lo.x, b.hi.y}},
      {{b.lo.x, b.hi.y}, {b.lo.x, b.lo.y}},
  };
}

double dist_point_pole(Vec2 p, const Pole& pole) {
  if (pole.shape == Pole::Shape::kCircle)
    return std::max(0.0, (p - pole.center).norm() - 0.5 * pole.size);
  return dist_point_aabb(p, pole.box());
}

double min_wall_distance(const WorldModel& world, Vec2 p) {
  double best = kInf;
  for (const auto& w : world.walls)
    best = std::min(best, dist_point_segment(p, w));
  return best;
}

bool pole_placement_ok(const WorldModel& world, const Pole& cand,
                       double wall_clearance, double pole_gap) {
  const double r = cand.circumradius();
  if (cand.center.x - r <= world.bounds.lo.x ||
      cand.center.x + r >= world.bounds.hi.x ||
      cand.center.y - r <= world.bounds.lo.y ||
      cand.center.y + r >= world.bounds.hi.y)
    return false;
  for (const auto& w : world.walls)
    if (dist_point_segment(cand.center, w) < r + wall_clearance) return false;
  for (const auto& other : world.poles) {
    const double gap =
        (cand.center - other.center).norm() - r - other.circumradius();
    if (gap < pole_gap) return false;
  }
  return true;
}

}  // namespace

WorldModel generate_simple_room(Rng& rng, const SimpleRoomConfig& cfg) {
  const double w = rng.uniform(cfg.side_min, cfg.side_max);
  const double h = rng.uniform(cfg.side_min, cfg.side_max);

  WorldModel world;
  world.bounds = {{0.0, 0.0}, {w, h}};
  world.walls = rectangle_walls(world.bounds);

  const double c = cfg.wall_clearance;
  if (w - 2.0 * c <= 0.0 || h - 2.0 * c <= 0.0)
    throw ConfigError("simple room: wall clearance leaves no space for pole");

  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    Pole pole;
    pole.shape = Pole::Shape::kCircle;
    pole.size = cfg.pole_diameter;
    pole.center = {rng.uniform(c, w - c), rng.uniform(c, h - c)};
    if (min_wall_distance(world, pole.center) < c) continue;
    world.poles.push_back(pole);
    world.goal_pole_index = 0;
    return world;
  }
  throw ConfigError("simple room: pole placement failed after " +
                    std::to_string(cfg.max_attempts) + " attempts");
}

WorldModel generate_main_room(Rng& rng, const MainRoomConfig& cfg) {
  const double w = rng.uniform(cfg.side_min, cfg.side_max);
  const double h = rng.uniform(cfg.side_min, cfg.side_max);

  WorldModel world;
  world.bounds = {{0.0, 0.0}, {w, h}};
  world.walls = rectangle_walls(world.bounds);

  // Interior walls: axis-aligned partial walls with a door gap, creating
  // regions the lidar cannot see through.
  const int n_walls = static_cast<int>(
      rng.uniform_int(cfg.interior_walls_min, cfg.interior_walls_max));
  for (int i = 0; i < n_walls; ++i) {
    const bool vertical = rng.bernoulli(0.5);
    const double length = vertical ? h : w;
    const double across = vertical ? w : h;
    if (across < 2.0 || length < 2.0 * cfg.door_width) continue;
    const double pos = rng.uniform(1.0, across - 1.0);
    const double door_lo =
        rng.uniform(0.0, length - cfg.door_width);
    const double door_hi = door_lo + cfg.door_width;
    auto add = [&](double s0, double s1) {
      if (s1 - s0 < 1e-6) return;
      if (vertical)
        world.walls.push_back({{pos, s0}, {pos, s1}});
      else
        world.walls.push_back({{s0, pos}, {s1, pos}});
    };
    add(0.0, door_lo);
    add(door_hi, length);
  }

  const double density =
      rng.uniform(cfg.pole_density_min, cfg.pole_density_max);
  const int target = static_cast<int>(
      std::floor(std::min(density, cfg.pole_density_max) *
                 world.bounds.area()));

  int failed_streak = 0;
  for (int i = 0; i < target; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
      Pole pole;
      pole.shape =
          rng.bernoulli(0.5) ? Pole::Shape::kCircle : Pole::Shape::kSquare;
      pole.size = rng.uniform(cfg.pole_size_min, cfg.pole_size_max);
      if (rng.bernoulli(cfg.cluster_prob)) {
        // cluster near a corner or an existing pole
        Vec2 anchor;
        if (world.poles.empty() || rng.bernoulli(0.5)) {
          const int corner = static_cast<int>(rng.uniform_int(0, 3));
          anchor = {corner & 1 ? world.bounds.hi.x : world.bounds.lo.x,
                    corner & 2 ? world.bounds.hi.y : world.bounds.lo.y};
        } else {
          anchor =
              world.poles[static_cast<std::size_t>(rng.uniform_int(
                              0, static_cast<std::int64_t>(
                                     world.poles.size()) -
                                     1))]
                  .center;
        }
        const double ang = rng.uniform(-M_PI, M_PI);
        const double dist = rng.uniform(cfg.pole_size_max, 1.5);
        pole.center = anchor + Vec2{std::cos(ang), std::sin(ang)} * dist;
      } else {
        pole.center = {rng.uniform(0.0, w), rng.uniform(0.0, h)};
      }
      if (!pole_placement_ok(world, pole, cfg.wall_clearance, cfg.pole_gap))
        continue;
      world.poles.push_back(pole);
      placed = true;
      break;
    }
    if (!placed && ++failed_streak >= 3) break;  // room is saturated
  }
  if (target > 0 && world.poles.empty() &&
      cfg.max_attempts > 0)
    throw ConfigError("main room: no pole could be placed (clearance too large?)");

  // Guarantee the room is usable: a robot must be able to spawn somewhere.
  sample_spawn_pose(world, rng, 0.15, 500);
  return world;
}

bool point_in_obstacle(const WorldModel& world, Vec2 p) {
  if (!world.bounds.contains(p)) return true;
  for (const auto& pole : world.poles) {
    if (pole.shape == Pole::Shape::kCircle) {
      if ((p - pole.center).norm() < 0.5 * pole.size) return true;
    } else {
      if (pole.box().contains(p)) return true;
    }
  }
  return false;
}

bool disc_in_collision(const WorldModel& world, Vec2 p, double radius) {
  if (p.x - radius < world.bounds.lo.x || p.x + radius > world.bounds.hi.x ||
      p.y - radius < world.bounds.lo.y || p.y + radius > world.bounds.hi.y)
    return true;
  for (const auto& w : world.walls)
    if (dist_point_segment(p, w) < radius) return true;
  for (const auto& pole : world.poles)
    if (dist_point_pole(p, pole) < radius) return true;
  return false;
}

LidarScan cast_scan(const WorldModel& world, const Pose& pose,
                    const SensorSpec& spec, Rng& rng) {
  if (point_in_obstacle(world, pose.position()))
    throw DataError("cast_scan: pose inside an obstacle or out of bounds");

  const int n = spec.beam_count;
  LidarScan scan;
  scan.sensor = spec;
  scan.ranges.assign(n, std::numeric_limits<double>::quiet_NaN());
  scan.valid.assign(n, 0);

  const Vec2 origin = pose.position();
  for (int i = 0; i < n; ++i) {
    const double angle = pose.heading + spec.angle_span * i / n;
    const Vec2 dir{std::cos(angle), std::sin(angle)};
    double t = kInf;
    for (const auto& w : world.walls)
      t = std::min(t, ray_segment(origin, dir, w));
    for (const auto& pole : world.poles) {
      if (pole.shape == Pole::Shape::kCircle)
        t = std::min(t, ray_circle(origin, dir, pole.center, 0.5 * pole.size));
      else
        t = std::min(t, ray_aabb(origin, dir, pole.box()));
    }
    if (t > spec.max_range) continue;  // stays invalid
    double r = t;
    if (spec.noise_sigma > 0.0) r = std::max(0.0, r + rng.normal(0.0, spec.noise_sigma));
    scan.ranges[i] = r;
    scan.valid[i] = 1;
  }

  // Randomly knock out a share of beams, chosen without replacement.
  const int drop = static_cast<int>(std::llround(spec.invalid_fraction * n));
  if (drop > 0) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = 0; i < drop; ++i) {
      const auto j = rng.uniform_int(i, n - 1);
      std::swap(idx[i], idx[j]);
      scan.ranges[idx[i]] = std::numeric_limits<double>::quiet_NaN();
      scan.valid[idx[i]] = 0;
    }
  }
  return scan;
}

Pose sample_spawn_pose(const WorldModel& world, Rng& rng, double robot_radius,
                       int max_attempts) {
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Pose pose;
    pose.x = rng.uniform(world.bounds.lo.x, world.bounds.hi.x);
    pose.y = rng.uniform(world.bounds.lo.y, world.bounds.hi.y);
    pose.heading = normalize_angle(rng.uniform(-M_PI, M_PI));
    if (!disc_in_collision(world, pose.position(), robot_radius)) return pose;
  }
  throw DataError("no valid spawn pose found");
}

std::vector<std::pair<Pose, LidarScan>> random_walk_trajectory(
    const WorldModel& world, const SensorSpec& spec, Rng& rng, int max_steps,
    double step_rate_hz, const RandomWalkConfig& cfg) {
  if (max_steps < 1) throw ConfigError("random walk: max_steps must be >= 1");
  if (step_rate_hz <= 0.0) throw ConfigError("random walk: step rate must be positive");
  const double step_len = cfg.speed / step_rate_hz;
  if (step_len >= cfg.robot_radius)
    throw ConfigError("random walk: step length must stay below the robot radius");

  Pose pose = sample_spawn_pose(world, rng, cfg.robot_radius, cfg.spawn_attempts);

  std::vector<std::pair<Pose, LidarScan>> traj;
  traj.reserve(static_cast<std::size_t>(max_steps));
  traj.emplace_back(pose, cast_scan(world, pose, spec, rng));

  while (static_cast<int>(traj.size()) < max_steps) {
    pose.heading = normalize_angle(
        pose.heading + rng.uniform(-cfg.max_turn, cfg.max_turn));
    const Vec2 next = pose.position() +
                      Vec2{std::cos(pose.heading), std::sin(pose.heading)} * step_len;
    if (disc_in_collision(world, next, cfg.robot_radius)) break;
    pose.x = next.x;
    pose.y = next.y;
    traj.emplace_back(pose, cast_scan(world, pose, spec, rng));
  }
  return traj;
}

bool check_path_collision(const WorldModel& world, const Pose& from, Vec2 to,
                          double robot_radius) {
  if (!world.bounds.contains(to)) return true;
  const Segment path{from.position(), to};
  for (const auto& w : world.walls)
    if (dist_segment_segment(path, w) < robot_radius) return true;
  for (std::size_t i = 0; i < world.poles.size(); ++i) {
    if (world.goal_pole_index && *world.goal_pole_index == i) continue;
    const auto& pole = world.poles[i];
    if (pole.shape == Pole::Shape::kCircle) {
      if (dist_point_segment(pole.center, path) <
          robot_radius + 0.5 * pole.size)
        return true;
    } else {
      if (dist_segment_aabb(path, pole.box()) < robot_radius) return true;
    }
  }
  return false;
}

}  // namespace lidarnav
