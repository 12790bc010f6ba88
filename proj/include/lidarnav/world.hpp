#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "lidarnav/geometry.hpp"
#include "lidarnav/rng.hpp"

namespace lidarnav {

struct Pole {
  enum class Shape { kCircle, kSquare };
  Shape shape = Shape::kCircle;
  Vec2 center;
  double size = 0.2;  // diameter for circles, side length for squares

  double circumradius() const {
    return shape == Shape::kCircle ? 0.5 * size : 0.5 * size * M_SQRT2;
  }
  Aabb box() const {  // squares only
    const double h = 0.5 * size;
    return {{center.x - h, center.y - h}, {center.x + h, center.y + h}};
  }
};

struct WorldModel {
  std::vector<Segment> walls;
  std::vector<Pole> poles;
  Aabb bounds;
  std::optional<std::size_t> goal_pole_index;
};

struct SensorSpec {
  int beam_count = 720;
  double max_range = 10.0;          // meters
  double angle_span = 2.0 * M_PI;   // radians, full revolution
  double noise_sigma = 0.02;        // meters, Gaussian range noise
  double invalid_fraction = 0.02;   // share of beams randomly invalidated
};

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // normalized to (-pi, pi]

  Vec2 position() const { return {x, y}; }
};

struct LidarScan {
  // Beam i points at heading + i * angle_span / beam_count. Invalid beams
  // carry NaN, which nothing downstream may read as geometry.
  std::vector<double> ranges;
  std::vector<std::uint8_t> valid;
  SensorSpec sensor;

  int beam_count() const { return static_cast<int>(ranges.size()); }
};

struct SimpleRoomConfig {
  double side_min = 4.0;
  double side_max = 8.0;
  double pole_diameter = 0.2;
  double wall_clearance = 0.5;  // min distance pole center to any wall
  int max_attempts = 1000;
};

struct MainRoomConfig {
  double side_min = 5.0;
  double side_max = 10.0;
  int interior_walls_min = 1;
  int interior_walls_max = 3;
  double door_width = 1.0;
  double pole_size_min = 0.1;
  double pole_size_max = 0.4;
  double pole_density_min = 0.05;  // poles per square meter
  double pole_density_max = 0.25;
  double cluster_prob = 0.5;       // place near a corner / existing pole
  double wall_clearance = 0.3;
  double pole_gap = 0.05;          // min surface gap between poles
  int max_attempts = 200;          // per pole
};

WorldModel generate_simple_room(Rng& rng, const SimpleRoomConfig& cfg = {});
WorldModel generate_main_room(Rng& rng, const MainRoomConfig& cfg = {});

// True when the point p lies inside a pole or outside the world bounds.
bool point_in_obstacle(const WorldModel& world, Vec2 p);

// True when a disc of the given radius at p overlaps a wall, a pole, or
// sticks out of the room. Every pole counts, the goal pole included.
bool disc_in_collision(const WorldModel& world, Vec2 p, double radius);

LidarScan cast_scan(const WorldModel& world, const Pose& pose,
                    const SensorSpec& spec, Rng& rng);

struct RandomWalkConfig {
  double speed = 0.5;        // m/s
  double max_turn = 0.3;     // radians per step, uniform
  double robot_radius = 0.15;
  int spawn_attempts = 1000;
};

std::vector<std::pair<Pose, LidarScan>> random_walk_trajectory(
    const WorldModel& world, const SensorSpec& spec, Rng& rng, int max_steps,
    double step_rate_hz = 5.0, const RandomWalkConfig& cfg = {});

// Swept-disc test along the straight segment from -> to. Walls and
// non-goal poles block; the goal pole is transparent (reaching it is
// handled by the navigation task, not as a crash).
bool check_path_collision(const WorldModel& world, const Pose& from, Vec2 to,
                          double robot_radius);

// Collision-free spawn pose, rejection sampled. Throws after max_attempts.
Pose sample_spawn_pose(const WorldModel& world, Rng& rng, double robot_radius,
                       int max_attempts = 1000);

}  // namespace lidarnav
