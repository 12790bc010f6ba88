#pragma once

#include <cmath>
#include <limits>

namespace lidarnav {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double norm2() const { return x * x + y * y; }
};

inline Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

struct Segment {
  Vec2 a, b;
};

struct Aabb {
  Vec2 lo, hi;

  bool contains(Vec2 p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
  }
  double width() const { return hi.x - lo.x; }
  double height() const { return hi.y - lo.y; }
  double area() const { return width() * height(); }
};

constexpr double kInf = std::numeric_limits<double>::infinity();

// Ray origin o, direction d (need not be unit; returned t is in units of |d|,
// callers pass unit directions). All of these return the smallest t >= 0 at
// which the ray meets the primitive, or +inf when it never does.
double ray_segment(Vec2 o, Vec2 d, const Segment& s);
double ray_circle(Vec2 o, Vec2 d, Vec2 center, double radius);
double ray_aabb(Vec2 o, Vec2 d, const Aabb& box);

double dist_point_segment(Vec2 p, const Segment& s);
double dist_point_aabb(Vec2 p, const Aabb& box);  // 0 inside
bool segments_intersect(const Segment& s1, const Segment& s2);
double dist_segment_segment(const Segment& s1, const Segment& s2);
double dist_segment_aabb(const Segment& s, const Aabb& box);  // 0 on overlap

// heading normalized to (-pi, pi]
double normalize_angle(double a);

}  // namespace lidarnav
