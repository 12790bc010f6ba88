#include "lidarnav/geometry.hpp"

#include <algorithm>

namespace lidarnav {

namespace {
constexpr double kEps = 1e-12;
}

double ray_segment(Vec2 o, Vec2 d, const Segment& s) {
  const Vec2 e = s.b - s.a;
  const Vec2 ao = s.a - o;
  const double denom = d.cross(e);
  if (std::abs(denom) < kEps) {
    // Parallel. Collinear rays can still graze the segment end-on.
    if (std::abs(ao.cross(d)) > kEps) return kInf;
    const double d2 = d.norm2();
    const double ta = ao.dot(d) / d2;
    const double tb = (s.b - o).dot(d) / d2;
    const double tmin = std::min(ta, tb), tmax = std::max(ta, tb);
    if (tmax < 0.0) return kInf;
    return std::max(tmin, 0.0);
  }
  const double t = ao.cross(e) / denom;
  const double u = ao.cross(d) / denom;
  if (t < -kEps || u < -kEps || u > 1.0 + kEps) return kInf;
  return std::max(t, 0.0);
}

double ray_circle(Vec2 o, Vec2 d, Vec2 center, double radius) {
  const Vec2 m = o - center;
  const double a = d.norm2();
  const double b = m.dot(d);
  const double c = m.norm2() - radius * radius;
  const double disc = b * b - a * c;
  if (disc < 0.0) return kInf;
  const double sq = std::sqrt(disc);
  const double t1 = (-b - sq) / a;
  if (t1 >= 0.0) return t1;
  const double t2 = (-b + sq) / a;
  if (t2 >= 0.0) return t2;  // origin inside
  return kInf;
}

double ray_aabb(Vec2 o, Vec2 d, const Aabb& box) {
  // slab method
  double tmin = -kInf, tmax = kInf;
  const double org[2] = {o.x, o.y};
  const double dir[2] = {d.x, d.y};
  const double lo[2] = {box.lo.x, box.lo.y};
  const double hi[2] = {box.hi.x, box.hi.y};
  for (int i = 0; i < 2; ++i) {
    if (std::abs(dir[i]) < kEps) {
      if (org[i] < lo[i] || org[i] > hi[i]) return kInf;
    } else {
      double t1 = (lo[i] - org[i]) / dir[i];
      double t2 = (hi[i] - org[i]) / dir[i];
      if (t1 > t2) std::swap(t1, t2);
      tmin = std::max(tmin, t1);
      tmax = std::min(tmax, t2);
    }
  }
  if (tmax < tmin || tmax < 0.0) return kInf;
  return tmin >= 0.0 ? tmin : tmax;
}

double dist_point_segment(Vec2 p, const Segment& s) {
  const Vec2 e = s.b - s.a;
  const double len2 = e.norm2();
  if (len2 < kEps * kEps) return (p - s.a).norm();
  double t = (p - s.a).dot(e) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (s.a + e * t)).norm();
}

double dist_point_aabb(Vec2 p, const Aabb& box) {
  const double dx = std::max({box.lo.x - p.x, 0.0, p.x - box.hi.x});
  const double dy = std::max({box.lo.y - p.y, 0.0, p.y - box.hi.y});
  return std::hypot(dx, dy);
}

bool segments_intersect(const Segment& s1, const Segment& s2) {
  const Vec2 r = s1.b - s1.a;
  const Vec2 s = s2.b - s2.a;
  const Vec2 qp = s2.a - s1.a;
  const double denom = r.cross(s);
  if (std::abs(denom) < kEps) {
    if (std::abs(qp.cross(r)) > kEps) return false;  // parallel, apart
    // collinear: overlap test on the projection
    const double r2 = r.norm2();
    if (r2 < kEps * kEps) return dist_point_segment(s1.a, s2) < kEps;
    double t0 = qp.dot(r) / r2;
    double t1 = t0 + s.dot(r) / r2;
    if (t0 > t1) std::swap(t0, t1);
    return t1 >= 0.0 && t0 <= 1.0;
  }
  const double t = qp.cross(s) / denom;
  const double u = qp.cross(r) / denom;
  return t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0;
}

double dist_segment_segment(const Segment& s1, const Segment& s2) {
  if (segments_intersect(s1, s2)) return 0.0;
  return std::min(
      std::min(dist_point_segment(s1.a, s2), dist_point_segment(s1.b, s2)),
      std::min(dist_point_segment(s2.a, s1), dist_point_segment(s2.b, s1)));
}

double dist_segment_aabb(const Segment& s, const Aabb& box) {
  if (box.contains(s.a) || box.contains(s.b)) return 0.0;
  const Segment edges[4] = {
      {{box.lo.x, box.lo.y}, {box.hi.x, box.lo.y}},
      {{box.hi.x, box.lo.y}, {box.hi.x, box.hi.y}},
      {{box.hi.x, box.hi.y}, {box.lo.x, box.hi.y}},
      {{box.lo.x, box.hi.y}, {box.lo.x, box.lo.y}},
  };
  double best = kInf;
  for (const auto& e : edges) best = std::min(best, dist_segment_segment(s, e));
  return best;
}

double normalize_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a > M_PI) a -= 2.0 * M_PI;
  if (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

}  // namespace lidarnav
