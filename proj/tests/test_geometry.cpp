#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lidarnav/geometry.hpp"
#include "lidarnav/rng.hpp"

using namespace lidarnav;

TEST_CASE("ray_segment hits and misses") {
  const Segment wall{{2.0, -1.0}, {2.0, 1.0}};
  CHECK(ray_segment({0, 0}, {1, 0}, wall) == doctest::Approx(2.0).epsilon(1e-12));
  // 45 degrees onto a taller wall: hit at (2, 2)
  const Segment tall{{2.0, -1.0}, {2.0, 3.0}};
  const double t = ray_segment({0, 0}, {M_SQRT1_2, M_SQRT1_2}, tall);
  CHECK(t == doctest::Approx(2.0 * M_SQRT2).epsilon(1e-12));
  // pointing away
  CHECK(ray_segment({0, 0}, {-1, 0}, wall) == kInf);
  // parallel
  CHECK(ray_segment({0, 0}, {0, 1}, wall) == kInf);
  // past the endpoint
  CHECK(ray_segment({0, 2.0}, {1, 0}, wall) == kInf);
}

TEST_CASE("ray_circle tangent, chord, and inside cases") {
  CHECK(ray_circle({0, 0}, {1, 0}, {3, 0}, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
  // tangent ray grazes at distance 3
  CHECK(ray_circle({0, 0}, {1, 0}, {3, 1.0}, 1.0) == doctest::Approx(3.0).epsilon(1e-6));
  // miss
  CHECK(ray_circle({0, 0}, {1, 0}, {3, 1.5}, 1.0) == kInf);
  // origin inside: first exit point
  CHECK(ray_circle({3, 0}, {1, 0}, {3, 0}, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  // behind the origin
  CHECK(ray_circle({0, 0}, {-1, 0}, {3, 0}, 1.0) == kInf);
}

TEST_CASE("ray_aabb from outside and inside") {
  const Aabb box{{1, 1}, {3, 3}};
  CHECK(ray_aabb({0, 2}, {1, 0}, box) == doctest::Approx(1.0));
  CHECK(ray_aabb({2, 2}, {1, 0}, box) == doctest::Approx(1.0));  // exit
  CHECK(ray_aabb({0, 0}, {M_SQRT1_2, M_SQRT1_2}, box) == doctest::Approx(M_SQRT2));
  CHECK(ray_aabb({0, 4}, {1, 0}, box) == kInf);
  CHECK(ray_aabb({0, 2}, {-1, 0}, box) == kInf);
}

TEST_CASE("point-segment and point-aabb distances") {
  const Segment s{{0, 0}, {4, 0}};
  CHECK(dist_point_segment({2, 3}, s) == doctest::Approx(3.0));
  CHECK(dist_point_segment({-3, 4}, s) == doctest::Approx(5.0));  // endpoint
  CHECK(dist_point_segment({6, 0}, s) == doctest::Approx(2.0));
  CHECK(dist_point_segment({1, 0}, s) == doctest::Approx(0.0));

  const Aabb box{{0, 0}, {2, 2}};
  CHECK(dist_point_aabb({1, 1}, box) == doctest::Approx(0.0));
  CHECK(dist_point_aabb({3, 1}, box) == doctest::Approx(1.0));
  CHECK(dist_point_aabb({5, 6}, box) == doctest::Approx(5.0));
}

TEST_CASE("segment intersection and distances") {
  CHECK(segments_intersect({{0, 0}, {2, 2}}, {{0, 2}, {2, 0}}));
  CHECK_FALSE(segments_intersect({{0, 0}, {1, 0}}, {{0, 1}, {1, 1}}));
  CHECK(dist_segment_segment({{0, 0}, {1, 0}}, {{0, 1}, {1, 1}}) == doctest::Approx(1.0));
  CHECK(dist_segment_segment({{0, 0}, {2, 2}}, {{0, 2}, {2, 0}}) == doctest::Approx(0.0));
  // skew non-crossing pair: closest at endpoints
  CHECK(dist_segment_segment({{0, 0}, {1, 0}}, {{3, 0}, {4, 1}}) == doctest::Approx(2.0));
  const Aabb box{{2, -1}, {4, 1}};
  CHECK(dist_segment_aabb({{0, 0}, {1, 0}}, box) == doctest::Approx(1.0));
  CHECK(dist_segment_aabb({{0, 0}, {3, 0}}, box) == doctest::Approx(0.0));
}

TEST_CASE("normalize_angle lands in (-pi, pi]") {
  CHECK(normalize_angle(0.0) == doctest::Approx(0.0));
  CHECK(normalize_angle(M_PI) == doctest::Approx(M_PI));
  CHECK(normalize_angle(-M_PI) == doctest::Approx(M_PI));
  CHECK(normalize_angle(3 * M_PI) == doctest::Approx(M_PI));
  CHECK(normalize_angle(-7.5 * M_PI) == doctest::Approx(0.5 * M_PI));
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(-50.0, 50.0);
    const double n = normalize_angle(a);
    CHECK(n > -M_PI - 1e-12);
    CHECK(n <= M_PI + 1e-12);
    // same direction
    CHECK(std::abs(std::remainder(a - n, 2 * M_PI)) < 1e-9);
  }
}

TEST_CASE("ray distances agree with a dense sampling oracle") {
  // property: the reported hit distance is consistent with the first sign
  // change of "inside primitive" along the ray, sampled finely
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    const Vec2 c{rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const double r = rng.uniform(0.2, 1.5);
    const double ang = rng.uniform(-M_PI, M_PI);
    const Vec2 d{std::cos(ang), std::sin(ang)};
    const Vec2 o{rng.uniform(-4, 4), rng.uniform(-4, 4)};
    if ((o - c).norm() <= r + 1e-6) continue;  // keep origin outside
    const double t = ray_circle(o, d, c, r);
    if (t < kInf) {
      const Vec2 hit = o + d * t;
      CHECK((hit - c).norm() == doctest::Approx(r).epsilon(1e-9));
      // no earlier crossing
      for (double s = t * 0.05; s < t * 0.999; s += t * 0.05)
        CHECK((o + d * s - c).norm() >= r - 1e-9);
    } else {
      for (double s = 0.0; s < 20.0; s += 0.01)
        CHECK((o + d * s - c).norm() >= r - 1e-6);
    }
  }
}
