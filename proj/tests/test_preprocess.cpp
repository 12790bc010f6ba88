#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "lidarnav/errors.hpp"
#include "lidarnav/preprocess.hpp"
#include "lidarnav/world.hpp"

using namespace lidarnav;

namespace {

LidarScan make_scan(const std::vector<double>& ranges,
                    const std::vector<std::uint8_t>& valid) {
  LidarScan s;
  s.ranges = ranges;
  s.valid = valid;
  s.sensor.beam_count = static_cast<int>(ranges.size());
  return s;
}

NormalizedScan uniform_scan(int beams, double value) {
  NormalizedScan ns;
  ns.values.assign(static_cast<std::size_t>(beams), value);
  return ns;
}

}  // namespace

TEST_CASE("normalize_ranges maps into [0,1] and zeroes invalid beams") {
  LidarScan s = make_scan({0.0, 5.0, 10.0, NAN, 12.0}, {1, 1, 1, 0, 1});
  const NormalizedScan ns = normalize_ranges(s, 10.0);
  REQUIRE(ns.beam_count() == 5);
  CHECK(ns.values[0] == doctest::Approx(0.0));
  CHECK(ns.values[1] == doctest::Approx(0.5));
  CHECK(ns.values[2] == doctest::Approx(1.0));
  CHECK(ns.values[3] == 0.0);  // invalid -> exactly zero
  CHECK(ns.values[4] == 0.0);  // beyond max_range -> zero
}

TEST_CASE("rasterizer hand-computed indices: 10+ cases") {
  // spec case: v=0.5 at angle 0, 320 px, 20 m extent, 10 m range ->
  // endpoint (5, 0), cell 0.0625 m -> ix = 160 + 80 = 240, iy = 160
  {
    NormalizedScan ns = uniform_scan(4, 0.0);
    ns.values[0] = 0.5;
    const LocalOccupancyImage img = scan_to_local_image(ns, 320, 20.0, 10.0);
    CHECK(img.occupied_count() == 1);
    CHECK(img.at(240, 160) == 1);
  }
  // the sensor cell itself: v tiny but nonzero -> center cell
  {
    NormalizedScan ns = uniform_scan(4, 0.0);
    ns.values[0] = 1e-9;
    const LocalOccupancyImage img = scan_to_local_image(ns, 320, 20.0, 10.0);
    CHECK(img.at(160, 160) == 1);
  }
  // v = 0 contributes nothing
  {
    const LocalOccupancyImage img =
        scan_to_local_image(uniform_scan(8, 0.0), 320, 20.0, 10.0);
    CHECK(img.occupied_count() == 0);
  }
  // cardinal directions at v=0.25 -> 2.5 m = 40 cells at 320 px
  {
    NormalizedScan ns = uniform_scan(4, 0.0);
    ns.values[0] = ns.values[1] = ns.values[2] = 0.25;  // 0, 90, 180 deg
    const LocalOccupancyImage img = scan_to_local_image(ns, 320, 20.0, 10.0);
    CHECK(img.at(200, 160) == 1);  // +x forward
    CHECK(img.at(160, 200) == 1);  // +y left
    CHECK(img.at(120, 160) == 1);  // -x: floor(-2.5/0.0625) = -40
    CHECK(img.occupied_count() == 3);
  }
  // 45 degrees: endpoint (2.5/sqrt2, 2.5/sqrt2) = (1.7677..) -> floor 28 cells
  {
    NormalizedScan ns = uniform_scan(8, 0.0);
    ns.values[1] = 0.25;  // angle 45 deg
    const LocalOccupancyImage img = scan_to_local_image(ns, 320, 20.0, 10.0);
    CHECK(img.at(160 + 28, 160 + 28) == 1);
  }
  // v = 1.0 exactly on the grid edge folds into the last cell
  {
    NormalizedScan ns = uniform_scan(4, 0.0);
    ns.values[0] = 1.0;
    const LocalOccupancyImage img = scan_to_local_image(ns, 320, 20.0, 10.0);
    CHECK(img.at(319, 160) == 1);
  }
  // negative axis at max range
  {
    NormalizedScan ns = uniform_scan(4, 0.0);
    ns.values[2] = 1.0;  // angle 180
    const LocalOccupancyImage img = scan_to_local_image(ns, 320, 20.0, 10.0);
    CHECK(img.at(0, 160) == 1);
  }
  // smaller grid: 128 px, same scene as the spec case -> ix = 64 + 32
  {
    NormalizedScan ns = uniform_scan(4, 0.0);
    ns.values[0] = 0.5;
    const LocalOccupancyImage img = scan_to_local_image(ns, 128, 20.0, 10.0);
    CHECK(img.at(96, 64) == 1);
  }
  // duplicate endpoints land in one cell: 4.8 m at 0 and 0.5 degrees both
  // fall inside cell (23, 16) when cells are 0.625 m
  {
    NormalizedScan ns = uniform_scan(720, 0.0);
    ns.values[0] = 0.48;
    ns.values[1] = 0.48;
    const LocalOccupancyImage img = scan_to_local_image(ns, 32, 20.0, 10.0);
    CHECK(img.occupied_count() == 1);
    CHECK(img.at(23, 16) == 1);
  }
  // wider extent shrinks pixel distances: 40 m extent -> cell 0.125 m
  {
    NormalizedScan ns = uniform_scan(4, 0.0);
    ns.values[0] = 0.5;  // 5 m -> 40 cells
    const LocalOccupancyImage img = scan_to_local_image(ns, 320, 40.0, 10.0);
    CHECK(img.at(200, 160) == 1);
  }
  // invalid parameters are rejected
  {
    CHECK_THROWS_AS(scan_to_local_image(uniform_scan(4, 0.5), 321, 20.0, 10.0),
                    ConfigError);
    CHECK_THROWS_AS(scan_to_local_image(uniform_scan(4, 0.5), 320, 19.0, 10.0),
                    ConfigError);
  }
}

TEST_CASE("rasterized image metadata") {
  const LocalOccupancyImage img =
      scan_to_local_image(uniform_scan(4, 0.5), 128, 20.0, 10.0);
  CHECK(img.resolution_px == 128);
  CHECK(img.extent_m == doctest::Approx(20.0));
  CHECK(img.cell_size() == doctest::Approx(0.15625));
  CHECK(img.pixels.size() == 128u * 128u);
}

TEST_CASE("coarse occupied set is a subset of the fine scan's (resolution invariance)") {
  // same noise-free scene scanned at 360 and 1440 beams
  WorldModel w;
  w.bounds = {{-3, -3}, {3, 3}};
  w.walls = {{{-3, -3}, {3, -3}}, {{3, -3}, {3, 3}}, {{3, 3}, {-3, 3}}, {{-3, 3}, {-3, -3}}};
  w.poles.push_back({Pole::Shape::kCircle, {1.5, 0.8}, 0.3});
  SensorSpec coarse, fine;
  coarse.noise_sigma = fine.noise_sigma = 0.0;
  coarse.invalid_fraction = fine.invalid_fraction = 0.0;
  coarse.beam_count = 360;
  fine.beam_count = 1440;
  Rng rng(1);
  const Pose pose{0, 0, 0.2};
  const NormalizedScan nc = normalize_ranges(cast_scan(w, pose, coarse, rng), 10.0);
  const NormalizedScan nf = normalize_ranges(cast_scan(w, pose, fine, rng), 10.0);
  const LocalOccupancyImage ic = scan_to_local_image(nc, 128, 20.0, 10.0);
  const LocalOccupancyImage imf = scan_to_local_image(nf, 128, 20.0, 10.0);
  int extra = 0;
  for (std::size_t i = 0; i < ic.pixels.size(); ++i) {
    if (ic.pixels[i]) CHECK(imf.pixels[i] == 1);  // subset property
    if (imf.pixels[i] && !ic.pixels[i]) ++extra;
  }
  // difference bounded by the count of cells only the finer scan touches
  CHECK(extra == imf.occupied_count() - ic.occupied_count());
}

TEST_CASE("neighbor-average repair: interior, wraparound, and idempotency") {
  // invalid beam between 2.0 and 4.0 -> 3.0
  {
    LidarScan s = make_scan({2.0, NAN, 4.0, 5.0}, {1, 0, 1, 1});
    const LidarScan r = replace_invalid_with_neighbor_average(s);
    CHECK(r.valid[1] == 1);
    CHECK(r.ranges[1] == doctest::Approx(3.0));
    CHECK(r.ranges[0] == doctest::Approx(2.0));
  }
  // circular wraparound: first and last invalid
  {
    LidarScan s = make_scan({NAN, 2.0, 6.0, NAN}, {0, 1, 1, 0});
    const LidarScan r = replace_invalid_with_neighbor_average(s);
    // beam 0: nearest valid ccw = beam 2 (6.0), cw = beam 1 (2.0) -> 4.0
    CHECK(r.ranges[0] == doctest::Approx(4.0));
    CHECK(r.ranges[3] == doctest::Approx(4.0));
  }
  // run of invalid beams: both filled from the same flanking pair
  {
    LidarScan s = make_scan({1.0, NAN, NAN, 5.0, 3.0}, {1, 0, 0, 1, 1});
    const LidarScan r = replace_invalid_with_neighbor_average(s);
    CHECK(r.ranges[1] == doctest::Approx(3.0));
    CHECK(r.ranges[2] == doctest::Approx(3.0));
  }
  // idempotent on fully valid scans
  {
    LidarScan s = make_scan({1.0, 2.0, 3.0}, {1, 1, 1});
    const LidarScan r = replace_invalid_with_neighbor_average(s);
    const LidarScan r2 = replace_invalid_with_neighbor_average(r);
    for (int i = 0; i < 3; ++i) CHECK(r.ranges[i] == r2.ranges[i]);
  }
}

TEST_CASE("full-pipeline image matches per-beam rasterization oracle") {
  WorldModel w;
  w.bounds = {{0, 0}, {5, 4}};
  w.walls = {{{0, 0}, {5, 0}}, {{5, 0}, {5, 4}}, {{5, 4}, {0, 4}}, {{0, 4}, {0, 0}}};
  w.poles.push_back({Pole::Shape::kCircle, {3.5, 2.0}, 0.2});
  SensorSpec spec;
  spec.noise_sigma = 0.0;
  spec.invalid_fraction = 0.0;
  Rng rng(4);
  const Pose pose{1.0, 2.0, -0.5};
  const LidarScan scan = cast_scan(w, pose, spec, rng);
  const NormalizedScan ns = normalize_ranges(scan, spec.max_range);
  const int res = 160;
  const LocalOccupancyImage img = scan_to_local_image(ns, res, 20.0, spec.max_range);

  std::vector<std::uint8_t> oracle(static_cast<std::size_t>(res) * res, 0);
  const double cell = 20.0 / res;
  for (int i = 0; i < ns.beam_count(); ++i) {
    if (ns.values[i] <= 0.0) continue;
    const double a = ns.angle(i);
    const double x = ns.values[i] * spec.max_range * std::cos(a);
    const double y = ns.values[i] * spec.max_range * std::sin(a);
    int ix = res / 2 + static_cast<int>(std::floor(x / cell));
    int iy = res / 2 + static_cast<int>(std::floor(y / cell));
    ix = std::min(std::max(ix, 0), res - 1);
    iy = std::min(std::max(iy, 0), res - 1);
    oracle[static_cast<std::size_t>(iy) * res + ix] = 1;
  }
  for (std::size_t i = 0; i < oracle.size(); ++i) CHECK(img.pixels[i] == oracle[i]);
}
