#pragma once

#include <cstdint>
#include <vector>

#include "lidarnav/world.hpp"

namespace lidarnav {

// Per-beam range scaled into [0,1]; invalid or out-of-range beams are
// exactly zero and contribute nothing to the local image.
struct NormalizedScan {
  std::vector<double> values;
  double angle_span = 2.0 * M_PI;

  int beam_count() const { return static_cast<int>(values.size()); }
  double angle(int i) const { return angle_span * i / beam_count(); }
};

// Square binary grid of beam endpoints in the sensor frame. The sensor sits
// at the center cell; x indices grow along the sensor forward axis, y
// indices to its left.
struct LocalOccupancyImage {
  int resolution_px = 0;
  double extent_m = 0.0;
  std::vector<std::uint8_t> pixels;  // row-major, pixels[iy * res + ix]

  double cell_size() const { return extent_m / resolution_px; }
  std::uint8_t at(int ix, int iy) const {
    return pixels[static_cast<std::size_t>(iy) * resolution_px + ix];
  }
  int occupied_count() const {
    int n = 0;
    for (auto p : pixels) n += p;
    return n;
  }
};

NormalizedScan normalize_ranges(const LidarScan& scan, double max_range = 10.0);

LocalOccupancyImage scan_to_local_image(const NormalizedScan& scan,
                                        int resolution_px, double extent_m,
                                        double max_range);

// Replaces each invalid beam with the mean of the nearest valid neighbor on
// each side, searching circularly. Used only by the raw-measurement
// baseline pipeline.
LidarScan replace_invalid_with_neighbor_average(const LidarScan& scan);

}  // namespace lidarnav
