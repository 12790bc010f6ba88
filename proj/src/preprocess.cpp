#include "lidarnav/preprocess.hpp"

#include <cmath>
#include <string>

#include "lidarnav/errors.hpp"

namespace lidarnav {

NormalizedScan normalize_ranges(const LidarScan& scan, double max_range) {
  if (max_range <= 0.0) throw ConfigError("normalize_ranges: max_range must be positive");
  NormalizedScan out;
  out.angle_span = scan.sensor.angle_span;
  out.values.assign(scan.ranges.size(), 0.0);
  for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
    if (!scan.valid[i]) continue;
    const double r = scan.ranges[i];
    if (r > 0.0 && r <= max_range) out.values[i] = r / max_range;
  }
  return out;
}

LocalOccupancyImage scan_to_local_image(const NormalizedScan& scan,
                                        int resolution_px, double extent_m,
                                        double max_range) {
  if (resolution_px <= 0 || resolution_px % 2 != 0)
    throw ConfigError("scan_to_local_image: resolution must be positive and even");
  if (extent_m < 2.0 * max_range)
    throw ConfigError("scan_to_local_image: extent must cover 2 * max_range");

  LocalOccupancyImage img;
  img.resolution_px = resolution_px;
  img.extent_m = extent_m;
  img.pixels.assign(static_cast<std::size_t>(resolution_px) * resolution_px, 0);

  const int center = resolution_px / 2;
  const double cell = img.cell_size();
  for (int i = 0; i < scan.beam_count(); ++i) {
    const double v = scan.values[i];
    if (v <= 0.0) continue;
    const double theta = scan.angle(i);
    const double x = v * max_range * std::cos(theta);
    const double y = v * max_range * std::sin(theta);
    int ix = center + static_cast<int>(std::floor(x / cell));
    int iy = center + static_cast<int>(std::floor(y / cell));
    // v = 1.0 on the +axis lands exactly on the grid edge; fold it in.
    if (ix == resolution_px) ix = resolution_px - 1;
    if (iy == resolution_px) iy = resolution_px - 1;
    if (ix < 0 || ix >= resolution_px || iy < 0 || iy >= resolution_px)
      throw DataError("scan_to_local_image: endpoint outside grid (beam " +
                      std::to_string(i) + ")");
    img.pixels[static_cast<std::size_t>(iy) * resolution_px + ix] = 1;
  }
  return img;
}

LidarScan replace_invalid_with_neighbor_average(const LidarScan& scan) {
  const int n = scan.beam_count();
  int valid_count = 0;
  for (auto v : scan.valid) valid_count += v;
  if (valid_count == 0)
    throw DataError("replace_invalid_with_neighbor_average: all beams invalid");

  LidarScan out = scan;
  for (int i = 0; i < n; ++i) {
    if (scan.valid[i]) continue;
    int left = -1, right = -1;
    for (int d = 1; d < n; ++d) {
      const int j = ((i - d) % n + n) % n;
      if (scan.valid[j]) {
        left = j;
        break;
      }
    }
    for (int d = 1; d < n; ++d) {
      const int j = (i + d) % n;
      if (scan.valid[j]) {
        right = j;
        break;
      }
    }
    out.ranges[i] = 0.5 * (scan.ranges[left] + scan.ranges[right]);
    out.valid[i] = 1;
  }
  return out;
}

}  // namespace lidarnav
