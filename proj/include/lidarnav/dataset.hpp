#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "lidarnav/world.hpp"

namespace lidarnav {

inline constexpr std::uint16_t kDatasetVersion = 1;

// L2DS archive: magic "L2DS", version u16, length-prefixed JSON header
// (sensor spec, generation config, scan count), then scan_count × beam_count
// little-endian f32 ranges (invalid = NaN) and scan_count × 3 f32 poses.
struct DatasetArchive {
  SensorSpec sensor;
  nlohmann::json generation;  // generator config echo, free-form
  int scan_count = 0;
  std::vector<float> ranges;  // scan_count * beam_count
  std::vector<float> poses;   // scan_count * 3: x, y, heading

  const float* scan(int i) const { return ranges.data() + static_cast<std::size_t>(i) * sensor.beam_count; }
  Pose pose(int i) const {
    const float* p = poses.data() + static_cast<std::size_t>(i) * 3;
    return Pose{p[0], p[1], p[2]};
  }
  void append(const LidarScan& scan, const Pose& pose);
};

void write_dataset(const std::string& path, const DatasetArchive& d);
DatasetArchive read_dataset(const std::string& path);

}  // namespace lidarnav
