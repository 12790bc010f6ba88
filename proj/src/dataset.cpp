#include "lidarnav/dataset.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "lidarnav/errors.hpp"
#include "lidarnav/serialize.hpp"

namespace lidarnav {

using nlohmann::json;

void DatasetArchive::append(const LidarScan& s, const Pose& p) {
  if (static_cast<int>(s.ranges.size()) != sensor.beam_count)
    throw DataError("scan beam count does not match archive sensor spec");
  for (int b = 0; b < sensor.beam_count; ++b)
    ranges.push_back(s.valid[static_cast<std::size_t>(b)]
                         ? static_cast<float>(s.ranges[static_cast<std::size_t>(b)])
                         : std::numeric_limits<float>::quiet_NaN());
  poses.push_back(static_cast<float>(p.x));
  poses.push_back(static_cast<float>(p.y));
  poses.push_back(static_cast<float>(p.heading));
  ++scan_count;
}

void write_dataset(const std::string& path, const DatasetArchive& d) {
  if (d.ranges.size() != static_cast<std::size_t>(d.scan_count) * d.sensor.beam_count ||
      d.poses.size() != static_cast<std::size_t>(d.scan_count) * 3)
    throw DataError("dataset arrays inconsistent with scan count");
  json header{{"sensor",
               {{"beam_count", d.sensor.beam_count},
                {"max_range", d.sensor.max_range},
                {"angle_span", d.sensor.angle_span},
                {"noise_sigma", d.sensor.noise_sigma},
                {"invalid_fraction", d.sensor.invalid_fraction}}},
              {"generation", d.generation},
              {"scan_count", d.scan_count}};
  std::string text = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write dataset " + path);
  write_magic(os, "L2DS");
  write_u16(os, kDatasetVersion);
  write_u32(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_f32(os, d.ranges.data(), d.ranges.size());
  write_f32(os, d.poses.data(), d.poses.size());
  if (!os) throw DataError("write failed for dataset " + path);
}

DatasetArchive read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open dataset " + path);
  expect_magic(is, "L2DS", path);
  std::uint16_t version = read_u16(is);
  if (version != kDatasetVersion)
    throw DataError(path + ": unsupported dataset version " +
                    std::to_string(version));
  std::uint32_t len = read_u32(is);
  std::string text(len, '\0');
  is.read(text.data(), len);
  if (!is) throw DataError(path + ": truncated header");
  json header = json::parse(text, nullptr, false);
  if (header.is_discarded()) throw DataError(path + ": malformed dataset header");

  DatasetArchive d;
  try {
    const json& s = header.at("sensor");
    d.sensor.beam_count = s.at("beam_count").get<int>();
    d.sensor.max_range = s.at("max_range").get<double>();
    d.sensor.angle_span = s.at("angle_span").get<double>();
    d.sensor.noise_sigma = s.at("noise_sigma").get<double>();
    d.sensor.invalid_fraction = s.at("invalid_fraction").get<double>();
    d.generation = header.value("generation", json::object());
    d.scan_count = header.at("scan_count").get<int>();
  } catch (const json::exception& e) {
    throw DataError(path + ": bad dataset header: " + e.what());
  }
  if (d.sensor.beam_count < 1 || d.scan_count < 0)
    throw DataError(path + ": bad dataset header values");

  d.ranges.resize(static_cast<std::size_t>(d.scan_count) * d.sensor.beam_count);
  d.poses.resize(static_cast<std::size_t>(d.scan_count) * 3);
  read_f32(is, d.ranges.data(), d.ranges.size());
  read_f32(is, d.poses.data(), d.poses.size());
  return d;
}

}  // namespace lidarnav
