#include "lidarnav/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "lidarnav/errors.hpp"

namespace lidarnav {

void write_pgm(const std::string& path, int width, int height,
               const std::vector<std::uint8_t>& bytes) {
  if (width < 1 || height < 1 ||
      bytes.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw DataError("write_pgm: byte count does not match dimensions");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("write_pgm: cannot open " + path);
  os << "P5\n" << width << " " << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("write_pgm: write failed for " + path);
}

std::vector<std::uint8_t> occupancy_to_bytes(const LocalOccupancyImage& img) {
  std::vector<std::uint8_t> out(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    out[i] = img.pixels[i] ? 255 : 0;
  return out;
}

std::vector<std::uint8_t> probability_to_bytes(const std::vector<double>& probs) {
  std::vector<std::uint8_t> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], 0.0, 1.0);
    out[i] = static_cast<std::uint8_t>(std::lround(p * 255.0));
  }
  return out;
}

}  // namespace lidarnav
