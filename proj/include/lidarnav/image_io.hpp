#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lidarnav/preprocess.hpp"

namespace lidarnav {

// Binary PGM (P5, maxval 255), row 0 at the top of the file. Pixel (ix, iy)
// of a LocalOccupancyImage lands at file row iy, column ix.
void write_pgm(const std::string& path, int width, int height,
               const std::vector<std::uint8_t>& bytes);

// 0/255 rendering of a binary occupancy image.
std::vector<std::uint8_t> occupancy_to_bytes(const LocalOccupancyImage& img);

// Probability map scaled to 8-bit: round(p * 255), p clamped to [0, 1].
// Brighter means higher occupancy probability.
std::vector<std::uint8_t> probability_to_bytes(const std::vector<double>& probs);

}  // namespace lidarnav
