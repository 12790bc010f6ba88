#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace lidarnav {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

void write_u16(std::ostream& os, std::uint16_t v);
void write_u32(std::ostream& os, std::uint32_t v);
void write_f32(std::ostream& os, const float* data, std::size_t n);
void write_magic(std::ostream& os, const char magic[4]);

std::uint16_t read_u16(std::istream& is);
std::uint32_t read_u32(std::istream& is);
void read_f32(std::istream& is, float* data, std::size_t n);
// throws DataError mentioning `what` if the magic does not match
void expect_magic(std::istream& is, const char magic[4], const std::string& what);

}  // namespace lidarnav
