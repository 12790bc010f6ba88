#include "lidarnav/serialize.hpp"

#include <cstring>

#include "lidarnav/errors.hpp"

namespace lidarnav {

void write_u16(std::ostream& os, std::uint16_t v) {
  os.write(reinterpret_cast<const char*>(&v), 2);
}

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

void write_f32(std::ostream& os, const float* data, std::size_t n) {
  os.write(reinterpret_cast<const char*>(data),
           static_cast<std::streamsize>(n * sizeof(float)));
}

void write_magic(std::ostream& os, const char magic[4]) { os.write(magic, 4); }

std::uint16_t read_u16(std::istream& is) {
  std::uint16_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 2);
  if (!is) throw DataError("unexpected end of file");
  return v;
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw DataError("unexpected end of file");
  return v;
}

void read_f32(std::istream& is, float* data, std::size_t n) {
  is.read(reinterpret_cast<char*>(data),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (!is) throw DataError("unexpected end of file");
}

void expect_magic(std::istream& is, const char magic[4], const std::string& what) {
  char got[4] = {0, 0, 0, 0};
  is.read(got, 4);
  if (!is || std::memcmp(got, magic, 4) != 0)
    throw DataError(what + ": bad magic, not a " +
                    std::string(magic, magic + 4) + " file");
}

}  // namespace lidarnav
