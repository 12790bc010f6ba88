#include "lidarnav/checkpoint.hpp"

#include <fstream>

#include "lidarnav/errors.hpp"
#include "lidarnav/serialize.hpp"

namespace lidarnav {

namespace {

using nlohmann::json;

void write_tensor_f32(std::ostream& os, const Tensor& t) {
  std::vector<float> buf(static_cast<std::size_t>(t.size()));
  for (std::int64_t i = 0; i < t.size(); ++i)
    buf[static_cast<std::size_t>(i)] = static_cast<float>(t[i]);
  write_f32(os, buf.data(), buf.size());
}

void read_tensor_f32(std::istream& is, Tensor& t) {
  std::vector<float> buf(static_cast<std::size_t>(t.size()));
  read_f32(is, buf.data(), buf.size());
  for (std::int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<double>(buf[static_cast<std::size_t>(i)]);
}

json header_entry(const std::string& name, const Tensor& t, bool trainable) {
  return json{{"name", name}, {"shape", t.shape()}, {"trainable", trainable}};
}

struct HeaderInfo {
  json header;
  std::streampos data_start;
};

HeaderInfo read_header(std::istream& is, const std::string& path) {
  expect_magic(is, "NNCK", path);
  std::uint16_t version = read_u16(is);
  if (version != kCheckpointVersion)
    throw DataError(path + ": unsupported checkpoint version " +
                    std::to_string(version));
  std::uint32_t len = read_u32(is);
  std::string text(len, '\0');
  is.read(text.data(), len);
  if (!is) throw DataError(path + ": truncated header");
  json header = json::parse(text, nullptr, false);
  if (header.is_discarded())
    throw DataError(path + ": malformed checkpoint header");
  return {std::move(header), is.tellg()};
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& graph_spec,
                     const std::vector<Param*>& params, const json& meta,
                     bool opt_state, std::int64_t adam_t) {
  json tensors = json::array();
  for (const Param* p : params) {
    tensors.push_back(header_entry(p->name, p->value, p->trainable));
    if (opt_state && p->trainable) {
      tensors.push_back(header_entry(p->name + ".adam_m", p->m, false));
      tensors.push_back(header_entry(p->name + ".adam_v", p->v, false));
    }
  }
  json header{{"graph", graph_spec},
              {"tensors", std::move(tensors)},
              {"opt_state", opt_state},
              {"adam_t", opt_state ? adam_t : 0},
              {"meta", meta}};
  std::string text = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint " + path);
  write_magic(os, "NNCK");
  write_u16(os, kCheckpointVersion);
  write_u32(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Param* p : params) {
    write_tensor_f32(os, p->value);
    if (opt_state && p->trainable) {
      write_tensor_f32(os, p->m);
      write_tensor_f32(os, p->v);
    }
  }
  if (!os) throw DataError("write failed for checkpoint " + path);
}

std::int64_t load_checkpoint(const std::string& path,
                             const std::string& graph_spec,
                             const std::vector<Param*>& params,
                             bool want_opt_state) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path);
  HeaderInfo info = read_header(is, path);
  const json& header = info.header;

  if (header.value("graph", "") != graph_spec)
    throw DataError(path + ": checkpoint graph does not match model (got \"" +
                    header.value("graph", "") + "\")");
  const bool has_opt = header.value("opt_state", false);
  if (want_opt_state && !has_opt)
    throw DataError(path + ": checkpoint has no optimizer state");

  const json& tensors = header.at("tensors");
  std::size_t idx = 0;
  auto next_entry = [&](const std::string& name, const Tensor& t) -> void {
    if (idx >= tensors.size())
      throw DataError(path + ": missing tensor " + name);
    const json& e = tensors[idx++];
    if (e.at("name").get<std::string>() != name)
      throw DataError(path + ": expected tensor " + name + ", found " +
                      e.at("name").get<std::string>());
    if (e.at("shape").get<std::vector<int>>() != t.shape())
      throw DataError(path + ": shape mismatch for tensor " + name);
  };

  for (Param* p : params) {
    next_entry(p->name, p->value);
    read_tensor_f32(is, p->value);
    if (has_opt && p->trainable) {
      next_entry(p->name + ".adam_m", p->m);
      next_entry(p->name + ".adam_v", p->v);
      if (want_opt_state) {
        read_tensor_f32(is, p->m);
        read_tensor_f32(is, p->v);
      } else {
        is.seekg(static_cast<std::streamoff>(2 * sizeof(float) *
                                             static_cast<std::size_t>(p->m.size())),
                 std::ios::cur);
        if (!is) throw DataError(path + ": truncated tensor data");
      }
    }
  }
  if (idx != tensors.size())
    throw DataError(path + ": checkpoint holds extra tensors");
  return want_opt_state ? header.value("adam_t", std::int64_t{0}) : 0;
}

nlohmann::json read_checkpoint_meta(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path);
  HeaderInfo info = read_header(is, path);
  return info.header.value("meta", json::object());
}

}  // namespace lidarnav
