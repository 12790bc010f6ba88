#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "lidarnav/nn.hpp"

namespace lidarnav {

inline constexpr std::uint16_t kCheckpointVersion = 1;

// NNCK checkpoint: magic "NNCK", version u16, length-prefixed JSON header
// (graph spec, tensor names/shapes, optimizer flags, free-form meta), then
// the named tensors as little-endian f32 in header order. When opt_state is
// true each trainable parameter's Adam moments follow it as "<name>.adam_m"
// and "<name>.adam_v" entries.
void save_checkpoint(const std::string& path, const std::string& graph_spec,
                     const std::vector<Param*>& params,
                     const nlohmann::json& meta, bool opt_state = false,
                     std::int64_t adam_t = 0);

// Validates magic/version, graph spec, and the name/shape of every parameter,
// then loads values (and Adam moments when present and requested). Returns
// the stored adam_t (0 when no optimizer state).
std::int64_t load_checkpoint(const std::string& path,
                             const std::string& graph_spec,
                             const std::vector<Param*>& params,
                             bool want_opt_state = false);

// Reads only the JSON header's "meta" object.
nlohmann::json read_checkpoint_meta(const std::string& path);

}  // namespace lidarnav
