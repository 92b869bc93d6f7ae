#pragma once

#include <string>

#include "i8t/models.hpp"

namespace i8t {

// Versioned binary container. Layout (all integers little-endian):
//   magic "I8FT" | u32 version | u32 n_tensors | u32 n_clip_states
//   tensor record: u32 name_len | name | u32 rank | u32 dims[rank] | f32 payload
//   clip record:   u32 name_len | name | f32 clip | f64 last_dc |
//                  i64 iter_of_last_update | i64 period | f32 clip_w | f32 clip_a
// Tensors cover every parameter and buffer of every leaf, named
// "<leaf-path>.<param-name>". Round-trips bit-exactly.
void save_checkpoint(Model& model, const std::string& path);
void load_checkpoint(Model& model, const std::string& path);

}  // namespace i8t
