#pragma once

#include <string>

#include "wan/models.hpp"

namespace wan::models {

// Flat binary checkpoint: magic "WANCKPT1", u64 record count, then per record
// u64 name length, UTF-8 name, u64 rank, u64 extents[rank], float32 values.
// All integers and floats little-endian. Round-trip is value-exact at 32-bit.
void save_checkpoint(const std::string& path, const NamedTensors& records);
NamedTensors load_checkpoint(const std::string& path);

// Copies values of every record whose name starts with `prefix` into the
// matching parameter. The prefixed record set and the parameter set must
// match exactly (names and shapes).
void load_into(const NamedTensors& records, const NamedTensors& params,
               const std::string& prefix);

// Reads the generator width out of a record set (encoder's first conv).
int64_t infer_base_filters(const NamedTensors& records);

uint64_t file_content_hash(const std::string& path);

}  // namespace wan::models
