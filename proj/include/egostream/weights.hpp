// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "egostream/tensor.hpp"

namespace egostream {

// Named-tensor container with a fixed little-endian byte layout:
//   magic "EGSW" | u32 format_version=1 | u32 tensor_count
//   per tensor: u32 name_len | name bytes | u32 rank | rank*u32 dims
//               | product*f32 row-major
// No padding, no alignment. save/load round-trips bit-exactly.
struct WeightArchive {
  struct Entry {
    std::string name;
    Tensor tensor;
  };
  std::vector<Entry> entries;
  uint32_t format_version = 1;

  void add(const std::string& name, Tensor t);
  bool contains(const std::string& name) const;
  const Tensor& get(const std::string& name) const;
  // Presence/order check against a manifest-driven required list; rejects
  // duplicates, missing names, and unexpected extras.
  void expect_exactly(const std::vector<std::string>& names) const;
};

std::vector<uint8_t> save_weights(const WeightArchive& archive);
WeightArchive load_weights(const std::vector<uint8_t>& bytes);

void save_weights_file(const std::string& path, const WeightArchive& archive);
WeightArchive load_weights_file(const std::string& path);

}  // namespace egostream
