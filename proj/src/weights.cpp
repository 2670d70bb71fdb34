// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#include "egostream/weights.hpp"

#include <cstring>
#include <fstream>
#include <set>

namespace egostream {

namespace {

void put_u32(std::vector<uint8_t>& b, uint32_t v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
  b.push_back((v >> 16) & 0xff);
  b.push_back((v >> 24) & 0xff);
}

struct Reader {
  const std::vector<uint8_t>& b;
  size_t pos = 0;

  void need(size_t n, const char* what) {
    if (pos + n > b.size())
      fail("weight archive truncated at byte offset " + std::to_string(pos) +
           " while reading " + what);
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = uint32_t(b[pos]) | uint32_t(b[pos + 1]) << 8 |
                 uint32_t(b[pos + 2]) << 16 | uint32_t(b[pos + 3]) << 24;
    pos += 4;
    return v;
  }
};

}  // namespace

void WeightArchive::add(const std::string& name, Tensor t) {
  require(!contains(name), "duplicate tensor name: " + name);
  entries.push_back({name, std::move(t)});
}

bool WeightArchive::contains(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return true;
  return false;
}

const Tensor& WeightArchive::get(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e.tensor;
  fail("missing tensor: " + name);
}

void WeightArchive::expect_exactly(
    const std::vector<std::string>& names) const {
  std::set<std::string> seen;
  for (const auto& e : entries)
    require(seen.insert(e.name).second, "duplicate tensor name: " + e.name);
  for (const auto& n : names)
    require(seen.erase(n) == 1, "archive missing required tensor: " + n);
  if (!seen.empty()) fail("archive has unexpected tensor: " + *seen.begin());
}

std::vector<uint8_t> save_weights(const WeightArchive& archive) {
  std::vector<uint8_t> b;
  b.insert(b.end(), {'E', 'G', 'S', 'W'});
  put_u32(b, archive.format_version);
  put_u32(b, uint32_t(archive.entries.size()));
  for (const auto& e : archive.entries) {
    put_u32(b, uint32_t(e.name.size()));
    b.insert(b.end(), e.name.begin(), e.name.end());
    put_u32(b, uint32_t(e.tensor.rank()));
    for (int d : e.tensor.dims) put_u32(b, uint32_t(d));
    const uint8_t* raw = reinterpret_cast<const uint8_t*>(e.tensor.ptr());
    b.insert(b.end(), raw, raw + e.tensor.size() * 4);
  }
  return b;
}

WeightArchive load_weights(const std::vector<uint8_t>& bytes) {
  Reader r{bytes};
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), "EGSW", 4) != 0)
    fail("bad magic at byte offset 0: not an EGSW archive");
  r.pos = 4;
  WeightArchive out;
  out.format_version = r.u32("format version");
  require(out.format_version == 1, "unsupported archive format version " +
                                       std::to_string(out.format_version));
  const uint32_t count = r.u32("tensor count");
  std::set<std::string> seen;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = r.u32("name length");
    r.need(name_len, "tensor name");
    std::string name(reinterpret_cast<const char*>(bytes.data() + r.pos),
                     name_len);
    r.pos += name_len;
    if (!seen.insert(name).second)
      fail("duplicate tensor name at byte offset " + std::to_string(r.pos) +
           ": " + name);
    const uint32_t rank = r.u32("rank");
    if (rank > 8)
      fail("implausible tensor rank " + std::to_string(rank) +
           " at byte offset " + std::to_string(r.pos - 4));
    std::vector<int> dims(rank);
    uint64_t total = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      const uint32_t v = r.u32("dim");
      total *= v;
      if (total > (uint64_t(1) << 32))
        fail("tensor dimension overflow at byte offset " +
             std::to_string(r.pos - 4));
      dims[d] = int(v);
    }
    r.need(size_t(total) * 4, "tensor payload");
    Tensor t(dims);
    std::memcpy(t.ptr(), bytes.data() + r.pos, size_t(total) * 4);
    r.pos += size_t(total) * 4;
    out.entries.push_back({std::move(name), std::move(t)});
  }
  if (r.pos != bytes.size())
    fail("trailing bytes after declared tensors at byte offset " +
         std::to_string(r.pos));
  return out;
}

void save_weights_file(const std::string& path, const WeightArchive& archive) {
  const auto bytes = save_weights(archive);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), "cannot open for write: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          std::streamsize(bytes.size()));
  require(f.good(), "write failed: " + path);
}

WeightArchive load_weights_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), "cannot open weight archive: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  return load_weights(bytes);
}

}  // namespace egostream
