// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#include "egostream/common.hpp"

#include <fstream>
#include <sstream>

namespace egostream {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(bool(in), "cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(bool(out), "cannot write file: " + path);
  out << text;
  require(bool(out), "write failed: " + path);
}

}  // namespace egostream
