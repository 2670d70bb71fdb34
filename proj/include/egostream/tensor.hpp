// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "egostream/common.hpp"

namespace egostream {

// 64-byte aligned so every Eigen map over tensor memory sees the same
// alignment on every run; results are then bit-reproducible across heap
// states.
using AlignedFloats = std::vector<float, Eigen::aligned_allocator<float>>;

// Dense float32 tensor, row-major, last axis fastest.
struct Tensor {
  std::vector<int> dims;
  AlignedFloats data;

  Tensor() = default;
  explicit Tensor(std::vector<int> d) : dims(std::move(d)) {
    data.assign(count(dims), 0.0f);
  }
  Tensor(std::vector<int> d, AlignedFloats v)
      : dims(std::move(d)), data(std::move(v)) {
    require(data.size() == count(dims), "tensor data size mismatch");
  }

  static size_t count(const std::vector<int>& d) {
    size_t n = 1;
    for (int x : d) {
      require(x >= 0, "negative tensor dim");
      n *= size_t(x);
    }
    return n;
  }

  size_t size() const { return data.size(); }
  int rank() const { return int(dims.size()); }
  int dim(int i) const { return dims[size_t(i)]; }
  float* ptr() { return data.data(); }
  const float* ptr() const { return data.data(); }

  // 3-D accessor [a][b][c], c fastest.
  float& at3(int a, int b, int c) {
    return data[(size_t(a) * dims[1] + b) * dims[2] + c];
  }
  const float& at3(int a, int b, int c) const {
    return data[(size_t(a) * dims[1] + b) * dims[2] + c];
  }
  // 4-D accessor.
  float& at4(int a, int b, int c, int d) {
    return data[((size_t(a) * dims[1] + b) * dims[2] + c) * dims[3] + d];
  }
  const float& at4(int a, int b, int c, int d) const {
    return data[((size_t(a) * dims[1] + b) * dims[2] + c) * dims[3] + d];
  }

  bool same_shape(const Tensor& o) const { return dims == o.dims; }

  void check_finite(const std::string& where) const {
#ifndef NDEBUG
    for (float v : data)
      require(std::isfinite(v), "non-finite value after " + where);
#else
    (void)where;
#endif
  }
};

}  // namespace egostream
