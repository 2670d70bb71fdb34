// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

#include <complex>
#include <memory>
#include <vector>

namespace egostream {

// Real-to-complex transforms of a fixed size. Each instance owns its plans
// and scratch buffers; instances are not shareable across threads, but
// distinct instances may run concurrently. Plans are created with a
// deterministic strategy so identical inputs give bit-identical outputs
// across runs.
class RealFft32 {
 public:
  explicit RealFft32(int n);
  ~RealFft32();
  RealFft32(const RealFft32&) = delete;
  RealFft32& operator=(const RealFft32&) = delete;

  int size() const { return n_; }
  int bins() const { return n_ / 2 + 1; }

  void forward(const float* in, std::complex<float>* out);
  // Includes the 1/n normalization so inverse(forward(x)) == x.
  void inverse(const std::complex<float>* in, float* out);

 private:
  int n_;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class RealFft64 {
 public:
  explicit RealFft64(int n);
  ~RealFft64();
  RealFft64(const RealFft64&) = delete;
  RealFft64& operator=(const RealFft64&) = delete;

  int size() const { return n_; }
  int bins() const { return n_ / 2 + 1; }

  void forward(const double* in, std::complex<double>* out);
  void inverse(const std::complex<double>* in, double* out);

 private:
  int n_;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Full linear convolution (length a+b-1) via a pow2 real FFT in double
// precision; used by the room simulator.
std::vector<float> fft_convolve(const std::vector<float>& a,
                                const std::vector<float>& b);

}  // namespace egostream
