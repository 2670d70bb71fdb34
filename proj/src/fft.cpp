// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#include "egostream/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>

#include "egostream/common.hpp"

namespace egostream {

namespace {
// FFTW planning is not thread-safe; execution through the new-array API is.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct RealFft32::Impl {
  fftwf_plan fwd = nullptr, inv = nullptr;
  float* real = nullptr;
  fftwf_complex* cplx = nullptr;
};

RealFft32::RealFft32(int n) : n_(n), impl_(new Impl) {
  require(n > 0, "fft size must be positive");
  std::lock_guard<std::mutex> lock(plan_mutex());
  impl_->real = fftwf_alloc_real(size_t(n));
  impl_->cplx = fftwf_alloc_complex(size_t(n / 2 + 1));
  impl_->fwd = fftwf_plan_dft_r2c_1d(n, impl_->real, impl_->cplx,
                                     FFTW_ESTIMATE | FFTW_DESTROY_INPUT);
  impl_->inv = fftwf_plan_dft_c2r_1d(n, impl_->cplx, impl_->real,
                                     FFTW_ESTIMATE | FFTW_DESTROY_INPUT);
  require(impl_->fwd && impl_->inv, "fftw plan creation failed");
}

RealFft32::~RealFft32() {
  std::lock_guard<std::mutex> lock(plan_mutex());
  if (impl_->fwd) fftwf_destroy_plan(impl_->fwd);
  if (impl_->inv) fftwf_destroy_plan(impl_->inv);
  fftwf_free(impl_->real);
  fftwf_free(impl_->cplx);
}

void RealFft32::forward(const float* in, std::complex<float>* out) {
  std::memcpy(impl_->real, in, sizeof(float) * size_t(n_));
  fftwf_execute(impl_->fwd);
  std::memcpy(static_cast<void*>(out), impl_->cplx,
              sizeof(std::complex<float>) * size_t(bins()));
}

void RealFft32::inverse(const std::complex<float>* in, float* out) {
  std::memcpy(impl_->cplx, in, sizeof(std::complex<float>) * size_t(bins()));
  fftwf_execute(impl_->inv);
  const float scale = 1.0f / float(n_);
  for (int i = 0; i < n_; ++i) out[i] = impl_->real[i] * scale;
}

struct RealFft64::Impl {
  fftw_plan fwd = nullptr, inv = nullptr;
  double* real = nullptr;
  fftw_complex* cplx = nullptr;
};

RealFft64::RealFft64(int n) : n_(n), impl_(new Impl) {
  require(n > 0, "fft size must be positive");
  std::lock_guard<std::mutex> lock(plan_mutex());
  impl_->real = fftw_alloc_real(size_t(n));
  impl_->cplx = fftw_alloc_complex(size_t(n / 2 + 1));
  impl_->fwd = fftw_plan_dft_r2c_1d(n, impl_->real, impl_->cplx,
                                    FFTW_ESTIMATE | FFTW_DESTROY_INPUT);
  impl_->inv = fftw_plan_dft_c2r_1d(n, impl_->cplx, impl_->real,
                                    FFTW_ESTIMATE | FFTW_DESTROY_INPUT);
  require(impl_->fwd && impl_->inv, "fftw plan creation failed");
}

RealFft64::~RealFft64() {
  std::lock_guard<std::mutex> lock(plan_mutex());
  if (impl_->fwd) fftw_destroy_plan(impl_->fwd);
  if (impl_->inv) fftw_destroy_plan(impl_->inv);
  fftw_free(impl_->real);
  fftw_free(impl_->cplx);
}

void RealFft64::forward(const double* in, std::complex<double>* out) {
  std::memcpy(impl_->real, in, sizeof(double) * size_t(n_));
  fftw_execute(impl_->fwd);
  std::memcpy(static_cast<void*>(out), impl_->cplx,
              sizeof(std::complex<double>) * size_t(bins()));
}

void RealFft64::inverse(const std::complex<double>* in, double* out) {
  std::memcpy(impl_->cplx, in, sizeof(std::complex<double>) * size_t(bins()));
  fftw_execute(impl_->inv);
  const double scale = 1.0 / double(n_);
  for (int i = 0; i < n_; ++i) out[i] = impl_->real[i] * scale;
}

std::vector<float> fft_convolve(const std::vector<float>& a,
                                const std::vector<float>& b) {
  if (a.empty() || b.empty()) return {};
  const size_t out_len = a.size() + b.size() - 1;
  size_t n = 1;
  while (n < out_len) n <<= 1;
  const int fft_n = int(n);
  RealFft64 fft(fft_n);
  std::vector<double> ta(n, 0.0), tb(n, 0.0);
  for (size_t i = 0; i < a.size(); ++i) ta[i] = a[i];
  for (size_t i = 0; i < b.size(); ++i) tb[i] = b[i];
  std::vector<std::complex<double>> fa(fft.bins()), fb(fft.bins());
  fft.forward(ta.data(), fa.data());
  fft.forward(tb.data(), fb.data());
  for (int i = 0; i < fft.bins(); ++i) fa[i] *= fb[i];
  std::vector<double> prod(n);
  fft.inverse(fa.data(), prod.data());
  std::vector<float> out(out_len);
  for (size_t i = 0; i < out_len; ++i) out[i] = float(prod[i]);
  return out;
}

}  // namespace egostream
