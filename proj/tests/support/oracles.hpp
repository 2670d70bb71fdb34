// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Reference implementations used only by tests. Every routine here is a
// deliberately naive re-derivation of something the library computes a
// faster way; tests compare the two routes.
#pragma once

#include <complex>
#include <string>
#include <vector>

#include "egostream/layers.hpp"
#include "egostream/synth.hpp"
#include "egostream/tensor.hpp"

namespace oracle {

// Naive O(n^2) DFT of a real signal; returns n/2+1 bins.
std::vector<std::complex<double>> dft_real(const std::vector<double>& x);

// Inverse of dft_real for a length-n real signal.
std::vector<double> idft_real(const std::vector<std::complex<double>>& bins,
                              size_t n);

// Direct linear convolution, length a+b-1.
std::vector<double> conv_full(const std::vector<double>& a,
                              const std::vector<double>& b);

// One analysis frame of the dual-window STFT taken straight from the
// definition: window [k*chunk - lookback, k*chunk + chunk + lookahead) of the
// zero-padded signal, transformed with a plain DFT.
std::vector<std::complex<double>> stft_frame_ref(const std::vector<float>& x,
                                                 int frame, int lookback,
                                                 int chunk, int lookahead);

// Scalar loops over the definition of the causal 3x3 convolution:
// frequency padded one bin per side, time padded with two leading zeros.
egostream::Tensor conv2d_ref(const egostream::Tensor& x,
                             const egostream::Tensor& w,
                             const egostream::Tensor& b);

// Full transposed 3x3 convolution, then crop one frequency bin per side and
// two trailing time steps.
egostream::Tensor deconv2d_ref(const egostream::Tensor& x,
                               const egostream::Tensor& w,
                               const egostream::Tensor& b);

// Pairing along an axis: [C,F,L] -> [2C,ceil(F/2),L] (axis 1) or
// [2C,F,ceil(L/2)] (axis 2), zero-padded when odd.
egostream::Tensor unfold_ref(const egostream::Tensor& x, int axis);

// Scalar LSTM cell in double precision; gates stacked i, f, g, o.
void lstm_step_ref(const egostream::LstmWeights& w,
                   const std::vector<double>& x, std::vector<double>& h,
                   std::vector<double>& c);

// Channel-axis layer norm recomputed per (f, l) column in double.
egostream::Tensor layer_norm_ref(const egostream::Tensor& x,
                                 const egostream::Vec& gamma,
                                 const egostream::Vec& beta);

// Pooled attention recomputed from scratch each step: keeps every token it
// has seen, rebuilds keys/values/scores in double, evicts the oldest beyond
// `cap`. Mirrors PooledAttention::step semantics without sharing any code.
class AttentionRef {
 public:
  AttentionRef(const egostream::Tensor& qw, const egostream::Tensor& qb,
               const egostream::Tensor& kw, const egostream::Tensor& kb,
               const egostream::Tensor& vw, const egostream::Tensor& vb,
               const egostream::Tensor& ow, const egostream::Tensor& ob,
               int heads, int qk_channels, int cap);
  egostream::Mat step(const egostream::Mat& token);

 private:
  const egostream::Tensor &qw_, &qb_, &kw_, &kb_, &vw_, &vb_, &ow_, &ob_;
  int heads_, qk_, cap_;
  int64_t next_ = 0;
  std::vector<std::vector<double>> tokens_;  // with position code added
};

// RT60 via Schroeder backward integration: least-squares slope of the decay
// curve between -5 and -25 dB, extrapolated to -60.
double schroeder_rt60(const std::vector<float>& h, double fs);

// Independent re-scan of a conversation script against the mixing policy
// rules. Empty string when valid, else a description of the broken rule.
std::string validate_script(const egostream::ConversationScript& s,
                            const std::vector<std::string>& target_pool,
                            const std::vector<std::string>& interference_pool,
                            double duration);

// SNR of a rendered package measured over utterance-active samples.
double measured_snr_db(const egostream::MixturePackage& pkg);

// SI-SDR from the projection definition in long double.
double si_sdr_ref(const std::vector<float>& est, const std::vector<float>& ref);

// Multi-resolution STFT loss recomputed with the naive DFT and its own
// framing/window code.
double multires_ref(const std::vector<float>& est,
                    const std::vector<float>& ref, bool include_l1);

}  // namespace oracle
