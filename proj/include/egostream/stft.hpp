// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "egostream/common.hpp"
#include "egostream/fft.hpp"

namespace egostream {

// Dual-window framing: a long rectangular analysis window of
// lookback+chunk+lookahead samples hopped by chunk, synthesized through a
// shorter output window that drops the lookback region. The algorithmic
// latency of the analyze->synthesize path is chunk+lookahead samples.
struct Framing {
  int chunk = 0;
  int lookback = 0;
  int lookahead = 0;

  int window() const { return lookback + chunk + lookahead; }
  int discard_head() const { return lookback; }
  int out_window() const { return window() - discard_head(); }
  int freq_bins() const { return window() / 2 + 1; }
  int latency() const { return chunk + lookahead; }

  void validate() const {
    require(chunk > 0, "framing chunk must be positive");
    require(lookback >= 0 && lookahead >= 0, "framing offsets negative");
    require(lookahead <= chunk, "lookahead larger than chunk unsupported");
  }
  bool operator==(const Framing&) const = default;
};

inline Framing main_framing() { return Framing{200, 32, 32}; }
inline Framing beamformer_framing() { return Framing{96, 96, 64}; }

// Complex time-frequency tensor indexed [channel][frequency][step],
// step fastest. Frame l of channel c covers input samples
// [l*chunk - lookback, l*chunk + chunk + lookahead).
struct TFRep {
  Framing framing;
  int channels = 0;
  int bins = 0;
  int steps = 0;
  long source_samples = 0;  // pre-padding input length
  std::vector<std::complex<float>> data;

  TFRep() = default;
  TFRep(const Framing& f, int ch, int num_steps, long src_samples)
      : framing(f),
        channels(ch),
        bins(f.freq_bins()),
        steps(num_steps),
        source_samples(src_samples),
        data(size_t(ch) * size_t(f.freq_bins()) * size_t(num_steps)) {}

  std::complex<float>& at(int c, int f, int l) {
    return data[(size_t(c) * bins + f) * steps + l];
  }
  const std::complex<float>& at(int c, int f, int l) const {
    return data[(size_t(c) * bins + f) * steps + l];
  }
  void validate() const {
    require(bins == framing.freq_bins(), "tf bins inconsistent with framing");
    require(data.size() == size_t(channels) * bins * steps,
            "tf data size inconsistent with dims");
  }
  // Steps [first, first+count) as an independent TFRep (for chunked feeds).
  TFRep slice_steps(int first, int count) const;
};

// Whole-signal analysis: tail zero-padded to a whole number of chunks, the
// first frame's lookback region zero-padded. steps = ceil(len/chunk).
TFRep stft_analyze(const AudioBuffer& signal, const Framing& framing);

// Whole-signal synthesis, aligned with the analyzed input and trimmed to its
// length. Overlapping lookahead regions are linearly crossfaded so synthesis
// weights sum to one everywhere.
AudioBuffer istft_synthesize(const TFRep& tf);

// One-frame-per-chunk streaming analysis. push() with chunk k (k>=1) yields
// frame k-1; the first call only primes the history and yields nothing.
class StreamingStft {
 public:
  StreamingStft(const Framing& framing, int channels);
  // chunk: [channels][chunk] planar pointers. frame_out: [channels][bins].
  // Returns false on the priming call.
  bool push(const float* const* chunk, std::complex<float>* frame_out);
  void reset();
  const Framing& framing() const { return framing_; }
  int channels() const { return channels_; }

 private:
  Framing framing_;
  int channels_;
  std::vector<std::vector<float>> history_;  // [ch][lookback+chunk]
  std::vector<float> window_;
  std::vector<std::complex<float>> spectrum_;
  std::unique_ptr<RealFft32> fft_;
  long pushed_ = 0;
};

// Streaming synthesis: push_frame with frame j emits chunk samples of the
// reconstruction delayed by exactly latency(): x_hat[j*chunk - lookahead,
// (j+1)*chunk - lookahead).
class StreamingIstft {
 public:
  StreamingIstft(const Framing& framing, int channels);
  void push_frame(const std::complex<float>* const* frame, float* const* out);
  void reset();

 private:
  Framing framing_;
  int channels_;
  long frames_ = 0;
  std::vector<std::vector<float>> pending_;  // [ch][2*lookahead]
  std::vector<float> time_buf_;
  std::unique_ptr<RealFft32> fft_;
};

}  // namespace egostream
