// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#include "egostream/stft.hpp"

#include <algorithm>
#include <cstring>

namespace egostream {

TFRep TFRep::slice_steps(int first, int count) const {
  require(first >= 0 && count >= 0 && first + count <= steps,
          "tf slice out of range");
  TFRep out(framing, channels, count, long(count) * framing.chunk);
  for (int c = 0; c < channels; ++c)
    for (int f = 0; f < bins; ++f)
      for (int l = 0; l < count; ++l) out.at(c, f, l) = at(c, f, first + l);
  return out;
}

TFRep stft_analyze(const AudioBuffer& signal, const Framing& framing) {
  framing.validate();
  signal.validate();
  require(signal.frames() > 0, "cannot analyze an empty signal");

  const int c = framing.chunk, lb = framing.lookback;
  const int win = framing.window();
  const long t = long(signal.frames());
  const int steps = int((t + c - 1) / c);

  TFRep tf(framing, signal.num_channels(), steps, t);
  RealFft32 fft(win);
  std::vector<float> frame(win);
  std::vector<std::complex<float>> spec(framing.freq_bins());
  for (int ch = 0; ch < signal.num_channels(); ++ch) {
    const auto& x = signal.channels[ch];
    for (int l = 0; l < steps; ++l) {
      const long start = long(l) * c - lb;
      for (int i = 0; i < win; ++i) {
        const long n = start + i;
        frame[i] = (n >= 0 && n < t) ? x[size_t(n)] : 0.0f;
      }
      fft.forward(frame.data(), spec.data());
      for (int f = 0; f < tf.bins; ++f) tf.at(ch, f, l) = spec[f];
    }
  }
  return tf;
}

AudioBuffer istft_synthesize(const TFRep& tf) {
  tf.framing.validate();
  tf.validate();
  require(tf.steps > 0, "cannot synthesize an empty tf representation");

  const int c = tf.framing.chunk, lb = tf.framing.lookback,
            la = tf.framing.lookahead;
  const int win = tf.framing.window();
  const int ow = tf.framing.out_window();  // chunk + lookahead
  const long padded = long(tf.steps) * c;
  const long out_len =
      tf.source_samples > 0 ? tf.source_samples : padded;
  require(out_len <= padded, "source length exceeds frame coverage");

  AudioBuffer out(tf.channels, size_t(out_len));
  RealFft32 fft(win);
  std::vector<std::complex<float>> spec(tf.bins);
  std::vector<float> time(win);
  for (int ch = 0; ch < tf.channels; ++ch) {
    std::vector<float> acc(size_t(padded + la), 0.0f);
    for (int l = 0; l < tf.steps; ++l) {
      for (int f = 0; f < tf.bins; ++f) spec[f] = tf.at(ch, f, l);
      fft.inverse(spec.data(), time.data());
      // Drop the lookback region; overlap-add the remaining out_window at
      // hop = chunk. Head fades in against the previous frame's tail except
      // for the first frame; weights sum to one at every sample.
      const long base = long(l) * c;
      for (int i = 0; i < ow; ++i) {
        float w = 1.0f;
        if (i < la && l > 0)
          w = float(i + 1) / float(la + 1);
        else if (i >= c)
          w = 1.0f - float(i - c + 1) / float(la + 1);
        acc[size_t(base + i)] += time[lb + i] * w;
      }
    }
    std::copy(acc.begin(), acc.begin() + out_len, out.channels[ch].begin());
  }
  return out;
}

StreamingStft::StreamingStft(const Framing& framing, int channels)
    : framing_(framing), channels_(channels) {
  framing.validate();
  require(channels >= 1, "channel count must be positive");
  history_.assign(channels, std::vector<float>(
                                size_t(framing.lookback + framing.chunk),
                                0.0f));
  window_.resize(size_t(framing.window()));
  spectrum_.resize(size_t(framing.freq_bins()));
  fft_ = std::make_unique<RealFft32>(framing.window());
}

void StreamingStft::reset() {
  for (auto& h : history_) std::fill(h.begin(), h.end(), 0.0f);
  pushed_ = 0;
}

bool StreamingStft::push(const float* const* chunk,
                         std::complex<float>* frame_out) {
  const int c = framing_.chunk, la = framing_.lookahead;
  const bool emit = pushed_ > 0;
  for (int ch = 0; ch < channels_; ++ch) {
    auto& hist = history_[ch];  // input [k*c - lb - c, k*c) before push k
    if (emit) {
      // Frame k-1 spans [k*c - c - lb, k*c + la): history plus the new
      // chunk's first lookahead samples.
      std::memcpy(window_.data(), hist.data(), sizeof(float) * hist.size());
      std::memcpy(window_.data() + hist.size(), chunk[ch],
                  sizeof(float) * size_t(la));
      fft_->forward(window_.data(), spectrum_.data());
      std::memcpy(frame_out + size_t(ch) * framing_.freq_bins(),
                  spectrum_.data(),
                  sizeof(std::complex<float>) * spectrum_.size());
    }
    // Slide history to [.. (k+1)*c).
    const size_t keep = hist.size() - size_t(c);
    std::memmove(hist.data(), hist.data() + c, sizeof(float) * keep);
    std::memcpy(hist.data() + keep, chunk[ch], sizeof(float) * size_t(c));
  }
  ++pushed_;
  return emit;
}

StreamingIstft::StreamingIstft(const Framing& framing, int channels)
    : framing_(framing), channels_(channels) {
  framing.validate();
  require(channels >= 1, "channel count must be positive");
  pending_.assign(channels,
                  std::vector<float>(size_t(2 * framing.lookahead), 0.0f));
  time_buf_.resize(size_t(framing.window()));
  fft_ = std::make_unique<RealFft32>(framing.window());
}

void StreamingIstft::reset() {
  for (auto& p : pending_) std::fill(p.begin(), p.end(), 0.0f);
  frames_ = 0;
}

void StreamingIstft::push_frame(const std::complex<float>* const* frame,
                                float* const* out) {
  const int c = framing_.chunk, la = framing_.lookahead;
  const int lb = framing_.discard_head();
  const int ow = framing_.out_window();
  for (int ch = 0; ch < channels_; ++ch) {
    auto& pend = pending_[ch];  // x_hat[j*c - la, j*c + la) accumulating
    fft_->inverse(frame[ch], time_buf_.data());
    std::vector<float> buf(size_t(c + 2 * la), 0.0f);
    std::memcpy(buf.data(), pend.data(), sizeof(float) * pend.size());
    for (int i = 0; i < ow; ++i) {
      float w = 1.0f;
      if (i < la && frames_ > 0)
        w = float(i + 1) / float(la + 1);
      else if (i >= c)
        w = 1.0f - float(i - c + 1) / float(la + 1);
      buf[size_t(la + i)] += time_buf_[lb + i] * w;
    }
    std::memcpy(out[ch], buf.data(), sizeof(float) * size_t(c));
    std::memcpy(pend.data(), buf.data() + c, sizeof(float) * pend.size());
  }
  ++frames_;
}

}  // namespace egostream
