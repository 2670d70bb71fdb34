// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace egostream {

// Engine-wide sample rate. All audio I/O rejects anything else.
inline constexpr int kSampleRate = 16000;

// Every failure the library raises. The message names the violated
// precondition; the CLI maps these to the data-error exit code.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

// splitmix64; the stage-seed expander and the Rng seeding both run on it so
// one 64-bit root seed drives every random draw in the toolkit.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t hash64(std::string_view s) {
  // FNV-1a.
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Deterministic per (root, stage name, counter). Recorded in run manifests.
inline uint64_t stage_seed(uint64_t root, std::string_view stage,
                           uint64_t counter = 0) {
  uint64_t s = root ^ hash64(stage);
  s += 0x632be59bd9b4e019ULL * (counter + 1);
  uint64_t t = s;
  return splitmix64(t);
}

// Fixed-algorithm RNG: the distribution code is pinned here rather than
// delegated to the standard library's unspecified implementations, so the
// same seed reproduces the same draws on any platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {
    // Warm up so low-entropy seeds decorrelate.
    for (int i = 0; i < 4; ++i) splitmix64(state_);
  }

  uint64_t next_u64() { return splitmix64(state_); }

  // [0, 1) with 53 significant bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n); n > 0.
  uint64_t integer(uint64_t n) {
    return uint64_t(uniform() * double(n));
  }

  // Box-Muller with a cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Planar float32 audio. All channels equal length; 16 kHz only.
struct AudioBuffer {
  std::vector<std::vector<float>> channels;
  int sample_rate = kSampleRate;

  AudioBuffer() = default;
  AudioBuffer(int num_channels, size_t frames, int rate = kSampleRate)
      : channels(num_channels, std::vector<float>(frames, 0.0f)),
        sample_rate(rate) {}

  int num_channels() const { return int(channels.size()); }
  size_t frames() const { return channels.empty() ? 0 : channels[0].size(); }

  void validate() const {
    require(sample_rate == kSampleRate,
            "sample rate mismatch: expected 16000, got " +
                std::to_string(sample_rate));
    require(!channels.empty(), "audio buffer has no channels");
    for (const auto& ch : channels) {
      require(ch.size() == channels[0].size(),
              "audio channels have unequal lengths");
      for (float v : ch)
        require(std::isfinite(v), "audio contains a non-finite sample");
    }
  }
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// Mean of all channels.
inline std::vector<float> downmix(const AudioBuffer& in) {
  std::vector<float> out(in.frames(), 0.0f);
  const float inv = 1.0f / float(in.num_channels());
  for (const auto& ch : in.channels)
    for (size_t i = 0; i < out.size(); ++i) out[i] += ch[i] * inv;
  return out;
}

}  // namespace egostream
