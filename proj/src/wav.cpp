// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#include "egostream/wav.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace egostream {

namespace {

uint32_t rd_u32(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 |
         uint32_t(p[3]) << 24;
}
uint16_t rd_u16(const uint8_t* p) {
  return uint16_t(p[0]) | uint16_t(p[1]) << 8;
}
void wr_u32(std::vector<uint8_t>& b, uint32_t v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
  b.push_back((v >> 16) & 0xff);
  b.push_back((v >> 24) & 0xff);
}
void wr_u16(std::vector<uint8_t>& b, uint16_t v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
}

}  // namespace

AudioBuffer read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), "cannot open wav file: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  require(bytes.size() >= 44, "wav file too short: " + path);
  require(std::memcmp(bytes.data(), "RIFF", 4) == 0 &&
              std::memcmp(bytes.data() + 8, "WAVE", 4) == 0,
          "not a RIFF/WAVE file: " + path);

  uint16_t format = 0, num_channels = 0, bits = 0;
  uint32_t rate = 0;
  const uint8_t* data = nullptr;
  uint32_t data_len = 0;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint8_t* hdr = bytes.data() + pos;
    uint32_t chunk_len = rd_u32(hdr + 4);
    const uint8_t* body = hdr + 8;
    if (pos + 8 + chunk_len > bytes.size())
      chunk_len = uint32_t(bytes.size() - pos - 8);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      require(chunk_len >= 16, "malformed fmt chunk: " + path);
      format = rd_u16(body);
      num_channels = rd_u16(body + 2);
      rate = rd_u32(body + 4);
      bits = rd_u16(body + 14);
      if (format == 0xfffe && chunk_len >= 40) {
        // WAVE_FORMAT_EXTENSIBLE: the sub-format GUID starts with the tag.
        format = rd_u16(body + 24);
      }
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = body;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);
  }
  require(format != 0 && data != nullptr, "missing fmt or data chunk: " + path);
  require(rate == uint32_t(kSampleRate),
          "unsupported sample rate " + std::to_string(rate) + " (expected " +
              std::to_string(kSampleRate) + "): " + path);
  require(num_channels >= 1 && num_channels <= 2,
          "unsupported channel count " + std::to_string(num_channels) + ": " +
              path);
  const bool is_pcm16 = (format == 1 && bits == 16);
  const bool is_f32 = (format == 3 && bits == 32);
  require(is_pcm16 || is_f32,
          "unsupported encoding (format tag " + std::to_string(format) + ", " +
              std::to_string(bits) + " bit); expected PCM16 or float32: " +
              path);

  const size_t bytes_per_sample = is_pcm16 ? 2 : 4;
  const size_t frames = data_len / (bytes_per_sample * num_channels);
  AudioBuffer out(num_channels, frames);
  for (size_t i = 0; i < frames; ++i) {
    for (int c = 0; c < num_channels; ++c) {
      const uint8_t* s = data + (i * num_channels + c) * bytes_per_sample;
      if (is_pcm16) {
        int16_t v = int16_t(rd_u16(s));
        out.channels[c][i] = float(v) / 32768.0f;
      } else {
        float v;
        std::memcpy(&v, s, 4);
        out.channels[c][i] = v;
      }
    }
  }
  return out;
}

void write_wav(const std::string& path, const AudioBuffer& audio, bool pcm16) {
  audio.validate();
  const int nc = audio.num_channels();
  const size_t frames = audio.frames();
  const uint16_t bytes_per_sample = pcm16 ? 2 : 4;
  const uint32_t data_len = uint32_t(frames * nc * bytes_per_sample);

  std::vector<uint8_t> b;
  b.reserve(44 + data_len);
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  wr_u32(b, 36 + data_len);
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  wr_u32(b, 16);
  wr_u16(b, pcm16 ? 1 : 3);
  wr_u16(b, uint16_t(nc));
  wr_u32(b, uint32_t(audio.sample_rate));
  wr_u32(b, uint32_t(audio.sample_rate) * nc * bytes_per_sample);
  wr_u16(b, uint16_t(nc * bytes_per_sample));
  wr_u16(b, uint16_t(bytes_per_sample * 8));
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  wr_u32(b, data_len);
  for (size_t i = 0; i < frames; ++i) {
    for (int c = 0; c < nc; ++c) {
      float v = audio.channels[c][i];
      if (pcm16) {
        float scaled = v * 32768.0f;
        if (scaled > 32767.0f) scaled = 32767.0f;
        if (scaled < -32768.0f) scaled = -32768.0f;
        wr_u16(b, uint16_t(int16_t(std::lrintf(scaled))));
      } else {
        uint8_t raw[4];
        std::memcpy(raw, &v, 4);
        b.insert(b.end(), raw, raw + 4);
      }
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), "cannot open for write: " + path);
  f.write(reinterpret_cast<const char*>(b.data()), std::streamsize(b.size()));
  require(f.good(), "write failed: " + path);
}

}  // namespace egostream
