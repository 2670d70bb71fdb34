// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

#include <string>

#include "egostream/common.hpp"

namespace egostream {

// RIFF/WAVE, PCM16 or IEEE float32, 16 kHz, 1-2 channels. Anything else is
// rejected; there is no silent resampling.
AudioBuffer read_wav(const std::string& path);

// Writes IEEE float32 by default (lossless round trip) or PCM16.
void write_wav(const std::string& path, const AudioBuffer& audio,
               bool pcm16 = false);

}  // namespace egostream
