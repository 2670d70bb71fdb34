// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "egostream/layers.hpp"
#include "egostream/stft.hpp"
#include "egostream/weights.hpp"

namespace egostream {

// Structural description of one network. Serialized as key=value text next
// to each weight archive so a weights directory is self-describing.
struct ModelConfig {
  std::string name;
  int blocks = 6;
  int channels = 32;  // feature channels D
  int hidden = 64;    // LSTM hidden size H
  int heads = 4;
  int qk_channels = 2;  // query/key channels per head
  int in_channels = 2;  // realified spectrogram channels in
  int out_channels = 2;  // realified channels out (0: no head)
  Framing framing;
  int steps_per_period = 0;  // frames consumed per inference (0: streaming)
  int token_cap = 0;         // attention cache limit
  bool unfold = false;       // stride-2 pair folding around both LSTMs
  bool bidirectional_time = false;
  bool attention = false;
  bool head = true;  // transposed-conv output stage
  bool norm = true;  // per-block layer norm over the channel axis

  void validate() const;
};

// The streaming extractor: 2 realified channels in and out, per-frame
// stateful time LSTMs, conditioned by an embedding after the first block.
ModelConfig fast_model_config();
// The conversation-embedding network: 4 realified channels in (mixture plus
// self-speech), one period of frames per call, pair folding, bidirectional
// within the period, cross-period pooled attention, no output head.
ModelConfig slow_model_config();
// The self-speech extractor: 4 realified channels in (binaural), 4 out
// (two complex channels, averaged downstream), narrower LSTMs.
ModelConfig beamformer_model_config();

std::string manifest_text(const ModelConfig& cfg);
ModelConfig parse_manifest_text(const std::string& text);

// Canonical (name, shape) list for a config, in archive order.
std::vector<std::pair<std::string, std::vector<int>>> weight_manifest(
    const ModelConfig& cfg);

// Uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] per tensor, filled in canonical
// order from a single generator, so one seed pins the whole archive.
WeightArchive init_random_weights(const ModelConfig& cfg, uint64_t seed);

size_t count_parameters(const WeightArchive& archive);

// [2*channels, bins, steps] with real parts on even channels and imaginary
// parts on odd channels.
Tensor realify(const TFRep& tf);
// Two single-channel representations stacked: [4, bins, steps].
Tensor realify_pair(const TFRep& a, const TFRep& b);

class GridNetModel {
 public:
  GridNetModel(const ModelConfig& cfg, const WeightArchive& weights);

  const ModelConfig& config() const { return cfg_; }
  void reset();

  // Conditioning slice applied by elementwise product after the first block.
  // An empty matrix disables conditioning.
  void set_embedding(const Mat& e);

  // Streaming: one realified frame [in_channels x F] to [out_channels x F].
  // Carries conv history and time-LSTM state across calls.
  Mat step_frame(const Mat& in);

  // Batch over L frames with the same state objects as the streaming path
  // (reset first for a fresh run). embedding_of_step selects, per frame, an
  // entry of `embeddings`; pass empty vectors to disable conditioning.
  Tensor forward(const Tensor& x, const std::vector<Mat>& embeddings,
                 const std::vector<int>& embedding_of_step);

  // Period-wise inference for the unfolded bidirectional variant:
  // [in_channels, F, steps] to the last-frame feature column [channels x F].
  // Advances the attention cache by one token. steps may differ from the
  // nominal steps_per_period; each call is one pooled token either way.
  Mat process_period(const Tensor& x);

 private:
  struct Path {
    Vec gamma, beta;
    LstmWeights fw, bw;  // bw unused when unidirectional
    Mat proj_w;          // [D x (1|2)H] when !unfold
    Vec proj_b;
    Tensor deconv_w, deconv_b;  // [(2H), D, 2] when unfold
  };
  struct Block {
    Path freq, time;
    PooledAttention attn;
    LstmState time_state;  // streaming only
  };

  void run_freq_path(const Path& p, Tensor& x);
  void run_time_path(const Path& p, Tensor& x, LstmState* state,
                     bool bidirectional);

  ModelConfig cfg_;
  StreamingConv2d encoder_;
  std::vector<Block> blocks_;
  StreamingConv2d head_;
  bool has_head_ = false;
  Mat embedding_;
};

}  // namespace egostream
