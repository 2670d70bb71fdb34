// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "egostream/tensor.hpp"

namespace egostream {

using Mat = Eigen::MatrixXf;
using Vec = Eigen::VectorXf;

// ---------------------------------------------------------------------------
// Normalization

// Per-position layer norm over the channel axis of [C, F, L]: each (f, l)
// column is normalized across C, then scaled and shifted.
void layer_norm_channels(Tensor& x, const Vec& gamma, const Vec& beta);
// Same on a [C x N] matrix (columns are positions).
void layer_norm_columns(Mat& x, const Vec& gamma, const Vec& beta);

// ---------------------------------------------------------------------------
// LSTM

// Weights for one direction. Rows stack the four gates in i, f, g, o order;
// one bias vector per direction.
struct LstmWeights {
  Mat wx;  // [4H x In]
  Mat wh;  // [4H x H]
  Vec b;   // [4H]
  int in = 0;
  int hidden = 0;
};

LstmWeights make_lstm(const Tensor& wx, const Tensor& wh, const Tensor& b);

// Running state for a batch of B independent sequences.
struct LstmState {
  Mat h;  // [H x B]
  Mat c;  // [H x B]
  void init(int hidden, int batch) {
    h = Mat::Zero(hidden, batch);
    c = Mat::Zero(hidden, batch);
  }
};

// One step over the whole batch: x is [In x B], out receives [H x B].
void lstm_step(const LstmWeights& w, const Mat& x, LstmState& state, Mat& out);

// Unbatched scan over the columns of x ([In x S], one step per column);
// out receives [H x S]. The input projection for all steps runs as a single
// matrix product before the recurrence. `backward` scans columns in reverse
// but stores outputs at the original indices.
void lstm_scan_columns(const LstmWeights& w, const Mat& x, Mat& out,
                       bool backward);

// ---------------------------------------------------------------------------
// Convolutions over [C, F, L] maps (frequency symmetric, time causal)

// 3x3 convolution, frequency padded one bin on each side, time padded with
// two leading zeros so output step l depends on input steps l-2..l only.
// weight [Cout, Cin, 3, 3], bias [Cout].
Tensor causal_conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias);

// 3x3 transposed convolution with the transposed-layout weight
// [Cin, Cout, 3, 3]; the full output is cropped one bin off each frequency
// edge and two steps off the time tail, which keeps the same causal support
// (output step l reads input steps l-2..l).
Tensor deconv2d(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Streaming form: carries the last two input steps so chunked calls match the
// batch form exactly.
struct StreamingConv2d {
  StreamingConv2d() = default;
  // flipped=true treats the weight as the transposed layout of deconv2d.
  StreamingConv2d(const Tensor& weight, const Tensor& bias, bool flipped);
  void reset();
  // in: [Cin x F] one step; returns [Cout x F].
  Mat step(const Mat& in);
  // Batch over L steps: x [Cin, F, L] -> [Cout, F, L], advancing the state.
  Tensor run(const Tensor& x);

  int cin = 0, cout = 0;
  Mat kernel;   // [Cout x Cin*9], kernel-position minor
  Vec bias;
  Mat history;  // [Cin x 2F] previous two steps (older first); lazy, F-sized
};

// ---------------------------------------------------------------------------
// Stride-2 folding along one axis

// Pairs consecutive positions along the chosen axis into channels:
// [C, F, L] -> [2C, ceil(F/2), L] (axis 1) with out[c*2+k] = in[c] at 2*p+k,
// zero-padded when the axis length is odd.
Tensor unfold_pairs(const Tensor& x, int axis);

// Transposed 1-D convolution (kernel 2, stride 2) along `axis`, undoing the
// pairing: weight [In, Out, 2], bias [Out]; output cropped to `out_len`.
Tensor deconv_pairs(const Tensor& x, const Tensor& weight, const Tensor& bias,
                    int axis, int out_len);

// ---------------------------------------------------------------------------
// Pooled causal attention over period tokens

// Sinusoidal position code of dimension `dim` for absolute index `pos`.
Vec sinusoidal_position(int64_t pos, int dim);

// Multi-head attention over one pooled [D x F] token per period. The position
// code is added to the token before the key/value projections, so cached
// entries keep their absolute indices when old tokens are evicted. Each head
// projects the token to a few query/key channels per bin, flattens bins into
// one vector, and attends over every cached period (the cache only ever holds
// the past, which makes the attention causal).
struct PooledAttention {
  int channels = 0;     // D
  int freq = 0;         // F
  int heads = 0;
  int qk_channels = 0;  // per head
  int token_cap = 0;    // cache limit; oldest evicted beyond this
  Mat wq, wk, wv, wo;   // [heads*qk x D], [heads*qk x D], [D x D], [D x D]
  Vec bq, bk, bv, bo;

  std::vector<Mat> key_cache;    // per head: [qk*F x cached]
  std::vector<Mat> value_cache;  // per head: [(D/heads)*F x cached]
  int cached = 0;
  int64_t next_index = 0;  // absolute period index of the next token

  void configure(int d, int f, int n_heads, int qk, int cap);
  void load(const Tensor& q_w, const Tensor& q_b, const Tensor& k_w,
            const Tensor& k_b, const Tensor& v_w, const Tensor& v_b,
            const Tensor& o_w, const Tensor& o_b);
  void reset();
  // Appends the token and attends it against the whole cache. token and the
  // result are [D x F].
  Mat step(const Mat& token);
};

}  // namespace egostream
