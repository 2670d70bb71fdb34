// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#include "egostream/layers.hpp"

#include <cmath>
#include <cstring>

namespace egostream {

namespace {
constexpr float kNormEps = 1e-5f;
using RowMat =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
}  // namespace

// ---------------------------------------------------------------------------
// Normalization

void layer_norm_channels(Tensor& x, const Vec& gamma, const Vec& beta) {
  require(x.rank() == 3, "layer norm expects a [C, F, L] tensor");
  const int c = x.dim(0);
  const long positions = long(x.dim(1)) * x.dim(2);
  require(gamma.size() == c && beta.size() == c,
          "layer norm parameter size mismatch");
  // Column-major view with positions as rows and channels as columns.
  Eigen::Map<Mat> m(x.ptr(), positions, c);
  Vec mu = m.rowwise().mean();
  m.colwise() -= mu;
  Vec rstd = ((m.array().square().rowwise().sum() / float(c)) + kNormEps)
                 .rsqrt()
                 .matrix();
  m.array().colwise() *= rstd.array();
  m *= gamma.asDiagonal();
  m.rowwise() += beta.transpose();
}

void layer_norm_columns(Mat& x, const Vec& gamma, const Vec& beta) {
  const int c = int(x.rows());
  require(gamma.size() == c && beta.size() == c,
          "layer norm parameter size mismatch");
  Eigen::RowVectorXf mu = x.colwise().mean();
  x.rowwise() -= mu;
  Eigen::RowVectorXf rstd =
      ((x.array().square().colwise().sum() / float(c)) + kNormEps)
          .rsqrt()
          .matrix();
  x.array().rowwise() *= rstd.array();
  x = gamma.asDiagonal() * x;
  x.colwise() += beta;
}

// ---------------------------------------------------------------------------
// LSTM

LstmWeights make_lstm(const Tensor& wx, const Tensor& wh, const Tensor& b) {
  require(wx.rank() == 2 && wh.rank() == 2 && b.rank() == 1,
          "lstm weight ranks must be 2, 2, 1");
  LstmWeights w;
  w.hidden = wh.dim(1);
  w.in = wx.dim(1);
  require(wx.dim(0) == 4 * w.hidden && wh.dim(0) == 4 * w.hidden &&
              b.dim(0) == 4 * w.hidden,
          "lstm gate dimension mismatch");
  w.wx = Eigen::Map<const RowMat>(wx.ptr(), wx.dim(0), wx.dim(1));
  w.wh = Eigen::Map<const RowMat>(wh.ptr(), wh.dim(0), wh.dim(1));
  w.b = Eigen::Map<const Vec>(b.ptr(), b.dim(0));
  return w;
}

namespace {

inline void lstm_apply_gates(const Mat& gates, Mat& c, Mat& h, int hidden) {
  const auto sig = [](auto x) { return (1.0f + (-x).exp()).inverse(); };
  auto i = gates.topRows(hidden).array();
  auto f = gates.middleRows(hidden, hidden).array();
  auto g = gates.middleRows(2 * hidden, hidden).array();
  auto o = gates.bottomRows(hidden).array();
  c.array() = sig(f) * c.array() + sig(i) * g.tanh();
  h.array() = sig(o) * c.array().tanh();
}

}  // namespace

void lstm_step(const LstmWeights& w, const Mat& x, LstmState& state, Mat& out) {
  const int batch = int(x.cols());
  if (state.h.cols() != batch) state.init(w.hidden, batch);
  Mat gates = w.wx * x + w.wh * state.h;
  gates.colwise() += w.b;
  lstm_apply_gates(gates, state.c, state.h, w.hidden);
  out = state.h;
}

void lstm_scan_columns(const LstmWeights& w, const Mat& x, Mat& out,
                       bool backward) {
  const int steps = int(x.cols());
  out.resize(w.hidden, steps);
  Mat wx_all = w.wx * x;
  wx_all.colwise() += w.b;
  Vec h = Vec::Zero(w.hidden);
  Vec c = Vec::Zero(w.hidden);
  Vec gates(4 * w.hidden);
  const auto sig = [](auto v) { return (1.0f + (-v).exp()).inverse(); };
  for (int s = 0; s < steps; ++s) {
    const int col = backward ? steps - 1 - s : s;
    gates.noalias() = wx_all.col(col);
    gates.noalias() += w.wh * h;
    auto i = gates.head(w.hidden).array();
    auto f = gates.segment(w.hidden, w.hidden).array();
    auto g = gates.segment(2 * w.hidden, w.hidden).array();
    auto o = gates.tail(w.hidden).array();
    c.array() = sig(f) * c.array() + sig(i) * g.tanh();
    h.array() = sig(o) * c.array().tanh();
    out.col(col) = h;
  }
}

// ---------------------------------------------------------------------------
// Convolutions

namespace {

// Zero-padded copy: [Cin, F, L] -> [Cin, F+2, L+2] with one bin of frequency
// padding on each side and two leading time steps taken from `history`
// ([Cin x 2F], older step first) when it is non-empty.
std::vector<float> pad_input(const Tensor& x, const Mat* history) {
  const int cin = x.dim(0), f = x.dim(1), l = x.dim(2);
  std::vector<float> p(size_t(cin) * (f + 2) * (l + 2), 0.0f);
  for (int c = 0; c < cin; ++c) {
    for (int ff = 0; ff < f; ++ff) {
      float* dst = &p[(size_t(c) * (f + 2) + ff + 1) * (l + 2)];
      if (history && history->size() > 0) {
        dst[0] = (*history)(c, ff);
        dst[1] = (*history)(c, f + ff);
      }
      std::memcpy(dst + 2, &x.data[(size_t(c) * f + ff) * l],
                  size_t(l) * sizeof(float));
    }
  }
  return p;
}

// y = col * kernel^T + bias, written back as a [Cout, F, L] tensor. col is
// [F*L x Cin*9] with one column per (ci, kf, kl) kernel tap.
Tensor conv_from_columns(const Mat& col, const Mat& kernel, const Vec& bias,
                         int f, int l) {
  const int cout = int(kernel.rows());
  Mat y = col * kernel.transpose();
  y.rowwise() += bias.transpose();
  Tensor out({cout, f, l});
  for (int co = 0; co < cout; ++co)
    std::memcpy(&out.data[size_t(co) * f * l], y.col(co).data(),
                size_t(f) * l * sizeof(float));
  return out;
}

Mat im2col(const std::vector<float>& p, int cin, int f, int l) {
  Mat col(size_t(f) * l, size_t(cin) * 9);
  for (int c = 0; c < cin; ++c)
    for (int kf = 0; kf < 3; ++kf)
      for (int kl = 0; kl < 3; ++kl) {
        float* dst = col.col((c * 3 + kf) * 3 + kl).data();
        for (int ff = 0; ff < f; ++ff)
          std::memcpy(dst + size_t(ff) * l,
                      &p[(size_t(c) * (f + 2) + ff + kf) * (l + 2) + kl],
                      size_t(l) * sizeof(float));
      }
  return col;
}

Mat kernel_matrix(const Tensor& weight, bool flipped) {
  if (!flipped) {
    // [Cout, Cin, 3, 3] row-major is already [Cout x Cin*9].
    return Eigen::Map<const RowMat>(weight.ptr(), weight.dim(0),
                                    weight.size() / weight.dim(0));
  }
  // Transposed layout [Cin, Cout, 3, 3]: running it as a plain convolution
  // takes the kernel mirrored in both axes.
  const int cin = weight.dim(0), cout = weight.dim(1);
  Mat k(cout, cin * 9);
  for (int co = 0; co < cout; ++co)
    for (int ci = 0; ci < cin; ++ci)
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          k(co, (ci * 3 + a) * 3 + b) = weight.at4(ci, co, 2 - a, 2 - b);
  return k;
}

Vec bias_vector(const Tensor& b, int cout) {
  require(b.rank() == 1 && b.dim(0) == cout, "conv bias size mismatch");
  return Eigen::Map<const Vec>(b.ptr(), cout);
}

}  // namespace

Tensor causal_conv2d(const Tensor& x, const Tensor& weight,
                     const Tensor& bias) {
  require(x.rank() == 3 && weight.rank() == 4, "conv expects [C,F,L] input");
  require(weight.dim(1) == x.dim(0) && weight.dim(2) == 3 &&
              weight.dim(3) == 3,
          "conv weight shape mismatch");
  const int f = x.dim(1), l = x.dim(2);
  const auto p = pad_input(x, nullptr);
  return conv_from_columns(im2col(p, x.dim(0), f, l),
                           kernel_matrix(weight, false),
                           bias_vector(bias, weight.dim(0)), f, l);
}

Tensor deconv2d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require(x.rank() == 3 && weight.rank() == 4, "deconv expects [C,F,L] input");
  require(weight.dim(0) == x.dim(0) && weight.dim(2) == 3 &&
              weight.dim(3) == 3,
          "deconv weight shape mismatch");
  const int f = x.dim(1), l = x.dim(2);
  const auto p = pad_input(x, nullptr);
  return conv_from_columns(im2col(p, x.dim(0), f, l),
                           kernel_matrix(weight, true),
                           bias_vector(bias, weight.dim(1)), f, l);
}

StreamingConv2d::StreamingConv2d(const Tensor& weight, const Tensor& bias,
                                 bool flipped) {
  require(weight.rank() == 4 && weight.dim(2) == 3 && weight.dim(3) == 3,
          "streaming conv weight must be [*, *, 3, 3]");
  cin = flipped ? weight.dim(0) : weight.dim(1);
  cout = flipped ? weight.dim(1) : weight.dim(0);
  kernel = kernel_matrix(weight, flipped);
  this->bias = bias_vector(bias, cout);
}

void StreamingConv2d::reset() { history.resize(0, 0); }

Mat StreamingConv2d::step(const Mat& in) {
  const int f = int(in.cols());
  require(int(in.rows()) == cin, "streaming conv channel mismatch");
  if (history.cols() != 2 * f) history = Mat::Zero(cin, 2 * f);
  Mat col(f, cin * 9);
  for (int c = 0; c < cin; ++c)
    for (int kf = 0; kf < 3; ++kf)
      for (int kl = 0; kl < 3; ++kl) {
        float* dst = col.col((c * 3 + kf) * 3 + kl).data();
        for (int ff = 0; ff < f; ++ff) {
          const int src_f = ff + kf - 1;
          if (src_f < 0 || src_f >= f) {
            dst[ff] = 0.0f;
          } else if (kl < 2) {
            dst[ff] = history(c, kl * f + src_f);
          } else {
            dst[ff] = in(c, src_f);
          }
        }
      }
  Mat y = col * kernel.transpose();
  y.rowwise() += bias.transpose();
  history.leftCols(f) = history.rightCols(f);
  history.rightCols(f) = in;
  return y.transpose();
}

Tensor StreamingConv2d::run(const Tensor& x) {
  require(x.rank() == 3 && x.dim(0) == cin, "streaming conv input mismatch");
  const int f = x.dim(1), l = x.dim(2);
  if (history.cols() != 2 * f) history = Mat::Zero(cin, 2 * f);
  const auto p = pad_input(x, &history);
  Tensor out = conv_from_columns(im2col(p, cin, f, l), kernel, bias, f, l);
  // Keep the last two padded time steps for the next call.
  for (int c = 0; c < cin; ++c)
    for (int ff = 0; ff < f; ++ff) {
      history(c, ff) = l >= 2 ? x.at3(c, ff, l - 2) : history(c, f + ff);
      history(c, f + ff) = x.at3(c, ff, l - 1);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Pair folding

Tensor unfold_pairs(const Tensor& x, int axis) {
  require(x.rank() == 3 && (axis == 1 || axis == 2),
          "unfold_pairs expects [C,F,L] and axis 1 or 2");
  const int c = x.dim(0), f = x.dim(1), l = x.dim(2);
  const int n = x.dim(axis);
  const int pairs = (n + 1) / 2;
  Tensor out(axis == 1 ? std::vector<int>{2 * c, pairs, l}
                       : std::vector<int>{2 * c, f, pairs});
  for (int ci = 0; ci < c; ++ci)
    for (int k = 0; k < 2; ++k)
      for (int p = 0; p < pairs; ++p) {
        const int src = 2 * p + k;
        if (src >= n) continue;  // zero pad
        if (axis == 1) {
          std::memcpy(&out.at3(ci * 2 + k, p, 0), &x.at3(ci, src, 0),
                      size_t(l) * sizeof(float));
        } else {
          for (int ff = 0; ff < f; ++ff)
            out.at3(ci * 2 + k, ff, p) = x.at3(ci, ff, src);
        }
      }
  return out;
}

Tensor deconv_pairs(const Tensor& x, const Tensor& weight, const Tensor& bias,
                    int axis, int out_len) {
  require(x.rank() == 3 && (axis == 1 || axis == 2),
          "deconv_pairs expects [C,F,L] and axis 1 or 2");
  require(weight.rank() == 3 && weight.dim(0) == x.dim(0) &&
              weight.dim(2) == 2,
          "deconv_pairs weight must be [In, Out, 2]");
  const int in = weight.dim(0), out_ch = weight.dim(1);
  const int pairs = x.dim(axis);
  require(out_len <= 2 * pairs && out_len > 2 * (pairs - 1),
          "deconv_pairs output length inconsistent with input");
  const Vec b = bias_vector(bias, out_ch);
  // One [Out x In] matrix per kernel tap.
  Mat w0(out_ch, in), w1(out_ch, in);
  for (int i = 0; i < in; ++i)
    for (int o = 0; o < out_ch; ++o) {
      w0(o, i) = weight.at3(i, o, 0);
      w1(o, i) = weight.at3(i, o, 1);
    }
  const long cols = long(x.dim(1)) * x.dim(2);
  Eigen::Map<const RowMat> xm(x.ptr(), in, cols);
  Mat y0 = (xm.transpose() * w0.transpose()).eval();  // [cols x Out]
  Mat y1 = (xm.transpose() * w1.transpose()).eval();
  const int other = axis == 1 ? x.dim(2) : x.dim(1);
  Tensor out(axis == 1 ? std::vector<int>{out_ch, out_len, other}
                       : std::vector<int>{out_ch, other, out_len});
  for (int o = 0; o < out_ch; ++o)
    for (int k = 0; k < 2; ++k) {
      const Mat& y = k == 0 ? y0 : y1;
      for (int p = 0; p < pairs; ++p) {
        const int dst = 2 * p + k;
        if (dst >= out_len) continue;
        if (axis == 1) {
          const float* src = y.col(o).data() + size_t(p) * other;
          float* d = &out.at3(o, dst, 0);
          for (int j = 0; j < other; ++j) d[j] = src[j] + b[o];
        } else {
          for (int ff = 0; ff < other; ++ff)
            out.at3(o, ff, dst) = y(size_t(ff) * pairs + p, o) + b[o];
        }
      }
    }
  return out;
}

// ---------------------------------------------------------------------------
// Pooled causal attention

Vec sinusoidal_position(int64_t pos, int dim) {
  require(dim % 2 == 0, "position code dimension must be even");
  Vec pe(dim);
  for (int i = 0; i < dim / 2; ++i) {
    const double rate = std::pow(10000.0, double(2 * i) / double(dim));
    pe[2 * i] = float(std::sin(double(pos) / rate));
    pe[2 * i + 1] = float(std::cos(double(pos) / rate));
  }
  return pe;
}

void PooledAttention::configure(int d, int f, int n_heads, int qk, int cap) {
  require(d % n_heads == 0, "attention channels must divide across heads");
  channels = d;
  freq = f;
  heads = n_heads;
  qk_channels = qk;
  token_cap = cap;
  key_cache.assign(heads, Mat());
  value_cache.assign(heads, Mat());
  cached = 0;
  next_index = 0;
}

namespace {
Mat map_square(const Tensor& t, int rows, int cols, const char* what) {
  require(t.rank() == 2 && t.dim(0) == rows && t.dim(1) == cols,
          std::string("attention weight shape mismatch: ") + what);
  return Eigen::Map<const RowMat>(t.ptr(), rows, cols);
}
}  // namespace

void PooledAttention::load(const Tensor& q_w, const Tensor& q_b,
                           const Tensor& k_w, const Tensor& k_b,
                           const Tensor& v_w, const Tensor& v_b,
                           const Tensor& o_w, const Tensor& o_b) {
  const int qk_rows = heads * qk_channels;
  wq = map_square(q_w, qk_rows, channels, "query");
  wk = map_square(k_w, qk_rows, channels, "key");
  wv = map_square(v_w, channels, channels, "value");
  wo = map_square(o_w, channels, channels, "output");
  bq = bias_vector(q_b, qk_rows);
  bk = bias_vector(k_b, qk_rows);
  bv = bias_vector(v_b, channels);
  bo = bias_vector(o_b, channels);
}

void PooledAttention::reset() {
  for (auto& m : key_cache) m.resize(int(m.rows()), 0);
  for (auto& m : value_cache) m.resize(int(m.rows()), 0);
  cached = 0;
  next_index = 0;
}

Mat PooledAttention::step(const Mat& token) {
  require(int(token.rows()) == channels && int(token.cols()) == freq,
          "attention token shape mismatch");
  const int head_ch = channels / heads;
  const int krows = qk_channels * freq;
  const int vrows = head_ch * freq;

  Mat tok = token;
  tok.colwise() += sinusoidal_position(next_index, channels);
  Mat q = wq * tok;
  q.colwise() += bq;
  Mat k = wk * tok;
  k.colwise() += bk;
  Mat v = wv * tok;
  v.colwise() += bv;

  if (cached == token_cap) {
    for (int h = 0; h < heads; ++h) {
      std::memmove(key_cache[h].data(), key_cache[h].data() + krows,
                   size_t(krows) * (cached - 1) * sizeof(float));
      std::memmove(value_cache[h].data(), value_cache[h].data() + vrows,
                   size_t(vrows) * (cached - 1) * sizeof(float));
    }
    --cached;
  }
  for (int h = 0; h < heads; ++h) {
    auto& kc = key_cache[h];
    auto& vc = value_cache[h];
    if (kc.rows() != krows || kc.cols() <= cached) {
      const int cap = std::max(16, std::min(token_cap, cached * 2 + 1));
      kc.conservativeResize(krows, cap);
      vc.conservativeResize(vrows, cap);
    }
    // Flatten [rows x F] head blocks channel-major.
    for (int r = 0; r < qk_channels; ++r)
      for (int f = 0; f < freq; ++f)
        kc(r * freq + f, cached) = k(h * qk_channels + r, f);
    for (int r = 0; r < head_ch; ++r)
      for (int f = 0; f < freq; ++f)
        vc(r * freq + f, cached) = v(h * head_ch + r, f);
  }
  ++cached;

  const float scale = 1.0f / std::sqrt(float(krows));
  Mat stacked(channels, freq);
  Vec qflat(krows);
  for (int h = 0; h < heads; ++h) {
    for (int r = 0; r < qk_channels; ++r)
      for (int f = 0; f < freq; ++f)
        qflat[r * freq + f] = q(h * qk_channels + r, f);
    Vec scores =
        key_cache[h].leftCols(cached).transpose() * qflat * scale;
    const float m = scores.maxCoeff();
    Vec weights = (scores.array() - m).exp();
    weights /= weights.sum();
    Vec ctx = value_cache[h].leftCols(cached) * weights;
    for (int r = 0; r < head_ch; ++r)
      for (int f = 0; f < freq; ++f)
        stacked(h * head_ch + r, f) = ctx[r * freq + f];
  }
  Mat out = wo * stacked;
  out.colwise() += bo;
  ++next_index;
  return out;
}

}  // namespace egostream
