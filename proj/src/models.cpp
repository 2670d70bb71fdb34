// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#include "egostream/models.hpp"

#include <cmath>
#include <cstring>
#include <map>
#include <sstream>

namespace egostream {

void ModelConfig::validate() const {
  require(!name.empty(), "model name empty");
  require(blocks > 0 && channels > 0 && hidden > 0, "model sizes positive");
  framing.validate();
  require(in_channels > 0, "model needs input channels");
  if (head) require(out_channels > 0, "output head needs channels");
  if (attention) {
    require(heads > 0 && qk_channels > 0, "attention head sizes positive");
    require(channels % heads == 0, "channels must divide across heads");
    require(token_cap > 0, "attention cache needs a positive cap");
    require(steps_per_period > 0, "attention runs on pooled period tokens");
  }
  if (unfold)
    require(steps_per_period > 0, "pair folding runs on whole periods");
}

ModelConfig fast_model_config() {
  ModelConfig c;
  c.name = "fast";
  c.framing = main_framing();
  return c;
}

ModelConfig slow_model_config() {
  ModelConfig c;
  c.name = "slow";
  c.framing = main_framing();
  c.in_channels = 4;
  c.out_channels = 0;
  c.head = false;
  c.steps_per_period = 80;
  c.token_cap = 4096;
  c.unfold = true;
  c.bidirectional_time = true;
  c.attention = true;
  return c;
}

ModelConfig beamformer_model_config() {
  ModelConfig c;
  c.name = "beamformer";
  c.framing = beamformer_framing();
  c.hidden = 32;
  c.in_channels = 4;
  c.out_channels = 4;
  return c;
}

std::string manifest_text(const ModelConfig& c) {
  std::ostringstream o;
  o << "name=" << c.name << "\n"
    << "blocks=" << c.blocks << "\n"
    << "channels=" << c.channels << "\n"
    << "hidden=" << c.hidden << "\n"
    << "heads=" << c.heads << "\n"
    << "qk_channels=" << c.qk_channels << "\n"
    << "in_channels=" << c.in_channels << "\n"
    << "out_channels=" << c.out_channels << "\n"
    << "chunk=" << c.framing.chunk << "\n"
    << "lookback=" << c.framing.lookback << "\n"
    << "lookahead=" << c.framing.lookahead << "\n"
    << "steps_per_period=" << c.steps_per_period << "\n"
    << "token_cap=" << c.token_cap << "\n"
    << "unfold=" << int(c.unfold) << "\n"
    << "bidirectional_time=" << int(c.bidirectional_time) << "\n"
    << "attention=" << int(c.attention) << "\n"
    << "head=" << int(c.head) << "\n"
    << "norm=" << int(c.norm) << "\n";
  return o.str();
}

ModelConfig parse_manifest_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, "manifest line missing '=': " + line);
    require(kv.emplace(line.substr(0, eq), line.substr(eq + 1)).second,
            "manifest repeats key: " + line.substr(0, eq));
  }
  auto take = [&](const std::string& key) {
    auto it = kv.find(key);
    require(it != kv.end(), "manifest missing key: " + key);
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto take_int = [&](const std::string& key) {
    const std::string v = take(key);
    try {
      size_t used = 0;
      const int n = std::stoi(v, &used);
      require(used == v.size(), "manifest value not an integer: " + key);
      return n;
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      fail("manifest value not an integer: " + key);
    }
  };
  ModelConfig c;
  c.name = take("name");
  c.blocks = take_int("blocks");
  c.channels = take_int("channels");
  c.hidden = take_int("hidden");
  c.heads = take_int("heads");
  c.qk_channels = take_int("qk_channels");
  c.in_channels = take_int("in_channels");
  c.out_channels = take_int("out_channels");
  c.framing.chunk = take_int("chunk");
  c.framing.lookback = take_int("lookback");
  c.framing.lookahead = take_int("lookahead");
  c.steps_per_period = take_int("steps_per_period");
  c.token_cap = take_int("token_cap");
  c.unfold = take_int("unfold") != 0;
  c.bidirectional_time = take_int("bidirectional_time") != 0;
  c.attention = take_int("attention") != 0;
  c.head = take_int("head") != 0;
  c.norm = take_int("norm") != 0;
  if (!kv.empty()) fail("manifest has unknown key: " + kv.begin()->first);
  c.validate();
  return c;
}

namespace {

struct TensorSpec {
  std::string name;
  std::vector<int> dims;
  int fan_in;
};

std::vector<TensorSpec> tensor_specs(const ModelConfig& c) {
  std::vector<TensorSpec> out;
  const int d = c.channels, h = c.hidden;
  auto add = [&](const std::string& n, std::vector<int> dims, int fan) {
    out.push_back({n, std::move(dims), fan});
  };
  add("encoder.w", {d, c.in_channels, 3, 3}, c.in_channels * 9);
  add("encoder.b", {d}, c.in_channels * 9);
  for (int i = 0; i < c.blocks; ++i) {
    const std::string b = "block" + std::to_string(i) + ".";
    auto add_path = [&](const std::string& path, bool bidirectional) {
      const std::string p = b + path + ".";
      const int in = c.unfold ? 2 * d : d;
      if (c.norm) {
        add(p + "norm.gamma", {d}, d);
        add(p + "norm.beta", {d}, d);
      }
      add(p + "fw.wx", {4 * h, in}, h);
      add(p + "fw.wh", {4 * h, h}, h);
      add(p + "fw.b", {4 * h}, h);
      if (bidirectional) {
        add(p + "bw.wx", {4 * h, in}, h);
        add(p + "bw.wh", {4 * h, h}, h);
        add(p + "bw.b", {4 * h}, h);
      }
      const int lstm_out = bidirectional ? 2 * h : h;
      if (c.unfold) {
        add(p + "deconv.w", {lstm_out, d, 2}, lstm_out * 2);
        add(p + "deconv.b", {d}, lstm_out * 2);
      } else {
        add(p + "proj.w", {d, lstm_out}, lstm_out);
        add(p + "proj.b", {d}, lstm_out);
      }
    };
    add_path("freq", true);
    add_path("time", c.bidirectional_time);
    if (c.attention) {
      const int qk = c.heads * c.qk_channels;
      add(b + "attn.wq", {qk, d}, d);
      add(b + "attn.bq", {qk}, d);
      add(b + "attn.wk", {qk, d}, d);
      add(b + "attn.bk", {qk}, d);
      add(b + "attn.wv", {d, d}, d);
      add(b + "attn.bv", {d}, d);
      add(b + "attn.wo", {d, d}, d);
      add(b + "attn.bo", {d}, d);
    }
  }
  if (c.head) {
    add("head.w", {d, c.out_channels, 3, 3}, d * 9);
    add("head.b", {c.out_channels}, d * 9);
  }
  return out;
}

}  // namespace

std::vector<std::pair<std::string, std::vector<int>>> weight_manifest(
    const ModelConfig& cfg) {
  cfg.validate();
  std::vector<std::pair<std::string, std::vector<int>>> out;
  for (auto& s : tensor_specs(cfg)) out.emplace_back(s.name, s.dims);
  return out;
}

WeightArchive init_random_weights(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  WeightArchive a;
  Rng rng(seed);
  for (const auto& s : tensor_specs(cfg)) {
    Tensor t(s.dims);
    const double bound = 1.0 / std::sqrt(double(s.fan_in));
    for (auto& v : t.data) v = float(rng.uniform(-bound, bound));
    a.add(s.name, std::move(t));
  }
  return a;
}

size_t count_parameters(const WeightArchive& archive) {
  size_t n = 0;
  for (const auto& e : archive.entries) n += e.tensor.size();
  return n;
}

Tensor realify(const TFRep& tf) {
  Tensor out({2 * tf.channels, tf.bins, tf.steps});
  const size_t plane = size_t(tf.bins) * tf.steps;
  for (int c = 0; c < tf.channels; ++c)
    for (size_t i = 0; i < plane; ++i) {
      const auto z = tf.data[size_t(c) * plane + i];
      out.data[size_t(2 * c) * plane + i] = z.real();
      out.data[size_t(2 * c + 1) * plane + i] = z.imag();
    }
  return out;
}

Tensor realify_pair(const TFRep& a, const TFRep& b) {
  require(a.bins == b.bins && a.steps == b.steps && a.channels == 1 &&
              b.channels == 1,
          "realify_pair expects two aligned single-channel representations");
  Tensor ra = realify(a), rb = realify(b);
  Tensor out({4, a.bins, a.steps});
  const size_t plane = size_t(a.bins) * a.steps;
  std::memcpy(out.ptr(), ra.ptr(), 2 * plane * sizeof(float));
  std::memcpy(out.ptr() + 2 * plane, rb.ptr(), 2 * plane * sizeof(float));
  return out;
}

// ---------------------------------------------------------------------------

namespace {

Vec vec_param(const Tensor& t, int n, const std::string& what) {
  require(t.rank() == 1 && t.dim(0) == n, "parameter size mismatch: " + what);
  return Eigen::Map<const Vec>(t.ptr(), n);
}

using RowMat =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Mat mat_param(const Tensor& t, int rows, int cols, const std::string& what) {
  require(t.rank() == 2 && t.dim(0) == rows && t.dim(1) == cols,
          "parameter shape mismatch: " + what);
  return Eigen::Map<const RowMat>(t.ptr(), rows, cols);
}

void add_into(Tensor& x, const Tensor& y) {
  require(x.same_shape(y), "residual shape mismatch");
  Eigen::Map<Eigen::ArrayXf>(x.ptr(), long(x.size())) +=
      Eigen::Map<const Eigen::ArrayXf>(y.ptr(), long(y.size()));
}

}  // namespace

GridNetModel::GridNetModel(const ModelConfig& cfg, const WeightArchive& w)
    : cfg_(cfg),
      encoder_(w.get("encoder.w"), w.get("encoder.b"), false),
      has_head_(cfg.head) {
  cfg_.validate();
  std::vector<std::string> names;
  for (const auto& s : tensor_specs(cfg_)) names.push_back(s.name);
  w.expect_exactly(names);

  const int d = cfg_.channels, h = cfg_.hidden;
  const int f = cfg_.framing.freq_bins();
  blocks_.resize(cfg_.blocks);
  for (int i = 0; i < cfg_.blocks; ++i) {
    const std::string b = "block" + std::to_string(i) + ".";
    auto load_path = [&](const std::string& name, bool bidirectional) {
      const std::string p = b + name + ".";
      Path path;
      if (cfg_.norm) {
        path.gamma = vec_param(w.get(p + "norm.gamma"), d, p + "norm.gamma");
        path.beta = vec_param(w.get(p + "norm.beta"), d, p + "norm.beta");
      }
      path.fw = make_lstm(w.get(p + "fw.wx"), w.get(p + "fw.wh"),
                          w.get(p + "fw.b"));
      if (bidirectional)
        path.bw = make_lstm(w.get(p + "bw.wx"), w.get(p + "bw.wh"),
                            w.get(p + "bw.b"));
      const int lstm_out = bidirectional ? 2 * h : h;
      if (cfg_.unfold) {
        path.deconv_w = w.get(p + "deconv.w");
        path.deconv_b = w.get(p + "deconv.b");
      } else {
        path.proj_w = mat_param(w.get(p + "proj.w"), d, lstm_out, p + "proj.w");
        path.proj_b = vec_param(w.get(p + "proj.b"), d, p + "proj.b");
      }
      return path;
    };
    blocks_[i].freq = load_path("freq", true);
    blocks_[i].time = load_path("time", cfg_.bidirectional_time);
    if (cfg_.attention) {
      blocks_[i].attn.configure(d, f, cfg_.heads, cfg_.qk_channels,
                                cfg_.token_cap);
      blocks_[i].attn.load(w.get(b + "attn.wq"), w.get(b + "attn.bq"),
                           w.get(b + "attn.wk"), w.get(b + "attn.bk"),
                           w.get(b + "attn.wv"), w.get(b + "attn.bv"),
                           w.get(b + "attn.wo"), w.get(b + "attn.bo"));
    }
  }
  if (has_head_) head_ = StreamingConv2d(w.get("head.w"), w.get("head.b"), true);
}

void GridNetModel::reset() {
  encoder_.reset();
  if (has_head_) head_.reset();
  for (auto& b : blocks_) {
    b.time_state = LstmState{};
    if (cfg_.attention) b.attn.reset();
  }
}

void GridNetModel::set_embedding(const Mat& e) {
  if (e.size() > 0)
    require(int(e.rows()) == cfg_.channels &&
                int(e.cols()) == cfg_.framing.freq_bins(),
            "embedding slice shape mismatch");
  embedding_ = e;
}

Mat GridNetModel::step_frame(const Mat& in) {
  require(cfg_.steps_per_period == 0,
          "per-frame stepping: model runs on whole periods");
  Mat x = encoder_.step(in);
  const int h = cfg_.hidden;
  for (size_t i = 0; i < blocks_.size(); ++i) {
    Block& b = blocks_[i];
    {
      Mat t = x;
      if (cfg_.norm) layer_norm_columns(t, b.freq.gamma, b.freq.beta);
      Mat cat(2 * h, t.cols());
      Mat dir;
      lstm_scan_columns(b.freq.fw, t, dir, false);
      cat.topRows(h) = dir;
      lstm_scan_columns(b.freq.bw, t, dir, true);
      cat.bottomRows(h) = dir;
      Mat y = b.freq.proj_w * cat;
      y.colwise() += b.freq.proj_b;
      x += y;
    }
    {
      Mat t = x;
      if (cfg_.norm) layer_norm_columns(t, b.time.gamma, b.time.beta);
      Mat out;
      lstm_step(b.time.fw, t, b.time_state, out);
      Mat y = b.time.proj_w * out;
      y.colwise() += b.time.proj_b;
      x += y;
    }
    if (i == 0 && embedding_.size() > 0) x = x.cwiseProduct(embedding_);
  }
  if (has_head_) return head_.step(x);
  return x;
}

void GridNetModel::run_freq_path(const Path& p, Tensor& x) {
  Tensor t = x;
  if (cfg_.norm) layer_norm_channels(t, p.gamma, p.beta);
  if (cfg_.unfold) t = unfold_pairs(t, 1);
  const int c = t.dim(0), bins = t.dim(1), steps = t.dim(2);
  const int h = cfg_.hidden;
  Tensor lo({2 * h, bins, steps});
  Mat xin(c, steps), out;
  auto gather_cols = [&](int f) {
    for (int ci = 0; ci < c; ++ci)
      for (int s = 0; s < steps; ++s) xin(ci, s) = t.at3(ci, f, s);
  };
  auto scatter = [&](int f, int row0) {
    for (int hh = 0; hh < h; ++hh)
      for (int s = 0; s < steps; ++s) lo.at3(row0 + hh, f, s) = out(hh, s);
  };
  {
    LstmState st;
    for (int f = 0; f < bins; ++f) {
      gather_cols(f);
      lstm_step(p.fw, xin, st, out);
      scatter(f, 0);
    }
  }
  {
    LstmState st;
    for (int f = bins - 1; f >= 0; --f) {
      gather_cols(f);
      lstm_step(p.bw, xin, st, out);
      scatter(f, h);
    }
  }
  if (cfg_.unfold) {
    add_into(x, deconv_pairs(lo, p.deconv_w, p.deconv_b, 1, x.dim(1)));
  } else {
    Eigen::Map<const RowMat> lom(lo.ptr(), 2 * h,
                                 long(lo.dim(1)) * lo.dim(2));
    Mat y = p.proj_w * lom;
    y.colwise() += p.proj_b;
    Eigen::Map<RowMat> xm(x.ptr(), cfg_.channels, long(x.dim(1)) * x.dim(2));
    xm += y;
  }
}

void GridNetModel::run_time_path(const Path& p, Tensor& x, LstmState* state,
                                 bool bidirectional) {
  Tensor t = x;
  if (cfg_.norm) layer_norm_channels(t, p.gamma, p.beta);
  if (cfg_.unfold) t = unfold_pairs(t, 2);
  const int c = t.dim(0), bins = t.dim(1), steps = t.dim(2);
  const int h = cfg_.hidden;
  const int rows = bidirectional ? 2 * h : h;
  Tensor lo({rows, bins, steps});
  Mat xin(c, bins), out;
  auto gather = [&](int s) {
    for (int ci = 0; ci < c; ++ci)
      for (int f = 0; f < bins; ++f) xin(ci, f) = t.at3(ci, f, s);
  };
  auto scatter = [&](int s, int row0) {
    for (int hh = 0; hh < h; ++hh)
      for (int f = 0; f < bins; ++f) lo.at3(row0 + hh, f, s) = out(hh, f);
  };
  if (bidirectional) {
    LstmState fs;
    for (int s = 0; s < steps; ++s) {
      gather(s);
      lstm_step(p.fw, xin, fs, out);
      scatter(s, 0);
    }
    LstmState bs;
    for (int s = steps - 1; s >= 0; --s) {
      gather(s);
      lstm_step(p.bw, xin, bs, out);
      scatter(s, h);
    }
  } else {
    for (int s = 0; s < steps; ++s) {
      gather(s);
      lstm_step(p.fw, xin, *state, out);
      scatter(s, 0);
    }
  }
  if (cfg_.unfold) {
    add_into(x, deconv_pairs(lo, p.deconv_w, p.deconv_b, 2, x.dim(2)));
  } else {
    Eigen::Map<const RowMat> lom(lo.ptr(), rows, long(lo.dim(1)) * lo.dim(2));
    Mat y = p.proj_w * lom;
    y.colwise() += p.proj_b;
    Eigen::Map<RowMat> xm(x.ptr(), cfg_.channels, long(x.dim(1)) * x.dim(2));
    xm += y;
  }
}

Tensor GridNetModel::forward(const Tensor& x0, const std::vector<Mat>& embs,
                             const std::vector<int>& emb_of_step) {
  require(cfg_.steps_per_period == 0,
          "batch forward: model runs on whole periods");
  require(x0.rank() == 3 && x0.dim(0) == cfg_.in_channels &&
              x0.dim(1) == cfg_.framing.freq_bins(),
          "forward input shape mismatch");
  Tensor x = encoder_.run(x0);
  const int steps = x.dim(2), bins = x.dim(1);
  if (!embs.empty())
    require(int(emb_of_step.size()) == steps,
            "one embedding selector per frame required");
  for (size_t i = 0; i < blocks_.size(); ++i) {
    Block& b = blocks_[i];
    run_freq_path(b.freq, x);
    run_time_path(b.time, x, &b.time_state, false);
    if (i == 0 && !embs.empty()) {
      for (int l = 0; l < steps; ++l) {
        const Mat& e = embs[size_t(emb_of_step[l])];
        for (int ci = 0; ci < cfg_.channels; ++ci)
          for (int f = 0; f < bins; ++f) x.at3(ci, f, l) *= e(ci, f);
      }
    }
  }
  if (has_head_) return head_.run(x);
  return x;
}

Mat GridNetModel::process_period(const Tensor& x0) {
  require(cfg_.steps_per_period > 0,
          "period inference: model is a streaming one");
  require(x0.rank() == 3 && x0.dim(0) == cfg_.in_channels &&
              x0.dim(1) == cfg_.framing.freq_bins() && x0.dim(2) >= 1,
          "period input shape mismatch");
  // Each period is encoded independently; context crosses periods only
  // through the attention cache.
  encoder_.reset();
  Tensor x = encoder_.run(x0);
  const int bins = x.dim(1), steps = x.dim(2);
  for (auto& b : blocks_) {
    run_freq_path(b.freq, x);
    run_time_path(b.time, x, nullptr, true);
    Eigen::Map<RowMat> xm(x.ptr(), long(cfg_.channels) * bins, steps);
    Vec pooled = xm.rowwise().mean();
    Mat token(cfg_.channels, bins);
    for (int ci = 0; ci < cfg_.channels; ++ci)
      for (int f = 0; f < bins; ++f) token(ci, f) = pooled[ci * bins + f];
    Mat att = b.attn.step(token);
    Vec flat(long(cfg_.channels) * bins);
    for (int ci = 0; ci < cfg_.channels; ++ci)
      for (int f = 0; f < bins; ++f) flat[ci * bins + f] = att(ci, f);
    xm.colwise() += flat;
  }
  Mat r(cfg_.channels, bins);
  for (int ci = 0; ci < cfg_.channels; ++ci)
    for (int f = 0; f < bins; ++f) r(ci, f) = x.at3(ci, f, steps - 1);
  return r;
}

}  // namespace egostream
