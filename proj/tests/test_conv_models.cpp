// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#include <cmath>
#include <cstring>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "egostream/common.hpp"
#include "egostream/models.hpp"
#include "support/oracles.hpp"

using namespace egostream;

namespace {

TFRep random_tf(const Framing& fr, int ch, int steps, uint64_t seed) {
  TFRep tf(fr, ch, steps, long(steps) * fr.chunk);
  Rng rng(seed);
  for (auto& v : tf.data)
    v = {float(rng.normal() * 0.3), float(rng.normal() * 0.3)};
  return tf;
}

// Parameter total recomputed from the declared shapes, not the stored data.
size_t manifest_param_count(const ModelConfig& cfg) {
  size_t total = 0;
  for (const auto& [name, dims] : weight_manifest(cfg)) {
    size_t n = 1;
    for (int d : dims) n *= size_t(d);
    total += n;
  }
  return total;
}

}  // namespace

TEST_SUITE("conv-models") {

TEST_CASE("parameter counts are exact and within budget") {
  struct Row {
    ModelConfig cfg;
    size_t exact;
    double nominal;
  };
  const Row rows[] = {
      {fast_model_config(), 486178, 491000},
      {slow_model_config(), 909056, 986000},
      {beamformer_model_config(), 171684, 174000},
  };
  for (const auto& r : rows) {
    const WeightArchive a = init_random_weights(r.cfg, 1);
    const size_t counted = count_parameters(a);
    CHECK(counted == r.exact);
    CHECK(counted == manifest_param_count(r.cfg));
    CHECK(double(counted) > 0.75 * r.nominal);
    CHECK(double(counted) < 1.25 * r.nominal);
  }
}

TEST_CASE("config manifest text round-trips") {
  for (const ModelConfig& cfg :
       {fast_model_config(), slow_model_config(), beamformer_model_config()}) {
    const ModelConfig back = parse_manifest_text(manifest_text(cfg));
    CHECK(back.name == cfg.name);
    CHECK(back.blocks == cfg.blocks);
    CHECK(back.channels == cfg.channels);
    CHECK(back.hidden == cfg.hidden);
    CHECK(back.heads == cfg.heads);
    CHECK(back.in_channels == cfg.in_channels);
    CHECK(back.out_channels == cfg.out_channels);
    CHECK(back.framing == cfg.framing);
    CHECK(back.steps_per_period == cfg.steps_per_period);
    CHECK(back.unfold == cfg.unfold);
    CHECK(back.bidirectional_time == cfg.bidirectional_time);
    CHECK(back.attention == cfg.attention);
    CHECK(back.head == cfg.head);
  }
}

TEST_CASE("random weights are seed-deterministic") {
  const ModelConfig cfg = fast_model_config();
  const WeightArchive a = init_random_weights(cfg, 7);
  const WeightArchive b = init_random_weights(cfg, 7);
  const WeightArchive c = init_random_weights(cfg, 8);
  REQUIRE(a.entries.size() == b.entries.size());
  bool all_equal = true, any_diff_c = false;
  for (size_t i = 0; i < a.entries.size(); ++i) {
    const auto& ta = a.entries[i].tensor;
    const auto& tb = b.entries[i].tensor;
    const auto& tc = c.entries[i].tensor;
    all_equal = all_equal && 0 == std::memcmp(ta.ptr(), tb.ptr(),
                                              ta.size() * sizeof(float));
    any_diff_c = any_diff_c || 0 != std::memcmp(ta.ptr(), tc.ptr(),
                                                ta.size() * sizeof(float));
  }
  CHECK(all_equal);
  CHECK(any_diff_c);
}

TEST_CASE("weight archive round-trips bit-exactly through the file format") {
  namespace fs = std::filesystem;
  const WeightArchive a = init_random_weights(beamformer_model_config(), 3);
  const fs::path path =
      fs::temp_directory_path() / "egostream_models_test.egsw";
  save_weights_file(path.string(), a);
  const WeightArchive b = load_weights_file(path.string());
  REQUIRE(a.entries.size() == b.entries.size());
  for (size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(a.entries[i].name == b.entries[i].name);
    CHECK(a.entries[i].tensor.dims == b.entries[i].tensor.dims);
    CHECK(0 == std::memcmp(a.entries[i].tensor.ptr(), b.entries[i].tensor.ptr(),
                           a.entries[i].tensor.size() * sizeof(float)));
  }
  // The container is enumerable and order-preserving.
  const auto bytes = save_weights(a);
  CHECK(bytes.size() > 4);
  CHECK(0 == std::memcmp(bytes.data(), "EGSW", 4));
}

TEST_CASE("realify lays out real and imaginary planes") {
  const Framing fr = main_framing();
  const TFRep tf = random_tf(fr, 2, 4, 31);
  const Tensor t = realify(tf);
  REQUIRE(t.dims == std::vector<int>{4, fr.freq_bins(), 4});
  for (int c = 0; c < 2; ++c)
    for (int f = 0; f < fr.freq_bins(); ++f)
      for (int l = 0; l < 4; ++l) {
        CHECK(t.at3(2 * c, f, l) == tf.at(c, f, l).real());
        CHECK(t.at3(2 * c + 1, f, l) == tf.at(c, f, l).imag());
      }

  const TFRep a = random_tf(fr, 1, 3, 32);
  const TFRep b = random_tf(fr, 1, 3, 33);
  const Tensor p = realify_pair(a, b);
  REQUIRE(p.dims == std::vector<int>{4, fr.freq_bins(), 3});
  for (int f = 0; f < fr.freq_bins(); ++f)
    for (int l = 0; l < 3; ++l) {
      CHECK(p.at3(0, f, l) == a.at(0, f, l).real());
      CHECK(p.at3(1, f, l) == a.at(0, f, l).imag());
      CHECK(p.at3(2, f, l) == b.at(0, f, l).real());
      CHECK(p.at3(3, f, l) == b.at(0, f, l).imag());
    }
}

TEST_CASE("fast model: streaming equals batch") {
  const ModelConfig cfg = fast_model_config();
  const WeightArchive w = init_random_weights(cfg, 17);
  GridNetModel model(cfg, w);

  const int steps = 12;
  const Framing fr = cfg.framing;
  const TFRep tf = random_tf(fr, 1, steps, 34);
  const Tensor x = realify(tf);

  // Two embeddings, switched halfway, as the runtime would.
  Mat e0 = Mat::Zero(cfg.channels, fr.freq_bins());
  Mat e1(cfg.channels, fr.freq_bins());
  Rng rng(35);
  for (int i = 0; i < cfg.channels; ++i)
    for (int f = 0; f < fr.freq_bins(); ++f) e1(i, f) = float(rng.normal());
  std::vector<int> of_step(size_t(steps), 0);
  for (int l = steps / 2; l < steps; ++l) of_step[size_t(l)] = 1;

  const Tensor batch = model.forward(x, {e0, e1}, of_step);

  model.reset();
  Mat in(cfg.in_channels, fr.freq_bins());
  for (int l = 0; l < steps; ++l) {
    model.set_embedding(l < steps / 2 ? e0 : e1);
    for (int c = 0; c < cfg.in_channels; ++c)
      for (int f = 0; f < fr.freq_bins(); ++f) in(c, f) = x.at3(c, f, l);
    const Mat out = model.step_frame(in);
    for (int c = 0; c < cfg.out_channels; ++c)
      for (int f = 0; f < fr.freq_bins(); ++f)
        CHECK(std::abs(out(c, f) - batch.at3(c, f, l)) < 1e-5f);
  }
}

TEST_CASE("fast model is conditioned by the embedding") {
  const ModelConfig cfg = fast_model_config();
  GridNetModel model(cfg, init_random_weights(cfg, 18));
  const TFRep tf = random_tf(cfg.framing, 1, 3, 36);
  const Tensor x = realify(tf);

  const Mat zeros = Mat::Zero(cfg.channels, cfg.framing.freq_bins());
  const Mat ones = Mat::Ones(cfg.channels, cfg.framing.freq_bins());
  const Tensor y0 = model.forward(x, {zeros}, {0, 0, 0});
  model.reset();
  const Tensor y1 = model.forward(x, {ones}, {0, 0, 0});
  float diff = 0;
  for (size_t i = 0; i < y0.size(); ++i)
    diff = std::max(diff, std::abs(y0.data[i] - y1.data[i]));
  CHECK(diff > 1e-4f);

  // Determinism: same embedding, same input, same output.
  model.reset();
  const Tensor y2 = model.forward(x, {ones}, {0, 0, 0});
  CHECK(0 == std::memcmp(y1.ptr(), y2.ptr(), y1.size() * sizeof(float)));
}

TEST_CASE("slow model emits one feature column per period") {
  const ModelConfig cfg = slow_model_config();
  CHECK(cfg.steps_per_period == 80);
  CHECK(cfg.in_channels == 4);
  GridNetModel model(cfg, init_random_weights(cfg, 19));

  const TFRep a = random_tf(cfg.framing, 1, cfg.steps_per_period, 37);
  const TFRep b = random_tf(cfg.framing, 1, cfg.steps_per_period, 38);
  const Tensor x = realify_pair(a, b);
  const Mat r0 = model.process_period(x);
  CHECK(r0.rows() == cfg.channels);
  CHECK(r0.cols() == cfg.framing.freq_bins());

  // A second period attends over the first: feeding the same input twice
  // gives a different embedding than a fresh model fed once.
  const Mat r1 = model.process_period(x);
  model.reset();
  const Mat r0b = model.process_period(x);
  CHECK((r0 - r0b).cwiseAbs().maxCoeff() == 0.0f);
  CHECK((r1 - r0b).cwiseAbs().maxCoeff() > 1e-6f);

  // Short trailing periods are accepted.
  model.reset();
  const TFRep c = random_tf(cfg.framing, 1, 33, 39);
  const TFRep d = random_tf(cfg.framing, 1, 33, 40);
  const Mat rs = model.process_period(realify_pair(c, d));
  CHECK(rs.rows() == cfg.channels);
}

TEST_CASE("beamformer model maps binaural input to two complex channels") {
  const ModelConfig cfg = beamformer_model_config();
  CHECK(cfg.in_channels == 4);
  CHECK(cfg.out_channels == 4);
  CHECK(cfg.hidden == 32);
  GridNetModel model(cfg, init_random_weights(cfg, 20));
  const TFRep tf = random_tf(cfg.framing, 2, 5, 41);
  const Tensor x = realify(tf);
  const Tensor y = model.forward(x, {}, {});
  CHECK(y.dims == std::vector<int>{4, cfg.framing.freq_bins(), 5});
  bool nonzero = false;
  for (size_t i = 0; i < y.size(); ++i) nonzero = nonzero || y.data[i] != 0;
  CHECK(nonzero);
}

}  // TEST_SUITE
