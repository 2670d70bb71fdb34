// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Release gate. Each numbered check prints exactly one PASS/FAIL line with
// the measured quantity next to its bound; the process exits nonzero if any
// check fails. Tolerances are part of the project contract and are not to be
// loosened here.
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "egostream/common.hpp"
#include "egostream/metrics.hpp"
#include "egostream/models.hpp"
#include "egostream/room.hpp"
#include "egostream/runtime.hpp"
#include "egostream/stft.hpp"
#include "egostream/synth.hpp"
#include "egostream/wav.hpp"
#include "json.hpp"
#include "support/oracles.hpp"

using namespace egostream;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int idx, bool pass, const std::string& name,
            const std::string& detail) {
  std::printf("[%2d] %s %s: %s\n", idx, pass ? "PASS" : "FAIL", name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::vector<float> random_signal(size_t n, uint64_t seed, double amp) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (size_t i = 0; i < n; ++i) v[i] = float(rng.normal() * amp);
  return v;
}

Mat random_mat(int rows, int cols, uint64_t seed, double amp) {
  Rng rng(seed);
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = float(rng.normal() * amp);
  return m;
}

TFRep random_tf(const Framing& f, int channels, int steps, uint64_t seed) {
  TFRep tf(f, channels, steps, long(steps) * f.chunk);
  Rng rng(seed);
  for (auto& z : tf.data)
    z = std::complex<float>(float(rng.normal() * 0.1),
                            float(rng.normal() * 0.1));
  return tf;
}

// ---- 1: stft identity -------------------------------------------------------

void check_stft_identity() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0;
  for (const Framing f : {main_framing(), beamformer_framing()}) {
    const size_t chunk = size_t(f.chunk);
    const size_t lat = size_t(f.latency());
    for (int trial = 0; trial < 100; ++trial) {
      const size_t n = 160000;  // 10 s
      std::vector<float> x = random_signal(n, 900 + uint64_t(trial), 0.3);
      const size_t padded = (n + lat + chunk - 1) / chunk * chunk;
      x.resize(padded, 0.0f);

      StreamingStft stft(f, 1);
      StreamingIstft istft(f, 1);
      std::vector<std::complex<float>> frame(size_t(f.freq_bins()));
      std::vector<float> out;
      out.reserve(padded);
      for (size_t k = 0; k * chunk < padded; ++k) {
        const float* cp = x.data() + k * chunk;
        if (!stft.push(&cp, frame.data())) {
          out.insert(out.end(), chunk, 0.0f);  // priming call emits nothing
          continue;
        }
        std::vector<float> piece(chunk);
        const std::complex<float>* fp = frame.data();
        float* op = piece.data();
        istft.push_frame(&fp, &op);
        out.insert(out.end(), piece.begin(), piece.end());
      }
      // On the shared input timeline the output is the input delayed by
      // exactly latency() samples: 232 for the main framing, 160 for the
      // beamformer framing.
      for (size_t i = 0; i < n; ++i)
        worst = std::max(worst,
                         std::abs(double(out[i + lat]) - double(x[i])));
    }
  }
  const double dt = seconds_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "max abs error %.3g (bound 1e-5) after 232/160-sample "
                "alignment, 200 round trips in %.1f s (bound 10 s)",
                worst, dt);
  report(1, worst <= 1e-5 && dt < 10.0, "stft identity", buf);
}

// ---- 2: causality -----------------------------------------------------------

void check_causality() {
  // Fast path at the audio level: perturbing a suffix leaves every earlier
  // output sample bit-identical through the whole cascade.
  const PipelineWeights w = random_pipeline_weights(41);
  const size_t n = 48000;  // 3 s
  AudioBuffer base(2, n);
  base.channels[0] = random_signal(n, 50, 0.1);
  base.channels[1] = random_signal(n, 51, 0.1);
  const AudioBuffer base_out = process_stream(base, w).first;

  int fast_ok = 0;
  Rng pick(1234);
  for (int trial = 0; trial < 50; ++trial) {
    const size_t m = 1 + pick.integer(n / 200 - 1);  // chunk index
    const size_t cut = m * 200;
    AudioBuffer pert = base;
    Rng noise(700 + uint64_t(trial));
    for (size_t i = cut; i < n; ++i)
      for (auto& ch : pert.channels) ch[i] += float(noise.normal() * 0.05);
    const AudioBuffer out = process_stream(pert, w).first;
    bool clean = true;
    for (size_t i = 0; i < cut && clean; ++i)
      clean = out.channels[0][i] == base_out.channels[0][i];
    bool touched = false;
    for (size_t i = cut; i < n && !touched; ++i)
      touched = out.channels[0][i] != base_out.channels[0][i];
    if (clean && touched) ++fast_ok;
  }

  // Slow path at the frame level: perturbing the frames of one period leaves
  // every earlier period's embedding bit-identical.
  const ModelConfig scfg = slow_model_config();
  const WeightArchive sw = init_random_weights(scfg, 42);
  const int P = 4, steps = scfg.steps_per_period;
  const TFRep mix = random_tf(scfg.framing, 1, P * steps, 60);
  const TFRep self = random_tf(scfg.framing, 1, P * steps, 61);

  auto embeddings = [&](const TFRep& m, const TFRep& s) {
    GridNetModel model(scfg, sw);
    std::vector<Mat> out;
    for (int p = 0; p < P; ++p) {
      const Tensor x = realify_pair(m.slice_steps(p * steps, steps),
                                    s.slice_steps(p * steps, steps));
      out.push_back(model.process_period(x));
    }
    return out;
  };
  const std::vector<Mat> base_e = embeddings(mix, self);

  int slow_ok = 0;
  Rng pick2(4321);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 1 + int(pick2.integer(P - 1));
    TFRep pert = mix;
    Rng noise(800 + uint64_t(trial));
    for (int l = k * steps; l < (k + 1) * steps; ++l)
      for (int b = 0; b < pert.bins; ++b)
        pert.at(0, b, l) += std::complex<float>(float(noise.normal() * 0.1),
                                                float(noise.normal() * 0.1));
    const std::vector<Mat> e = embeddings(pert, self);
    bool clean = true;
    for (int p = 0; p < k && clean; ++p)
      clean = (e[size_t(p)] - base_e[size_t(p)]).cwiseAbs().maxCoeff() == 0.0f;
    const bool touched =
        (e[size_t(k)] - base_e[size_t(k)]).cwiseAbs().maxCoeff() > 0.0f;
    if (clean && touched) ++slow_ok;
  }

  char buf[160];
  std::snprintf(buf, sizeof buf,
                "fast suffix trials %d/50 bit-exact before the cut, slow "
                "period trials %d/50 bit-exact before the perturbed period",
                fast_ok, slow_ok);
  report(2, fast_ok == 50 && slow_ok == 50, "causality", buf);
}

// ---- 3: streaming equals offline --------------------------------------------

void check_streaming_offline() {
  // Fast model: 20 s of frames chunk-by-chunk vs one batch call.
  const ModelConfig fcfg = fast_model_config();
  const WeightArchive fw = init_random_weights(fcfg, 43);
  const int L = 1600, F = fcfg.framing.freq_bins();
  const TFRep tf = random_tf(fcfg.framing, 1, L, 70);
  const Tensor x = realify(tf);
  const Mat e0 = random_mat(fcfg.channels, F, 71, 0.5);
  const Mat e1 = random_mat(fcfg.channels, F, 72, 0.5);

  GridNetModel stream(fcfg, fw);
  Mat frame(fcfg.in_channels, F);
  double fast_diff = 0;
  std::vector<Mat> stream_out;
  for (int l = 0; l < L; ++l) {
    stream.set_embedding(l < L / 2 ? e0 : e1);
    for (int c = 0; c < fcfg.in_channels; ++c)
      for (int b = 0; b < F; ++b) frame(c, b) = x.at3(c, b, l);
    stream_out.push_back(stream.step_frame(frame));
  }
  GridNetModel batch(fcfg, fw);
  std::vector<int> of_step(size_t(L), 0);
  for (int l = 0; l < L; ++l) of_step[size_t(l)] = l < L / 2 ? 0 : 1;
  const Tensor y = batch.forward(x, {e0, e1}, of_step);
  for (int l = 0; l < L; ++l)
    for (int c = 0; c < fcfg.out_channels; ++c)
      for (int b = 0; b < F; ++b)
        fast_diff = std::max(fast_diff,
                             std::abs(double(stream_out[size_t(l)](c, b)) -
                                      double(y.at3(c, b, l))));

  // Slow model: live cache vs a fresh model re-fed everything so far.
  const ModelConfig scfg = slow_model_config();
  const WeightArchive sw = init_random_weights(scfg, 44);
  const int P = 20, steps = scfg.steps_per_period;
  const TFRep mix = random_tf(scfg.framing, 1, P * steps, 73);
  const TFRep self = random_tf(scfg.framing, 1, P * steps, 74);
  auto period_input = [&](int p) {
    return realify_pair(mix.slice_steps(p * steps, steps),
                        self.slice_steps(p * steps, steps));
  };
  GridNetModel live_model(scfg, sw);
  double slow_diff = 0;
  std::vector<Mat> live;
  for (int p = 0; p < P; ++p)
    live.push_back(live_model.process_period(period_input(p)));
  for (int p = 0; p < P; ++p) {
    GridNetModel fresh(scfg, sw);
    Mat last;
    for (int q = 0; q <= p; ++q) last = fresh.process_period(period_input(q));
    slow_diff = std::max(
        slow_diff,
        double((live[size_t(p)] - last).cwiseAbs().maxCoeff()));
  }

  // Whole pipeline: worker-thread run vs single-thread run on 20 s.
  const PipelineWeights w = random_pipeline_weights(45);
  AudioBuffer audio(2, 320000);
  audio.channels[0] = random_signal(320000, 75, 0.1);
  audio.channels[1] = random_signal(320000, 76, 0.1);
  PipelineConfig seq;
  seq.concurrent = false;
  const AudioBuffer conc = process_stream(audio, w).first;
  const AudioBuffer sequ = process_stream(audio, w, seq).first;
  double pipe_diff = 0;
  for (size_t i = 0; i < conc.frames(); ++i)
    pipe_diff = std::max(pipe_diff, std::abs(double(conc.channels[0][i]) -
                                             double(sequ.channels[0][i])));

  char buf[200];
  std::snprintf(buf, sizeof buf,
                "max abs diff: fast chunked-vs-batch %.3g, slow "
                "incremental-vs-refed %.3g, pipeline concurrent-vs-sequential "
                "%.3g (bounds 1e-5)",
                fast_diff, slow_diff, pipe_diff);
  report(3, fast_diff <= 1e-5 && slow_diff <= 1e-5 && pipe_diff <= 1e-5,
         "streaming equals offline", buf);
}

// ---- 4: parameter counts ----------------------------------------------------

void check_parameter_counts() {
  const size_t fast = count_parameters(init_random_weights(fast_model_config(), 1));
  const size_t slow = count_parameters(init_random_weights(slow_model_config(), 1));
  const size_t bf =
      count_parameters(init_random_weights(beamformer_model_config(), 1));
  auto inside = [](size_t got, double ref) {
    return std::abs(double(got) - ref) <= 0.25 * ref;
  };
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "fast %zu (ref 491K), slow %zu (ref 986K), beamformer %zu "
                "(ref 174K); band +/-25%%",
                fast, slow, bf);
  report(4,
         inside(fast, 491000.0) && inside(slow, 986000.0) &&
             inside(bf, 174000.0),
         "parameter counts", buf);
}

// ---- 5: real-time factor ----------------------------------------------------

void check_realtime() {
  const PipelineWeights w = random_pipeline_weights(46);
  const BenchReport b = bench_pipeline(w, 10.0, 3, 47);
  const double fast_us = b.mean(b.fast_us);
  const double slow_us = b.mean(b.slow_us);
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "fast %.0f us/chunk (bound 12500), rtf %.3f; slow %.0f "
                "us/period (informational; embedded-hardware reference "
                "41300)",
                fast_us, fast_us / 12500.0, slow_us);
  report(5, fast_us < 12500.0, "real-time factor", buf);
}

// ---- 6: embedding delay -----------------------------------------------------

void check_embedding_delay() {
  const ModelConfig scfg = slow_model_config();
  const WeightArchive sw = init_random_weights(scfg, 48);
  const int P = 3, steps = scfg.steps_per_period;
  const TFRep mix = random_tf(scfg.framing, 1, P * steps, 80);
  const TFRep self = random_tf(scfg.framing, 1, P * steps, 81);

  bool all_ok = true;
  std::string note;
  for (int k = 0; k < P; ++k) {
    TFRep pert = mix;
    pert.at(0, pert.bins / 3, k * steps + steps / 2) +=
        std::complex<float>(1.0f, -0.5f);

    GridNetModel base_model(scfg, sw), pert_model(scfg, sw);
    int first_changed = -1;
    for (int p = 0; p < P; ++p) {
      const Mat rb = base_model.process_period(
          realify_pair(mix.slice_steps(p * steps, steps),
                       self.slice_steps(p * steps, steps)));
      const Mat rp = pert_model.process_period(
          realify_pair(pert.slice_steps(p * steps, steps),
                       self.slice_steps(p * steps, steps)));
      if (first_changed < 0 && (rp - rb).cwiseAbs().maxCoeff() > 0.0f)
        first_changed = p;
    }
    // Period p's output is consumed while chunk interval p+1 streams, so the
    // first affected consumed slice must be interval k+1: first change at p=k.
    if (first_changed != k) {
      all_ok = false;
      note += " impulse in period " + std::to_string(k) +
              " first changed embedding " + std::to_string(first_changed) + ";";
    }
  }
  report(6, all_ok, "embedding delay",
         all_ok ? "impulse in period k first alters the embedding finished at "
                  "k and consumed during interval k+1, for every k"
                : "mapping broken:" + note);
}

// ---- 7: policy validation and snr -------------------------------------------

std::vector<std::string> pool(const std::string& prefix, int n,
                              bool wearer_first) {
  std::vector<std::string> out;
  if (wearer_first) out.push_back("self");
  for (int i = 1; int(out.size()) < n; ++i)
    out.push_back(prefix + std::to_string(i));
  return out;
}

void check_policies() {
  const std::map<std::string, int> sizes = {
      {"2spk", 2}, {"3spk", 3}, {"4spk", 4}, {"5spk", 5}, {"leaving", 3}};
  long built = 0, valid = 0;
  std::string first_violation;
  for (const auto& [policy, tn] : sizes) {
    const std::vector<std::string> tpool = pool("t", tn, true);
    const std::vector<std::string> ipool = pool("i", 2, false);
    const uint64_t root = hash64(policy);
    for (int i = 0; i < 1000; ++i) {
      ConversationScript script;
      bool ok = false;
      for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        try {
          const auto tt = synthetic_turns(
              60.0, stage_seed(root, "accept.tt", uint64_t(i * 100 + attempt)));
          const auto it = synthetic_turns(
              60.0, stage_seed(root, "accept.it", uint64_t(i * 100 + attempt)));
          script = build_timeline(
              tt, it, policy, tpool, ipool,
              stage_seed(root, "accept.tl", uint64_t(i * 100 + attempt)));
          ok = true;
        } catch (const Error&) {
        }
      }
      if (!ok) continue;
      ++built;
      const std::string verdict =
          oracle::validate_script(script, tpool, ipool, 60.0);
      if (verdict.empty())
        ++valid;
      else if (first_violation.empty())
        first_violation = policy + ": " + verdict;
    }
  }

  // Rendered SNR across the operating range.
  double worst_snr_err = 0;
  for (int i = 0; i <= 20; ++i) {
    const double snr = -10.0 + i;
    ConversationScript script;
    for (int attempt = 0;; ++attempt) {
      try {
        script = build_timeline(
            synthetic_turns(60.0, stage_seed(7, "snr.tt", uint64_t(i * 100 + attempt))),
            synthetic_turns(60.0, stage_seed(7, "snr.it", uint64_t(i * 100 + attempt))),
            "2spk", pool("t", 2, true), pool("i", 2, false),
            stage_seed(7, "snr.tl", uint64_t(i * 100 + attempt)));
        break;
      } catch (const Error&) {
        if (attempt >= 99) throw;
      }
    }
    const MixturePackage pkg = render_mixture(
        script, synthetic_clip_provider(stage_seed(7, "snr.clips", uint64_t(i))),
        snr);
    worst_snr_err =
        std::max(worst_snr_err, std::abs(oracle::measured_snr_db(pkg) - snr));
  }

  char buf[240];
  std::snprintf(buf, sizeof buf,
                "%ld/%ld scripts over 5 policies pass the independent rule "
                "scan (need 5000/5000)%s%s; rendered snr max |err| %.4f dB "
                "across [-10,10] (bound 0.01)",
                valid, built,
                first_violation.empty() ? "" : "; first violation: ",
                first_violation.c_str(), worst_snr_err);
  report(7, built == 5000 && valid == 5000 && worst_snr_err <= 0.01,
         "policy validation", buf);
}

// ---- 8: silence perturbation conservation ------------------------------------

void check_perturbation() {
  long checked = 0;
  bool ok = true;
  std::string note = "order and per-silence conservation hold";
  for (const double sd : {0.5, 1.0, 1.5, 2.0, 2.5, 3.0}) {
    for (int seedi = 0; seedi < 100 && ok; ++seedi) {
      ConversationScript script;
      bool built = false;
      for (int attempt = 0; attempt < 100 && !built; ++attempt) {
        try {
          script = build_timeline(
              synthetic_turns(60.0, stage_seed(9, "p.tt",
                                               uint64_t(seedi * 100 + attempt))),
              synthetic_turns(60.0, stage_seed(9, "p.it",
                                               uint64_t(seedi * 100 + attempt))),
              "2spk", pool("t", 2, true), pool("i", 2, false),
              stage_seed(9, "p.tl", uint64_t(seedi * 100 + attempt)));
          built = true;
        } catch (const Error&) {
        }
      }
      if (!built) continue;
      const ConversationScript moved =
          perturb_silences(script, sd, stage_seed(9, "p.mv", uint64_t(seedi)));

      // Per track and speaker: utterance order and durations unchanged, and
      // the speaker's total silence moves by at most one sample per silence.
      auto scan = [&](const std::vector<Utterance>& before,
                      const std::vector<Utterance>& after) {
        if (before.size() != after.size()) return std::string("turn count");
        std::map<std::string, std::vector<size_t>> by_speaker;
        for (size_t i = 0; i < before.size(); ++i) {
          if (before[i].speaker != after[i].speaker)
            return std::string("speaker order");
          const double db = before[i].end - before[i].start;
          const double da = after[i].end - after[i].start;
          if (std::abs(da - db) > 2.0 / kSampleRate)
            return std::string("turn duration");
          by_speaker[before[i].speaker].push_back(i);
        }
        for (const auto& [spk, idx] : by_speaker) {
          double sil_b = 0, sil_a = 0;
          long gaps = 0;
          for (size_t j = 1; j < idx.size(); ++j) {
            const double gb =
                before[idx[j]].start - before[idx[j - 1]].end;
            const double ga = after[idx[j]].start - after[idx[j - 1]].end;
            if (ga <= 0 && gb > 0) return std::string("gap vanished");
            sil_b += gb;
            sil_a += ga;
            ++gaps;
          }
          if (std::abs(sil_a - sil_b) > double(gaps) / kSampleRate + 1e-9)
            return std::string("silence total for " + spk);
        }
        return std::string();
      };
      const std::string t = scan(script.target, moved.target);
      const std::string i = scan(script.interference, moved.interference);
      if (!t.empty() || !i.empty()) {
        ok = false;
        note = "sd " + std::to_string(sd) + " seed " + std::to_string(seedi) +
               ": " + (t.empty() ? i : t);
      }
      ++checked;
    }
  }
  char buf[240];
  std::snprintf(buf, sizeof buf, "%ld perturbations over sd grid x 100 seeds; %s",
                checked, note.c_str());
  report(8, ok && checked == 600, "silence perturbation conservation", buf);
}

// ---- 9: room acoustics -------------------------------------------------------

void check_room() {
  double worst_delay = 0;
  int rt_ok = 0;
  for (int i = 0; i < 100; ++i) {
    const SceneConfig s = sample_scene(2, 1300 + uint64_t(i));
    const std::vector<float> h =
        compute_rir(s, s.speakers[0].mouth, s.mic_left);
    size_t first = 0;
    while (first < h.size() && h[first] == 0.0f) ++first;
    const double d = norm(s.speakers[0].mouth - s.mic_left);
    worst_delay = std::max(
        worst_delay, std::abs(double(first) - d / 343.0 * kSampleRate));
    const double rt = oracle::schroeder_rt60(h, kSampleRate);
    if (std::abs(rt - s.rt60) <= 0.30 * s.rt60) ++rt_ok;
  }

  // Anechoic limit: one fractional-delay arrival of amplitude 1/(4 pi d).
  SceneConfig an = sample_scene(2, 77);
  an.rt60 = 0.0;
  const Vec3 src = an.speakers[0].mouth;
  const std::vector<float> h = compute_rir(an, src, an.mic_left);
  size_t first = 0, last = 0;
  int support = 0;
  double total = 0;
  for (size_t i = 0; i < h.size(); ++i)
    if (h[i] != 0.0f) {
      if (!support) first = i;
      last = i;
      ++support;
      total += double(h[i]);
    }
  const double d = norm(src - an.mic_left);
  const bool anechoic_ok = support >= 1 && support <= 2 && last - first <= 1 &&
                           std::abs(total - 1.0 / (4.0 * M_PI * d)) < 1e-6;

  int louder = 0;
  for (int i = 0; i < 100; ++i) {
    const SceneConfig s = sample_scene(2, 1400 + uint64_t(i));
    MixturePackage p;
    p.script.wearer = "w";
    p.mixture = AudioBuffer(1, 8000);
    p.stems["w"] = AudioBuffer(1, 8000);
    p.stems["a"] = AudioBuffer(1, 8000);
    Rng rng(1500 + uint64_t(i));
    for (size_t j = 0; j < 8000; ++j) {
      p.stems["w"].channels[0][j] = float(rng.uniform(-0.5, 0.5));
      p.stems["a"].channels[0][j] = float(rng.uniform(-0.5, 0.5));
      p.mixture.channels[0][j] =
          p.stems["w"].channels[0][j] + p.stems["a"].channels[0][j];
    }
    const BinauralPackage b = spatialize(p, s);
    auto energy = [](const AudioBuffer& a) {
      double e = 0;
      for (const auto& ch : a.channels)
        for (float v : ch) e += double(v) * double(v);
      return e;
    };
    if (energy(b.binaural_stems.at("w")) > energy(b.binaural_stems.at("a")))
      ++louder;
  }

  char buf[240];
  std::snprintf(buf, sizeof buf,
                "direct delay max |err| %.2f samples (bound 1); rt60 within "
                "30%% on %d/100 scenes; anechoic rir is a single arrival: %s; "
                "wearer louder in %d/100 scenes",
                worst_delay, rt_ok, anechoic_ok ? "yes" : "no", louder);
  report(9, worst_delay <= 1.0 && rt_ok == 100 && anechoic_ok && louder == 100,
         "room acoustics", buf);
}

// ---- 10: metric oracles ------------------------------------------------------

void check_metrics() {
  double drift = 0;
  for (uint64_t s = 0; s < 20; ++s) {
    const std::vector<float> r = random_signal(4000, 1600 + s, 0.3);
    std::vector<float> e = random_signal(4000, 1700 + s, 0.3);
    std::vector<float> e2 = e;
    for (float& v : e2) v *= 17.3f;
    drift = std::max(drift, std::abs(si_sdr(e, r) - si_sdr(e2, r)));
  }

  // Constructed selection scenes: all-partner, all-interferer, half-half.
  const size_t n = 16000 * 8;
  std::vector<float> partner(n, 0.0f), interf(n, 0.0f), wearer(n, 0.0f);
  Rng rng(3);
  for (size_t i = 16000; i < 3 * 16000; ++i) partner[i] = float(rng.normal() * 0.2);
  for (size_t i = 5 * 16000; i < 7 * 16000; ++i) partner[i] = float(rng.normal() * 0.2);
  for (size_t i = 0; i < n; ++i) interf[i] = float(rng.normal() * 0.2);
  for (size_t i = 0; i < 16000; ++i) wearer[i] = float(rng.normal() * 0.2);
  std::vector<float> mixture(n);
  for (size_t i = 0; i < n; ++i) mixture[i] = partner[i] + interf[i] + wearer[i];
  const std::map<std::string, std::vector<float>> stems = {
      {"p", partner}, {"i", interf}, {"w", wearer}};
  const std::vector<SpeechSpan> turns = {{"p", 1.0, 3.0}, {"p", 5.0, 7.0}};
  const SelectionStats acc =
      turn_selection_stats(partner, mixture, stems, turns, "w");
  const SelectionStats cr =
      turn_selection_stats(interf, mixture, stems, turns, "w");
  std::vector<float> half = mixture;
  for (size_t i = 16000; i < 3 * 16000; ++i) half[i] = partner[i];
  for (size_t i = 5 * 16000; i < 7 * 16000; ++i) half[i] = interf[i];
  const SelectionStats hh =
      turn_selection_stats(half, mixture, stems, turns, "w");
  const bool cases_ok = acc.accuracy == 1.0 && acc.confusion == 0.0 &&
                        cr.accuracy == 0.0 && cr.confusion == 1.0 &&
                        hh.accuracy == 0.5 && hh.confusion == 0.5;

  double mr_rel = 0;
  for (uint64_t s = 0; s < 50; ++s) {
    const std::vector<float> r = random_signal(4000, 1800 + s, 0.25);
    std::vector<float> e = r;
    Rng nz(1900 + s);
    for (float& v : e) v += float(nz.normal() * 0.03);
    const double lib = multires_stft_loss(e, r, true);
    const double ref = oracle::multires_ref(e, r, true);
    mr_rel = std::max(mr_rel, std::abs(lib - ref) / std::max(1.0, std::abs(ref)));
  }

  char buf[240];
  std::snprintf(buf, sizeof buf,
                "si-sdr scale drift %.3g dB (bound 1e-6); constructed acc/cr "
                "(100,0)/(0,100)/(50,50): %s; multires vs direct formula max "
                "rel diff %.3g over 50 pairs (bound 1e-5)",
                drift, cases_ok ? "exact" : "WRONG", mr_rel);
  report(10, drift <= 1e-6 && cases_ok && mr_rel <= 1e-5, "metric oracles",
         buf);
}

// ---- 11: end-to-end smoke ----------------------------------------------------

int run_cmd(const std::string& args, std::string* output) {
  const std::string cmd = std::string(EGOSTREAM_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return -1;
  char b[4096];
  size_t got;
  while ((got = fread(b, 1, sizeof b, pipe)) > 0) output->append(b, got);
  const int status = pclose(pipe);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void check_end_to_end() {
  const fs::path root =
      fs::temp_directory_path() / ("egostream-accept-" + std::to_string(getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const auto t0 = std::chrono::steady_clock::now();

  std::string log;
  bool ok = true;
  std::string why;
  auto step = [&](const std::string& args) {
    if (!ok) return;
    log.clear();
    if (run_cmd(args, &log) != 0) {
      ok = false;
      why = "step failed: " + args + " | " + log.substr(0, 160);
    }
  };

  const fs::path syn = root / "synth", spa = root / "spatial";
  step("synth --out " + syn.string() + " --policy 2spk --n 1 --seed 21 --duration 60");
  step("spatialize --in " + (syn / "manifest.json").string() + " --out " +
       spa.string() + " --seed 22");
  const fs::path sdir = spa / "sample_0000";
  step("run --input " + (sdir / "mixture.wav").string() + " --out " +
       (root / "out.wav").string() + " --report " + (root / "run.csv").string() +
       " --random-weights --seed 23");
  step("eval --out " + (root / "out.wav").string() + " --manifest " +
       (sdir / "sample.json").string() + " --report " +
       (root / "report.json").string());
  const double dt = seconds_since(t0);

  std::string schema = "report not checked";
  if (ok) {
    try {
      std::ifstream f(root / "report.json");
      std::ostringstream ss;
      ss << f.rdbuf();
      const auto j = nlohmann::json::parse(ss.str());
      const bool fields = j.contains("sisdri") && j.contains("accuracy") &&
                          j.contains("confusion_rate") &&
                          j.at("sisdri").is_number() &&
                          j.at("accuracy").is_number() &&
                          j.at("confusion_rate").is_number();
      if (!fields) {
        ok = false;
        schema = "report missing required fields";
      } else {
        char s[120];
        std::snprintf(s, sizeof s, "report valid (sisdri %.2f dB, acc %.2f, cr %.2f)",
                      j.at("sisdri").get<double>(), j.at("accuracy").get<double>(),
                      j.at("confusion_rate").get<double>());
        schema = s;
      }
    } catch (const std::exception& e) {
      ok = false;
      schema = std::string("report unparsable: ") + e.what();
    }
  }
  if (ok && dt >= 60.0) {
    ok = false;
    why = "too slow";
  }
  fs::remove_all(root);

  char buf[240];
  std::snprintf(buf, sizeof buf,
                "synth -> spatialize -> run -> eval on one 60 s sample in "
                "%.1f s (bound 60); %s%s",
                dt, schema.c_str(), ok ? "" : (" | " + why).c_str());
  report(11, ok, "end-to-end smoke", buf);
}

}  // namespace

int main() {
  std::printf("release gate, %s\n", EGOSTREAM_CLI_PATH);
  auto guard = [](int idx, const char* name, void (*fn)()) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(idx, false, name, std::string("exception: ") + e.what());
    }
  };
  guard(1, "stft identity", check_stft_identity);
  guard(2, "causality", check_causality);
  guard(3, "streaming equals offline", check_streaming_offline);
  guard(4, "parameter counts", check_parameter_counts);
  guard(5, "real-time factor", check_realtime);
  guard(6, "embedding delay", check_embedding_delay);
  guard(7, "policy validation", check_policies);
  guard(8, "silence perturbation conservation", check_perturbation);
  guard(9, "room acoustics", check_room);
  guard(10, "metric oracles", check_metrics);
  guard(11, "end-to-end smoke", check_end_to_end);

  std::printf(failures ? "%d criteria FAILED\n" : "all criteria passed\n",
              failures);
  return failures ? 1 : 0;
}
