// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Python face of the toolkit. Thin by design: numpy buffers in, numpy
// buffers or JSON strings out, no state beyond the weights handle.
#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <complex>
#include <cstring>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "egostream/metrics.hpp"
#include "egostream/room.hpp"
#include "egostream/runtime.hpp"
#include "egostream/stft.hpp"
#include "egostream/synth.hpp"
#include "egostream/wav.hpp"

namespace py = pybind11;
using namespace egostream;

namespace {

// 1-D arrays are mono; 2-D arrays are [channels, samples].
AudioBuffer buffer_from_array(const py::array_t<float>& a) {
  const auto info = a.request();
  require(info.ndim == 1 || info.ndim == 2,
          "audio array must be 1-D or [channels, samples]");
  const py::array_t<float, py::array::c_style | py::array::forcecast> c(a);
  const auto ci = c.request();
  AudioBuffer out;
  if (ci.ndim == 1) {
    out.channels.resize(1);
    out.channels[0].assign(c.data(), c.data() + ci.shape[0]);
  } else {
    require(ci.shape[0] >= 1 && ci.shape[0] <= 2,
            "audio arrays carry one or two channels");
    out.channels.resize(size_t(ci.shape[0]));
    for (py::ssize_t ch = 0; ch < ci.shape[0]; ++ch)
      out.channels[size_t(ch)].assign(c.data() + ch * ci.shape[1],
                                      c.data() + (ch + 1) * ci.shape[1]);
  }
  return out;
}

py::array_t<float> array_from_buffer(const AudioBuffer& b) {
  if (b.num_channels() == 1) {
    py::array_t<float> a(py::ssize_t(b.frames()));
    std::memcpy(a.mutable_data(), b.channels[0].data(),
                b.frames() * sizeof(float));
    return a;
  }
  py::array_t<float> a({py::ssize_t(b.num_channels()), py::ssize_t(b.frames())});
  for (int ch = 0; ch < b.num_channels(); ++ch)
    std::memcpy(a.mutable_data(ch, 0), b.channels[size_t(ch)].data(),
                b.frames() * sizeof(float));
  return a;
}

std::vector<float> mono_from_array(const py::array_t<float>& a,
                                   const char* what) {
  const AudioBuffer b = buffer_from_array(a);
  require(b.num_channels() == 1, std::string(what) + " must be mono");
  return b.channels[0];
}

Framing framing_from(int chunk, int lookback, int lookahead) {
  Framing f{chunk, lookback, lookahead};
  f.validate();
  return f;
}

py::array_t<std::complex<float>> py_stft(const py::array_t<float>& x,
                                         int chunk, int lookback,
                                         int lookahead) {
  const TFRep tf =
      stft_analyze(buffer_from_array(x), framing_from(chunk, lookback, lookahead));
  py::array_t<std::complex<float>> out(
      {py::ssize_t(tf.channels), py::ssize_t(tf.bins), py::ssize_t(tf.steps)});
  std::memcpy(out.mutable_data(), tf.data.data(),
              tf.data.size() * sizeof(std::complex<float>));
  return out;
}

py::array_t<float> py_istft(const py::array_t<std::complex<float>>& spec,
                            long samples, int chunk, int lookback,
                            int lookahead) {
  const py::array_t<std::complex<float>,
                    py::array::c_style | py::array::forcecast>
      c(spec);
  const auto info = c.request();
  require(info.ndim == 3, "spectrogram must be [channels, bins, steps]");
  const Framing f = framing_from(chunk, lookback, lookahead);
  require(info.shape[1] == f.freq_bins(),
          "spectrogram bin count does not match the framing");
  TFRep tf(f, int(info.shape[0]), int(info.shape[2]), samples);
  std::memcpy(tf.data.data(), c.data(),
              tf.data.size() * sizeof(std::complex<float>));
  return array_from_buffer(istft_synthesize(tf));
}

std::map<std::string, py::object> report_summary(const RuntimeReport& rep) {
  std::map<std::string, py::object> s;
  s["fast_mean_us"] = py::float_(rep.mean_us("fast"));
  s["fast_p95_us"] = py::float_(rep.p95_us("fast"));
  s["slow_mean_us"] = py::float_(rep.mean_us("slow"));
  s["beamformer_mean_us"] = py::float_(rep.mean_us("beamformer"));
  s["realtime_factor"] = py::float_(rep.realtime_factor());
  s["stale_embeddings"] = py::int_(rep.stale_embeddings);
  s["periods"] = py::int_(rep.periods);
  return s;
}

py::tuple py_process(const py::array_t<float>& audio, const PipelineWeights& w,
                     double period, bool concurrent, bool beamformer,
                     const std::optional<py::array_t<float>>& self_speech) {
  const AudioBuffer input = buffer_from_array(audio);
  PipelineConfig cfg;
  cfg.period_seconds = period;
  cfg.concurrent = concurrent;
  cfg.enable_beamformer = beamformer;
  AudioBuffer self;
  if (self_speech) {
    self = buffer_from_array(*self_speech);
    require(self.num_channels() == 1, "self_speech must be mono");
    cfg.self_speech = &self;
  }
  auto [out, rep] = process_stream(input, w, cfg);
  return py::make_tuple(array_from_buffer(out), report_summary(rep));
}

// The CLI's default speaker-naming convention, mirrored so scripted and
// python-driven synthesis agree for the same seed.
int target_pool_size(const std::string& policy) {
  if (policy == "2spk") return 2;
  if (policy == "3spk") return 3;
  if (policy == "4spk") return 4;
  if (policy == "5spk") return 5;
  if (policy == "leaving") return 3;
  if (policy == "passthrough") return 1;
  fail("unknown policy: " + policy);
}

std::vector<std::string> default_pool(const std::string& prefix, int n,
                                      bool wearer_first) {
  std::vector<std::string> pool;
  for (int i = 0; i < n; ++i) {
    if (wearer_first && i == 0)
      pool.push_back("self");
    else
      pool.push_back(prefix + std::to_string(wearer_first ? i : i + 1));
  }
  return pool;
}

py::dict py_synthesize(const std::string& policy, uint64_t seed,
                       double duration, const std::optional<double>& snr_db) {
  const uint64_t sseed = stage_seed(seed, "synth.sample", 0);
  const std::vector<std::string> tpool =
      default_pool("t", target_pool_size(policy), true);
  const std::vector<std::string> ipool = default_pool("i", 2, false);

  ConversationScript script;
  MixturePackage pkg;
  for (int attempt = 0;; ++attempt) {
    try {
      const auto tt =
          synthetic_turns(duration, stage_seed(sseed, "turns.target", attempt));
      const auto it = synthetic_turns(
          duration, stage_seed(sseed, "turns.interference", attempt));
      script = build_timeline(tt, it, policy, tpool, ipool,
                              stage_seed(sseed, "timeline", attempt));
      const double snr =
          snr_db ? *snr_db
                 : Rng(stage_seed(sseed, "snr")).uniform(-10.0, 10.0);
      pkg = render_mixture(script,
                           synthetic_clip_provider(stage_seed(sseed, "clips")),
                           snr);
      break;
    } catch (const Error&) {
      if (attempt >= 19) throw;
    }
  }

  py::dict stems;
  for (const auto& kv : pkg.stems)
    stems[py::str(kv.first)] = array_from_buffer(kv.second);
  py::dict out;
  out["mixture"] = array_from_buffer(pkg.mixture);
  out["stems"] = stems;
  out["script"] = script_to_json(pkg.script);
  out["snr_db"] = pkg.snr_db;
  out["snr_defined"] = pkg.snr_defined;
  return out;
}

py::dict py_spatialize(const std::string& script_json, const py::dict& stems,
                       uint64_t seed) {
  MixturePackage pkg;
  pkg.script = script_from_json(script_json);
  size_t frames = 0;
  for (const auto& item : stems) {
    const std::string name = py::cast<std::string>(item.first);
    pkg.stems[name] = AudioBuffer();
    pkg.stems[name].channels.push_back(
        mono_from_array(py::cast<py::array_t<float>>(item.second),
                        ("stem " + name).c_str()));
    frames = std::max(frames, pkg.stems[name].frames());
  }
  pkg.mixture = AudioBuffer(1, frames);
  for (const auto& kv : pkg.stems)
    for (size_t i = 0; i < kv.second.frames(); ++i)
      pkg.mixture.channels[0][i] += kv.second.channels[0][i];

  const SceneConfig scene =
      sample_scene(int(pkg.stems.size()), stage_seed(seed, "scene", 0));
  const BinauralPackage b = spatialize(pkg, scene);

  py::dict bstems;
  for (const auto& kv : b.binaural_stems)
    bstems[py::str(kv.first)] = array_from_buffer(kv.second);
  py::dict out;
  out["mixture"] = array_from_buffer(b.mixture);
  out["stems"] = bstems;
  out["scene"] = scene_to_json(scene);
  return out;
}

std::string py_evaluate(const py::array_t<float>& output,
                        const py::array_t<float>& mixture,
                        const py::dict& stems,
                        const std::string& script_json) {
  std::map<std::string, std::vector<float>> stem_map;
  for (const auto& item : stems)
    stem_map[py::cast<std::string>(item.first)] = mono_from_array(
        py::cast<py::array_t<float>>(item.second), "ground-truth stem");
  const MetricReport rep =
      evaluate(mono_from_array(output, "output"),
               downmix(buffer_from_array(mixture)), stem_map,
               script_from_json(script_json));
  return metric_report_json(rep);
}

py::dict framing_dict(const Framing& f) {
  py::dict d;
  d["chunk"] = f.chunk;
  d["lookback"] = f.lookback;
  d["lookahead"] = f.lookahead;
  d["window"] = f.window();
  d["freq_bins"] = f.freq_bins();
  d["latency"] = f.latency();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Streaming conversational target-speech extraction";
  m.attr("__version__") = "0.1.0";
  m.attr("SAMPLE_RATE") = kSampleRate;

  py::register_exception<Error>(m, "EgostreamError", PyExc_ValueError);

  py::class_<PipelineWeights>(m, "Weights",
                              "The three model archives as one handle")
      .def_static("random", &random_pipeline_weights, py::arg("seed"),
                  "Seeded random initialization of all three models")
      .def_static("load", &load_pipeline_weights, py::arg("directory"))
      .def("save",
           [](const PipelineWeights& w, const std::string& dir) {
             save_pipeline_weights(w, dir);
           },
           py::arg("directory"))
      .def_property_readonly("parameters", [](const PipelineWeights& w) {
        py::dict d;
        d["fast"] = count_parameters(w.fast);
        d["slow"] = count_parameters(w.slow);
        d["beamformer"] = count_parameters(w.beamformer);
        return d;
      });

  m.def("read_wav", [](const std::string& p) {
    return array_from_buffer(read_wav(p));
  }, py::arg("path"));
  m.def("write_wav", [](const std::string& p, const py::array_t<float>& a,
                        bool pcm16) {
    write_wav(p, buffer_from_array(a), pcm16);
  }, py::arg("path"), py::arg("audio"), py::arg("pcm16") = false);

  m.def("main_framing", [] { return framing_dict(main_framing()); });
  m.def("beamformer_framing", [] { return framing_dict(beamformer_framing()); });

  m.def("stft", &py_stft, py::arg("audio"), py::arg("chunk") = 200,
        py::arg("lookback") = 32, py::arg("lookahead") = 32,
        "Dual-window STFT; returns [channels, bins, steps] complex64");
  m.def("istft", &py_istft, py::arg("spec"), py::arg("samples"),
        py::arg("chunk") = 200, py::arg("lookback") = 32,
        py::arg("lookahead") = 32,
        "Inverse of stft, trimmed to `samples`");

  m.def("process", &py_process, py::arg("audio"), py::arg("weights"),
        py::arg("period") = 1.0, py::arg("concurrent") = true,
        py::arg("beamformer") = true, py::arg("self_speech") = py::none(),
        "Stream a mixture through the pipeline; returns (audio, summary)");

  m.def("synthesize", &py_synthesize, py::arg("policy") = "2spk",
        py::arg("seed") = 0, py::arg("duration") = 60.0,
        py::arg("snr_db") = py::none(),
        "One synthetic conversation sample as numpy buffers");
  m.def("spatialize", &py_spatialize, py::arg("script"), py::arg("stems"),
        py::arg("seed") = 0,
        "Binaural render of mono stems in a sampled room");
  m.def("perturb_silences", [](const std::string& script_json, double sd,
                               uint64_t seed) {
    return script_to_json(
        perturb_silences(script_from_json(script_json), sd, seed));
  }, py::arg("script"), py::arg("sd_seconds"), py::arg("seed") = 0);

  m.def("evaluate", &py_evaluate, py::arg("output"), py::arg("mixture"),
        py::arg("stems"), py::arg("script"),
        "Score a processed track; returns the report as JSON");
  m.def("turn_stats", [](const std::string& script_json) {
    const ConversationScript s = script_from_json(script_json);
    return turn_stats_json(conversation_stats(spans_of(s.target)));
  }, py::arg("script"), "Turn statistics of the target conversation (JSON)");

  m.def("si_sdr", [](const py::array_t<float>& est,
                     const py::array_t<float>& ref) {
    return si_sdr(mono_from_array(est, "estimate"),
                  mono_from_array(ref, "reference"));
  }, py::arg("estimate"), py::arg("reference"));
  m.def("sisdr_improvement", [](const py::array_t<float>& out,
                                const py::array_t<float>& mix,
                                const py::array_t<float>& ref) {
    return sisdr_improvement(mono_from_array(out, "output"),
                             mono_from_array(mix, "mixture"),
                             mono_from_array(ref, "reference"));
  }, py::arg("output"), py::arg("mixture"), py::arg("reference"));
  m.def("neg_snr_loss", [](const py::array_t<float>& est,
                           const py::array_t<float>& ref) {
    return neg_snr_loss(mono_from_array(est, "estimate"),
                        mono_from_array(ref, "reference"));
  }, py::arg("estimate"), py::arg("reference"));
  m.def("multires_stft_loss", [](const py::array_t<float>& est,
                                 const py::array_t<float>& ref,
                                 bool include_l1) {
    return multires_stft_loss(mono_from_array(est, "estimate"),
                              mono_from_array(ref, "reference"), include_l1);
  }, py::arg("estimate"), py::arg("reference"), py::arg("include_l1") = true);
}
