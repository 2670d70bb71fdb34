// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "egostream/common.hpp"
#include "egostream/metrics.hpp"
#include "egostream/room.hpp"
#include "egostream/runtime.hpp"
#include "egostream/synth.hpp"
#include "egostream/wav.hpp"
#include "egostream/weights.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace egostream;

namespace {

constexpr const char* kVersion = "0.1.0";

// Every invocation emits one of these next to its primary output.
// wall_seconds is the one field that varies between identical reruns.
class ManifestWriter {
 public:
  ManifestWriter(std::string command, uint64_t seed)
      : t0_(std::chrono::steady_clock::now()) {
    j["tool"] = "egostream";
    j["version"] = kVersion;
    j["command"] = std::move(command);
    j["seed"] = seed;
    j["config"] = ordered_json::object();
    j["inputs"] = ordered_json::object();
    j["outputs"] = ordered_json::object();
  }

  ordered_json j;

  void write(const fs::path& path) {
    j["wall_seconds"] = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0_)
                            .count();
    write_text_file(path.string(), j.dump(2) + "\n");
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

ordered_json parse_json_file(const std::string& path, const char* what) {
  const std::string text = read_text_file(path);
  try {
    return ordered_json::parse(text);
  } catch (const ordered_json::exception& e) {
    fail(std::string(what) + " malformed: " + e.what());
  }
}

std::string sample_dir_name(int i) {
  char b[32];
  std::snprintf(b, sizeof b, "sample_%04d", i);
  return b;
}

int target_pool_size(const std::string& policy) {
  if (policy == "2spk") return 2;
  if (policy == "3spk") return 3;
  if (policy == "4spk") return 4;
  if (policy == "5spk") return 5;
  if (policy == "leaving") return 3;
  if (policy == "passthrough") return 1;
  fail("unknown policy: " + policy +
       " (expected 2spk|3spk|4spk|5spk|leaving|passthrough)");
}

std::vector<std::string> default_pool(const std::string& prefix, int n,
                                      bool wearer_first) {
  std::vector<std::string> pool;
  if (wearer_first) pool.push_back("self");
  for (int i = 1; int(pool.size()) < n; ++i)
    pool.push_back(prefix + std::to_string(i));
  return pool;
}

// ---- synth ----------------------------------------------------------------

struct SynthOpts {
  std::string timestamps, clips, out;
  std::string policy = "2spk";
  std::vector<std::string> target_pool, interference_pool;
  int n = 1;
  uint64_t seed = 0;
  double duration = 60.0;
  double snr = 0.0;
  bool snr_set = false;
};

void cmd_synth(const SynthOpts& o) {
  ManifestWriter mw("synth", o.seed);
  mw.j["config"] = {{"policy", o.policy},
                    {"n", o.n},
                    {"duration", o.duration},
                    {"snr", o.snr_set ? ordered_json(o.snr) : ordered_json(nullptr)},
                    {"timestamps", o.timestamps},
                    {"clips", o.clips.empty() ? "synthetic" : o.clips}};

  // Turn skeletons: corpus timestamps when mounted, synthetic otherwise.
  std::map<std::string, std::vector<TurnSpan>> conversations;
  if (!o.timestamps.empty()) {
    for (const TimestampRow& r : read_timestamp_rows(o.timestamps))
      conversations[r.conversation].push_back({r.start, r.end});
    require(conversations.size() >= 2,
            "timestamps file must contain at least two conversations");
  }

  const int tpool_n = target_pool_size(o.policy);
  std::vector<std::string> tpool =
      o.target_pool.empty() ? default_pool("t", tpool_n, true) : o.target_pool;
  std::vector<std::string> ipool = o.interference_pool.empty()
                                       ? default_pool("i", 2, false)
                                       : o.interference_pool;
  require(int(tpool.size()) == tpool_n,
          "policy " + o.policy + " needs a target pool of " +
              std::to_string(tpool_n) + " speakers");

  fs::create_directories(o.out);
  ordered_json samples = ordered_json::array();
  for (int i = 0; i < o.n; ++i) {
    const uint64_t sseed = stage_seed(o.seed, "synth.sample", uint64_t(i));

    // A bad turn skeleton can make every speaker assignment infeasible;
    // retry with a fresh skeleton, deterministically.
    ConversationScript script;
    MixturePackage pkg;
    double snr = o.snr;
    for (int attempt = 0;; ++attempt) {
      try {
        std::vector<TurnSpan> tt, it;
        if (conversations.empty()) {
          tt = synthetic_turns(o.duration,
                               stage_seed(sseed, "turns.target", attempt));
          it = synthetic_turns(
              o.duration, stage_seed(sseed, "turns.interference", attempt));
        } else {
          Rng pick(stage_seed(sseed, "conversation.pick", attempt));
          std::vector<const std::vector<TurnSpan>*> groups;
          for (const auto& kv : conversations) groups.push_back(&kv.second);
          const size_t ti = size_t(pick.integer(groups.size()));
          size_t ii = size_t(pick.integer(groups.size() - 1));
          if (ii >= ti) ++ii;
          tt = *groups[ti];
          it = *groups[ii];
        }
        script = build_timeline(tt, it, o.policy, tpool, ipool,
                                stage_seed(sseed, "timeline", attempt));
        if (!o.snr_set)
          snr = Rng(stage_seed(sseed, "snr")).uniform(-10.0, 10.0);
        if (o.clips.empty()) {
          pkg = render_mixture(
              script, synthetic_clip_provider(stage_seed(sseed, "clips")), snr);
        } else {
          DirectoryClipProvider provider(o.clips, stage_seed(sseed, "clips"));
          pkg = render_mixture(script, std::ref(provider), snr);
        }
        break;
      } catch (const Error&) {
        if (attempt >= 19) throw;
      }
    }

    const std::string dir_name = sample_dir_name(i);
    const fs::path sdir = fs::path(o.out) / dir_name;
    fs::create_directories(sdir / "stems");
    write_wav((sdir / "mixture.wav").string(), pkg.mixture);
    write_text_file((sdir / "script.json").string(),
                    script_to_json(pkg.script));
    ordered_json stem_paths = ordered_json::object();
    for (const auto& kv : pkg.stems) {
      const std::string rel = "stems/" + kv.first + ".wav";
      write_wav((sdir / rel).string(), kv.second);
      stem_paths[kv.first] = rel;
    }

    ordered_json sj;
    sj["index"] = i;
    sj["seed"] = sseed;
    sj["policy"] = o.policy;
    sj["duration"] = o.duration;
    sj["snr_db"] = pkg.snr_db;
    sj["snr_defined"] = pkg.snr_defined;
    sj["spatialized"] = false;
    sj["script"] = "script.json";
    sj["mixture"] = "mixture.wav";
    sj["stems"] = stem_paths;
    sj["ground_truth"] = stem_paths;
    write_text_file((sdir / "sample.json").string(), sj.dump(2) + "\n");
    samples.push_back(dir_name + "/sample.json");
  }

  mw.j["outputs"]["samples"] = samples;
  mw.write(fs::path(o.out) / "manifest.json");
  std::cout << "wrote " << o.n << " sample(s) to " << o.out << "\n";
}

// ---- spatialize -----------------------------------------------------------

struct SpatializeOpts {
  std::string in, out;
  uint64_t seed = 0;
};

void cmd_spatialize(const SpatializeOpts& o) {
  ManifestWriter mw("spatialize", o.seed);
  mw.j["inputs"]["manifest"] = o.in;

  const ordered_json agg = parse_json_file(o.in, "input manifest");
  require(agg.contains("outputs") && agg["outputs"].contains("samples"),
          "input manifest lists no samples");
  const fs::path in_base = fs::path(o.in).parent_path();

  fs::create_directories(o.out);
  ordered_json samples = ordered_json::array();
  int index = 0;
  for (const auto& rel : agg["outputs"]["samples"]) {
    const fs::path sample_path = in_base / rel.get<std::string>();
    const ordered_json sj =
        parse_json_file(sample_path.string(), "sample manifest");
    require(!sj.at("spatialized").get<bool>(),
            "sample " + sample_path.string() + " is already spatialized");
    const fs::path base = sample_path.parent_path();

    MixturePackage pkg;
    pkg.script = script_from_json(
        read_text_file((base / sj.at("script").get<std::string>()).string()));
    pkg.mixture =
        read_wav((base / sj.at("mixture").get<std::string>()).string());
    for (const auto& kv : sj.at("ground_truth").items())
      pkg.stems[kv.key()] =
          read_wav((base / kv.value().get<std::string>()).string());
    pkg.snr_db = sj.at("snr_db").get<double>();
    pkg.snr_defined = sj.at("snr_defined").get<bool>();

    const SceneConfig scene =
        sample_scene(int(pkg.stems.size()), stage_seed(o.seed, "scene", index));
    const BinauralPackage bp = spatialize(pkg, scene);

    const std::string dir_name = sample_dir_name(index);
    const fs::path sdir = fs::path(o.out) / dir_name;
    fs::create_directories(sdir / "stems");
    fs::create_directories(sdir / "ground_truth");
    write_wav((sdir / "mixture.wav").string(), bp.mixture);
    write_text_file((sdir / "script.json").string(), script_to_json(bp.script));
    const std::string scene_json = scene_to_json(scene);
    write_text_file((sdir / "scene.json").string(), scene_json);
    ordered_json stem_paths = ordered_json::object();
    ordered_json truth_paths = ordered_json::object();
    for (const auto& kv : bp.binaural_stems) {
      const std::string rel = "stems/" + kv.first + ".wav";
      write_wav((sdir / rel).string(), kv.second);
      stem_paths[kv.first] = rel;
    }
    for (const auto& kv : bp.mono_stems) {
      const std::string rel = "ground_truth/" + kv.first + ".wav";
      write_wav((sdir / rel).string(), kv.second);
      truth_paths[kv.first] = rel;
    }

    ordered_json out_sj;
    out_sj["index"] = index;
    out_sj["seed"] = stage_seed(o.seed, "scene", index);
    out_sj["policy"] = sj.at("policy");
    out_sj["duration"] = sj.at("duration");
    out_sj["snr_db"] = bp.snr_db;
    out_sj["snr_defined"] = bp.snr_defined;
    out_sj["spatialized"] = true;
    out_sj["script"] = "script.json";
    out_sj["mixture"] = "mixture.wav";
    out_sj["stems"] = stem_paths;
    out_sj["ground_truth"] = truth_paths;
    out_sj["scene"] = ordered_json::parse(scene_json);
    write_text_file((sdir / "sample.json").string(), out_sj.dump(2) + "\n");
    samples.push_back(dir_name + "/sample.json");
    ++index;
  }

  mw.j["outputs"]["samples"] = samples;
  mw.write(fs::path(o.out) / "manifest.json");
  std::cout << "spatialized " << index << " sample(s) to " << o.out << "\n";
}

// ---- run ------------------------------------------------------------------

struct RunOpts {
  std::string input, weights_dir, out = "out.wav", report = "report.csv";
  std::string self_speech, manifest;
  double period = 1.0;
  uint64_t seed = 0;
  bool random_weights = false;
  bool sequential = false;
  bool no_beamformer = false;
};

PipelineWeights resolve_weights(const std::string& dir, bool random,
                                uint64_t seed) {
  if (random) return random_pipeline_weights(seed);
  require(!dir.empty(),
          "no weights: pass --weights-dir or --random-weights");
  return load_pipeline_weights(dir);
}

void cmd_run(const RunOpts& o) {
  ManifestWriter mw("run", o.seed);
  const PipelineWeights w =
      resolve_weights(o.weights_dir, o.random_weights, o.seed);
  const AudioBuffer input = read_wav(o.input);
  AudioBuffer self;
  PipelineConfig cfg;
  cfg.period_seconds = o.period;
  cfg.concurrent = !o.sequential;
  cfg.enable_beamformer = !o.no_beamformer;
  if (!o.self_speech.empty()) {
    self = read_wav(o.self_speech);
    cfg.self_speech = &self;
  }

  const auto [audio, rep] = process_stream(input, w, cfg);
  write_wav(o.out, audio);
  write_text_file(o.report, rep.csv());

  mw.j["config"] = {{"T", o.period},
                    {"concurrent", cfg.concurrent},
                    {"beamformer", cfg.enable_beamformer},
                    {"weights", o.random_weights
                                    ? "random:" + std::to_string(o.seed)
                                    : o.weights_dir}};
  mw.j["inputs"] = {{"input", o.input}, {"self_speech", o.self_speech}};
  mw.j["outputs"] = {{"audio", o.out}, {"report", o.report}};
  mw.j["summary"] = {{"fast_mean_us", rep.mean_us("fast")},
                     {"fast_p95_us", rep.p95_us("fast")},
                     {"realtime_factor", rep.realtime_factor()},
                     {"slow_mean_us", rep.mean_us("slow")},
                     {"beamformer_mean_us", rep.mean_us("beamformer")},
                     {"stale_embeddings", rep.stale_embeddings},
                     {"periods", rep.periods},
                     {"peak_rss_bytes", rep.peak_rss("fast")}};
  mw.write(o.manifest.empty() ? o.out + ".manifest.json" : o.manifest);
  std::printf("fast %.0f us/chunk (rtf %.3f), slow %.0f us/period, %ld stale\n",
              rep.mean_us("fast"), rep.realtime_factor(), rep.mean_us("slow"),
              rep.stale_embeddings);
}

// ---- eval -----------------------------------------------------------------

struct EvalOpts {
  std::string out, manifest, report;
};

void cmd_eval(const EvalOpts& o) {
  ManifestWriter mw("eval", 0);
  const ordered_json sj = parse_json_file(o.manifest, "sample manifest");
  const fs::path base = fs::path(o.manifest).parent_path();

  const ConversationScript script = script_from_json(
      read_text_file((base / sj.at("script").get<std::string>()).string()));
  const AudioBuffer mixture =
      read_wav((base / sj.at("mixture").get<std::string>()).string());
  const AudioBuffer output = read_wav(o.out);
  require(output.num_channels() == 1, "eval expects a mono processed track");
  require(output.frames() == mixture.frames(),
          "processed track length differs from the mixture");

  std::map<std::string, std::vector<float>> stems;
  for (const auto& kv : sj.at("ground_truth").items()) {
    AudioBuffer stem = read_wav((base / kv.value().get<std::string>()).string());
    require(stem.num_channels() == 1,
            "ground-truth stem " + kv.key() + " is not mono");
    stems[kv.key()] = std::move(stem.channels[0]);
  }

  const MetricReport rep =
      evaluate(output.channels[0], downmix(mixture), stems, script);
  ordered_json j = ordered_json::parse(metric_report_json(rep));
  j["turn_stats"] = ordered_json::object();
  if (!script.target.empty())
    j["turn_stats"]["target"] = ordered_json::parse(
        turn_stats_json(conversation_stats(spans_of(script.target))));
  if (!script.interference.empty())
    j["turn_stats"]["interference"] = ordered_json::parse(
        turn_stats_json(conversation_stats(spans_of(script.interference))));
  write_text_file(o.report, j.dump(2) + "\n");

  mw.j["inputs"] = {{"audio", o.out}, {"manifest", o.manifest}};
  mw.j["outputs"] = {{"report", o.report}};
  mw.j["summary"] = {{"sisdri", rep.sisdri},
                     {"accuracy", rep.accuracy},
                     {"confusion_rate", rep.confusion}};
  mw.write(o.report + ".manifest.json");
  std::printf("sisdri %.2f dB, acc %.1f%%, cr %.1f%%\n", rep.sisdri,
              100 * rep.accuracy, 100 * rep.confusion);
}

// ---- stats ----------------------------------------------------------------

struct StatsOpts {
  std::string script, report;
};

void cmd_stats(const StatsOpts& o) {
  const ConversationScript script =
      script_from_json(read_text_file(o.script));
  ordered_json j;
  if (!script.target.empty())
    j["target"] = ordered_json::parse(
        turn_stats_json(conversation_stats(spans_of(script.target))));
  if (!script.interference.empty())
    j["interference"] = ordered_json::parse(
        turn_stats_json(conversation_stats(spans_of(script.interference))));
  if (o.report.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    write_text_file(o.report, j.dump(2) + "\n");
    ManifestWriter mw("stats", 0);
    mw.j["inputs"]["script"] = o.script;
    mw.j["outputs"]["report"] = o.report;
    mw.write(o.report + ".manifest.json");
  }
}

// ---- bench ----------------------------------------------------------------

struct BenchOpts {
  std::string weights_dir, report = "bench.csv", cdf;
  double duration = 2.0;
  int repeats = 100;
  uint64_t seed = 0;
  bool random_weights = false;
  bool no_beamformer = false;
  double period = 1.0;
};

void cmd_bench(const BenchOpts& o) {
  ManifestWriter mw("bench", o.seed);
  const PipelineWeights w = resolve_weights(
      o.weights_dir, o.random_weights || o.weights_dir.empty(), o.seed);
  PipelineConfig cfg;
  cfg.period_seconds = o.period;
  cfg.enable_beamformer = !o.no_beamformer;

  const BenchReport b = bench_pipeline(w, o.duration, o.repeats, o.seed, cfg);
  write_text_file(o.report, b.csv());
  if (!o.cdf.empty()) write_text_file(o.cdf, b.cdf_csv());

  size_t rss = 0;
  for (size_t v : b.rss_bytes) rss = std::max(rss, v);
  mw.j["config"] = {{"duration", o.duration},
                    {"repeats", o.repeats},
                    {"T", o.period},
                    {"beamformer", cfg.enable_beamformer}};
  mw.j["outputs"] = {{"report", o.report}, {"cdf", o.cdf}};
  mw.j["summary"] = {{"fast_mean_us", b.mean(b.fast_us)},
                     {"fast_p95_us", b.p95(b.fast_us)},
                     {"realtime_factor", b.realtime_factor()},
                     {"slow_mean_us", b.mean(b.slow_us)},
                     {"beamformer_mean_us", b.mean(b.beamformer_us)},
                     {"peak_rss_bytes", rss}};
  mw.write(o.report + ".manifest.json");
  std::printf(
      "fast %.0f us/chunk mean, %.0f us p95 (rtf %.3f); slow %.0f us/period; "
      "peak rss %.1f MB\n",
      b.mean(b.fast_us), b.p95(b.fast_us), b.realtime_factor(),
      b.mean(b.slow_us), double(rss) / (1024.0 * 1024.0));
}

// ---- init-weights ---------------------------------------------------------

struct InitWeightsOpts {
  std::string out;
  uint64_t seed = 0;
};

void cmd_init_weights(const InitWeightsOpts& o) {
  ManifestWriter mw("init-weights", o.seed);
  const PipelineWeights w = random_pipeline_weights(o.seed);
  fs::create_directories(o.out);
  save_pipeline_weights(w, o.out);

  const size_t fast_n = count_parameters(w.fast);
  const size_t slow_n = count_parameters(w.slow);
  const size_t bf_n = count_parameters(w.beamformer);
  mw.j["outputs"] = {{"fast", "fast.egsw"},
                     {"slow", "slow.egsw"},
                     {"beamformer", "beamformer.egsw"}};
  mw.j["parameters"] = {
      {"fast", fast_n}, {"slow", slow_n}, {"beamformer", bf_n}};
  mw.write(fs::path(o.out) / "manifest.json");
  std::printf("parameters: fast %zu, slow %zu, beamformer %zu\n", fast_n,
              slow_n, bf_n);
}

// ---- flag suggestion ------------------------------------------------------

size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<size_t> row(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    size_t prev = row[0];
    row[0] = i;
    for (size_t j = 1; j <= b.size(); ++j) {
      const size_t cur = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1,
                         prev + (a[i - 1] == b[j - 1] ? 0 : 1)});
      prev = cur;
    }
  }
  return row[b.size()];
}

void suggest_unknown(const CLI::App& app, int argc, char** argv) {
  std::vector<std::string> names;
  auto collect = [&](const CLI::App* a) {
    for (const CLI::Option* opt : a->get_options())
      for (const std::string& n : opt->get_lnames()) names.push_back("--" + n);
  };
  collect(&app);
  for (const CLI::App* sub :
       app.get_subcommands([](const CLI::App*) { return true; }))
    collect(sub);

  for (int i = 1; i < argc; ++i) {
    std::string tok = argv[i];
    if (tok.rfind("--", 0) != 0) continue;
    const size_t eq = tok.find('=');
    if (eq != std::string::npos) tok = tok.substr(0, eq);
    if (std::find(names.begin(), names.end(), tok) != names.end()) continue;
    std::string best;
    size_t best_d = 4;
    for (const std::string& n : names) {
      const size_t d = edit_distance(tok, n);
      if (d < best_d) {
        best_d = d;
        best = n;
      }
    }
    if (!best.empty())
      std::cerr << "unknown flag " << tok << "; did you mean " << best
                << "?\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Egocentric conversation extraction toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  SynthOpts so;
  CLI::App* synth = app.add_subcommand(
      "synth", "Generate conversation mixtures from a policy");
  synth->add_option("--policy", so.policy,
                    "2spk|3spk|4spk|5spk|leaving|passthrough")
      ->capture_default_str();
  synth->add_option("--n", so.n, "How many samples")->capture_default_str();
  synth->add_option("--seed", so.seed, "Root seed")->capture_default_str();
  synth->add_option("--out", so.out, "Output directory")->required();
  synth->add_option("--timestamps", so.timestamps,
                    "JSONL turn timestamps; synthetic turns when omitted");
  synth->add_option("--clips", so.clips,
                    "Clip corpus root (root/<speaker>/*.wav); synthetic "
                    "clips when omitted");
  CLI::Option* snr_opt =
      synth->add_option("--snr", so.snr,
                        "Fixed SNR in dB; drawn U[-10,10] per sample when "
                        "omitted");
  synth->add_option("--duration", so.duration, "Script length in seconds")
      ->capture_default_str();
  synth->add_option("--target-pool", so.target_pool,
                    "Comma-separated target speakers (wearer first)")
      ->delimiter(',');
  synth->add_option("--interference-pool", so.interference_pool,
                    "Comma-separated interference speakers")
      ->delimiter(',');

  SpatializeOpts po;
  CLI::App* spat = app.add_subcommand(
      "spatialize", "Render synth output binaurally in sampled rooms");
  spat->add_option("--in", po.in, "Aggregate manifest from synth")->required();
  spat->add_option("--seed", po.seed, "Root seed")->capture_default_str();
  spat->add_option("--out", po.out, "Output directory")->required();

  RunOpts ro;
  CLI::App* run = app.add_subcommand(
      "run", "Stream a recording through the extraction pipeline");
  run->add_option("--input", ro.input, "Input WAV (mono or binaural)")
      ->required();
  run->add_option("--weights-dir", ro.weights_dir,
                  "Directory with {fast,slow,beamformer}.egsw");
  run->add_option("--T", ro.period, "Embedding period in seconds")
      ->capture_default_str();
  run->add_option("--out", ro.out, "Output WAV")->capture_default_str();
  run->add_option("--report", ro.report, "Per-chunk timing CSV")
      ->capture_default_str();
  run->add_option("--self-speech", ro.self_speech,
                  "Mono self-speech track (required for mono input)");
  run->add_option("--seed", ro.seed, "Seed for --random-weights")
      ->capture_default_str();
  run->add_flag("--random-weights", ro.random_weights,
                "Use seeded random weights instead of --weights-dir");
  run->add_flag("--sequential", ro.sequential,
                "Run the embedding model inline instead of on a worker");
  run->add_flag("--no-beamformer", ro.no_beamformer,
                "Disable self-speech extraction (needs --self-speech)");
  run->add_option("--manifest", ro.manifest,
                  "Run manifest path (default <out>.manifest.json)");

  EvalOpts eo;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Score a processed track against a sample");
  eval_cmd->add_option("--out", eo.out, "Processed mono WAV")->required();
  eval_cmd->add_option("--manifest", eo.manifest, "sample.json of the sample")
      ->required();
  eval_cmd->add_option("--report", eo.report, "Report JSON path")->required();

  StatsOpts to;
  CLI::App* stats =
      app.add_subcommand("stats", "Conversation statistics of a script");
  stats->add_option("--script", to.script, "Script JSON")->required();
  stats->add_option("--report", to.report,
                    "Write JSON here instead of stdout");

  BenchOpts bo;
  CLI::App* bench =
      app.add_subcommand("bench", "Profile the pipeline on random audio");
  bench->add_option("--duration", bo.duration, "Seconds per repeat")
      ->capture_default_str();
  bench->add_option("--repeats", bo.repeats, "Repeats")->capture_default_str();
  bench->add_option("--report", bo.report, "Timing CSV")
      ->capture_default_str();
  bench->add_option("--cdf", bo.cdf, "Also write a stage,fraction,wall_us CDF");
  bench->add_option("--weights-dir", bo.weights_dir,
                    "Weights directory (random weights when omitted)");
  bench->add_option("--seed", bo.seed, "Root seed")->capture_default_str();
  bench->add_flag("--random-weights", bo.random_weights,
                  "Force seeded random weights");
  bench->add_flag("--no-beamformer", bo.no_beamformer,
                  "Profile without the beamformer stage");
  bench->add_option("--T", bo.period, "Embedding period in seconds")
      ->capture_default_str();

  InitWeightsOpts io;
  CLI::App* initw = app.add_subcommand(
      "init-weights", "Write seeded random weight archives");
  initw->add_option("--out", io.out, "Output directory")->required();
  initw->add_option("--seed", io.seed, "Root seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    if (rc == 0) return 0;
    suggest_unknown(app, argc, argv);
    return 1;
  }

  so.snr_set = snr_opt->count() > 0;
  try {
    if (synth->parsed()) cmd_synth(so);
    if (spat->parsed()) cmd_spatialize(po);
    if (run->parsed()) cmd_run(ro);
    if (eval_cmd->parsed()) cmd_eval(eo);
    if (stats->parsed()) cmd_stats(to);
    if (bench->parsed()) cmd_bench(bo);
    if (initw->parsed()) cmd_init_weights(io);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
