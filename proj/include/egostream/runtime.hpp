// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

#include <condition_variable>
#include <map>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "egostream/models.hpp"

namespace egostream {

// The three networks with their structural descriptions, as loaded from a
// weights directory ({fast,slow,beamformer}.egsw plus .manifest each).
struct PipelineWeights {
  ModelConfig fast_cfg, slow_cfg, beamformer_cfg;
  WeightArchive fast, slow, beamformer;
};

PipelineWeights random_pipeline_weights(uint64_t seed);
PipelineWeights load_pipeline_weights(const std::string& dir);
void save_pipeline_weights(const PipelineWeights& w, const std::string& dir);

struct PipelineConfig {
  // Embedding period in seconds; must be a whole number of 12.5 ms chunks.
  double period_seconds = 1.0;
  // Streaming self-speech extraction from the binaural input. Forced off for
  // mono input; when off, self_speech must supply the track instead.
  bool enable_beamformer = true;
  // Run the embedding network on its own thread. The rendezvous makes the
  // output identical either way; false keeps everything on one thread.
  bool concurrent = true;
  // Substitute self-speech track (mono, same length) when the beamformer is
  // not producing one.
  const AudioBuffer* self_speech = nullptr;
};

struct StageRow {
  std::string stage;  // "fast" | "beamformer" | "slow"
  long index;         // chunk index for fast/beamformer, period for slow
  double wall_us;
  size_t peak_rss_bytes;
};

struct RuntimeReport {
  std::vector<StageRow> rows;
  double tau_us = 12500.0;
  double period_us = 1e6;
  // Periods whose embedding computation exceeded the period length, i.e.
  // where a live deployment would have consumed a stale embedding.
  long stale_embeddings = 0;
  long periods = 0;
  // Time the fast thread spent blocked on the embedding rendezvous.
  double embedding_wait_us = 0.0;

  std::vector<double> stage_samples(const std::string& stage) const;
  double mean_us(const std::string& stage) const;
  double p95_us(const std::string& stage) const;
  size_t peak_rss(const std::string& stage) const;
  double realtime_factor() const { return mean_us("fast") / tau_us; }
  std::string csv() const;  // stage,chunk_index,wall_us,peak_rss_bytes
};

// Hands each period's embedding slice from the worker to the fast path.
// Posting and waiting are keyed by period index, so scheduling order cannot
// change which slice a frame consumes.
class EmbeddingMailbox {
 public:
  void post(long period, Mat slice);
  // Blocks until post(period); throws if the mailbox closed without it.
  Mat wait(long period);
  void close();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<long, Mat> slots_;
  bool closed_ = false;
};

// Streams a 16 kHz mixture (mono or binaural) through the full pipeline:
// beamformer self-speech extraction, per-period conversation embeddings, and
// the embedding-conditioned fast extractor. Returns the extracted partner
// track, aligned with the input and trimmed to its length, plus timing.
// The output is a pure function of (input, weights, config): thread
// scheduling never changes it.
std::pair<AudioBuffer, RuntimeReport> process_stream(
    const AudioBuffer& input, const PipelineWeights& weights,
    const PipelineConfig& config = {});

struct BenchReport {
  // One aggregated sample per stage per repeat: the mean wall time of that
  // stage's steps over one full run of `duration` seconds of random audio.
  std::vector<double> fast_us, slow_us, beamformer_us;
  std::vector<size_t> rss_bytes;
  double tau_us = 12500.0;
  double duration_seconds = 0.0;

  double mean(const std::vector<double>& v) const;
  double p95(std::vector<double> v) const;
  double realtime_factor() const { return mean(fast_us) / tau_us; }
  std::string csv() const;      // stage,chunk_index,wall_us,peak_rss_bytes
  std::string cdf_csv() const;  // stage,fraction,wall_us
};

BenchReport bench_pipeline(const PipelineWeights& weights, double duration_s,
                           int repeats, uint64_t seed,
                           const PipelineConfig& config = {});

}  // namespace egostream
