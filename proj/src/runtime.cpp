// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#include "egostream/runtime.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <deque>
#include <exception>
#include <filesystem>
#include <memory>
#include <sstream>
#include <thread>

namespace egostream {

namespace {

using Clock = std::chrono::steady_clock;

double us_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::micro>(b - a).count();
}

size_t current_peak_rss() {
  rusage ru{};
  getrusage(RUSAGE_SELF, &ru);
  return size_t(ru.ru_maxrss) * 1024;  // ru_maxrss is in KiB on Linux
}

void append_csv_row(std::ostringstream& o, const std::string& stage,
                    long index, double wall_us, size_t rss) {
  o << stage << ',' << index << ',';
  o.setf(std::ios::fixed);
  o.precision(3);
  o << wall_us;
  o.unsetf(std::ios::fixed);
  o << ',' << rss << '\n';
}

}  // namespace

// ---------------------------------------------------------------------------
// Weight bundles

PipelineWeights random_pipeline_weights(uint64_t seed) {
  PipelineWeights w;
  w.fast_cfg = fast_model_config();
  w.slow_cfg = slow_model_config();
  w.beamformer_cfg = beamformer_model_config();
  w.fast = init_random_weights(w.fast_cfg, stage_seed(seed, "weights.fast"));
  w.slow = init_random_weights(w.slow_cfg, stage_seed(seed, "weights.slow"));
  w.beamformer = init_random_weights(w.beamformer_cfg,
                                     stage_seed(seed, "weights.beamformer"));
  return w;
}

void save_pipeline_weights(const PipelineWeights& w, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto one = [&](const ModelConfig& c, const WeightArchive& a) {
    save_weights_file(dir + "/" + c.name + ".egsw", a);
    write_text_file(dir + "/" + c.name + ".manifest", manifest_text(c));
  };
  one(w.fast_cfg, w.fast);
  one(w.slow_cfg, w.slow);
  one(w.beamformer_cfg, w.beamformer);
}

PipelineWeights load_pipeline_weights(const std::string& dir) {
  PipelineWeights w;
  auto one = [&](const std::string& name, ModelConfig& c, WeightArchive& a) {
    c = parse_manifest_text(read_text_file(dir + "/" + name + ".manifest"));
    require(c.name == name,
            "weights manifest names a different model: " + c.name);
    a = load_weights_file(dir + "/" + name + ".egsw");
  };
  one("fast", w.fast_cfg, w.fast);
  one("slow", w.slow_cfg, w.slow);
  one("beamformer", w.beamformer_cfg, w.beamformer);
  return w;
}

// ---------------------------------------------------------------------------
// Report

std::vector<double> RuntimeReport::stage_samples(
    const std::string& stage) const {
  std::vector<double> out;
  for (const auto& r : rows)
    if (r.stage == stage) out.push_back(r.wall_us);
  return out;
}

double RuntimeReport::mean_us(const std::string& stage) const {
  const auto v = stage_samples(stage);
  if (v.empty()) return 0.0;
  double s = 0;
  for (double x : v) s += x;
  return s / double(v.size());
}

double RuntimeReport::p95_us(const std::string& stage) const {
  auto v = stage_samples(stage);
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t idx = size_t(std::ceil(0.95 * double(v.size()))) - 1;
  return v[std::min(idx, v.size() - 1)];
}

size_t RuntimeReport::peak_rss(const std::string& stage) const {
  size_t m = 0;
  for (const auto& r : rows)
    if (r.stage == stage) m = std::max(m, r.peak_rss_bytes);
  return m;
}

std::string RuntimeReport::csv() const {
  std::ostringstream o;
  o << "stage,chunk_index,wall_us,peak_rss_bytes\n";
  for (const auto& r : rows)
    append_csv_row(o, r.stage, r.index, r.wall_us, r.peak_rss_bytes);
  return o.str();
}

// ---------------------------------------------------------------------------
// Mailbox

void EmbeddingMailbox::post(long period, Mat slice) {
  {
    std::lock_guard<std::mutex> lk(mu_);
    slots_[period] = std::move(slice);
  }
  cv_.notify_all();
}

Mat EmbeddingMailbox::wait(long period) {
  std::unique_lock<std::mutex> lk(mu_);
  cv_.wait(lk, [&] { return closed_ || slots_.count(period) > 0; });
  auto it = slots_.find(period);
  require(it != slots_.end(), "embedding worker stopped before period " +
                                  std::to_string(period));
  return it->second;
}

void EmbeddingMailbox::close() {
  {
    std::lock_guard<std::mutex> lk(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

struct SlowJob {
  long period = 0;
  std::vector<float> mixture;  // one period of the (padded) mono mixture
  std::vector<float> self;     // aligned self-speech, zero-filled tail
};

// Everything the embedding worker needs; the worker is the only user of the
// slow model, so its attention cache sees periods strictly in order.
struct SlowEngine {
  GridNetModel* model = nullptr;
  Framing framing;
  EmbeddingMailbox* mailbox = nullptr;
  double period_us = 0;
  std::atomic<long> stale{0};
  std::vector<StageRow> rows;

  void run(SlowJob&& job) {
    const auto t0 = Clock::now();
    AudioBuffer mix(1, job.mixture.size());
    mix.channels[0] = std::move(job.mixture);
    AudioBuffer self(1, job.self.size());
    self.channels[0] = std::move(job.self);
    const TFRep mt = stft_analyze(mix, framing);
    const TFRep st = stft_analyze(self, framing);
    Mat r = model->process_period(realify_pair(mt, st));
    mailbox->post(job.period, std::move(r));
    const double us = us_between(t0, Clock::now());
    if (us > period_us) stale.fetch_add(1);
    rows.push_back({"slow", job.period, us, current_peak_rss()});
  }
};

struct JobQueue {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<SlowJob> jobs;
  bool done = false;

  void push(SlowJob&& j) {
    {
      std::lock_guard<std::mutex> lk(mu);
      jobs.push_back(std::move(j));
    }
    cv.notify_all();
  }
  void finish() {
    {
      std::lock_guard<std::mutex> lk(mu);
      done = true;
    }
    cv.notify_all();
  }
  bool pop(SlowJob* out) {
    std::unique_lock<std::mutex> lk(mu);
    cv.wait(lk, [&] { return done || !jobs.empty(); });
    if (jobs.empty()) return false;
    *out = std::move(jobs.front());
    jobs.pop_front();
    return true;
  }
};

}  // namespace

std::pair<AudioBuffer, RuntimeReport> process_stream(
    const AudioBuffer& input, const PipelineWeights& w,
    const PipelineConfig& cfg) {
  input.validate();
  require(input.num_channels() == 1 || input.num_channels() == 2,
          "pipeline expects mono or binaural input");
  const bool binaural = input.num_channels() == 2;
  const bool use_bf = binaural && cfg.enable_beamformer;

  const Framing mf = w.fast_cfg.framing;
  require(w.slow_cfg.framing == mf,
          "fast and slow models must share one framing");
  const Framing bff = w.beamformer_cfg.framing;
  const int chunk = mf.chunk;
  const long N = long(input.frames());

  const double pc_exact = cfg.period_seconds * kSampleRate / chunk;
  const long pc = std::llround(pc_exact);  // chunks per period
  require(pc >= 1 && std::abs(pc_exact - double(pc)) < 1e-9,
          "embedding period must be a whole number of chunks");
  const long ps = pc * chunk;  // samples per period
  require(N >= ps, "input shorter than one embedding period");

  if (!use_bf) {
    require(cfg.self_speech != nullptr,
            binaural
                ? "beamformer disabled: a self-speech track is required"
                : "mono input carries no spatial cues: a self-speech track "
                  "is required");
    cfg.self_speech->validate();
    require(cfg.self_speech->num_channels() == 1,
            "self-speech track must be mono");
    require(long(cfg.self_speech->frames()) == N,
            "self-speech track length must match the input");
  }

  GridNetModel fast(w.fast_cfg, w.fast);
  GridNetModel slow(w.slow_cfg, w.slow);
  std::unique_ptr<GridNetModel> bf_model;
  if (use_bf)
    bf_model = std::make_unique<GridNetModel>(w.beamformer_cfg, w.beamformer);

  RuntimeReport report;
  report.tau_us = double(chunk) * 1e6 / kSampleRate;
  report.period_us = cfg.period_seconds * 1e6;

  const long M = (N + chunk - 1) / chunk;  // whole input chunks
  std::vector<float> mix = binaural ? downmix(input) : input.channels[0];
  mix.resize(size_t(M) * chunk, 0.0f);

  StreamingStft stft(mf, 1);
  StreamingIstft istft(mf, 1);
  const int bins = mf.freq_bins();
  const int d = w.fast_cfg.channels;

  // Beamformer state. self_raw is the synthesized self-speech stream,
  // delayed by the beamformer latency; the aligned sample i sits at
  // self_raw[latency + i].
  StreamingStft bf_stft(bff, 2);
  StreamingIstft bf_istft(bff, 1);
  const int bchunk = bff.chunk;
  const int bbins = bff.freq_bins();
  std::vector<float> bf_fifo_l, bf_fifo_r;
  std::vector<float> self_raw;
  long bf_calls = 0;

  EmbeddingMailbox mailbox;
  SlowEngine engine;
  engine.model = &slow;
  engine.framing = mf;
  engine.mailbox = &mailbox;
  engine.period_us = report.period_us;

  JobQueue queue;
  std::exception_ptr worker_error;
  std::thread worker;
  if (cfg.concurrent) {
    worker = std::thread([&] {
      try {
        SlowJob job;
        while (queue.pop(&job)) engine.run(std::move(job));
      } catch (...) {
        worker_error = std::current_exception();
      }
      mailbox.close();
    });
  }
  auto stop_worker = [&] {
    if (worker.joinable()) {
      queue.finish();
      worker.join();
    }
  };

  auto self_aligned = [&](long i) -> float {
    const size_t idx = size_t(i) + size_t(bff.latency());
    return idx < self_raw.size() ? self_raw[idx] : 0.0f;
  };

  auto post_period = [&](long q) {
    SlowJob job;
    job.period = q;
    job.mixture.assign(mix.begin() + q * ps, mix.begin() + (q + 1) * ps);
    job.self.resize(size_t(ps), 0.0f);
    if (use_bf) {
      for (long i = 0; i < ps; ++i) job.self[size_t(i)] = self_aligned(q * ps + i);
    } else {
      const auto& track = cfg.self_speech->channels[0];
      for (long i = 0; i < ps && q * ps + i < N; ++i)
        job.self[size_t(i)] = track[size_t(q * ps + i)];
    }
    if (cfg.concurrent)
      queue.push(std::move(job));
    else
      engine.run(std::move(job));
  };

  const long total_calls = M + 2;  // two zero chunks flush the latency
  std::vector<float> delayed;
  delayed.reserve(size_t(total_calls) * chunk);
  const size_t nb = size_t(bins), nbb = size_t(bbins);
  std::vector<float> chunk_buf(size_t(chunk), 0.0f);
  std::vector<std::complex<float>> frame(nb);
  std::vector<std::complex<float>> out_frame(nb);
  std::vector<float> out_chunk(size_t(chunk), 0.0f);
  std::vector<std::complex<float>> bf_frame(2 * nbb);
  std::vector<std::complex<float>> bf_out(nbb);
  std::vector<float> bf_chunk_out(size_t(bchunk), 0.0f);
  const Mat zero_embedding = Mat::Zero(d, bins);
  long embedding_period = -1;  // period whose slice is currently applied

  try {
    for (long k = 0; k < total_calls; ++k) {
      // Feed the beamformer everything this chunk makes available, so the
      // period boundary below sees all of its self-speech.
      if (use_bf) {
        const long base = k * chunk;
        for (int i = 0; i < chunk; ++i) {
          const long s = base + i;
          bf_fifo_l.push_back(s < N ? input.channels[0][size_t(s)] : 0.0f);
          bf_fifo_r.push_back(s < N ? input.channels[1][size_t(s)] : 0.0f);
        }
        size_t off = 0;
        while (bf_fifo_l.size() - off >= size_t(bchunk)) {
          const auto t0 = Clock::now();
          const float* in2[2] = {bf_fifo_l.data() + off,
                                 bf_fifo_r.data() + off};
          if (bf_stft.push(in2, bf_frame.data())) {
            Mat xin(4, bbins);
            for (int f = 0; f < bbins; ++f) {
              xin(0, f) = bf_frame[size_t(f)].real();
              xin(1, f) = bf_frame[size_t(f)].imag();
              xin(2, f) = bf_frame[size_t(bbins) + f].real();
              xin(3, f) = bf_frame[size_t(bbins) + f].imag();
            }
            const Mat y = bf_model->step_frame(xin);
            for (int f = 0; f < bbins; ++f)
              bf_out[size_t(f)] = {0.5f * (y(0, f) + y(2, f)),
                                   0.5f * (y(1, f) + y(3, f))};
            const std::complex<float>* fp[1] = {bf_out.data()};
            float* op[1] = {bf_chunk_out.data()};
            bf_istft.push_frame(fp, op);
            self_raw.insert(self_raw.end(), bf_chunk_out.begin(),
                            bf_chunk_out.end());
          } else {
            self_raw.insert(self_raw.end(), size_t(bchunk), 0.0f);
          }
          off += size_t(bchunk);
          report.rows.push_back({"beamformer", bf_calls++,
                                 us_between(t0, Clock::now()),
                                 current_peak_rss()});
        }
        bf_fifo_l.erase(bf_fifo_l.begin(), bf_fifo_l.begin() + long(off));
        bf_fifo_r.erase(bf_fifo_r.begin(), bf_fifo_r.begin() + long(off));
      }

      // A period completes when its last chunk has been consumed; its
      // embedding conditions the frames of the next period onward.
      if (k < M && (k + 1) % pc == 0) post_period((k + 1) / pc - 1);

      const auto t0 = Clock::now();
      if (k < M) {
        std::memcpy(chunk_buf.data(), mix.data() + size_t(k) * chunk,
                    size_t(chunk) * sizeof(float));
      } else {
        std::fill(chunk_buf.begin(), chunk_buf.end(), 0.0f);
      }
      const float* cp[1] = {chunk_buf.data()};
      if (stft.push(cp, frame.data())) {
        const long j = k - 1;
        const long p = j / pc;
        if (p != embedding_period) {
          if (p == 0) {
            fast.set_embedding(zero_embedding);
          } else {
            const auto w0 = Clock::now();
            fast.set_embedding(mailbox.wait(p - 1));
            report.embedding_wait_us += us_between(w0, Clock::now());
          }
          embedding_period = p;
        }
        Mat xin(2, bins);
        for (int f = 0; f < bins; ++f) {
          xin(0, f) = frame[size_t(f)].real();
          xin(1, f) = frame[size_t(f)].imag();
        }
        const Mat y = fast.step_frame(xin);
        for (int f = 0; f < bins; ++f) out_frame[size_t(f)] = {y(0, f), y(1, f)};
        const std::complex<float>* fp[1] = {out_frame.data()};
        float* op[1] = {out_chunk.data()};
        istft.push_frame(fp, op);
        delayed.insert(delayed.end(), out_chunk.begin(), out_chunk.end());
      } else {
        delayed.insert(delayed.end(), size_t(chunk), 0.0f);
      }
      report.rows.push_back(
          {"fast", k, us_between(t0, Clock::now()), current_peak_rss()});
    }
  } catch (...) {
    stop_worker();
    if (worker_error) std::rethrow_exception(worker_error);
    throw;
  }
  stop_worker();
  if (worker_error) std::rethrow_exception(worker_error);

  report.rows.insert(report.rows.end(), engine.rows.begin(),
                     engine.rows.end());
  report.stale_embeddings = engine.stale.load();
  report.periods = M / pc;

  AudioBuffer out(1, size_t(N));
  const long head = mf.latency();
  for (long i = 0; i < N; ++i)
    out.channels[0][size_t(i)] = delayed[size_t(head + i)];
  return {std::move(out), std::move(report)};
}

// ---------------------------------------------------------------------------
// Bench

double BenchReport::mean(const std::vector<double>& v) const {
  if (v.empty()) return 0.0;
  double s = 0;
  for (double x : v) s += x;
  return s / double(v.size());
}

double BenchReport::p95(std::vector<double> v) const {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t idx = size_t(std::ceil(0.95 * double(v.size()))) - 1;
  return v[std::min(idx, v.size() - 1)];
}

std::string BenchReport::csv() const {
  std::ostringstream o;
  o << "stage,chunk_index,wall_us,peak_rss_bytes\n";
  auto stage = [&](const std::string& name, const std::vector<double>& v) {
    for (size_t i = 0; i < v.size(); ++i)
      append_csv_row(o, name, long(i), v[i],
                     i < rss_bytes.size() ? rss_bytes[i] : 0);
  };
  stage("fast", fast_us);
  stage("beamformer", beamformer_us);
  stage("slow", slow_us);
  return o.str();
}

std::string BenchReport::cdf_csv() const {
  std::ostringstream o;
  o << "stage,fraction,wall_us\n";
  auto stage = [&](const std::string& name, std::vector<double> v) {
    std::sort(v.begin(), v.end());
    for (size_t i = 0; i < v.size(); ++i) {
      o << name << ',';
      o.setf(std::ios::fixed);
      o.precision(6);
      o << double(i + 1) / double(v.size());
      o.precision(3);
      o << ',' << v[i] << '\n';
      o.unsetf(std::ios::fixed);
    }
  };
  stage("fast", fast_us);
  stage("beamformer", beamformer_us);
  stage("slow", slow_us);
  return o.str();
}

BenchReport bench_pipeline(const PipelineWeights& w, double duration_s,
                           int repeats, uint64_t seed,
                           const PipelineConfig& cfg) {
  require(repeats >= 1, "bench needs at least one repeat");
  require(duration_s >= cfg.period_seconds,
          "bench duration shorter than one embedding period");
  BenchReport r;
  r.duration_seconds = duration_s;
  r.tau_us = double(w.fast_cfg.framing.chunk) * 1e6 / kSampleRate;
  const size_t frames = size_t(std::llround(duration_s * kSampleRate));
  const bool needs_track = !cfg.enable_beamformer;
  for (int rep = 0; rep < repeats; ++rep) {
    Rng rng(stage_seed(seed, "bench.repeat", uint64_t(rep)));
    AudioBuffer in(2, frames);
    for (auto& ch : in.channels)
      for (auto& v : ch) v = float(rng.uniform(-0.5, 0.5));
    AudioBuffer track;
    PipelineConfig run_cfg = cfg;
    if (needs_track && run_cfg.self_speech == nullptr) {
      track = AudioBuffer(1, frames);
      for (auto& v : track.channels[0]) v = float(rng.uniform(-0.5, 0.5));
      run_cfg.self_speech = &track;
    }
    auto [out, rep_report] = process_stream(in, w, run_cfg);
    (void)out;
    r.fast_us.push_back(rep_report.mean_us("fast"));
    r.slow_us.push_back(rep_report.mean_us("slow"));
    r.beamformer_us.push_back(rep_report.mean_us("beamformer"));
    size_t rss = 0;
    for (const auto& row : rep_report.rows)
      rss = std::max(rss, row.peak_rss_bytes);
    r.rss_bytes.push_back(rss);
  }
  return r;
}

}  // namespace egostream
