// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#include "egostream/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "egostream/common.hpp"
#include "egostream/fft.hpp"
#include "json.hpp"

namespace egostream {
namespace {

using ordered_json = nlohmann::ordered_json;

double clamp_db(double v) { return std::clamp(v, -60.0, 60.0); }

double dot(const std::vector<float>& a, const std::vector<float>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += double(a[i]) * double(b[i]);
  return s;
}

std::vector<float> slice(const std::vector<float>& x, size_t lo, size_t hi) {
  return std::vector<float>(x.begin() + long(lo), x.begin() + long(hi));
}

double power(const std::vector<float>& x, size_t lo, size_t hi) {
  double s = 0;
  for (size_t i = lo; i < hi; ++i) s += double(x[i]) * double(x[i]);
  return s;
}

// Magnitude spectrogram for the loss: Hann window zero-padded to the FFT
// size, frames from sample 0, no centering.
std::vector<std::vector<double>> loss_spectrogram(const std::vector<float>& x,
                                                  int fft, int hop, int win) {
  std::vector<double> window(win);
  for (int i = 0; i < win; ++i)
    window[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / win));

  RealFft64 plan(fft);
  const int bins = plan.bins();
  std::vector<double> frame(fft, 0.0);
  std::vector<std::complex<double>> spec(bins);

  std::vector<std::vector<double>> mags;
  for (size_t start = 0; start + size_t(win) <= x.size();
       start += size_t(hop)) {
    std::fill(frame.begin(), frame.end(), 0.0);
    for (int i = 0; i < win; ++i) frame[i] = double(x[start + i]) * window[i];
    plan.forward(frame.data(), spec.data());
    std::vector<double> mag(bins);
    for (int b = 0; b < bins; ++b) mag[b] = std::abs(spec[b]);
    mags.push_back(std::move(mag));
  }
  return mags;
}

struct SpanIndex {
  size_t lo, hi;
};

SpanIndex span_samples(const SpeechSpan& s, size_t len) {
  require(s.end > s.start, "turn " + s.speaker + " has non-positive length");
  const long lo = std::llround(s.start * kSampleRate);
  const long hi = std::llround(s.end * kSampleRate);
  require(lo >= 0 && size_t(hi) <= len && lo < hi,
          "turn lies outside the audio span");
  return {size_t(lo), size_t(hi)};
}

}  // namespace

double si_sdr(const std::vector<float>& estimate,
              const std::vector<float>& reference) {
  require(estimate.size() == reference.size(),
          "si-sdr needs equal-length signals");
  require(!reference.empty(), "si-sdr needs a non-empty reference");
  const double ref2 = dot(reference, reference);
  require(ref2 > 0, "si-sdr reference is silent: undefined");
  const double alpha = dot(estimate, reference) / ref2;
  const double target2 = alpha * alpha * ref2;
  double resid2 = 0;
  for (size_t i = 0; i < estimate.size(); ++i) {
    const double r = double(estimate[i]) - alpha * double(reference[i]);
    resid2 += r * r;
  }
  if (resid2 == 0) return 60.0;
  if (target2 == 0) return -60.0;
  return clamp_db(10.0 * std::log10(target2 / resid2));
}

double sisdr_improvement(const std::vector<float>& output,
                         const std::vector<float>& mixture,
                         const std::vector<float>& reference) {
  return si_sdr(output, reference) - si_sdr(mixture, reference);
}

double neg_snr_loss(const std::vector<float>& estimate,
                    const std::vector<float>& reference) {
  require(estimate.size() == reference.size(),
          "snr loss needs equal-length signals");
  const double ref2 = dot(reference, reference);
  double resid2 = 0;
  for (size_t i = 0; i < estimate.size(); ++i) {
    const double r = double(reference[i]) - double(estimate[i]);
    resid2 += r * r;
  }
  if (resid2 == 0) return -60.0;
  if (ref2 == 0) return 60.0;
  return clamp_db(-10.0 * std::log10(ref2 / resid2));
}

double multires_stft_loss(const std::vector<float>& estimate,
                          const std::vector<float>& reference,
                          bool include_l1) {
  require(estimate.size() == reference.size(),
          "spectral loss needs equal-length signals");
  static constexpr int kFft[3] = {1024, 2048, 512};
  static constexpr int kHop[3] = {120, 240, 50};
  static constexpr int kWin[3] = {600, 1200, 240};

  double total = 0;
  for (int r = 0; r < 3; ++r) {
    require(reference.size() >= size_t(kWin[r]),
            "spectral loss needs at least " + std::to_string(kWin[r]) +
                " samples");
    const auto sr = loss_spectrogram(reference, kFft[r], kHop[r], kWin[r]);
    const auto se = loss_spectrogram(estimate, kFft[r], kHop[r], kWin[r]);
    double diff_fro = 0, ref_fro = 0, l_log = 0, l_lin = 0;
    size_t n = 0;
    for (size_t t = 0; t < sr.size(); ++t)
      for (size_t b = 0; b < sr[t].size(); ++b) {
        const double mr = sr[t][b], me = se[t][b];
        diff_fro += (mr - me) * (mr - me);
        ref_fro += mr * mr;
        l_log += std::abs(std::log(std::max(mr, 1e-8)) -
                          std::log(std::max(me, 1e-8)));
        l_lin += std::abs(mr - me);
        ++n;
      }
    const double sc = std::sqrt(diff_fro) / std::max(std::sqrt(ref_fro), 1e-12);
    total += sc + l_log / double(n) + 4.0 * l_lin / double(n);
  }
  total /= 3.0;

  if (include_l1) {
    double l1 = 0;
    for (size_t i = 0; i < estimate.size(); ++i)
      l1 += std::abs(double(reference[i]) - double(estimate[i]));
    total += 10.0 * l1 / double(estimate.size());
  }
  return total;
}

std::vector<SpeechSpan> spans_of(const std::vector<Utterance>& turns) {
  std::vector<SpeechSpan> out;
  for (const Utterance& u : turns) out.push_back({u.speaker, u.start, u.end});
  return out;
}

std::vector<SpeechSpan> partner_spans(const ConversationScript& script) {
  std::vector<SpeechSpan> out;
  for (const Utterance& u : script.target)
    if (u.speaker != script.wearer) out.push_back({u.speaker, u.start, u.end});
  return out;
}

SelectionStats turn_selection_stats(
    const std::vector<float>& output, const std::vector<float>& mixture,
    const std::map<std::string, std::vector<float>>& stems,
    const std::vector<SpeechSpan>& turns, const std::string& wearer) {
  require(output.size() == mixture.size(),
          "output and mixture lengths differ");
  for (const auto& kv : stems)
    require(kv.second.size() == output.size(),
            "stem " + kv.first + " length differs from the output");

  SelectionStats stats;
  int n_acc = 0, n_cr = 0, n_neutral = 0;
  for (const SpeechSpan& turn : turns) {
    TurnRecord rec;
    rec.speaker = turn.speaker;
    rec.start = turn.start;
    rec.end = turn.end;
    const SpanIndex w = span_samples(turn, output.size());
    require(stems.count(turn.speaker),
            "no stem for turn speaker " + turn.speaker);

    if (turn.end - turn.start < 0.5 ||
        power(stems.at(turn.speaker), w.lo, w.hi) == 0) {
      rec.excluded = true;
      rec.outcome = "excluded";
      ++stats.excluded;
      stats.turns.push_back(std::move(rec));
      continue;
    }

    const std::vector<float> out_w = slice(output, w.lo, w.hi);
    const std::vector<float> mix_w = slice(mixture, w.lo, w.hi);
    double partner_i = 0;
    double best_interferer = -1e9;
    for (const auto& kv : stems) {
      if (power(kv.second, w.lo, w.hi) == 0) continue;
      const std::vector<float> ref_w = slice(kv.second, w.lo, w.hi);
      const double in_db = si_sdr(mix_w, ref_w);
      const double out_db = si_sdr(out_w, ref_w);
      rec.sisdri[kv.first] = out_db - in_db;
      if (kv.first == turn.speaker) {
        partner_i = out_db - in_db;
        rec.sisdr_in = in_db;
        rec.sisdr_out = out_db;
      } else if (kv.first != wearer) {
        best_interferer = std::max(best_interferer, out_db - in_db);
      }
    }

    if (partner_i > 0 && partner_i > best_interferer) {
      rec.outcome = "accurate";
      ++n_acc;
    } else if (best_interferer > 0 && best_interferer > partner_i) {
      rec.outcome = "confused";
      ++n_cr;
    } else {
      rec.outcome = "neutral";
      ++n_neutral;
    }
    ++stats.counted;
    stats.turns.push_back(std::move(rec));
  }

  if (stats.counted > 0) {
    stats.accuracy = double(n_acc) / stats.counted;
    stats.confusion = double(n_cr) / stats.counted;
    stats.neutral = double(n_neutral) / stats.counted;
  }
  return stats;
}

MetricReport evaluate(const std::vector<float>& output,
                      const std::vector<float>& mixture,
                      const std::map<std::string, std::vector<float>>& stems,
                      const ConversationScript& script) {
  MetricReport rep;
  rep.selection = turn_selection_stats(output, mixture, stems,
                                       partner_spans(script), script.wearer);
  double sum_in = 0, sum_out = 0;
  for (const TurnRecord& rec : rep.selection.turns) {
    if (rec.excluded) continue;
    sum_in += rec.sisdr_in;
    sum_out += rec.sisdr_out;
  }
  if (rep.selection.counted > 0) {
    rep.sisdr_in = sum_in / rep.selection.counted;
    rep.sisdr_out = sum_out / rep.selection.counted;
  }
  rep.sisdri = rep.sisdr_out - rep.sisdr_in;
  rep.accuracy = rep.selection.accuracy;
  rep.confusion = rep.selection.confusion;
  rep.neutral = rep.selection.neutral;
  return rep;
}

std::string metric_report_json(const MetricReport& report) {
  ordered_json j;
  j["sisdr_in"] = report.sisdr_in;
  j["sisdr_out"] = report.sisdr_out;
  j["sisdri"] = report.sisdri;
  j["accuracy"] = report.accuracy;
  j["confusion_rate"] = report.confusion;
  j["neutral"] = report.neutral;
  j["turns_counted"] = report.selection.counted;
  j["turns_excluded"] = report.selection.excluded;
  j["delta_pesq"] = "external: not computed";
  j["dnsmos"] = "external: not computed";
  j["notes"] = "neutral turns count in the accuracy and confusion denominators";
  j["turns"] = ordered_json::array();
  for (const TurnRecord& rec : report.selection.turns) {
    ordered_json t;
    t["speaker"] = rec.speaker;
    t["start"] = rec.start;
    t["end"] = rec.end;
    t["outcome"] = rec.outcome;
    if (!rec.excluded) {
      t["sisdr_in"] = rec.sisdr_in;
      t["sisdr_out"] = rec.sisdr_out;
      ordered_json per;
      for (const auto& kv : rec.sisdri) per[kv.first] = kv.second;
      t["sisdri"] = per;
    }
    j["turns"].push_back(t);
  }
  return j.dump(2);
}

double TurnStats::mean(const std::vector<double>& v) {
  if (v.empty()) return 0;
  double s = 0;
  for (double x : v) s += x;
  return s / double(v.size());
}

double TurnStats::stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0;
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / double(v.size()));
}

TurnStats conversation_stats(const std::vector<SpeechSpan>& utterances) {
  require(!utterances.empty(), "conversation stats need at least one utterance");
  for (const SpeechSpan& s : utterances)
    require(s.end > s.start, "utterance " + s.speaker + " has non-positive length");

  std::vector<SpeechSpan> sorted = utterances;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const SpeechSpan& a, const SpeechSpan& b) {
                     return a.start < b.start;
                   });

  TurnStats stats;
  double t_min = sorted.front().start, t_max = 0;
  for (const SpeechSpan& s : sorted) t_max = std::max(t_max, s.end);
  stats.span_seconds = t_max - t_min;

  // Merge same-speaker runs into turns.
  struct Turn {
    std::string speaker;
    double start, end;
  };
  std::vector<Turn> merged;
  for (const SpeechSpan& s : sorted) {
    if (!merged.empty() && merged.back().speaker == s.speaker) {
      merged.back().end = std::max(merged.back().end, s.end);
    } else {
      merged.push_back({s.speaker, s.start, s.end});
    }
  }
  for (const Turn& t : merged) stats.turn_durations.push_back(t.end - t.start);

  int changes = 0;
  for (size_t i = 1; i < merged.size(); ++i) {
    ++changes;
    stats.fto.push_back(merged[i].start - merged[i - 1].end);
  }
  if (stats.span_seconds > 0)
    stats.turn_change_freq = changes / (stats.span_seconds / 60.0);

  // Overlap: sweep the interval endpoints.
  {
    std::vector<std::pair<double, int>> events;
    for (const SpeechSpan& s : sorted) {
      events.push_back({s.start, +1});
      events.push_back({s.end, -1});
    }
    std::sort(events.begin(), events.end());
    double overlap = 0, prev = t_min;
    int active = 0;
    for (const auto& e : events) {
      if (active >= 2) overlap += e.first - prev;
      prev = e.first;
      active += e.second;
    }
    if (stats.span_seconds > 0) stats.overlap_ratio = overlap / stats.span_seconds;
  }

  // IPUs: per speaker, gaps longer than 200 ms split.
  {
    std::map<std::string, std::vector<SpeechSpan>> by_speaker;
    for (const SpeechSpan& s : sorted) by_speaker[s.speaker].push_back(s);
    for (auto& kv : by_speaker) {
      double start = kv.second.front().start, end = kv.second.front().end;
      for (size_t i = 1; i < kv.second.size(); ++i) {
        const SpeechSpan& s = kv.second[i];
        if (s.start - end > 0.2) {
          stats.ipu_durations.push_back(end - start);
          start = s.start;
          end = s.end;
        } else {
          end = std::max(end, s.end);
        }
      }
      stats.ipu_durations.push_back(end - start);
    }
  }
  return stats;
}

std::string turn_stats_json(const TurnStats& stats) {
  ordered_json j;
  j["turn_change_freq_per_min"] = stats.turn_change_freq;
  j["turn_duration_mean"] = TurnStats::mean(stats.turn_durations);
  j["turn_duration_std"] = TurnStats::stddev(stats.turn_durations);
  j["overlap_ratio"] = stats.overlap_ratio;
  j["ipu_duration_mean"] = TurnStats::mean(stats.ipu_durations);
  j["ipu_duration_std"] = TurnStats::stddev(stats.ipu_durations);
  j["fto_mean"] = TurnStats::mean(stats.fto);
  j["fto_std"] = TurnStats::stddev(stats.fto);
  j["turns"] = stats.turn_durations.size();
  j["span_seconds"] = stats.span_seconds;
  return j.dump(2);
}

}  // namespace egostream
