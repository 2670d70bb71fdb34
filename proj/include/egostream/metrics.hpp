// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

#include <map>
#include <string>
#include <vector>

#include "egostream/synth.hpp"

namespace egostream {

// Scale-invariant SDR in dB, clamped to [-60, 60]. Projects the estimate
// onto the reference; a silent reference has no projection and is an error.
double si_sdr(const std::vector<float>& estimate,
              const std::vector<float>& reference);

// si_sdr(output, reference) - si_sdr(mixture, reference).
double sisdr_improvement(const std::vector<float>& output,
                         const std::vector<float>& mixture,
                         const std::vector<float>& reference);

// -10*log10(|ref|^2 / |ref - est|^2), clamped to [-60, 60]. Minimized (-60)
// at est == ref; est == 0 scores 0.
double neg_snr_loss(const std::vector<float>& estimate,
                    const std::vector<float>& reference);

// Composite spectral loss over three STFT resolutions:
// FFT sizes [1024, 2048, 512], hops [120, 240, 50], Hann windows of length
// [600, 1200, 240] zero-padded to the FFT size, frames tiled from sample 0
// with no centering. Per resolution the loss is
//   1 * |  |Sr|-|Se| |_F / | |Sr| |_F        (convergence)
// + 1 * mean |log|Sr| - log|Se||             (log magnitude, floor 1e-8)
// + 4 * mean |  |Sr| - |Se|  |               (linear magnitude)
// averaged over the resolutions; include_l1 adds 10 * mean |ref - est|.
// Computed in double precision. A silent reference floors the convergence
// denominator rather than dividing by zero.
double multires_stft_loss(const std::vector<float>& estimate,
                          const std::vector<float>& reference,
                          bool include_l1 = true);

// A labeled stretch of speech, in seconds.
struct SpeechSpan {
  std::string speaker;
  double start = 0;
  double end = 0;
};

std::vector<SpeechSpan> spans_of(const std::vector<Utterance>& turns);
// Target-conversation turns spoken by someone other than the wearer.
std::vector<SpeechSpan> partner_spans(const ConversationScript& script);

struct TurnRecord {
  std::string speaker;
  double start = 0, end = 0;
  bool excluded = false;  // too short to score
  double sisdr_in = 0, sisdr_out = 0;            // against the partner stem
  std::map<std::string, double> sisdri;          // per evaluable stem
  std::string outcome;  // accurate | confused | neutral | excluded
};

struct SelectionStats {
  double accuracy = 0, confusion = 0, neutral = 0;  // fractions of counted
  int counted = 0, excluded = 0;
  std::vector<TurnRecord> turns;
};

// Per partner turn, SISDRi of the output against every speaker's stem over
// the turn span. A turn is accurate when the partner's SISDRi is positive
// and strictly exceeds every interferer's; confused when some interferer's
// SISDRi is positive and strictly exceeds the partner's; neutral otherwise.
// Turns shorter than 0.5 s are excluded; neutral turns stay in the
// denominator. The wearer's stem never counts as an interferer. Turns must
// lie inside the audio span.
SelectionStats turn_selection_stats(
    const std::vector<float>& output, const std::vector<float>& mixture,
    const std::map<std::string, std::vector<float>>& stems,
    const std::vector<SpeechSpan>& turns, const std::string& wearer);

struct MetricReport {
  double sisdr_in = 0, sisdr_out = 0, sisdri = 0;  // means over counted turns
  double accuracy = 0, confusion = 0, neutral = 0;
  SelectionStats selection;
};

// Scores a processed signal against the script's partner turns. The scalar
// SISDRi is the mean per-turn improvement of the partner stems.
MetricReport evaluate(const std::vector<float>& output,
                      const std::vector<float>& mixture,
                      const std::map<std::string, std::vector<float>>& stems,
                      const ConversationScript& script);

// Report JSON with SISDRi, accuracy, confusion rate, per-turn records, and
// placeholders for metrics that need external tooling.
std::string metric_report_json(const MetricReport& report);

struct TurnStats {
  double turn_change_freq = 0;  // per minute over the active span
  std::vector<double> turn_durations;
  double overlap_ratio = 0;  // fraction of the span with >= 2 speakers
  std::vector<double> ipu_durations;
  std::vector<double> fto;  // signed; negative means overlap
  double span_seconds = 0;

  static double mean(const std::vector<double>& v);
  static double stddev(const std::vector<double>& v);
};

// Conversation statistics over labeled activity. Adjacent same-speaker
// utterances merge into one turn; a turn change is a speaker switch between
// consecutive turns in start order. IPUs split at same-speaker gaps longer
// than 200 ms. FTO is next turn start minus previous turn end.
TurnStats conversation_stats(const std::vector<SpeechSpan>& utterances);

std::string turn_stats_json(const TurnStats& stats);

}  // namespace egostream
