// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "egostream/common.hpp"

namespace egostream {

struct Utterance {
  std::string speaker;
  double start = 0.0;  // seconds
  double end = 0.0;
  std::string clip;  // audio source reference; may be empty until rendering
};

// A 60-second two-conversation scene: the wearer's conversation (target) and
// one unrelated conversation (interference). Speaker sets are disjoint except
// for the leaving policy's mover, who starts in the target and joins the
// interference.
struct ConversationScript {
  std::vector<Utterance> target;
  std::vector<Utterance> interference;
  std::string wearer;
  std::string policy;  // 2spk | 3spk | 4spk | 5spk | leaving | passthrough
  double duration = 60.0;
};

std::string script_to_json(const ConversationScript& s);
ConversationScript script_from_json(const std::string& text);

struct TurnSpan {
  double start = 0.0;
  double end = 0.0;
};

// One row of the neutral timestamp corpus (JSON lines). `conversation`
// groups rows into source conversations; it may be empty for single-
// conversation files.
struct TimestampRow {
  std::string conversation;
  std::string speaker;
  double start = 0.0;
  double end = 0.0;
  std::string clip;
};

std::vector<TimestampRow> read_timestamp_rows(const std::string& path);

// Assigns speakers to two turn structures under one conversation policy.
// The wearer takes the opening target turns until their cumulative duration
// reaches the policy's anchor (5 s; 3 s for passthrough); every other turn
// is drawn uniformly from the policy's pool. Constraint violations retry
// with fresh randomness up to 100 times, then raise an infeasible-timeline
// error naming the violated constraint.
ConversationScript build_timeline(
    const std::vector<TurnSpan>& target_turns,
    const std::vector<TurnSpan>& interference_turns, const std::string& policy,
    const std::vector<std::string>& target_pool,
    const std::vector<std::string>& interference_pool, uint64_t seed);

struct MixturePackage {
  AudioBuffer mixture;
  AudioBuffer target_sum;
  AudioBuffer interference_sum;
  std::map<std::string, AudioBuffer> stems;
  ConversationScript script;  // clips filled in with what was rendered
  double snr_db = 0.0;
  bool snr_defined = false;  // false when the script has no interference
};

// Yields the mono 16 kHz clip for one utterance and reports which source was
// chosen. An empty buffer (no channels) means no clip is available.
using ClipProvider =
    std::function<AudioBuffer(const Utterance&, std::string* chosen)>;

// Places every utterance's clip at its timestamps (cropped to the turn,
// zero-padded if short) and scales the interference so the target-to-
// interference power ratio over utterance-active samples equals snr_db.
MixturePackage render_mixture(const ConversationScript& script,
                              const ClipProvider& clips, double snr_db,
                              const AudioBuffer* noise = nullptr,
                              float noise_gain = 1.0f);

// Draws clips from root/<speaker>/*.wav with seeded choice and crop offset.
class DirectoryClipProvider {
 public:
  DirectoryClipProvider(std::string root, uint64_t seed);
  AudioBuffer operator()(const Utterance& u, std::string* chosen);

 private:
  std::string root_;
  uint64_t seed_;
  uint64_t counter_ = 0;
  std::map<std::string, std::vector<std::string>> files_;
};

// Alternating turn skeleton covering `duration` seconds: turn lengths drawn
// U[2, 9] s with U[0.2, 1.0] s gaps. Raw material for build_timeline when no
// corpus timestamps are mounted.
std::vector<TurnSpan> synthetic_turns(double duration, uint64_t seed);

// Speech-shaped placeholder clips: lowpassed noise under a syllabic
// amplitude modulation with onset/offset ramps, deterministic per seed and
// draw order. Lets the pipeline run without a mounted corpus.
ClipProvider synthetic_clip_provider(uint64_t seed);

// Shifts every inter-utterance silence of each speaker's track by
// N(0, sd_seconds), clips each to at least one sample, and rescales so the
// track's total silence is preserved within one sample per silence.
// Utterance order and durations are unchanged; sd = 0 returns the script
// unchanged.
ConversationScript perturb_silences(const ConversationScript& script,
                                    double sd_seconds, uint64_t seed);

}  // namespace egostream
