// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#include "egostream/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <numeric>
#include <sstream>

#include "egostream/wav.hpp"
#include "json.hpp"

namespace egostream {

namespace {

using ojson = nlohmann::ordered_json;

constexpr int kMaxAttempts = 100;

double dur(const TurnSpan& t) { return t.end - t.start; }

std::string span_text(double a, double b) {
  std::ostringstream o;
  o.precision(3);
  o.setf(std::ios::fixed);
  o << "[" << a << ", " << b << ")";
  return o.str();
}

ojson utterance_json(const Utterance& u) {
  return ojson{{"speaker", u.speaker},
               {"start", u.start},
               {"end", u.end},
               {"clip", u.clip}};
}

Utterance utterance_from(const ojson& j) {
  Utterance u;
  u.speaker = j.at("speaker").get<std::string>();
  u.start = j.at("start").get<double>();
  u.end = j.at("end").get<double>();
  if (j.contains("clip")) u.clip = j.at("clip").get<std::string>();
  return u;
}

}  // namespace

std::string script_to_json(const ConversationScript& s) {
  ojson j;
  j["policy"] = s.policy;
  j["wearer"] = s.wearer;
  j["duration"] = s.duration;
  j["target"] = ojson::array();
  for (const auto& u : s.target) j["target"].push_back(utterance_json(u));
  j["interference"] = ojson::array();
  for (const auto& u : s.interference)
    j["interference"].push_back(utterance_json(u));
  return j.dump(2);
}

ConversationScript script_from_json(const std::string& text) {
  try {
    const ojson j = ojson::parse(text);
    ConversationScript s;
    s.policy = j.at("policy").get<std::string>();
    s.wearer = j.at("wearer").get<std::string>();
    s.duration = j.at("duration").get<double>();
    for (const auto& u : j.at("target")) s.target.push_back(utterance_from(u));
    for (const auto& u : j.at("interference"))
      s.interference.push_back(utterance_from(u));
    return s;
  } catch (const ojson::exception& e) {
    fail(std::string("conversation script json malformed: ") + e.what());
  }
}

std::vector<TimestampRow> read_timestamp_rows(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<TimestampRow> rows;
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    TimestampRow r;
    try {
      const ojson j = ojson::parse(line);
      r.speaker = j.at("speaker").get<std::string>();
      r.start = j.at("start").get<double>();
      r.end = j.at("end").get<double>();
      if (j.contains("clip")) r.clip = j.at("clip").get<std::string>();
      if (j.contains("conversation"))
        r.conversation = j.at("conversation").get<std::string>();
    } catch (const ojson::exception& e) {
      fail("timestamps line " + std::to_string(line_no) +
           " malformed: " + e.what());
    }
    require(std::isfinite(r.start) && std::isfinite(r.end) &&
                r.start >= 0.0 && r.end > r.start,
            "timestamps line " + std::to_string(line_no) +
                " has an invalid turn " + span_text(r.start, r.end));
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Timeline assembly

namespace {

std::vector<TurnSpan> usable_turns(const std::vector<TurnSpan>& in,
                                   double duration, const char* which) {
  std::vector<TurnSpan> out;
  double prev = -1.0;
  for (const auto& t : in) {
    require(t.start >= prev,
            std::string(which) + " timestamps not sorted by start");
    prev = t.start;
    require(t.end > t.start && t.start >= 0.0,
            std::string(which) + " timestamps contain an invalid turn " +
                span_text(t.start, t.end));
    if (t.start >= duration) continue;
    out.push_back({t.start, std::min(t.end, duration)});
  }
  return out;
}

size_t pool_size_for(const std::string& policy) {
  if (policy == "2spk") return 2;
  if (policy == "3spk") return 3;
  if (policy == "4spk") return 4;
  if (policy == "5spk") return 5;
  if (policy == "leaving") return 3;
  if (policy == "passthrough") return 1;
  fail("unknown policy: " + policy);
}

struct Attempt {
  ConversationScript script;
  std::string violation;  // empty when all constraints hold
  bool ok() const { return violation.empty(); }
};

// One assignment pass. Constraint failures are reported, not thrown, so the
// caller can retry with fresh randomness.
Attempt assign_once(const std::vector<TurnSpan>& tt,
                    const std::vector<TurnSpan>& it,
                    const std::string& policy,
                    const std::vector<std::string>& tp,
                    const std::vector<std::string>& ip, double anchor,
                    Rng& rng) {
  Attempt a;
  ConversationScript& s = a.script;
  s.policy = policy;
  s.wearer = tp[0];
  const bool leaving = policy == "leaving";

  // Wearer anchor: opening turns until the cumulative duration is reached.
  size_t k = 0;
  double acc = 0.0;
  while (k < tt.size() && acc < anchor) acc += dur(tt[k++]);
  if (acc < anchor) {
    a.violation = "wearer anchor: target turns total under " +
                  std::to_string(anchor) + " s";
    return a;
  }
  for (size_t i = 0; i < k; ++i)
    s.target.push_back({s.wearer, tt[i].start, tt[i].end, ""});

  std::string mover;
  if (leaving) mover = tp[1 + rng.integer(2)];

  for (size_t i = k; i < tt.size(); ++i) {
    std::string who;
    if (policy == "passthrough") {
      who = s.wearer;
    } else if (leaving && tt[i].end > 20.0) {
      // The mover is gone from the target after 20 s.
      std::vector<std::string> others;
      for (const auto& p : tp)
        if (p != mover) others.push_back(p);
      who = others[rng.integer(others.size())];
    } else {
      who = tp[rng.integer(tp.size())];
    }
    s.target.push_back({who, tt[i].start, tt[i].end, ""});
  }

  // Target-side constraints.
  auto has_turn = [&](const std::string& sp, double min_dur, bool strict) {
    for (const auto& u : s.target)
      if (u.speaker == sp) {
        const double d = u.end - u.start;
        if (strict ? d > min_dur : d >= min_dur) return true;
      }
    return false;
  };
  if (policy == "2spk") {
    if (!has_turn(tp[1], 5.0, false)) {
      a.violation = "2spk: partner " + tp[1] + " needs one turn of >= 5 s";
      return a;
    }
  } else if (policy == "3spk" || policy == "4spk" || policy == "5spk") {
    for (size_t i = 1; i < tp.size(); ++i)
      if (!has_turn(tp[i], 5.0, true)) {
        a.violation =
            policy + ": partner " + tp[i] + " needs one turn of > 5 s";
        return a;
      }
  } else if (leaving) {
    double mover_last = -1.0;
    for (const auto& u : s.target)
      if (u.speaker == mover) mover_last = std::max(mover_last, u.end);
    if (mover_last < 0.0) {
      a.violation = "leaving: mover " + mover + " has no target turn";
      return a;
    }
    if (mover_last > 20.0) {
      a.violation = "leaving: mover's last target turn must end by 20 s";
      return a;
    }
    for (const auto& p : tp)
      if (p != s.wearer && p != mover && !has_turn(p, 5.0, true)) {
        a.violation = "leaving: staying partner " + p + " needs one turn of > 5 s";
        return a;
      }

    // Interference with the mover joining at a qualifying turn.
    std::vector<size_t> entries;
    for (size_t i = 0; i < it.size(); ++i)
      if (it[i].start > mover_last && it[i].start < 40.0 &&
          dur(it[i]) >= 5.0)
        entries.push_back(i);
    if (entries.empty()) {
      a.violation =
          "leaving: no interference turn of >= 5 s starts between the "
          "mover's exit and 40 s";
      return a;
    }
    const size_t entry = entries[rng.integer(entries.size())];
    for (size_t i = 0; i < it.size(); ++i) {
      std::string who;
      if (i == entry) {
        who = mover;
      } else if (it[i].start < it[entry].start) {
        who = ip[rng.integer(ip.size())];
      } else {
        const size_t pick = rng.integer(ip.size() + 1);
        who = pick == ip.size() ? mover : ip[pick];
      }
      s.interference.push_back({who, it[i].start, it[i].end, ""});
    }
  }

  if (!leaving) {
    for (const auto& t : it) {
      const std::string who = ip[rng.integer(ip.size())];
      s.interference.push_back({who, t.start, t.end, ""});
    }
  }
  for (const auto& p : ip) {
    bool seen = false;
    for (const auto& u : s.interference) seen = seen || u.speaker == p;
    if (!seen) {
      a.violation = "interference speaker " + p + " received no turn";
      return a;
    }
  }
  return a;
}

}  // namespace

ConversationScript build_timeline(const std::vector<TurnSpan>& target_turns,
                                  const std::vector<TurnSpan>& interf_turns,
                                  const std::string& policy,
                                  const std::vector<std::string>& target_pool,
                                  const std::vector<std::string>& interf_pool,
                                  uint64_t seed) {
  const size_t want = pool_size_for(policy);
  require(target_pool.size() == want,
          "policy " + policy + " needs a target pool of " +
              std::to_string(want) + " speakers");
  require(interf_pool.size() == 2, "interference pool must have 2 speakers");
  std::vector<std::string> all = target_pool;
  all.insert(all.end(), interf_pool.begin(), interf_pool.end());
  std::sort(all.begin(), all.end());
  require(std::adjacent_find(all.begin(), all.end()) == all.end(),
          "speaker pools overlap or repeat a speaker");

  const double duration = 60.0;
  const double anchor = policy == "passthrough" ? 3.0 : 5.0;
  const auto tt = usable_turns(target_turns, duration, "target");
  const auto it = usable_turns(interf_turns, duration, "interference");
  require(!tt.empty(), "target timestamps empty");
  require(!it.empty(), "interference timestamps empty");

  Rng rng(stage_seed(seed, "timeline"));
  std::string last_violation;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Attempt a = assign_once(tt, it, policy, target_pool, interf_pool, anchor,
                            rng);
    if (a.ok()) {
      a.script.duration = duration;
      return a.script;
    }
    last_violation = a.violation;
  }
  fail("infeasible timeline after " + std::to_string(kMaxAttempts) +
       " attempts: " + last_violation);
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

void mark_active(std::vector<char>& mask, const Utterance& u) {
  const long n = long(mask.size());
  const long a = std::clamp(long(std::llround(u.start * kSampleRate)), 0L, n);
  const long b = std::clamp(long(std::llround(u.end * kSampleRate)), 0L, n);
  for (long i = a; i < b; ++i) mask[size_t(i)] = 1;
}

double active_power(const std::vector<float>& x, const std::vector<char>& m) {
  double s = 0.0;
  long c = 0;
  for (size_t i = 0; i < x.size(); ++i)
    if (m[i]) {
      s += double(x[i]) * x[i];
      ++c;
    }
  return c == 0 ? 0.0 : s / double(c);
}

}  // namespace

MixturePackage render_mixture(const ConversationScript& script,
                              const ClipProvider& clips, double snr_db,
                              const AudioBuffer* noise, float noise_gain) {
  require(snr_db >= -10.0 && snr_db <= 10.0,
          "snr must lie in [-10, 10] dB");
  require(!script.target.empty(), "script has no target utterances");
  const long n = long(std::llround(script.duration * kSampleRate));

  MixturePackage pkg;
  pkg.script = script;
  std::map<std::string, std::vector<float>> tstems, istems;
  std::vector<char> tmask(size_t(n), 0), imask(size_t(n), 0);

  auto place = [&](Utterance& u, std::map<std::string, std::vector<float>>& stems) {
    std::string chosen;
    AudioBuffer clip = clips(u, &chosen);
    require(clip.num_channels() > 0,
            "no clip for utterance: speaker " + u.speaker + " at " +
                span_text(u.start, u.end));
    clip.validate();
    require(clip.num_channels() == 1,
            "clip for speaker " + u.speaker + " is not mono: " + chosen);
    if (!chosen.empty()) u.clip = chosen;
    auto& stem = stems[u.speaker];
    if (stem.empty()) stem.assign(size_t(n), 0.0f);
    const long s0 = long(std::llround(u.start * kSampleRate));
    const long len = long(std::llround(u.end * kSampleRate)) - s0;
    const long m = std::min<long>(len, long(clip.frames()));
    for (long i = 0; i < m && s0 + i < n; ++i)
      stem[size_t(s0 + i)] += clip.channels[0][size_t(i)];
  };

  for (auto& u : pkg.script.target) {
    place(u, tstems);
    mark_active(tmask, u);
  }
  for (auto& u : pkg.script.interference) {
    place(u, istems);
    mark_active(imask, u);
  }

  std::vector<float> tsum(size_t(n), 0.0f), isum(size_t(n), 0.0f);
  for (const auto& [sp, stem] : tstems)
    for (size_t i = 0; i < stem.size(); ++i) tsum[i] += stem[i];
  for (const auto& [sp, stem] : istems)
    for (size_t i = 0; i < stem.size(); ++i) isum[i] += stem[i];

  double gain = 0.0;
  if (pkg.script.interference.empty()) {
    pkg.snr_defined = false;
  } else {
    const double pt = active_power(tsum, tmask);
    const double pi = active_power(isum, imask);
    require(pt > 0.0,
            "target conversation has zero power over its active samples: "
            "the requested snr is unachievable");
    require(pi > 0.0,
            "interference has zero power over its active samples: the "
            "requested snr is unachievable");
    gain = std::sqrt(pt / pi) * std::pow(10.0, -snr_db / 20.0);
    pkg.snr_defined = true;
    pkg.snr_db = snr_db;
  }

  if (noise != nullptr) {
    noise->validate();
    require(noise->num_channels() == 1, "noise track must be mono");
  }

  pkg.target_sum = AudioBuffer(1, size_t(n));
  pkg.target_sum.channels[0] = tsum;
  pkg.interference_sum = AudioBuffer(1, size_t(n));
  for (size_t i = 0; i < isum.size(); ++i)
    pkg.interference_sum.channels[0][i] = float(gain * isum[i]);
  for (const auto& [sp, stem] : tstems) {
    auto& out = pkg.stems[sp];
    if (out.num_channels() == 0) out = AudioBuffer(1, size_t(n));
    for (size_t i = 0; i < stem.size(); ++i) out.channels[0][i] += stem[i];
  }
  for (const auto& [sp, stem] : istems) {
    auto& out = pkg.stems[sp];
    if (out.num_channels() == 0) out = AudioBuffer(1, size_t(n));
    for (size_t i = 0; i < stem.size(); ++i)
      out.channels[0][i] += float(gain * stem[i]);
  }
  pkg.mixture = AudioBuffer(1, size_t(n));
  for (long i = 0; i < n; ++i) {
    float v = tsum[size_t(i)] + pkg.interference_sum.channels[0][size_t(i)];
    if (noise != nullptr && size_t(i) < noise->frames())
      v += noise_gain * noise->channels[0][size_t(i)];
    pkg.mixture.channels[0][size_t(i)] = v;
  }
  return pkg;
}

// ---------------------------------------------------------------------------
// Clip provider

DirectoryClipProvider::DirectoryClipProvider(std::string root, uint64_t seed)
    : root_(std::move(root)), seed_(seed) {}

AudioBuffer DirectoryClipProvider::operator()(const Utterance& u,
                                              std::string* chosen) {
  namespace fs = std::filesystem;
  if (!u.clip.empty()) {
    const fs::path direct = fs::path(root_) / u.clip;
    if (fs::exists(direct)) {
      if (chosen) *chosen = u.clip;
      return read_wav(direct.string());
    }
  }
  auto it = files_.find(u.speaker);
  if (it == files_.end()) {
    std::vector<std::string> fs_list;
    const fs::path dir = fs::path(root_) / u.speaker;
    if (fs::is_directory(dir)) {
      for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".wav")
          fs_list.push_back(e.path().filename().string());
      std::sort(fs_list.begin(), fs_list.end());
    }
    it = files_.emplace(u.speaker, std::move(fs_list)).first;
  }
  const auto& names = it->second;
  if (names.empty()) return AudioBuffer{};
  Rng rng(stage_seed(seed_, "clip." + u.speaker, counter_++));
  const std::string& name = names[size_t(rng.integer(names.size()))];
  if (chosen) *chosen = u.speaker + "/" + name;
  return read_wav((fs::path(root_) / u.speaker / name).string());
}

// ---------------------------------------------------------------------------
// Silence perturbation

ConversationScript perturb_silences(const ConversationScript& script,
                                    double sd_seconds, uint64_t seed) {
  require(sd_seconds >= 0.0, "perturbation sd must be non-negative");
  if (sd_seconds == 0.0) return script;

  ConversationScript out = script;
  auto perturb_track = [&](std::vector<Utterance>& track,
                           const std::string& track_name) {
    std::map<std::string, std::vector<size_t>> by_speaker;
    for (size_t i = 0; i < track.size(); ++i)
      by_speaker[track[i].speaker].push_back(i);
    for (auto& [speaker, idx] : by_speaker) {
      const size_t m = idx.size();
      if (m < 2) continue;
      std::vector<long> s(m), d(m);
      for (size_t i = 0; i < m; ++i) {
        s[i] = long(std::llround(track[idx[i]].start * kSampleRate));
        d[i] = long(std::llround(track[idx[i]].end * kSampleRate)) - s[i];
      }
      std::vector<long> gap(m - 1);
      long total = 0;
      for (size_t i = 0; i + 1 < m; ++i) {
        gap[i] = s[i + 1] - (s[i] + d[i]);
        total += gap[i];
      }
      Rng rng(stage_seed(seed, "perturb." + track_name + "." + speaker));
      std::vector<double> prop(m - 1);
      double prop_total = 0.0;
      for (size_t i = 0; i + 1 < m; ++i) {
        prop[i] = std::max(
            1.0, double(gap[i]) + rng.normal(0.0, sd_seconds) * kSampleRate);
        prop_total += prop[i];
      }
      // Rescale to the original total, then round by largest remainder so
      // the sum is conserved exactly whenever every gap can stay >= 1.
      std::vector<long> w(m - 1);
      std::vector<std::pair<double, size_t>> frac(m - 1);
      long wsum = 0;
      for (size_t i = 0; i + 1 < m; ++i) {
        const double q = prop[i] * double(total) / prop_total;
        w[i] = std::max(1L, long(std::floor(q)));
        frac[i] = {q - std::floor(q), i};
        wsum += w[i];
      }
      std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
        return a.first > b.first || (a.first == b.first && a.second < b.second);
      });
      size_t fi = 0;
      while (wsum < total && fi < frac.size()) {
        ++w[frac[fi++].second];
        ++wsum;
      }
      while (wsum < total) {  // remainder larger than the gap count
        ++w[0];
        ++wsum;
      }
      while (wsum > total) {
        bool changed = false;
        for (size_t i = 0; i + 1 < m && wsum > total; ++i)
          if (w[i] > 1) {
            --w[i];
            --wsum;
            changed = true;
          }
        if (!changed) break;  // every gap at 1 sample already
      }
      long cur = s[0];
      for (size_t i = 0; i < m; ++i) {
        track[idx[i]].start = double(cur) / kSampleRate;
        track[idx[i]].end = double(cur + d[i]) / kSampleRate;
        if (i + 1 < m) cur += d[i] + w[i];
      }
    }
    std::stable_sort(track.begin(), track.end(),
                     [](const Utterance& a, const Utterance& b) {
                       return a.start < b.start;
                     });
  };
  perturb_track(out.target, "target");
  perturb_track(out.interference, "interference");
  return out;
}

std::vector<TurnSpan> synthetic_turns(double duration, uint64_t seed) {
  require(duration > 0, "turn skeleton needs a positive duration");
  Rng rng(stage_seed(seed, "turns"));
  std::vector<TurnSpan> out;
  double t = 0.0;
  while (t < duration) {
    const double len = rng.uniform(2.0, 9.0);
    out.push_back({t, t + len});  // the timeline builder crops to duration
    t += len + rng.uniform(0.2, 1.0);
  }
  return out;
}

ClipProvider synthetic_clip_provider(uint64_t seed) {
  auto counter = std::make_shared<uint64_t>(0);
  return [seed, counter](const Utterance& u, std::string* chosen) {
    const uint64_t k = (*counter)++;
    Rng rng(stage_seed(seed, "clip." + u.speaker, k));
    const long n = std::max(1L, long(std::llround((u.end - u.start) * kSampleRate)));
    AudioBuffer clip(1, size_t(n));
    double lp = 0.0;
    const double pole = 0.85 + 0.1 * rng.uniform();
    const double rate = rng.uniform(2.5, 5.0);  // syllables per second
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    for (long i = 0; i < n; ++i) {
      lp = pole * lp + (1.0 - pole) * rng.normal();
      const double am = 0.55 + 0.45 * std::sin(2.0 * M_PI * rate * double(i) /
                                                   kSampleRate +
                                               phase);
      const double edge = std::min({double(i), double(n - 1 - i), 800.0}) / 800.0;
      clip.channels[0][size_t(i)] = float(0.75 * lp * am * edge);
    }
    if (chosen) *chosen = "synthetic:" + u.speaker + ":" + std::to_string(k);
    return clip;
  };
}

}  // namespace egostream
