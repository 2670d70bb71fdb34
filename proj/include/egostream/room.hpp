// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

#include <map>
#include <string>
#include <vector>

#include "egostream/synth.hpp"

namespace egostream {

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

inline Vec3 operator-(const Vec3& a, const Vec3& b) {
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}
double norm(const Vec3& v);

struct Person {
  Vec3 head;       // head center
  double height;   // meters
  double facing;   // horizontal orientation, radians
  Vec3 mouth;
};

// A shoebox room with the wearer near the center and the other speakers
// within conversational distance. All points strictly inside the walls.
struct SceneConfig {
  double length = 0, width = 0, height = 0;  // meters
  double rt60 = 0;                           // 0 means anechoic
  Person wearer;
  std::vector<Person> speakers;  // everyone except the wearer
  Vec3 mic_left, mic_right;
  double head_width = 0;  // the sampled head-width draw
  uint64_t seed = 0;

  void validate() const;
};

std::string scene_to_json(const SceneConfig& s);
SceneConfig scene_from_json(const std::string& text);

// n_speakers counts every person including the wearer. Draws violating the
// geometric bounds are resampled; 1000 rejected draws raise an
// infeasible-scene error.
SceneConfig sample_scene(int n_speakers, uint64_t seed);

// Image-source impulse response from source_point to mic_point at 16 kHz.
// The wall reflection coefficient is chosen so the broadband decay
// reproduces scene.rt60; reflections are enumerated out to the -60 dB floor
// (path length c * rt60 past the direct arrival). Fractional delays are
// linearly interpolated; the direct tap has amplitude 1/(4*pi*d) at delay
// d/c with c = 343 m/s.
std::vector<float> compute_rir(const SceneConfig& scene, const Vec3& source,
                               const Vec3& mic);

// Image positions with their reflection counts, for inspection; order n
// means n wall bounces.
struct Image {
  Vec3 position;
  int order;
};
std::vector<Image> enumerate_images(const SceneConfig& scene,
                                    const Vec3& source, int max_order);

struct BinauralPackage {
  AudioBuffer mixture;                             // 2 channels
  std::map<std::string, AudioBuffer> binaural_stems;  // 2 channels each
  std::map<std::string, AudioBuffer> mono_stems;       // pre-spatialization
  ConversationScript script;
  SceneConfig scene;
  std::map<std::string, int> person_of_speaker;  // -1 = wearer
  double snr_db = 0.0;
  bool snr_defined = false;
};

// Convolves every stem with its mouth-to-ear RIR pair and sums the binaural
// stems into a two-channel mixture. The wearer's stem runs through the
// wearer's own mouth-to-ear paths. Non-wearer speakers are assigned to scene
// positions in sorted speaker-id order.
BinauralPackage spatialize(const MixturePackage& package,
                           const SceneConfig& scene);

}  // namespace egostream
