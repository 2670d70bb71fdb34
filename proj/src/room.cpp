// Copyright 2026 Egostream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#include "egostream/room.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>

#include "egostream/common.hpp"
#include "egostream/fft.hpp"
#include "json.hpp"

namespace egostream {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kSpeedOfSound = 343.0;  // m/s

ordered_json vec_json(const Vec3& v) {
  return ordered_json::array({v.x, v.y, v.z});
}

Vec3 vec_from_json(const ordered_json& j) {
  require(j.is_array() && j.size() == 3, "scene point is not a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

ordered_json person_json(const Person& p) {
  ordered_json j;
  j["head"] = vec_json(p.head);
  j["height"] = p.height;
  j["facing"] = p.facing;
  j["mouth"] = vec_json(p.mouth);
  return j;
}

Person person_from_json(const ordered_json& j) {
  Person p;
  p.head = vec_from_json(j.at("head"));
  p.height = j.at("height").get<double>();
  p.facing = j.at("facing").get<double>();
  p.mouth = vec_from_json(j.at("mouth"));
  return p;
}

// Direction-averaged decay of the image lattice. A path in direction u
// crosses walls at rate c*(|ux|/L + |uy|/W + |uz|/H); grazing directions
// bounce less often than the 4V/S mean free path, so closed-form Sabine or
// Eyring absorption leaves the Schroeder fit 40-90% above the target. This
// model reproduces the lattice statistics, and bisecting it for the
// per-bounce energy decay q lands the -5..-25 dB fit on the target.
class DecayModel {
 public:
  DecayModel(double length, double width, double height) {
    const int n = 16;
    for (int i = 0; i < n; ++i) {
      const double th = (i + 0.5) * (M_PI / 2.0) / n;
      for (int j = 0; j < n; ++j) {
        const double ph = (j + 0.5) * (M_PI / 2.0) / n;
        m_.push_back(std::sin(th) * std::cos(ph) / length +
                     std::sin(th) * std::sin(ph) / width +
                     std::cos(th) / height);
        w_.push_back(std::sin(th));
      }
    }
  }

  // Schroeder backward integral at time t; constant factors cancel in
  // ratios.
  double edc(double q, double t) const {
    double s = 0;
    for (size_t i = 0; i < m_.size(); ++i)
      s += w_[i] * std::exp(-q * kSpeedOfSound * m_[i] * t) / m_[i];
    return s;
  }

  // Time where the EDC reaches db (< 0) relative to t = 0.
  double crossing(double q, double db) const {
    const double target = edc(q, 0.0) * std::pow(10.0, db / 10.0);
    double hi = 0.1;
    while (edc(q, hi) > target) hi *= 2.0;
    double lo = 0.0;
    for (int it = 0; it < 50; ++it) {
      const double mid = 0.5 * (lo + hi);
      (edc(q, mid) > target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  // Least-squares -5..-25 dB fit, reported as a 60 dB time.
  double rt60(double q) const {
    const double t5 = crossing(q, -5.0), t25 = crossing(q, -25.0);
    const double e0 = edc(q, 0.0);
    const int k = 33;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < k; ++i) {
      const double t = t5 + (t25 - t5) * (i + 0.5) / k;
      const double db = 10.0 * std::log10(edc(q, t) / e0);
      sx += t;
      sy += db;
      sxx += t * t;
      sxy += t * db;
    }
    const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    return -60.0 / slope;
  }

  // Per-bounce energy decay whose modeled Schroeder fit equals the target.
  double solve(double target_rt60, double q_nominal) const {
    double hi = q_nominal;
    while (rt60(hi) > target_rt60 && hi < 64.0 * q_nominal) hi *= 2.0;
    double lo = q_nominal;
    while (rt60(lo) < target_rt60 && lo > q_nominal / 64.0) lo /= 2.0;
    for (int it = 0; it < 44; ++it) {
      const double mid = 0.5 * (lo + hi);
      (rt60(mid) > target_rt60 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

 private:
  std::vector<double> m_, w_;
};

bool inside_room(const SceneConfig& s, const Vec3& v) {
  const double m = 1e-6;  // strictly inside
  return v.x > m && v.x < s.length - m && v.y > m && v.y < s.width - m &&
         v.z > m && v.z < s.height - m;
}

bool person_inside(const SceneConfig& s, const Person& p) {
  return inside_room(s, p.head) && inside_room(s, p.mouth) && p.height > 0;
}

// One attempt at a full scene draw. Returns false if any point lands
// outside the walls or a Gaussian draw is non-physical.
bool draw_scene(Rng& rng, int n_speakers, SceneConfig& s) {
  s.length = rng.uniform(5.0, 10.0);
  s.width = rng.uniform(5.0, 10.0);
  s.height = rng.uniform(3.0, 4.0);
  s.rt60 = rng.uniform(0.15, 1.0);

  auto draw_person = [&](const Vec3& anchor, double lo, double hi) {
    Person p;
    const double dist = rng.uniform(lo, hi);
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    p.height = rng.normal(1.75, 0.07);
    p.head = {anchor.x + dist * std::cos(angle),
              anchor.y + dist * std::sin(angle), p.height};
    p.facing = rng.uniform(0.0, 2.0 * M_PI);
    const double down = rng.normal(0.18, 0.02);
    const double fwd = rng.normal(0.1075, 0.02);
    p.mouth = {p.head.x + fwd * std::cos(p.facing),
               p.head.y + fwd * std::sin(p.facing), p.head.z - down};
    return p;
  };

  const Vec3 center = {s.length / 2.0, s.width / 2.0, 0.0};
  s.wearer = draw_person(center, 0.0, 1.0);
  if (!person_inside(s, s.wearer)) return false;

  s.head_width = rng.normal(0.15, 0.02);
  if (s.head_width <= 0) return false;
  const double half = s.head_width / 2.0;
  const Vec3 lat = {-std::sin(s.wearer.facing), std::cos(s.wearer.facing), 0};
  s.mic_left = {s.wearer.head.x + half * lat.x, s.wearer.head.y + half * lat.y,
                s.wearer.head.z};
  s.mic_right = {s.wearer.head.x - half * lat.x,
                 s.wearer.head.y - half * lat.y, s.wearer.head.z};
  if (!inside_room(s, s.mic_left) || !inside_room(s, s.mic_right))
    return false;

  s.speakers.clear();
  for (int i = 0; i + 1 < n_speakers; ++i) {
    Person p = draw_person(s.wearer.head, 0.5, 1.5);
    if (!person_inside(s, p)) return false;
    s.speakers.push_back(p);
  }
  return true;
}

}  // namespace

double norm(const Vec3& v) {
  return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
}

void SceneConfig::validate() const {
  require(length > 0 && width > 0 && height > 0,
          "scene has non-positive room dimensions");
  require(std::isfinite(rt60) && rt60 >= 0, "scene rt60 must be finite and >= 0");
  require(person_inside(*this, wearer), "wearer is outside the room");
  require(inside_room(*this, mic_left) && inside_room(*this, mic_right),
          "a microphone is outside the room");
  for (const Person& p : speakers)
    require(person_inside(*this, p), "a speaker is outside the room");
}

std::string scene_to_json(const SceneConfig& s) {
  ordered_json j;
  j["room"] = {{"length", s.length}, {"width", s.width}, {"height", s.height}};
  j["rt60"] = s.rt60;
  j["seed"] = s.seed;
  j["head_width"] = s.head_width;
  j["wearer"] = person_json(s.wearer);
  j["mics"] = {{"left", vec_json(s.mic_left)}, {"right", vec_json(s.mic_right)}};
  j["speakers"] = ordered_json::array();
  for (const Person& p : s.speakers) j["speakers"].push_back(person_json(p));
  return j.dump(2);
}

SceneConfig scene_from_json(const std::string& text) {
  try {
    const ordered_json j = ordered_json::parse(text);
    SceneConfig s;
    s.length = j.at("room").at("length").get<double>();
    s.width = j.at("room").at("width").get<double>();
    s.height = j.at("room").at("height").get<double>();
    s.rt60 = j.at("rt60").get<double>();
    s.seed = j.at("seed").get<uint64_t>();
    s.head_width = j.at("head_width").get<double>();
    s.wearer = person_from_json(j.at("wearer"));
    s.mic_left = vec_from_json(j.at("mics").at("left"));
    s.mic_right = vec_from_json(j.at("mics").at("right"));
    for (const auto& p : j.at("speakers")) s.speakers.push_back(person_from_json(p));
    return s;
  } catch (const ordered_json::exception& e) {
    fail(std::string("scene json malformed: ") + e.what());
  }
}

SceneConfig sample_scene(int n_speakers, uint64_t seed) {
  require(n_speakers >= 1, "a scene needs at least one person");
  Rng rng(stage_seed(seed, "scene.sample"));
  SceneConfig s;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    if (draw_scene(rng, n_speakers, s)) {
      s.seed = seed;
      s.validate();
      return s;
    }
  }
  fail("infeasible scene after 1000 draws");
}

std::vector<Image> enumerate_images(const SceneConfig& scene,
                                    const Vec3& source, int max_order) {
  scene.validate();
  require(max_order >= 0, "image order must be >= 0");
  const double dims[3] = {scene.length, scene.width, scene.height};
  const double src[3] = {source.x, source.y, source.z};

  // Per axis: mirrored coordinate (1-2p)s + 2rL carries |r-p| + |r| wall
  // bounces.
  struct AxisImage {
    double coord;
    int bounces;
  };
  std::vector<AxisImage> axis[3];
  for (int a = 0; a < 3; ++a) {
    for (int p = 0; p <= 1; ++p) {
      for (int r = -(max_order + 1); r <= max_order + 1; ++r) {
        const int b = std::abs(r - p) + std::abs(r);
        if (b > max_order) continue;
        axis[a].push_back({(1 - 2 * p) * src[a] + 2.0 * r * dims[a], b});
      }
    }
  }

  std::vector<Image> out;
  for (const AxisImage& x : axis[0])
    for (const AxisImage& y : axis[1]) {
      if (x.bounces + y.bounces > max_order) continue;
      for (const AxisImage& z : axis[2]) {
        const int order = x.bounces + y.bounces + z.bounces;
        if (order > max_order) continue;
        out.push_back({{x.coord, y.coord, z.coord}, order});
      }
    }
  return out;
}

std::vector<float> compute_rir(const SceneConfig& scene, const Vec3& source,
                               const Vec3& mic) {
  require(inside_room(scene, source) && inside_room(scene, mic),
          "rir endpoints must lie inside the room");
  const double d_direct = norm(source - mic);
  require(d_direct > 1e-6, "coincident source and microphone: degenerate geometry");

  // Two adjacent taps per arrival: h[i] += a(1-frac), h[i+1] += a*frac.
  auto place = [](std::vector<double>& h, double delay_s, double amp) {
    const double pos = delay_s * kSampleRate;
    const size_t i0 = size_t(pos);
    const double frac = pos - double(i0);
    if (i0 + 1 >= h.size()) h.resize(i0 + 2, 0.0);
    h[i0] += amp * (1.0 - frac);
    h[i0 + 1] += amp * frac;
  };

  if (scene.rt60 <= 0) {
    // Anechoic: the direct arrival only.
    std::vector<double> h;
    place(h, d_direct / kSpeedOfSound, 1.0 / (4.0 * M_PI * d_direct));
    return std::vector<float>(h.begin(), h.end());
  }

  const double V = scene.length * scene.width * scene.height;
  const double S = 2.0 * (scene.length * scene.width +
                          scene.length * scene.height +
                          scene.width * scene.height);
  // Eyring rate as the solver's starting bracket; the lattice model scales
  // it up to compensate for the grazing-direction bias. Cached per room:
  // every stem in a scene shares the walls.
  const double q_nominal = 0.161 * V / (S * scene.rt60);
  double q = 0.0;
  {
    static std::mutex cache_mutex;
    static std::map<std::array<double, 4>, double> cache;
    const std::array<double, 4> key = {scene.length, scene.width,
                                       scene.height, scene.rt60};
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto it = cache.find(key);
    if (it != cache.end()) {
      q = it->second;
    } else {
      DecayModel model(scene.length, scene.width, scene.height);
      q = model.solve(scene.rt60, q_nominal);
      if (cache.size() > 4096) cache.clear();
      cache.emplace(key, q);
    }
  }
  const double beta = std::exp(-q / 2.0);

  // Enumerate images out to the -60 dB floor.
  const double dmax = kSpeedOfSound * scene.rt60 + d_direct;
  const double dims[3] = {scene.length, scene.width, scene.height};
  const double src[3] = {source.x, source.y, source.z};
  const double rcv[3] = {mic.x, mic.y, mic.z};

  struct AxisTerm {
    double delta;  // mic coord minus image coord
    int bounces;
    uint64_t key;  // lattice index, feeds the sign hash
  };
  std::vector<AxisTerm> axis[3];
  for (int a = 0; a < 3; ++a) {
    const long rmax = long(dmax / (2.0 * dims[a])) + 2;
    for (int p = 0; p <= 1; ++p)
      for (long r = -rmax; r <= rmax; ++r) {
        const double coord = (1 - 2 * p) * src[a] + 2.0 * double(r) * dims[a];
        const double delta = rcv[a] - coord;
        if (std::abs(delta) > dmax) continue;
        const uint64_t zig = r < 0 ? uint64_t(-2 * r - 1) : uint64_t(2 * r);
        const uint64_t key = zig * 2 + uint64_t(p);
        axis[a].push_back({delta, int(std::abs(r - p) + std::abs(r)), key});
      }
    std::sort(axis[a].begin(), axis[a].end(),
              [](const AxisTerm& u, const AxisTerm& v) { return u.delta < v.delta; });
  }

  int max_bounces = 0;
  for (int a = 0; a < 3; ++a)
    for (const AxisTerm& t : axis[a])
      max_bounces = std::max(max_bounces, t.bounces);
  std::vector<double> beta_pow(size_t(3 * max_bounces) + 1);
  beta_pow[0] = 1.0;
  for (size_t i = 1; i < beta_pow.size(); ++i)
    beta_pow[i] = beta_pow[i - 1] * beta;

  std::vector<double> h(size_t(dmax / kSpeedOfSound * kSampleRate) + 2, 0.0);
  const double dmax2 = dmax * dmax;
  for (const AxisTerm& x : axis[0]) {
    const double x2 = x.delta * x.delta;
    if (x2 > dmax2) continue;
    for (const AxisTerm& y : axis[1]) {
      const double xy2 = x2 + y.delta * y.delta;
      if (xy2 > dmax2) continue;
      const double zlim = std::sqrt(dmax2 - xy2);
      // The z list is sorted by delta; only |delta| <= zlim contributes.
      const auto lo = std::lower_bound(
          axis[2].begin(), axis[2].end(), -zlim,
          [](const AxisTerm& t, double v) { return t.delta < v; });
      for (auto it = lo; it != axis[2].end() && it->delta <= zlim; ++it) {
        const double d = std::sqrt(xy2 + it->delta * it->delta);
        const int bounces = x.bounces + y.bounces + it->bounces;
        // Pseudo-random reflection polarity; all-positive taps would pile
        // into a coherent pedestal that flattens the measured decay. The
        // direct arrival stays positive.
        double amp = beta_pow[bounces] / (4.0 * M_PI * d);
        if (bounces > 0) {
          uint64_t s = x.key * 0x9e3779b97f4a7c15ULL;
          s ^= y.key + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
          s ^= it->key + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
          s ^= s >> 33;
          s *= 0xff51afd7ed558ccdULL;
          s ^= s >> 33;
          if (s & 1) amp = -amp;
        }
        place(h, d / kSpeedOfSound, amp);
      }
    }
  }
  return std::vector<float>(h.begin(), h.end());
}

BinauralPackage spatialize(const MixturePackage& package,
                           const SceneConfig& scene) {
  scene.validate();
  require(!package.stems.empty(), "mixture package has no stems");
  const std::string& wearer = package.script.wearer;
  require(package.stems.count(wearer),
          "mixture package has no stem for the wearer");

  // Non-wearer stems pair with scene positions in sorted speaker-id order.
  std::vector<std::string> others;
  for (const auto& kv : package.stems)
    if (kv.first != wearer) others.push_back(kv.first);
  if (others.size() != scene.speakers.size())
    fail("scene provides " + std::to_string(scene.speakers.size()) +
         " speaker positions but the package has " +
         std::to_string(others.size()) + " non-wearer stems");

  BinauralPackage out;
  out.script = package.script;
  out.scene = scene;
  out.snr_db = package.snr_db;
  out.snr_defined = package.snr_defined;
  out.mono_stems = package.stems;

  const size_t n = package.mixture.frames();
  std::vector<double> mix_l(n, 0.0), mix_r(n, 0.0);

  auto render = [&](const std::string& speaker, const Vec3& mouth) {
    const AudioBuffer& stem = package.stems.at(speaker);
    require(stem.num_channels() == 1, "stem " + speaker + " is not mono");
    const std::vector<float> rir_l = compute_rir(scene, mouth, scene.mic_left);
    const std::vector<float> rir_r = compute_rir(scene, mouth, scene.mic_right);
    AudioBuffer bi(2, n);
    const std::vector<float> cl = fft_convolve(stem.channels[0], rir_l);
    const std::vector<float> cr = fft_convolve(stem.channels[0], rir_r);
    for (size_t i = 0; i < n && i < cl.size(); ++i) bi.channels[0][i] = cl[i];
    for (size_t i = 0; i < n && i < cr.size(); ++i) bi.channels[1][i] = cr[i];
    for (size_t i = 0; i < n; ++i) {
      mix_l[i] += double(bi.channels[0][i]);
      mix_r[i] += double(bi.channels[1][i]);
    }
    out.binaural_stems[speaker] = std::move(bi);
  };

  out.person_of_speaker[wearer] = -1;
  render(wearer, scene.wearer.mouth);
  for (size_t i = 0; i < others.size(); ++i) {
    out.person_of_speaker[others[i]] = int(i);
    render(others[i], scene.speakers[i].mouth);
  }

  out.mixture = AudioBuffer(2, n);
  for (size_t i = 0; i < n; ++i) {
    out.mixture.channels[0][i] = float(mix_l[i]);
    out.mixture.channels[1][i] = float(mix_r[i]);
  }
  return out;
}

}  // namespace egostream
