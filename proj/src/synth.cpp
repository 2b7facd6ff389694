#include "geodepth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "geodepth/errors.hpp"

namespace geodepth {
namespace {

using json = nlohmann::json;

constexpr double kDeg = std::numbers::pi / 180.0;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return splitmix(a ^ (splitmix(b) + 0x632be59bd9b4e019ULL));
}

double unit_hash(std::uint64_t h) {
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

// Solid value noise in [0, 1] on a cubic lattice of unit spacing. Being a
// function of the 3D point, it stays continuous across surface creases.
double value_noise(const Vec3& p, std::uint64_t key) {
  const Vec3 f = p.array().floor();
  const Vec3 s{fade(p.x() - f.x()), fade(p.y() - f.y()), fade(p.z() - f.z())};
  double acc = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    std::uint64_t h = key;
    double w = 1.0;
    for (int a = 0; a < 3; ++a) {
      const int bit = (corner >> a) & 1;
      h = hash_combine(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(f[a]) + bit));
      w *= bit ? s[a] : 1.0 - s[a];
    }
    acc += w * unit_hash(h);
  }
  return acc;
}

struct Surface {
  TextureDensity texture = TextureDensity::kHigh;
  Vec3 base = Vec3::Constant(0.5);
  std::uint64_t key = 0;
};

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  int surface = -1;
  int axis = 0;  // normal axis of the face that was hit
  int side = 0;  // 0 = min face, 1 = max face
};

class Renderer {
 public:
  Renderer(const SceneConfig& cfg, std::uint64_t texture_seed) : cfg_(cfg) {
    room_min_ = {-cfg.room_half_width, -cfg.room_half_height, cfg.room_front};
    room_max_ = {cfg.room_half_width, cfg.room_half_height, cfg.room_back};
    noise_key_ = hash_combine(texture_seed, 0x5eed);
    const int n = 1 + static_cast<int>(cfg.boxes.size());
    for (int i = 0; i < n; ++i) {
      Surface s;
      s.texture = i == 0 ? cfg.wall_texture : cfg.boxes[i - 1].texture;
      s.key = hash_combine(texture_seed, static_cast<std::uint64_t>(i));
      for (int c = 0; c < 3; ++c) {
        s.base[c] = 0.3 + 0.4 * unit_hash(hash_combine(s.key, 1000 + c));
      }
      surfaces_.push_back(s);
    }
  }

  Hit intersect(const Vec3& o, const Vec3& d) const {
    Hit best;
    // Room interior: the exit point of the ray.
    for (int a = 0; a < 3; ++a) {
      if (d[a] == 0.0) continue;
      const int side = d[a] > 0 ? 1 : 0;
      const double bound = side ? room_max_[a] : room_min_[a];
      const double t = (bound - o[a]) / d[a];
      if (t > 0 && t < best.t) best = {t, 0, a, side};
    }
    for (std::size_t b = 0; b < cfg_.boxes.size(); ++b) {
      const BoxSpec& box = cfg_.boxes[b];
      double t_near = -std::numeric_limits<double>::infinity();
      double t_far = std::numeric_limits<double>::infinity();
      int axis = 0;
      int side = 0;
      bool miss = false;
      for (int a = 0; a < 3; ++a) {
        if (d[a] == 0.0) {
          if (o[a] < box.min[a] || o[a] > box.max[a]) miss = true;
          continue;
        }
        double t0 = (box.min[a] - o[a]) / d[a];
        double t1 = (box.max[a] - o[a]) / d[a];
        int s0 = 0;
        if (t0 > t1) {
          std::swap(t0, t1);
          s0 = 1;
        }
        if (t0 > t_near) {
          t_near = t0;
          axis = a;
          side = s0;
        }
        t_far = std::min(t_far, t1);
      }
      if (miss || t_near > t_far || t_near <= 0) continue;
      if (t_near < best.t) best = {t_near, static_cast<int>(b) + 1, axis, side};
    }
    return best;
  }

  Vec3 shade(const Vec3& p, const Hit& hit) const {
    const Surface& s = surfaces_[hit.surface];
    const bool high = s.texture == TextureDensity::kHigh;
    Vec3 rgb;
    for (int c = 0; c < 3; ++c) {
      double n = 0.0;
      double norm = 0.0;
      double w = 1.0;
      double spacing = cfg_.feature_size;
      for (int o = 0; o < cfg_.octaves; ++o) {
        const std::uint64_t key = hash_combine(noise_key_, 16 * c + o);
        n += w * value_noise(p / spacing, key);
        norm += w;
        w *= 0.4;
        spacing *= 0.5;
      }
      // Low texture keeps the peak-to-peak brightness change under 2%.
      const double v = high ? s.base[c] + 0.6 * (n / norm - 0.5)
                            : s.base[c] * (1.0 + 0.015 * (n / norm - 0.5));
      rgb[c] = std::clamp(v, 0.0, 1.0);
    }
    return rgb;
  }

  bool inside_free_space(const Vec3& c) const {
    for (int a = 0; a < 3; ++a) {
      if (c[a] <= room_min_[a] || c[a] >= room_max_[a]) return false;
    }
    for (const auto& box : cfg_.boxes) {
      if ((c.array() >= box.min.array()).all() && (c.array() <= box.max.array()).all()) {
        return false;
      }
    }
    return true;
  }

  void render(const Intrinsics& k, const Pose& world_to_cam, Image& rgb,
              Image& depth) const {
    const Mat3 r_cw = world_to_cam.rotation.matrix().transpose();
    const Vec3 center = -(r_cw * world_to_cam.translation);
    rgb = Image(k.height, k.width, 3);
    depth = Image(k.height, k.width);
    const int ss = cfg_.supersample;
    for (int y = 0; y < k.height; ++y) {
      for (int x = 0; x < k.width; ++x) {
        const Vec3 ray = r_cw * k.backproject(x, y);
        const Hit hit = intersect(center, ray);
        if (hit.surface < 0) throw ConfigError("camera ray escapes the room");
        depth(y, x) = hit.t;
        Vec3 acc = Vec3::Zero();
        for (int sy = 0; sy < ss; ++sy) {
          for (int sx = 0; sx < ss; ++sx) {
            const double px = x + (sx + 0.5) / ss - 0.5;
            const double py = y + (sy + 0.5) / ss - 0.5;
            const Vec3 d = r_cw * k.backproject(px, py);
            const Hit h = intersect(center, d);
            acc += shade(center + h.t * d, h);
          }
        }
        acc /= static_cast<double>(ss * ss);
        for (int c = 0; c < 3; ++c) rgb(y, x, c) = acc[c];
      }
    }
  }

 private:
  const SceneConfig& cfg_;
  Vec3 room_min_;
  Vec3 room_max_;
  std::vector<Surface> surfaces_;
  std::uint64_t noise_key_ = 0;
};

Pose camera_pose(const SceneConfig& cfg, int frame, double phase, double off_x,
                 double off_z) {
  const double s = frame - 0.5 * (cfg.frames - 1);
  const Vec3 center{off_x + cfg.step * s, cfg.bob * std::sin(1.3 * s + phase),
                    off_z + cfg.bob * std::cos(0.9 * s + phase)};
  const double yaw = cfg.yaw_deg * kDeg * std::sin(0.6 * s + phase);
  const double pitch = cfg.pitch_deg * kDeg * std::sin(0.8 * s + 2.0 * phase);
  const Rotation r_cw = Rotation::FromAxisAngle(Vec3(0, yaw, 0)) *
                        Rotation::FromAxisAngle(Vec3(pitch, 0, 0));
  const Rotation r_wc = r_cw.inverse();
  return Pose{r_wc, -(r_wc * center)};
}

std::string texture_name(TextureDensity t) {
  return t == TextureDensity::kHigh ? "high" : "low";
}

TextureDensity parse_texture(const json& j) {
  const std::string s = j.get<std::string>();
  if (s == "high") return TextureDensity::kHigh;
  if (s == "low") return TextureDensity::kLow;
  throw ConfigError("texture must be \"high\" or \"low\", got \"" + s + "\"");
}

Vec3 parse_vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw ConfigError(std::string(what) + " must be an array of 3 numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<BoxSpec> default_boxes() {
  return {
      {Vec3(-1.6, 0.3, 1.8), Vec3(-0.7, 1.2, 3.2), TextureDensity::kHigh},
      {Vec3(0.2, 0.5, 2.6), Vec3(1.0, 1.2, 3.2), TextureDensity::kHigh},
  };
}

void CorruptionSpec::validate() const {
  if (!(scale_min > 0.0) || !(scale_max >= scale_min)) {
    throw ConfigError("corruption scale range must satisfy 0 < scale_min <= scale_max");
  }
  if (rotation_sigma < 0.0 || translation_sigma < 0.0) {
    throw ConfigError("corruption noise levels must be non-negative");
  }
  if (!(drift > -1.0)) throw ConfigError("corruption drift must exceed -1");
}

void SceneConfig::validate() const {
  if (frames <= 0) throw ConfigError("frames must be positive");
  if (sequences <= 0) throw ConfigError("sequences must be positive");
  if (width <= 0 || height <= 0) throw ConfigError("resolution must be positive");
  if (width % 8 != 0 || height % 8 != 0) {
    throw ConfigError("width and height must be multiples of 8");
  }
  if (!(focal > 0.0)) throw ConfigError("focal must be positive");
  if (!(feature_size > 0.0) || octaves < 1) {
    throw ConfigError("texture needs feature_size > 0 and octaves >= 1");
  }
  if (supersample < 1) throw ConfigError("supersample must be >= 1");
  if (!(room_front < 0.0 && room_back > 0.0 && room_half_width > 0.0 &&
        room_half_height > 0.0)) {
    throw ConfigError("room must enclose the origin");
  }
  for (const auto& b : boxes) {
    if (!(b.min.array() < b.max.array()).all()) {
      throw ConfigError("box min must be below box max on every axis");
    }
  }
  if (corruption) corruption->validate();
}

SceneConfig scene_config_from_json(const std::string& text) {
  SceneConfig cfg;
  try {
    const json j = json::parse(text);
    read_key(j, "width", cfg.width);
    read_key(j, "height", cfg.height);
    read_key(j, "frames", cfg.frames);
    read_key(j, "sequences", cfg.sequences);
    read_key(j, "focal", cfg.focal);
    if (j.contains("trajectory")) {
      const json& t = j.at("trajectory");
      read_key(t, "step", cfg.step);
      read_key(t, "yaw_deg", cfg.yaw_deg);
      read_key(t, "pitch_deg", cfg.pitch_deg);
      read_key(t, "bob", cfg.bob);
    }
    if (j.contains("room")) {
      const json& r = j.at("room");
      read_key(r, "half_width", cfg.room_half_width);
      read_key(r, "half_height", cfg.room_half_height);
      read_key(r, "back", cfg.room_back);
      read_key(r, "front", cfg.room_front);
      if (r.contains("texture")) cfg.wall_texture = parse_texture(r.at("texture"));
    }
    if (j.contains("boxes")) {
      cfg.boxes.clear();
      for (const json& b : j.at("boxes")) {
        BoxSpec box;
        box.min = parse_vec3(b.at("min"), "box min");
        box.max = parse_vec3(b.at("max"), "box max");
        if (b.contains("texture")) box.texture = parse_texture(b.at("texture"));
        cfg.boxes.push_back(box);
      }
    }
    if (j.contains("texture")) {
      const json& t = j.at("texture");
      read_key(t, "feature_size", cfg.feature_size);
      read_key(t, "octaves", cfg.octaves);
      read_key(t, "supersample", cfg.supersample);
    }
    if (j.contains("corruption") && !j.at("corruption").is_null()) {
      const json& c = j.at("corruption");
      CorruptionSpec spec;
      read_key(c, "scale_min", spec.scale_min);
      read_key(c, "scale_max", spec.scale_max);
      if (c.contains("rotation_sigma_deg")) {
        spec.rotation_sigma = c.at("rotation_sigma_deg").get<double>() * kDeg;
      }
      read_key(c, "translation_sigma", spec.translation_sigma);
      read_key(c, "drift", spec.drift);
      read_key(c, "seed", spec.seed);
      cfg.corruption = spec;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

SceneConfig load_scene_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return scene_config_from_json(ss.str());
}

std::string scene_config_to_json(const SceneConfig& cfg) {
  json j;
  j["width"] = cfg.width;
  j["height"] = cfg.height;
  j["frames"] = cfg.frames;
  j["sequences"] = cfg.sequences;
  j["focal"] = cfg.focal;
  j["trajectory"] = {{"step", cfg.step},
                     {"yaw_deg", cfg.yaw_deg},
                     {"pitch_deg", cfg.pitch_deg},
                     {"bob", cfg.bob}};
  j["room"] = {{"half_width", cfg.room_half_width},
               {"half_height", cfg.room_half_height},
               {"back", cfg.room_back},
               {"front", cfg.room_front},
               {"texture", texture_name(cfg.wall_texture)}};
  j["boxes"] = json::array();
  for (const auto& b : cfg.boxes) {
    j["boxes"].push_back({{"min", {b.min.x(), b.min.y(), b.min.z()}},
                          {"max", {b.max.x(), b.max.y(), b.max.z()}},
                          {"texture", texture_name(b.texture)}});
  }
  j["texture"] = {{"feature_size", cfg.feature_size},
                  {"octaves", cfg.octaves},
                  {"supersample", cfg.supersample}};
  if (cfg.corruption) {
    const auto& c = *cfg.corruption;
    j["corruption"] = {{"scale_min", c.scale_min},
                       {"scale_max", c.scale_max},
                       {"rotation_sigma_deg", c.rotation_sigma / kDeg},
                       {"translation_sigma", c.translation_sigma},
                       {"drift", c.drift},
                       {"seed", c.seed}};
  }
  return j.dump(2);
}

SceneDataset make_scene(const SceneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Intrinsics k{cfg.focal, cfg.focal, 0.5 * (cfg.width - 1), 0.5 * (cfg.height - 1),
               cfg.width, cfg.height};
  k.validate();

  SceneDataset out;
  out.surfaces.push_back({"room", cfg.wall_texture});
  for (std::size_t b = 0; b < cfg.boxes.size(); ++b) {
    out.surfaces.push_back({fmt::format("box_{}", b), cfg.boxes[b].texture});
  }

  for (int s = 0; s < cfg.sequences; ++s) {
    const std::uint64_t seq_seed = hash_combine(seed, static_cast<std::uint64_t>(s));
    std::mt19937_64 rng(seq_seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double phase = 2.0 * std::numbers::pi * uni(rng);
    const double off_x = 0.4 * (uni(rng) - 0.5);
    const double off_z = 0.4 * (uni(rng) - 0.5);
    const Renderer renderer(cfg, hash_combine(seq_seed, 0x7e47));

    Sequence seq;
    seq.id = fmt::format("seq_{:03d}", s);
    seq.intrinsics = k;
    SequencePoses gt;
    gt.sequence_id = seq.id;
    gt.intrinsics = k;
    for (int f = 0; f < cfg.frames; ++f) {
      Frame frame;
      frame.name = fmt::format("frame_{:03d}.png", f);
      const Pose pose = camera_pose(cfg, f, phase, off_x, off_z);
      const Vec3 center = -(pose.rotation.inverse() * pose.translation);
      if (!renderer.inside_free_space(center)) {
        throw ConfigError(fmt::format("camera of {} {} lies outside free space",
                                      seq.id, frame.name));
      }
      renderer.render(k, pose, frame.image, frame.gt_depth);
      frame.gt_pose = pose;
      gt.add(ImageEntry{f + 1, 1, frame.name, pose});
      seq.frames.push_back(std::move(frame));
    }
    seq.coarse = gt;
    out.data.sequences.push_back(std::move(seq));
    out.gt_poses.push_back(std::move(gt));
    out.scale.push_back(1.0);
  }
  return out;
}

CorruptedPoses corrupt_poses(const std::vector<SequencePoses>& gt,
                             const CorruptionSpec& spec) {
  spec.validate();
  CorruptedPoses out;
  for (std::size_t s = 0; s < gt.size(); ++s) {
    const SequencePoses& seq = gt[s];
    std::mt19937_64 rng(hash_combine(spec.seed, s));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    double k = spec.scale_min;
    if (spec.scale_max > spec.scale_min) {
      const double lo = std::log(spec.scale_min);
      const double hi = std::log(spec.scale_max);
      k = std::exp(lo + (hi - lo) * uni(rng));
    }

    std::vector<double> baselines;
    for (std::size_t i = 1; i < seq.entries.size(); ++i) {
      const Pose& a = seq.entries[i - 1].pose;
      const Pose& b = seq.entries[i].pose;
      const Vec3 ca = -(a.rotation.inverse() * a.translation);
      const Vec3 cb = -(b.rotation.inverse() * b.translation);
      baselines.push_back((cb - ca).norm());
    }
    const double sigma_t =
        baselines.empty() ? 0.0 : spec.translation_sigma * median(baselines);

    SequencePoses noisy;
    noisy.sequence_id = seq.sequence_id;
    noisy.intrinsics = seq.intrinsics;
    for (std::size_t i = 0; i < seq.entries.size(); ++i) {
      ImageEntry e = seq.entries[i];
      const Pose& p = e.pose;
      Vec3 rot_noise = Vec3::Zero();
      Vec3 center_noise = Vec3::Zero();
      for (int a = 0; a < 3; ++a) rot_noise[a] = spec.rotation_sigma * normal(rng);
      for (int a = 0; a < 3; ++a) center_noise[a] = sigma_t * normal(rng);
      const double factor = k * std::pow(1.0 + spec.drift, static_cast<double>(i));
      // Centre c' = factor (c + n) with c = -R^T t, then t' = -R' c'.
      Vec3 t = p.translation;
      if (sigma_t > 0.0) t -= p.rotation * center_noise;
      Pose q = p;
      if (spec.rotation_sigma > 0.0) {
        const Rotation rn = axis_angle_to_rotation(rot_noise);
        q.rotation = rn * p.rotation;
        t = rn * t;
      }
      q.translation = factor * t;
      e.pose = q;
      noisy.add(std::move(e));
    }
    out.coarse.push_back(std::move(noisy));
    out.scale.push_back(k);
  }
  return out;
}

SceneDataset make_dataset(const SceneConfig& cfg, std::uint64_t seed) {
  SceneDataset scene = make_scene(cfg, seed);
  if (cfg.corruption) {
    CorruptionSpec spec = *cfg.corruption;
    spec.seed = hash_combine(seed, spec.seed ^ 0xc0ffeeULL);
    CorruptedPoses c = corrupt_poses(scene.gt_poses, spec);
    for (std::size_t s = 0; s < c.coarse.size(); ++s) {
      scene.data.sequences[s].coarse = std::move(c.coarse[s]);
    }
    scene.scale = std::move(c.scale);
  }
  return scene;
}

}  // namespace geodepth
