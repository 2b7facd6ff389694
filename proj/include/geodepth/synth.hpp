#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "geodepth/colmap_io.hpp"
#include "geodepth/dataset.hpp"
#include "geodepth/geometry.hpp"

namespace geodepth {

enum class TextureDensity { kHigh, kLow };

/// Axis-aligned box resting in the room.
struct BoxSpec {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
  TextureDensity texture = TextureDensity::kHigh;
};

/// Noise added to ground-truth poses to imitate monocular structure from
/// motion output.
struct CorruptionSpec {
  /// Per-sequence translation scale, drawn log-uniformly from this range.
  double scale_min = 0.5;
  double scale_max = 2.0;
  /// Per-frame rotation noise, radians per axis.
  double rotation_sigma = 0.3 * 3.14159265358979323846 / 180.0;
  /// Per-frame camera-centre noise as a fraction of the median baseline.
  double translation_sigma = 0.01;
  /// Multiplicative scale drift per frame within a sequence.
  double drift = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

std::vector<BoxSpec> default_boxes();

/// Camera moving inside a box-shaped room (y points down, z forward).
struct SceneConfig {
  int width = 64;
  int height = 64;
  int frames = 8;
  int sequences = 1;
  double focal = 52.0;

  /// Lateral camera step between frames.
  double step = 0.15;
  /// Amplitude of the yaw and pitch oscillation, degrees.
  double yaw_deg = 3.0;
  double pitch_deg = 1.0;
  /// Vertical and forward wobble amplitude.
  double bob = 0.02;

  double room_half_width = 1.6;
  double room_half_height = 1.2;
  double room_back = 3.2;
  double room_front = -1.0;
  std::vector<BoxSpec> boxes = default_boxes();
  /// Walls, floor and ceiling texture.
  TextureDensity wall_texture = TextureDensity::kHigh;

  /// Lattice spacing of the coarsest noise octave, scene units.
  double feature_size = 0.35;
  int octaves = 2;
  /// Sub-samples per pixel axis for colour (depth uses the pixel centre).
  int supersample = 3;

  std::optional<CorruptionSpec> corruption;

  /// Throws ConfigError on degenerate settings.
  void validate() const;
};

/// Parses a JSON config; missing keys keep their defaults.
SceneConfig scene_config_from_json(const std::string& text);
SceneConfig load_scene_config(const std::string& path);
std::string scene_config_to_json(const SceneConfig& config);

struct SurfaceInfo {
  std::string name;
  TextureDensity texture = TextureDensity::kHigh;
};

struct SceneDataset {
  /// Frames carry ground-truth depth and pose; `coarse` holds the ground-truth
  /// poses until replaced by corrupted ones.
  Dataset data;
  std::vector<SequencePoses> gt_poses;
  std::vector<SurfaceInfo> surfaces;
  /// Per-sequence translation scale applied by the corruption (1 if none).
  std::vector<double> scale;
};

SceneDataset make_scene(const SceneConfig& config, std::uint64_t seed);

struct CorruptedPoses {
  std::vector<SequencePoses> coarse;
  std::vector<double> scale;
};

/// Rescales each sequence's translations by one random factor and perturbs
/// every frame's rotation and camera centre independently.
CorruptedPoses corrupt_poses(const std::vector<SequencePoses>& gt,
                             const CorruptionSpec& spec);

/// make_scene followed by corrupt_poses when the config has a corruption
/// section; the coarse poses are stored in each sequence.
SceneDataset make_dataset(const SceneConfig& config, std::uint64_t seed);

}  // namespace geodepth
