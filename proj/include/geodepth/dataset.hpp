#pragma once

#include <optional>
#include <string>
#include <vector>

#include "geodepth/colmap_io.hpp"
#include "geodepth/geometry.hpp"
#include "geodepth/image.hpp"

namespace geodepth {

struct Frame {
  std::string name;
  Image image;     // RGB in [0, 1]
  Image gt_depth;  // empty when unknown; zero marks invalid pixels
  std::optional<Pose> gt_pose;
};

/// Frames of one capture sequence, in capture order.
struct Sequence {
  std::string id;
  Intrinsics intrinsics;
  std::vector<Frame> frames;
  /// Coarse structure-from-motion poses; frames may be missing from it.
  SequencePoses coarse;
};

struct Dataset {
  std::vector<Sequence> sequences;

  std::size_t frame_count() const {
    std::size_t n = 0;
    for (const auto& s : sequences) n += s.frames.size();
    return n;
  }
};

/// On-disk layout, one directory per sequence:
///   <root>/<seq>/rgb/<frame>.png       8-bit RGB
///   <root>/<seq>/depth/<frame>.png     16-bit depth in millimetres (optional)
///   <root>/<seq>/sparse/{cameras,images}.txt   coarse poses
///   <root>/<seq>/gt/{cameras,images}.txt       ground-truth poses (optional)
void save_dataset(const std::string& root, const Dataset& data,
                  const std::vector<SequencePoses>* gt_poses = nullptr);
/// Throws IoError naming the first missing file.
Dataset load_dataset(const std::string& root);

}  // namespace geodepth
