#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "geodepth/dataset.hpp"
#include "geodepth/geometry.hpp"

namespace geodepth {

/// Per-pair refinement of a coarse relative pose: translation rescale and
/// shift, plus a residual rigid motion applied on top.
struct PairAlignment {
  static constexpr int kNumParams = 10;

  double log_scale = 0.0;
  Vec3 delta_t = Vec3::Zero();
  Vec3 residual_axis_angle = Vec3::Zero();
  Vec3 residual_t = Vec3::Zero();

  double scale() const;

  /// Parameter order: log_scale, delta_t, residual_axis_angle, residual_t.
  std::array<double, kNumParams> pack() const;
  static PairAlignment unpack(std::span<const double> params);
};

/// Keeps the coarse rotation; translation becomes s * t + delta_t.
Pose apply_alignment(const Pose& coarse, const PairAlignment& a);
/// exp(residual) composed after the aligned pose.
Pose apply_residual(const Pose& aligned, const PairAlignment& a);

struct TrainingPair {
  int sequence = 0;
  int target = 0;  // frame index within the sequence
  int source = 0;
  int offset = 0;  // +1 forward neighbour, -1 backward
  Pose coarse;
  std::optional<Pose> gt;
  PairAlignment alignment;
};

struct PairList {
  std::vector<TrainingPair> pairs;
  /// Ordered pairs dropped because a frame is missing from the coarse poses.
  int skipped = 0;
};

/// One entry per ordered (target, adjacent source) pair of every sequence.
PairList enumerate_pairs(const Dataset& data, std::span<const SequencePoses> coarse);
/// Uses the coarse poses stored with each sequence.
PairList enumerate_pairs(const Dataset& data);

}  // namespace geodepth
