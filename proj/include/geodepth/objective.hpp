#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "geodepth/dataset.hpp"
#include "geodepth/depth_field.hpp"
#include "geodepth/photometric.hpp"
#include "geodepth/pose_opt.hpp"

namespace geodepth {

struct ObjectiveOptions {
  /// Second reconstruction pass through the residual pose.
  bool optim_r = true;
  bool isd = true;
  bool automask = true;
  /// Whether the auto-mask also gates the residual-pose pass.
  bool automask_optim_r = true;
  LossWeights weights;
};

/// Everything the optimizer updates: one depth pyramid per frame (dataset
/// order) and PairAlignment::kNumParams values per training pair.
struct Model {
  std::vector<DepthPyramid> depth;
  std::vector<double> alignment;

  PairAlignment pair(std::size_t i) const;
  std::span<double> pair_params(std::size_t i);
};

struct ModelGradient {
  std::vector<std::vector<double>> depth;
  std::vector<double> alignment;

  static ModelGradient ZerosLike(const Model& m);
};

/// Discrete choices of one reconstruction pass at one scale.
struct PassRecord {
  std::vector<std::vector<SampleTap>> taps;  // per source
  std::vector<Grid<std::int8_t>> l1_sign;    // per source
  Grid<std::int8_t> argmin;
  Mask kept;
};

struct FrameRecord {
  std::array<PassRecord, kNumScales> t_pass;
  std::array<PassRecord, kNumScales> r_pass;
  std::array<Grid<std::int8_t>, kNumScales> smooth_sign;
  std::array<Grid<std::int8_t>, kNumScales> isd_sign;
  Image disp_best;
};

/// Discrete state of a whole evaluation: bilinear taps, min-source choice,
/// masks, signs inside absolute values and the self-distillation teacher.
/// Replaying it turns the loss into a smooth function around the recorded
/// point.
struct Record {
  std::vector<FrameRecord> frames;  // indexed like Model::depth
};

/// Full-batch training loss over every target frame with at least one pair.
class Objective {
 public:
  Objective(const Dataset& data, std::vector<TrainingPair> pairs, ObjectiveOptions opts);

  const std::vector<TrainingPair>& pairs() const { return pairs_; }
  const ObjectiveOptions& options() const { return opts_; }
  std::size_t frame_count() const { return frames_.size(); }
  int frame_index(int sequence, int frame) const;
  const Frame& frame(int index) const { return *frames_[index]; }
  const Intrinsics& intrinsics(int index) const { return *intrinsics_[index]; }
  /// Frames acting as targets, ascending.
  const std::vector<int>& targets() const { return targets_; }

  Model initial_model(const DisparityBounds& bounds, double init_depth) const;

  /// Mean over target frames of the per-frame breakdown. Accumulates the
  /// gradient of the total into `grad` when given (it must be shaped like the
  /// model). `record` captures the discrete state; `replay` reuses one.
  LossBreakdown evaluate(const Model& model, ModelGradient* grad = nullptr,
                         Record* record = nullptr, const Record* replay = nullptr) const;

  /// Breakdown for one target frame; min_error holds its finest-scale
  /// min-reprojection map. `weight` scales the accumulated gradient.
  LossBreakdown evaluate_frame(int frame, const Model& model, ModelGradient* grad,
                               double weight, FrameRecord* record = nullptr,
                               const FrameRecord* replay = nullptr) const;

 private:
  std::vector<const Frame*> frames_;
  std::vector<const Intrinsics*> intrinsics_;
  std::vector<int> sequence_offset_;
  std::vector<TrainingPair> pairs_;
  std::vector<std::vector<int>> pairs_of_target_;
  std::vector<int> targets_;
  std::vector<Image> min_raw_;
  ObjectiveOptions opts_;
};

}  // namespace geodepth
