#include "geodepth/pose_opt.hpp"

#include <cmath>
#include <stdexcept>

namespace geodepth {

double PairAlignment::scale() const { return std::exp(log_scale); }

std::array<double, PairAlignment::kNumParams> PairAlignment::pack() const {
  return {log_scale,
          delta_t.x(),
          delta_t.y(),
          delta_t.z(),
          residual_axis_angle.x(),
          residual_axis_angle.y(),
          residual_axis_angle.z(),
          residual_t.x(),
          residual_t.y(),
          residual_t.z()};
}

PairAlignment PairAlignment::unpack(std::span<const double> p) {
  if (p.size() != kNumParams) {
    throw std::invalid_argument("pair alignment expects 10 parameters");
  }
  PairAlignment a;
  a.log_scale = p[0];
  a.delta_t = {p[1], p[2], p[3]};
  a.residual_axis_angle = {p[4], p[5], p[6]};
  a.residual_t = {p[7], p[8], p[9]};
  return a;
}

Pose apply_alignment(const Pose& coarse, const PairAlignment& a) {
  return Pose{coarse.rotation, a.scale() * coarse.translation + a.delta_t};
}

Pose apply_residual(const Pose& aligned, const PairAlignment& a) {
  const Pose residual{axis_angle_to_rotation(a.residual_axis_angle), a.residual_t};
  return compose(residual, aligned);
}

PairList enumerate_pairs(const Dataset& data, std::span<const SequencePoses> coarse) {
  if (coarse.size() != data.sequences.size()) {
    throw std::invalid_argument("need one coarse pose table per sequence");
  }
  PairList out;
  for (std::size_t s = 0; s < data.sequences.size(); ++s) {
    const Sequence& seq = data.sequences[s];
    const int n = static_cast<int>(seq.frames.size());
    for (int t = 0; t < n; ++t) {
      for (const int offset : {+1, -1}) {
        const int src = t + offset;
        if (src < 0 || src >= n) continue;
        const std::string& tn = seq.frames[t].name;
        const std::string& sn = seq.frames[src].name;
        if (!coarse[s].contains(tn) || !coarse[s].contains(sn)) {
          ++out.skipped;
          continue;
        }
        TrainingPair p;
        p.sequence = static_cast<int>(s);
        p.target = t;
        p.source = src;
        p.offset = offset;
        p.coarse = coarse_relative(coarse[s], tn, sn);
        if (seq.frames[t].gt_pose && seq.frames[src].gt_pose) {
          p.gt = relative_pose(*seq.frames[t].gt_pose, *seq.frames[src].gt_pose);
        }
        out.pairs.push_back(std::move(p));
      }
    }
  }
  return out;
}

PairList enumerate_pairs(const Dataset& data) {
  std::vector<SequencePoses> coarse;
  coarse.reserve(data.sequences.size());
  for (const auto& s : data.sequences) coarse.push_back(s.coarse);
  return enumerate_pairs(data, coarse);
}

}  // namespace geodepth
