#include "geodepth/objective.hpp"

#include <cmath>
#include <stdexcept>

#include "geodepth/isd.hpp"

namespace geodepth {
namespace {

struct PassOutput {
  std::vector<WarpResult> warps;
  std::vector<Image> errors;
  MinRecon min;
  Mask kept;
  std::size_t kept_count = 0;
  double loss = 0.0;
};

// One reconstruction pass of the target from its sources under `poses`.
PassOutput run_pass(const Image& target, const std::vector<const Image*>& sources,
                    const std::vector<Pose>& poses, const Image& depth,
                    const Intrinsics& k, const Image* min_raw,
                    const PassRecord* replay) {
  PassOutput out;
  std::vector<Mask> valid;
  for (std::size_t j = 0; j < sources.size(); ++j) {
    out.warps.push_back(warp(*sources[j], depth, k, poses[j],
                             replay ? &replay->taps[j] : nullptr));
    out.errors.push_back(recon_error(out.warps[j].image, target,
                                     replay ? &replay->l1_sign[j] : nullptr));
    valid.push_back(out.warps[j].valid);
  }
  out.min = min_recon_loss(out.errors, valid, replay ? &replay->argmin : nullptr);
  if (replay) {
    out.kept = replay->kept;
  } else if (min_raw) {
    out.kept = automask(out.min, *min_raw);
  } else {
    out.kept = out.min.valid;
  }
  double sum = 0.0;
  for (std::size_t p = 0; p < out.kept.size(); ++p) {
    if (out.kept[p]) {
      sum += out.min.loss[p];
      ++out.kept_count;
    }
  }
  out.loss = out.kept_count ? sum / static_cast<double>(out.kept_count) : 0.0;
  return out;
}

PassRecord make_record(const PassOutput& pass, const Image& target) {
  PassRecord r;
  for (const auto& w : pass.warps) {
    r.taps.push_back(w.taps);
    r.l1_sign.push_back(difference_sign(w.image, target));
  }
  r.argmin = pass.min.argmin;
  r.kept = pass.kept;
  return r;
}

// Backpropagates `weight` * pass.loss into depth and per-source pose gradients.
void backward_pass(const PassOutput& pass, double weight, const Image& target,
                   const std::vector<const Image*>& sources,
                   const std::vector<Pose>& poses, const Image& depth,
                   const Intrinsics& k, Image& grad_depth,
                   std::vector<PoseGradient>& grad_poses) {
  if (pass.kept_count == 0 || weight == 0.0) return;
  const double g = weight / static_cast<double>(pass.kept_count);
  std::vector<Image> grad_err(sources.size(), Image(depth.height(), depth.width()));
  std::vector<bool> touched(sources.size(), false);
  for (std::size_t p = 0; p < pass.kept.size(); ++p) {
    if (!pass.kept[p]) continue;
    const int j = pass.min.argmin[p];
    grad_err[j][p] += g;
    touched[j] = true;
  }
  for (std::size_t j = 0; j < sources.size(); ++j) {
    if (!touched[j]) continue;
    const Image grad_img = recon_error_backward(pass.warps[j].image, target, grad_err[j]);
    warp_backward(*sources[j], depth, k, poses[j], pass.warps[j].taps, grad_img,
                  grad_depth, grad_poses[j]);
  }
}

}  // namespace

PairAlignment Model::pair(std::size_t i) const {
  return PairAlignment::unpack(std::span<const double>(alignment).subspan(
      i * PairAlignment::kNumParams, PairAlignment::kNumParams));
}

std::span<double> Model::pair_params(std::size_t i) {
  return std::span<double>(alignment).subspan(i * PairAlignment::kNumParams,
                                              PairAlignment::kNumParams);
}

ModelGradient ModelGradient::ZerosLike(const Model& m) {
  ModelGradient g;
  for (const auto& d : m.depth) g.depth.emplace_back(d.parameters().size(), 0.0);
  g.alignment.assign(m.alignment.size(), 0.0);
  return g;
}

Objective::Objective(const Dataset& data, std::vector<TrainingPair> pairs,
                     ObjectiveOptions opts)
    : pairs_(std::move(pairs)), opts_(opts) {
  for (const auto& seq : data.sequences) {
    sequence_offset_.push_back(static_cast<int>(frames_.size()));
    for (const auto& f : seq.frames) {
      frames_.push_back(&f);
      intrinsics_.push_back(&seq.intrinsics);
    }
  }
  if (pairs_.empty()) throw std::invalid_argument("no usable training pairs");
  pairs_of_target_.resize(frames_.size());
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    const int t = frame_index(pairs_[i].sequence, pairs_[i].target);
    pairs_of_target_[t].push_back(static_cast<int>(i));
  }
  min_raw_.resize(frames_.size());
  for (std::size_t f = 0; f < frames_.size(); ++f) {
    if (pairs_of_target_[f].empty()) continue;
    targets_.push_back(static_cast<int>(f));
    std::vector<Image> raw;
    for (int p : pairs_of_target_[f]) {
      raw.push_back(frames_[frame_index(pairs_[p].sequence, pairs_[p].source)]->image);
    }
    min_raw_[f] = min_raw_error(frames_[f]->image, raw);
  }
}

int Objective::frame_index(int sequence, int frame) const {
  return sequence_offset_.at(sequence) + frame;
}

Model Objective::initial_model(const DisparityBounds& bounds, double init_depth) const {
  Model m;
  const double logit = logit_for_depth(init_depth, bounds);
  for (const Frame* f : frames_) {
    m.depth.emplace_back(f->image.height(), f->image.width(), bounds, logit);
  }
  m.alignment.resize(pairs_.size() * PairAlignment::kNumParams);
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    const auto packed = pairs_[i].alignment.pack();
    std::copy(packed.begin(), packed.end(), m.pair_params(i).begin());
  }
  return m;
}

LossBreakdown Objective::evaluate(const Model& model, ModelGradient* grad,
                                  Record* record, const Record* replay) const {
  if (record) record->frames.assign(frames_.size(), FrameRecord{});
  LossBreakdown total;
  const double w = 1.0 / static_cast<double>(targets_.size());
  for (int f : targets_) {
    const LossBreakdown b =
        evaluate_frame(f, model, grad, w, record ? &record->frames[f] : nullptr,
                       replay ? &replay->frames[f] : nullptr);
    total.rec_optim_t += w * b.rec_optim_t;
    total.rec_optim_r += w * b.rec_optim_r;
    total.smooth += w * b.smooth;
    total.isd += w * b.isd;
  }
  total.total = total_loss(total, opts_.weights);
  return total;
}

LossBreakdown Objective::evaluate_frame(int f, const Model& model, ModelGradient* grad,
                                        double weight, FrameRecord* record,
                                        const FrameRecord* replay) const {
  const Frame& tgt = *frames_[f];
  const Intrinsics& k = *intrinsics_[f];
  const DepthPyramid& pyr = model.depth[f];
  const std::vector<int>& pair_ids = pairs_of_target_[f];
  if (pair_ids.empty()) throw std::invalid_argument("frame has no training pairs");

  const std::size_t n_src = pair_ids.size();
  std::vector<const Image*> sources;
  std::vector<PairAlignment> align;
  std::vector<Pose> pose_t;
  std::vector<Pose> pose_r;
  for (int p : pair_ids) {
    const TrainingPair& tp = pairs_[p];
    sources.push_back(&frames_[frame_index(tp.sequence, tp.source)]->image);
    align.push_back(model.pair(p));
    pose_t.push_back(apply_alignment(tp.coarse, align.back()));
    pose_r.push_back(apply_residual(pose_t.back(), align.back()));
  }
  const Image* mask_t = opts_.automask ? &min_raw_[f] : nullptr;
  const Image* mask_r = opts_.automask && opts_.automask_optim_r ? &min_raw_[f] : nullptr;

  std::array<Image, kNumScales> disps;
  std::array<Image, kNumScales> depths;
  std::array<PassOutput, kNumScales> t_pass;
  std::array<PassOutput, kNumScales> r_pass;
  LossBreakdown out;
  DistillState state;
  for (int s = 0; s < kNumScales; ++s) {
    disps[s] = predict_full_res(pyr, s);
    depths[s] = disparity_to_depth(disps[s]);
    t_pass[s] = run_pass(tgt.image, sources, pose_t, depths[s], k, mask_t,
                         replay ? &replay->t_pass[s] : nullptr);
    out.rec_optim_t += t_pass[s].loss / kNumScales;
    if (opts_.optim_r) {
      r_pass[s] = run_pass(tgt.image, sources, pose_r, depths[s], k, mask_r,
                           replay ? &replay->r_pass[s] : nullptr);
      out.rec_optim_r += r_pass[s].loss / kNumScales;
    }
    out.smooth += smoothness_loss(disps[s], tgt.image,
                                  replay ? &replay->smooth_sign[s] : nullptr) /
                  kNumScales;
    if (record) record->smooth_sign[s] = smoothness_sign(disps[s]);
    if (opts_.isd && !replay) state = fold_scale(std::move(state), t_pass[s].min.loss, disps[s]);
    if (record) {
      record->t_pass[s] = make_record(t_pass[s], tgt.image);
      if (opts_.optim_r) record->r_pass[s] = make_record(r_pass[s], tgt.image);
    }
  }
  if (opts_.isd) {
    if (replay) {
      state.disp_best = replay->disp_best;
      state.folded = kNumScales;
    }
    out.isd = isd_loss(state, disps,
                       replay ? std::span<const Grid<std::int8_t>>(replay->isd_sign)
                              : std::span<const Grid<std::int8_t>>()) /
              kNumScales;
    if (record) {
      record->disp_best = state.disp_best;
      for (int s = 0; s < kNumScales; ++s) {
        record->isd_sign[s] = difference_sign(state.disp_best, disps[s]);
      }
    }
  }
  out.total = total_loss(out, opts_.weights);
  out.min_error = t_pass[0].min.loss;
  if (!grad) return out;

  const LossWeights& lw = opts_.weights;
  const double w_rec = weight / kNumScales;
  std::vector<PoseGradient> g_t(n_src);
  std::vector<PoseGradient> g_r(n_src);
  std::array<Image, kNumScales> grad_disp;
  for (int s = 0; s < kNumScales; ++s) grad_disp[s] = Image(disps[s].height(), disps[s].width());
  if (opts_.isd) isd_loss_backward(state, disps, weight * lw.isd_weight / kNumScales, grad_disp);

  std::span<double> g_depth(grad->depth[f]);
  for (int s = 0; s < kNumScales; ++s) {
    Image grad_depth(depths[s].height(), depths[s].width());
    backward_pass(t_pass[s], w_rec, tgt.image, sources, pose_t, depths[s], k, grad_depth, g_t);
    if (opts_.optim_r) {
      backward_pass(r_pass[s], w_rec * lw.beta, tgt.image, sources, pose_r, depths[s], k,
                    grad_depth, g_r);
    }
    // depth = 1 / disparity
    for (std::size_t p = 0; p < grad_depth.size(); ++p) {
      grad_disp[s][p] -= grad_depth[p] / (disps[s][p] * disps[s][p]);
    }
    smoothness_backward(disps[s], tgt.image, w_rec * lw.lambda, grad_disp[s]);
    const auto offset = static_cast<std::size_t>(pyr.logits(s).data() - pyr.parameters().data());
    predict_full_res_backward(pyr, s, grad_disp[s], g_depth.subspan(offset, pyr.logits(s).size()));
  }

  for (std::size_t j = 0; j < n_src; ++j) {
    const TrainingPair& tp = pairs_[pair_ids[j]];
    const PairAlignment& a = align[j];
    const Vec3& t_star = pose_t[j].translation;
    Vec3 g_tstar = g_t[j].translation;
    Vec3 g_rot = Vec3::Zero();
    Vec3 g_rt = Vec3::Zero();
    if (opts_.optim_r) {
      const Mat3 r_res = axis_angle_to_rotation(a.residual_axis_angle).matrix();
      const Mat3 r_full = pose_r[j].rotation.matrix();
      const Vec3& g_tr = g_r[j].translation;
      g_rt = g_tr;
      g_tstar += r_res.transpose() * g_tr;
      const Mat3 m = g_r[j].rotation * r_full.transpose();
      const Vec3 omega = vee(m - m.transpose()) + (r_res * t_star).cross(g_tr);
      g_rot = left_jacobian(a.residual_axis_angle).transpose() * omega;
    }
    std::span<double> g = std::span<double>(grad->alignment)
                              .subspan(pair_ids[j] * PairAlignment::kNumParams,
                                       PairAlignment::kNumParams);
    g[0] += g_tstar.dot(a.scale() * tp.coarse.translation);
    for (int i = 0; i < 3; ++i) {
      g[1 + i] += g_tstar[i];
      g[4 + i] += g_rot[i];
      g[7 + i] += g_rt[i];
    }
  }
  return out;
}

}  // namespace geodepth
