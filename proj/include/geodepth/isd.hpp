#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "geodepth/image.hpp"

namespace geodepth {

/// Running per-pixel selection of the lowest-error disparity across scales.
/// disp_best is a teacher signal: it never receives gradients.
struct DistillState {
  Image disp_best;
  Image error_min;
  /// Index of the folded map that supplied disp_best at each pixel.
  Grid<std::int8_t> best_index;
  int folded = 0;

  bool empty() const { return folded == 0; }
};

/// Folds one scale's error map and disparity into the state. The first fold
/// initialises the state; later folds replace a pixel only on a strictly
/// smaller error, so the earliest scale wins ties.
DistillState fold_scale(DistillState state, const Image& error, const Image& disp);

/// Sum over scales of mean log(|disp_best - disp_s| + 1). `frozen_sign`
/// (one grid per scale) fixes the sign inside |.|.
double isd_loss(const DistillState& state, std::span<const Image> disps,
                std::span<const Grid<std::int8_t>> frozen_sign = {});

/// Accumulates grad_out * d isd_loss / d disp_s into grad_disps[s].
/// disp_best is treated as a constant.
void isd_loss_backward(const DistillState& state, std::span<const Image> disps,
                       double grad_out, std::span<Image> grad_disps);

/// Runs `iterations` inner steps for one training sample and returns the
/// loss reported by each step. Throws std::invalid_argument for zero
/// iterations.
std::vector<double> isd_round_loop(int iterations,
                                   const std::function<double()>& step);

}  // namespace geodepth
