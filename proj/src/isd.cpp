#include "geodepth/isd.hpp"

#include <cmath>
#include <stdexcept>

namespace geodepth {

DistillState fold_scale(DistillState state, const Image& error, const Image& disp) {
  if (!error.same_extent(disp)) {
    throw std::invalid_argument("fold_scale: error and disparity sizes differ");
  }
  const int index = state.folded;
  if (state.empty()) {
    state.disp_best = disp;
    state.error_min = error;
    state.best_index = Grid<std::int8_t>(disp.height(), disp.width(), 1, 0);
    state.folded = 1;
    return state;
  }
  if (!state.error_min.same_extent(error)) {
    throw std::invalid_argument("fold_scale: size differs from earlier scales");
  }
  for (std::size_t p = 0; p < error.size(); ++p) {
    if (error[p] < state.error_min[p]) {
      state.disp_best[p] = disp[p];
      state.error_min[p] = error[p];
      state.best_index[p] = static_cast<std::int8_t>(index);
    }
  }
  ++state.folded;
  return state;
}

double isd_loss(const DistillState& state, std::span<const Image> disps,
                std::span<const Grid<std::int8_t>> frozen_sign) {
  if (!frozen_sign.empty() && frozen_sign.size() != disps.size()) {
    throw std::invalid_argument("isd_loss: one sign grid per scale expected");
  }
  double total = 0.0;
  for (std::size_t s = 0; s < disps.size(); ++s) {
    const Image& d = disps[s];
    if (!d.same_extent(state.disp_best)) {
      throw std::invalid_argument("isd_loss: disparity size mismatch");
    }
    double sum = 0.0;
    for (std::size_t p = 0; p < d.size(); ++p) {
      const double diff = state.disp_best[p] - d[p];
      const double ad = frozen_sign.empty() ? std::abs(diff) : frozen_sign[s][p] * diff;
      sum += std::log(ad + 1.0);
    }
    total += sum / static_cast<double>(d.size());
  }
  return total;
}

void isd_loss_backward(const DistillState& state, std::span<const Image> disps,
                       double grad_out, std::span<Image> grad_disps) {
  for (std::size_t s = 0; s < disps.size(); ++s) {
    const Image& d = disps[s];
    const double scale = grad_out / static_cast<double>(d.size());
    for (std::size_t p = 0; p < d.size(); ++p) {
      const double diff = state.disp_best[p] - d[p];
      if (diff == 0.0) continue;
      // d/dd log(|b - d| + 1) = -sign(b - d) / (|b - d| + 1)
      const double sign = diff > 0.0 ? 1.0 : -1.0;
      grad_disps[s][p] -= scale * sign / (std::abs(diff) + 1.0);
    }
  }
}

std::vector<double> isd_round_loop(int iterations,
                                   const std::function<double()>& step) {
  if (iterations < 1) {
    throw std::invalid_argument("self-distillation needs at least one iteration");
  }
  std::vector<double> history;
  history.reserve(iterations);
  for (int i = 0; i < iterations; ++i) history.push_back(step());
  return history;
}

}  // namespace geodepth
