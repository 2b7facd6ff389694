#include "geodepth/depth_field.hpp"

#include <cmath>
#include <stdexcept>

namespace geodepth {
namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Source taps and weight of the upper tap for every output coordinate.
struct AxisTaps {
  std::vector<int> lo;
  std::vector<int> hi;
  std::vector<double> frac;
};

AxisTaps axis_taps(int out_size, int in_size, int factor) {
  AxisTaps taps;
  taps.lo.resize(out_size);
  taps.hi.resize(out_size);
  taps.frac.resize(out_size);
  for (int i = 0; i < out_size; ++i) {
    double src = (i + 0.5) / factor - 0.5;
    if (src < 0.0) src = 0.0;
    int lo = static_cast<int>(src);
    if (lo > in_size - 1) lo = in_size - 1;
    const int hi = lo + 1 < in_size ? lo + 1 : in_size - 1;
    taps.lo[i] = lo;
    taps.hi[i] = hi;
    taps.frac[i] = hi == lo ? 0.0 : src - lo;
  }
  return taps;
}

}  // namespace

double logit_to_disparity(double logit, const DisparityBounds& bounds) {
  return bounds.min_disp + (bounds.max_disp - bounds.min_disp) * sigmoid(logit);
}

double logit_to_disparity_derivative(double logit,
                                     const DisparityBounds& bounds) {
  const double s = sigmoid(logit);
  return (bounds.max_disp - bounds.min_disp) * s * (1.0 - s);
}

double logit_for_depth(double depth, const DisparityBounds& bounds) {
  const double p =
      (1.0 / depth - bounds.min_disp) / (bounds.max_disp - bounds.min_disp);
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("depth outside the disparity bounds");
  }
  return std::log(p / (1.0 - p));
}

DepthPyramid::DepthPyramid(int height, int width, DisparityBounds bounds,
                           double init_logit)
    : height_(height), width_(width), bounds_(bounds) {
  const int div = 1 << (kNumScales - 1);
  if (height <= 0 || width <= 0 || height % div != 0 || width % div != 0) {
    throw std::invalid_argument("depth pyramid size must be a positive multiple of 8");
  }
  if (!(bounds.min_disp > 0.0 && bounds.max_disp > bounds.min_disp)) {
    throw std::invalid_argument("invalid disparity bounds");
  }
  std::size_t total = 0;
  for (int s = 0; s < kNumScales; ++s) {
    offsets_.push_back(total);
    total += static_cast<std::size_t>(grid_height(s)) * grid_width(s);
  }
  offsets_.push_back(total);
  params_.assign(total, init_logit);
}

std::span<double> DepthPyramid::logits(int scale) {
  return std::span<double>(params_).subspan(
      offsets_[scale], offsets_[scale + 1] - offsets_[scale]);
}

std::span<const double> DepthPyramid::logits(int scale) const {
  return std::span<const double>(params_).subspan(
      offsets_[scale], offsets_[scale + 1] - offsets_[scale]);
}

Image upsample_bilinear(const Image& grid, int factor) {
  const int gh = grid.height();
  const int gw = grid.width();
  const int h = gh * factor;
  const int w = gw * factor;
  const AxisTaps ty = axis_taps(h, gh, factor);
  const AxisTaps tx = axis_taps(w, gw, factor);
  Image out(h, w, grid.channels());
  for (int y = 0; y < h; ++y) {
    const double fy = ty.frac[y];
    for (int x = 0; x < w; ++x) {
      const double fx = tx.frac[x];
      for (int c = 0; c < grid.channels(); ++c) {
        const double top = (1.0 - fx) * grid(ty.lo[y], tx.lo[x], c) +
                           fx * grid(ty.lo[y], tx.hi[x], c);
        const double bottom = (1.0 - fx) * grid(ty.hi[y], tx.lo[x], c) +
                              fx * grid(ty.hi[y], tx.hi[x], c);
        out(y, x, c) = (1.0 - fy) * top + fy * bottom;
      }
    }
  }
  return out;
}

Image upsample_bilinear_adjoint(const Image& full, int factor, int grid_height,
                                int grid_width) {
  if (full.height() != grid_height * factor ||
      full.width() != grid_width * factor) {
    throw std::invalid_argument("upsample adjoint: shape mismatch");
  }
  const AxisTaps ty = axis_taps(full.height(), grid_height, factor);
  const AxisTaps tx = axis_taps(full.width(), grid_width, factor);
  Image out(grid_height, grid_width, full.channels());
  for (int y = 0; y < full.height(); ++y) {
    const double fy = ty.frac[y];
    for (int x = 0; x < full.width(); ++x) {
      const double fx = tx.frac[x];
      for (int c = 0; c < full.channels(); ++c) {
        const double g = full(y, x, c);
        out(ty.lo[y], tx.lo[x], c) += (1.0 - fy) * (1.0 - fx) * g;
        out(ty.lo[y], tx.hi[x], c) += (1.0 - fy) * fx * g;
        out(ty.hi[y], tx.lo[x], c) += fy * (1.0 - fx) * g;
        out(ty.hi[y], tx.hi[x], c) += fy * fx * g;
      }
    }
  }
  return out;
}

Image coarse_disparity(const DepthPyramid& pyr, int scale) {
  const auto logits = pyr.logits(scale);
  Image disp(pyr.grid_height(scale), pyr.grid_width(scale));
  for (std::size_t i = 0; i < logits.size(); ++i) {
    disp[i] = logit_to_disparity(logits[i], pyr.bounds());
  }
  return disp;
}

Image predict_full_res(const DepthPyramid& pyr, int scale) {
  if (scale < 0 || scale >= kNumScales) {
    throw std::out_of_range("scale index out of range");
  }
  return upsample_bilinear(coarse_disparity(pyr, scale), 1 << scale);
}

void predict_full_res_backward(const DepthPyramid& pyr, int scale,
                               const Image& grad_disparity,
                               std::span<double> grad_logits) {
  const Image g = upsample_bilinear_adjoint(
      grad_disparity, 1 << scale, pyr.grid_height(scale), pyr.grid_width(scale));
  const auto logits = pyr.logits(scale);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    grad_logits[i] += g[i] * logit_to_disparity_derivative(logits[i], pyr.bounds());
  }
}

Image disparity_to_depth(const Image& disparity) {
  Image depth(disparity.height(), disparity.width(), disparity.channels());
  for (std::size_t i = 0; i < disparity.size(); ++i) {
    depth[i] = 1.0 / disparity[i];
  }
  return depth;
}

}  // namespace geodepth
