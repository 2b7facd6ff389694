#pragma once

#include <span>
#include <vector>

#include "geodepth/image.hpp"

namespace geodepth {

inline constexpr int kNumScales = 4;

struct DisparityBounds {
  double min_disp = 0.1;
  double max_disp = 10.0;

  static DisparityBounds FromDepthRange(double min_depth, double max_depth) {
    return {1.0 / max_depth, 1.0 / min_depth};
  }
};

/// Disparity of a single logit: min + (max - min) * sigmoid(logit).
double logit_to_disparity(double logit, const DisparityBounds& bounds);
/// d disparity / d logit.
double logit_to_disparity_derivative(double logit, const DisparityBounds& bounds);
/// Inverse of logit_to_disparity for a depth inside the bounds.
double logit_for_depth(double depth, const DisparityBounds& bounds);

/// Optimizable stand-in for a depth decoder: one logit grid per scale,
/// scale s having resolution (H / 2^s) x (W / 2^s). All logits live in a
/// single contiguous buffer so an optimizer can treat them as one block.
class DepthPyramid {
 public:
  DepthPyramid() = default;
  /// height and width must be divisible by 2^(kNumScales - 1).
  DepthPyramid(int height, int width, DisparityBounds bounds = {},
               double init_logit = 0.0);

  int height() const { return height_; }
  int width() const { return width_; }
  const DisparityBounds& bounds() const { return bounds_; }

  int grid_height(int scale) const { return height_ >> scale; }
  int grid_width(int scale) const { return width_ >> scale; }

  std::span<double> logits(int scale);
  std::span<const double> logits(int scale) const;
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

 private:
  int height_ = 0;
  int width_ = 0;
  DisparityBounds bounds_;
  std::vector<double> params_;
  std::vector<std::size_t> offsets_;
};

/// Bilinear upsampling by an integer factor with half-pixel alignment and
/// edge clamping (the align_corners=False convention).
Image upsample_bilinear(const Image& grid, int factor);
/// Transpose of upsample_bilinear: scatters full-resolution gradients back
/// onto a grid of the given size.
Image upsample_bilinear_adjoint(const Image& full, int factor, int grid_height,
                                int grid_width);

/// Disparity at the grid resolution of one scale.
Image coarse_disparity(const DepthPyramid& pyr, int scale);
/// Disparity of scale `scale` brought to H x W.
Image predict_full_res(const DepthPyramid& pyr, int scale);
/// Accumulates d loss / d logits(scale) given d loss / d disparity (H x W).
void predict_full_res_backward(const DepthPyramid& pyr, int scale,
                               const Image& grad_disparity,
                               std::span<double> grad_logits);

Image disparity_to_depth(const Image& disparity);

}  // namespace geodepth
