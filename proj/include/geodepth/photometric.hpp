#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "geodepth/geometry.hpp"
#include "geodepth/image.hpp"

namespace geodepth {

/// Weight of the SSIM term in the reconstruction error.
inline constexpr double kSsimAlpha = 0.85;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// How a continuous sample coordinate was resolved along one image axis.
enum class AxisMode : std::uint8_t { kInterior, kClampLow, kClampHigh };

/// Discrete part of one bilinear lookup. Replaying a recorded tap freezes
/// the piecewise branch, which makes the warp a smooth function of depth and
/// pose in a neighbourhood of the recorded point.
struct SampleTap {
  std::int32_t x0 = 0;
  std::int32_t y0 = 0;
  AxisMode mode_x = AxisMode::kInterior;
  AxisMode mode_y = AxisMode::kInterior;
  bool front = false;

  bool in_bounds() const {
    return front && mode_x == AxisMode::kInterior &&
           mode_y == AxisMode::kInterior;
  }
};

struct WarpResult {
  /// Source resampled into the target view; zero where the point falls
  /// behind the source camera.
  Image image;
  /// Set where the reprojected point is in front of the source camera and
  /// all four bilinear taps lie inside the source image.
  Mask valid;
  std::vector<SampleTap> taps;
};

/// d loss / d pose for x -> R x + t, as a full 3x3 matrix plus vector.
struct PoseGradient {
  Mat3 rotation = Mat3::Zero();
  Vec3 translation = Vec3::Zero();

  PoseGradient& operator+=(const PoseGradient& o) {
    rotation += o.rotation;
    translation += o.translation;
    return *this;
  }
};

/// Inverse warp of `source` into the target view given target depth and the
/// target-to-source pose. Out-of-range samples use edge clamping and are
/// flagged invalid. Pass `frozen` to replay previously recorded taps.
WarpResult warp(const Image& source, const Image& depth, const Intrinsics& k,
                const Pose& pose, const std::vector<SampleTap>* frozen = nullptr);

/// Accumulates gradients of a scalar loss through warp() given
/// d loss / d warped image.
void warp_backward(const Image& source, const Image& depth, const Intrinsics& k,
                   const Pose& pose, const std::vector<SampleTap>& taps,
                   const Image& grad_image, Image& grad_depth,
                   PoseGradient& grad_pose);

/// Per-pixel SSIM + L1 error: alpha (1 - SSIM) / 2 + (1 - alpha) |a - b|,
/// both terms averaged over channels. SSIM uses 3x3 mean windows with reflect
/// padding. With `frozen_sign` (one entry per sample), |a - b| is evaluated
/// as sign * (a - b) so the L1 kink does not move.
Image recon_error(const Image& reconstructed, const Image& target,
                  const Grid<std::int8_t>* frozen_sign = nullptr);

/// Sign of a - b per sample (-1, 0 or +1).
Grid<std::int8_t> difference_sign(const Image& a, const Image& b);

/// d loss / d reconstructed, given d loss / d recon_error.
Image recon_error_backward(const Image& reconstructed, const Image& target,
                           const Image& grad_error);

struct MinRecon {
  /// Per-pixel minimum error over valid sources, +inf where none is valid.
  Image loss;
  Mask valid;
  /// Index of the source attaining the minimum, -1 where none is valid.
  Grid<std::int8_t> argmin;
};

/// Pixelwise minimum over sources. With `frozen_argmin`, the recorded source
/// choice is reused instead of re-evaluating the minimum.
MinRecon min_recon_loss(std::span<const Image> errors,
                        std::span<const Mask> valid,
                        const Grid<std::int8_t>* frozen_argmin = nullptr);

/// Convenience overload computing the errors from warped sources.
MinRecon min_recon_loss(const Image& target, std::span<const WarpResult> warped);

/// Keeps a pixel iff the best warped error is strictly below the best error
/// of the unwarped sources.
Mask automask(const MinRecon& warped, const Image& min_raw_error);
Mask automask(const Image& target, std::span<const Image> raw_sources,
              std::span<const WarpResult> warped);

/// Pixelwise minimum of recon_error(source, target) over unwarped sources.
Image min_raw_error(const Image& target, std::span<const Image> raw_sources);

/// Edge-aware smoothness of mean-normalised disparity, forward differences,
/// mean over x-differences plus mean over y-differences.
/// `frozen_sign` (H x W x 2: x then y differences) fixes the sign of each
/// disparity difference, as for recon_error.
double smoothness_loss(const Image& disparity, const Image& image,
                       const Grid<std::int8_t>* frozen_sign = nullptr);
/// Signs of the forward disparity differences, H x W x 2.
Grid<std::int8_t> smoothness_sign(const Image& disparity);
/// Accumulates grad_out * d smoothness / d disparity into grad_disparity.
void smoothness_backward(const Image& disparity, const Image& image,
                         double grad_out, Image& grad_disparity);

struct LossWeights {
  double beta = 0.2;      // residual-pose reconstruction term
  double lambda = 0.001;  // smoothness
  double isd_weight = 0.1;  // self-distillation
};

struct LossBreakdown {
  double rec_optim_t = 0.0;
  double rec_optim_r = 0.0;
  double smooth = 0.0;
  double isd = 0.0;
  double total = 0.0;
  /// Finest-scale per-pixel min-reprojection error (may be empty).
  Image min_error;
};

double total_loss(const LossBreakdown& parts, const LossWeights& weights = {});

}  // namespace geodepth
