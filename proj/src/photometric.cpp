#include "geodepth/photometric.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace geodepth {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct AxisSample {
  AxisMode mode = AxisMode::kInterior;
  int lo = 0;
  double frac = 0.0;
};

AxisSample resolve_axis(double u, int size) {
  AxisSample s;
  if (u < 0.0) {
    s.mode = AxisMode::kClampLow;
    s.lo = 0;
    s.frac = 0.0;
  } else if (u > size - 1) {
    s.mode = AxisMode::kClampHigh;
    s.lo = size - 2;
    s.frac = 1.0;
  } else {
    s.lo = std::min(static_cast<int>(u), size - 2);
    s.frac = u - s.lo;
  }
  return s;
}

AxisSample replay_axis(double u, AxisMode mode, int lo) {
  AxisSample s{mode, lo, 0.0};
  switch (mode) {
    case AxisMode::kInterior: s.frac = u - lo; break;
    case AxisMode::kClampLow: s.frac = 0.0; break;
    case AxisMode::kClampHigh: s.frac = 1.0; break;
  }
  return s;
}

int reflect(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

// Window moments of one channel for every pixel.
struct SsimStats {
  Image mu_x, mu_y, xx, yy, xy;
};

// Sum of the 3-tap reflected neighbourhood along one row.
void row_sum3(const double* src, double* dst, int w) {
  dst[0] = src[0] + 2.0 * src[1];
  for (int q = 1; q < w - 1; ++q) dst[q] = src[q - 1] + src[q] + src[q + 1];
  dst[w - 1] = src[w - 1] + 2.0 * src[w - 2];
}

// 3x3 box mean with reflect padding, computed as two 3-tap passes.
void box_mean(const std::vector<double>& in, int h, int w, Image& out) {
  thread_local std::vector<double> rows;
  rows.resize(static_cast<std::size_t>(h) * w);
  for (int r = 0; r < h; ++r) {
    row_sum3(in.data() + static_cast<std::size_t>(r) * w,
             rows.data() + static_cast<std::size_t>(r) * w, w);
  }
  double* dst = out.data().data();
  for (int r = 0; r < h; ++r) {
    const double* up = rows.data() + static_cast<std::size_t>(reflect(r - 1, h)) * w;
    const double* mid = rows.data() + static_cast<std::size_t>(r) * w;
    const double* down = rows.data() + static_cast<std::size_t>(reflect(r + 1, h)) * w;
    double* o = dst + static_cast<std::size_t>(r) * w;
    for (int q = 0; q < w; ++q) o[q] = (up[q] + mid[q] + down[q]) / 9.0;
  }
}

// Transpose of box_mean: spreads every entry over its reflected window.
std::vector<double> box_mean_adjoint(const std::vector<double>& in, int h, int w) {
  thread_local std::vector<double> cols;
  cols.assign(static_cast<std::size_t>(h) * w, 0.0);
  for (int r = 0; r < h; ++r) {
    const double* src = in.data() + static_cast<std::size_t>(r) * w;
    for (const int rr : {reflect(r - 1, h), r, reflect(r + 1, h)}) {
      double* dst = cols.data() + static_cast<std::size_t>(rr) * w;
      for (int q = 0; q < w; ++q) dst[q] += src[q];
    }
  }
  // Row transpose: reflection makes the edge taps fold onto their neighbours.
  std::vector<double> out(cols.size());
  for (int r = 0; r < h; ++r) {
    const double* src = cols.data() + static_cast<std::size_t>(r) * w;
    double* dst = out.data() + static_cast<std::size_t>(r) * w;
    if (w < 4) {
      std::fill(dst, dst + w, 0.0);
      for (int q = 0; q < w; ++q) {
        const double v = src[q] / 9.0;
        dst[reflect(q - 1, w)] += v;
        dst[q] += v;
        dst[reflect(q + 1, w)] += v;
      }
      continue;
    }
    dst[0] = (src[0] + src[1]) / 9.0;
    dst[1] = (2.0 * src[0] + src[1] + src[2]) / 9.0;
    for (int q = 2; q < w - 2; ++q) dst[q] = (src[q - 1] + src[q] + src[q + 1]) / 9.0;
    dst[w - 2] = (2.0 * src[w - 1] + src[w - 2] + src[w - 3]) / 9.0;
    dst[w - 1] = (src[w - 1] + src[w - 2]) / 9.0;
  }
  return out;
}

SsimStats window_stats(const Image& x, const Image& y, int c) {
  const int h = x.height();
  const int w = x.width();
  const std::size_t n = x.pixel_count();
  std::vector<double> a(n), b(n), aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = x.data()[i * x.channels() + c];
    b[i] = y.data()[i * y.channels() + c];
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  SsimStats s{Image(h, w), Image(h, w), Image(h, w), Image(h, w), Image(h, w)};
  box_mean(a, h, w, s.mu_x);
  box_mean(b, h, w, s.mu_y);
  box_mean(aa, h, w, s.xx);
  box_mean(bb, h, w, s.yy);
  box_mean(ab, h, w, s.xy);
  return s;
}

void check_pair(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("image shapes differ");
  if (a.height() < 2 || a.width() < 2) {
    throw std::invalid_argument("images must be at least 2x2");
  }
}

}  // namespace

WarpResult warp(const Image& source, const Image& depth, const Intrinsics& k,
                const Pose& pose, const std::vector<SampleTap>* frozen) {
  const int h = depth.height();
  const int w = depth.width();
  const int sh = source.height();
  const int sw = source.width();
  const int nc = source.channels();
  if (sh < 2 || sw < 2) throw std::invalid_argument("source too small to sample");
  if (frozen != nullptr && frozen->size() != depth.pixel_count()) {
    throw std::invalid_argument("frozen taps do not match depth size");
  }
  const Mat3 r = pose.rotation.matrix();
  const Vec3& t = pose.translation;

  WarpResult out{Image(h, w, nc), Mask(h, w), std::vector<SampleTap>(depth.pixel_count())};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const Vec3 cam = r * (depth(y, x) * k.backproject(x, y)) + t;
      SampleTap tap;
      tap.front = frozen ? (*frozen)[i].front : cam.z() > 0.0;
      if (!tap.front) {
        out.taps[i] = tap;
        continue;
      }
      const double u = k.fx * cam.x() / cam.z() + k.cx;
      const double v = k.fy * cam.y() / cam.z() + k.cy;
      AxisSample ax, ay;
      if (frozen) {
        ax = replay_axis(u, (*frozen)[i].mode_x, (*frozen)[i].x0);
        ay = replay_axis(v, (*frozen)[i].mode_y, (*frozen)[i].y0);
      } else {
        ax = resolve_axis(u, sw);
        ay = resolve_axis(v, sh);
      }
      tap.x0 = ax.lo;
      tap.y0 = ay.lo;
      tap.mode_x = ax.mode;
      tap.mode_y = ay.mode;
      out.taps[i] = tap;
      out.valid(y, x) = tap.in_bounds() ? 1 : 0;
      for (int c = 0; c < nc; ++c) {
        const double i00 = source(ay.lo, ax.lo, c);
        const double i10 = source(ay.lo, ax.lo + 1, c);
        const double i01 = source(ay.lo + 1, ax.lo, c);
        const double i11 = source(ay.lo + 1, ax.lo + 1, c);
        out.image(y, x, c) =
            (1.0 - ay.frac) * ((1.0 - ax.frac) * i00 + ax.frac * i10) +
            ay.frac * ((1.0 - ax.frac) * i01 + ax.frac * i11);
      }
    }
  }
  return out;
}

void warp_backward(const Image& source, const Image& depth, const Intrinsics& k,
                   const Pose& pose, const std::vector<SampleTap>& taps,
                   const Image& grad_image, Image& grad_depth,
                   PoseGradient& grad_pose) {
  const int h = depth.height();
  const int w = depth.width();
  const int nc = source.channels();
  const Mat3 r = pose.rotation.matrix();
  const Vec3& t = pose.translation;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const SampleTap& tap = taps[i];
      if (!tap.front) continue;
      const bool move_x = tap.mode_x == AxisMode::kInterior;
      const bool move_y = tap.mode_y == AxisMode::kInterior;
      if (!move_x && !move_y) continue;

      const Vec3 ray = k.backproject(x, y);
      const Vec3 pt = depth(y, x) * ray;
      const Vec3 cam = r * pt + t;
      const double u = k.fx * cam.x() / cam.z() + k.cx;
      const double v = k.fy * cam.y() / cam.z() + k.cy;
      const AxisSample ax = replay_axis(u, tap.mode_x, tap.x0);
      const AxisSample ay = replay_axis(v, tap.mode_y, tap.y0);

      double gu = 0.0;
      double gv = 0.0;
      for (int c = 0; c < nc; ++c) {
        const double g = grad_image(y, x, c);
        if (g == 0.0) continue;
        const double i00 = source(ay.lo, ax.lo, c);
        const double i10 = source(ay.lo, ax.lo + 1, c);
        const double i01 = source(ay.lo + 1, ax.lo, c);
        const double i11 = source(ay.lo + 1, ax.lo + 1, c);
        if (move_x) {
          gu += g * ((1.0 - ay.frac) * (i10 - i00) + ay.frac * (i11 - i01));
        }
        if (move_y) {
          gv += g * ((1.0 - ax.frac) * (i01 - i00) + ax.frac * (i11 - i10));
        }
      }
      if (gu == 0.0 && gv == 0.0) continue;

      const double iz = 1.0 / cam.z();
      const Vec3 g_cam(gu * k.fx * iz, gv * k.fy * iz,
                       -(gu * k.fx * cam.x() + gv * k.fy * cam.y()) * iz * iz);
      grad_depth(y, x) += g_cam.dot(r * ray);
      grad_pose.rotation += g_cam * pt.transpose();
      grad_pose.translation += g_cam;
    }
  }
}

Grid<std::int8_t> difference_sign(const Image& a, const Image& b) {
  check_pair(a, b);
  Grid<std::int8_t> sign(a.height(), a.width(), a.channels());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sign[i] = static_cast<std::int8_t>((d > 0.0) - (d < 0.0));
  }
  return sign;
}

Image recon_error(const Image& reconstructed, const Image& target,
                  const Grid<std::int8_t>* frozen_sign) {
  check_pair(reconstructed, target);
  if (frozen_sign && !frozen_sign->same_shape(target)) {
    throw std::invalid_argument("frozen sign shape differs from image");
  }
  const int h = target.height();
  const int w = target.width();
  const int nc = target.channels();
  Image err(h, w);
  for (int c = 0; c < nc; ++c) {
    const SsimStats s = window_stats(reconstructed, target, c);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double mx = s.mu_x(y, x);
        const double my = s.mu_y(y, x);
        const double vx = s.xx(y, x) - mx * mx;
        const double vy = s.yy(y, x) - my * my;
        const double cxy = s.xy(y, x) - mx * my;
        const double ssim = (2.0 * mx * my + kSsimC1) * (2.0 * cxy + kSsimC2) /
                            ((mx * mx + my * my + kSsimC1) * (vx + vy + kSsimC2));
        const double diff = reconstructed(y, x, c) - target(y, x, c);
        const double l1 =
            frozen_sign ? (*frozen_sign)(y, x, c) * diff : std::abs(diff);
        err(y, x) += kSsimAlpha * 0.5 * (1.0 - ssim) + (1.0 - kSsimAlpha) * l1;
      }
    }
  }
  for (auto& e : err.data()) e /= nc;
  return err;
}

Image recon_error_backward(const Image& reconstructed, const Image& target,
                           const Image& grad_error) {
  check_pair(reconstructed, target);
  const int h = target.height();
  const int w = target.width();
  const int nc = target.channels();
  Image grad(h, w, nc);
  const std::size_t n = target.pixel_count();
  std::vector<double> coef_a(n), coef_b(n), coef_c(n);
  for (int c = 0; c < nc; ++c) {
    const SsimStats s = window_stats(reconstructed, target, c);
    std::fill(coef_a.begin(), coef_a.end(), 0.0);
    std::fill(coef_b.begin(), coef_b.end(), 0.0);
    std::fill(coef_c.begin(), coef_c.end(), 0.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double g = grad_error(y, x) / nc;
        if (g == 0.0) continue;
        const double diff = reconstructed(y, x, c) - target(y, x, c);
        if (diff != 0.0) {
          grad(y, x, c) += g * (1.0 - kSsimAlpha) * (diff > 0.0 ? 1.0 : -1.0);
        }

        const double mx = s.mu_x(y, x);
        const double my = s.mu_y(y, x);
        const double vx = s.xx(y, x) - mx * mx;
        const double vy = s.yy(y, x) - my * my;
        const double cxy = s.xy(y, x) - mx * my;
        const double n1 = 2.0 * mx * my + kSsimC1;
        const double n2 = 2.0 * cxy + kSsimC2;
        const double d1 = mx * mx + my * my + kSsimC1;
        const double d2 = vx + vy + kSsimC2;
        const double ssim = n1 * n2 / (d1 * d2);
        const double ds_dmu = 2.0 * my * n2 / (d1 * d2) - ssim * 2.0 * mx / d1;
        const double ds_dvar = -ssim / d2;
        const double ds_dcov = 2.0 * n1 / (d1 * d2);
        // Chain through mean, second moment and cross moment of x.
        const double g_ssim = -g * kSsimAlpha * 0.5;
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        coef_a[p] = g_ssim * (ds_dmu - 2.0 * mx * ds_dvar - my * ds_dcov);
        coef_b[p] = g_ssim * 2.0 * ds_dvar;
        coef_c[p] = g_ssim * ds_dcov;
      }
    }
    const std::vector<double> sa = box_mean_adjoint(coef_a, h, w);
    const std::vector<double> sb = box_mean_adjoint(coef_b, h, w);
    const std::vector<double> sc = box_mean_adjoint(coef_c, h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        grad(y, x, c) += sa[p] + sb[p] * reconstructed(y, x, c) + sc[p] * target(y, x, c);
      }
    }
  }
  return grad;
}

MinRecon min_recon_loss(std::span<const Image> errors, std::span<const Mask> valid,
                        const Grid<std::int8_t>* frozen_argmin) {
  if (errors.empty() || errors.size() != valid.size()) {
    throw std::invalid_argument("min_recon_loss: need one mask per error map");
  }
  const int h = errors[0].height();
  const int w = errors[0].width();
  MinRecon out{Image(h, w, 1, kInf), Mask(h, w), Grid<std::int8_t>(h, w, 1, -1)};
  for (std::size_t p = 0; p < out.loss.size(); ++p) {
    int best = -1;
    if (frozen_argmin != nullptr) {
      best = (*frozen_argmin)[p];
    } else {
      double best_err = kInf;
      for (std::size_t j = 0; j < errors.size(); ++j) {
        if (valid[j][p] && errors[j][p] < best_err) {
          best_err = errors[j][p];
          best = static_cast<int>(j);
        }
      }
    }
    if (best >= 0) {
      out.loss[p] = errors[best][p];
      out.valid[p] = 1;
      out.argmin[p] = static_cast<std::int8_t>(best);
    }
  }
  return out;
}

MinRecon min_recon_loss(const Image& target, std::span<const WarpResult> warped) {
  std::vector<Image> errors;
  std::vector<Mask> valid;
  for (const auto& w : warped) {
    errors.push_back(recon_error(w.image, target));
    valid.push_back(w.valid);
  }
  return min_recon_loss(errors, valid);
}

Image min_raw_error(const Image& target, std::span<const Image> raw_sources) {
  Image out(target.height(), target.width(), 1, kInf);
  for (const auto& src : raw_sources) {
    const Image e = recon_error(src, target);
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = std::min(out[p], e[p]);
  }
  return out;
}

Mask automask(const MinRecon& warped, const Image& min_raw) {
  Mask keep(warped.loss.height(), warped.loss.width());
  for (std::size_t p = 0; p < keep.size(); ++p) {
    keep[p] = warped.valid[p] && warped.loss[p] < min_raw[p] ? 1 : 0;
  }
  return keep;
}

Mask automask(const Image& target, std::span<const Image> raw_sources,
              std::span<const WarpResult> warped) {
  return automask(min_recon_loss(target, warped), min_raw_error(target, raw_sources));
}

Grid<std::int8_t> smoothness_sign(const Image& disparity) {
  const int h = disparity.height();
  const int w = disparity.width();
  Grid<std::int8_t> sign(h, w, 2);
  auto sgn = [](double v) { return static_cast<std::int8_t>((v > 0.0) - (v < 0.0)); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (x + 1 < w) sign(y, x, 0) = sgn(disparity(y, x) - disparity(y, x + 1));
      if (y + 1 < h) sign(y, x, 1) = sgn(disparity(y, x) - disparity(y + 1, x));
    }
  }
  return sign;
}

double smoothness_loss(const Image& disparity, const Image& image,
                       const Grid<std::int8_t>* frozen_sign) {
  const int h = disparity.height();
  const int w = disparity.width();
  const int nc = image.channels();
  double mean = 0.0;
  for (double d : disparity.data()) mean += d;
  mean /= static_cast<double>(disparity.size());

  double sum_x = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      double gi = 0.0;
      for (int c = 0; c < nc; ++c) gi += std::abs(image(y, x, c) - image(y, x + 1, c));
      const double d = disparity(y, x) - disparity(y, x + 1);
      const double ad = frozen_sign ? (*frozen_sign)(y, x, 0) * d : std::abs(d);
      sum_x += ad / mean * std::exp(-gi / nc);
    }
  }
  double sum_y = 0.0;
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double gi = 0.0;
      for (int c = 0; c < nc; ++c) gi += std::abs(image(y, x, c) - image(y + 1, x, c));
      const double d = disparity(y, x) - disparity(y + 1, x);
      const double ad = frozen_sign ? (*frozen_sign)(y, x, 1) * d : std::abs(d);
      sum_y += ad / mean * std::exp(-gi / nc);
    }
  }
  double loss = 0.0;
  if (w > 1) loss += sum_x / (static_cast<double>(h) * (w - 1));
  if (h > 1) loss += sum_y / (static_cast<double>(h - 1) * w);
  return loss;
}

void smoothness_backward(const Image& disparity, const Image& image,
                         double grad_out, Image& grad_disparity) {
  const int h = disparity.height();
  const int w = disparity.width();
  const int nc = image.channels();
  const double n = static_cast<double>(disparity.size());
  double mean = 0.0;
  for (double d : disparity.data()) mean += d;
  mean /= n;

  // Gradient w.r.t. the normalised map d* = d / mean.
  Image g_norm(h, w);
  auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
  if (w > 1) {
    const double scale = grad_out / (static_cast<double>(h) * (w - 1));
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x + 1 < w; ++x) {
        double gi = 0.0;
        for (int c = 0; c < nc; ++c) gi += std::abs(image(y, x, c) - image(y, x + 1, c));
        const double g =
            scale * std::exp(-gi / nc) * sign(disparity(y, x) - disparity(y, x + 1));
        g_norm(y, x) += g;
        g_norm(y, x + 1) -= g;
      }
    }
  }
  if (h > 1) {
    const double scale = grad_out / (static_cast<double>(h - 1) * w);
    for (int y = 0; y + 1 < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double gi = 0.0;
        for (int c = 0; c < nc; ++c) gi += std::abs(image(y, x, c) - image(y + 1, x, c));
        const double g =
            scale * std::exp(-gi / nc) * sign(disparity(y, x) - disparity(y + 1, x));
        g_norm(y, x) += g;
        g_norm(y + 1, x) -= g;
      }
    }
  }
  double dot = 0.0;
  for (std::size_t p = 0; p < g_norm.size(); ++p) dot += g_norm[p] * disparity[p];
  const double corr = dot / (mean * mean * n);
  for (std::size_t p = 0; p < g_norm.size(); ++p) {
    grad_disparity[p] += g_norm[p] / mean - corr;
  }
}

double total_loss(const LossBreakdown& parts, const LossWeights& weights) {
  return parts.rec_optim_t + weights.beta * parts.rec_optim_r +
         weights.lambda * parts.smooth + weights.isd_weight * parts.isd;
}

}  // namespace geodepth
