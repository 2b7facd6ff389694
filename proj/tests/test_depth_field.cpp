#include <doctest.h>

#include <cmath>
#include <random>

#include "geodepth/depth_field.hpp"

using namespace geodepth;

namespace {

double rel_err(double a, double f) {
  return std::abs(a - f) / std::max({std::abs(a), std::abs(f), 1e-6});
}

// Weight of source index i for output index o under half-pixel upsampling.
double hat(int o, int i, int factor, int n) {
  double u = (o + 0.5) / factor - 0.5;
  u = std::clamp(u, 0.0, static_cast<double>(n - 1));
  const int lo = static_cast<int>(std::floor(u));
  const int hi = std::min(lo + 1, n - 1);
  const double f = u - lo;
  double w = 0.0;
  if (lo == i) w += 1.0 - f;
  if (hi == i) w += f;
  return w;
}

}  // namespace

TEST_CASE("zero logits give the mid-range disparity") {
  const DisparityBounds b{0.1, 10.0};
  DepthPyramid pyr(16, 8, b);
  for (int s = 0; s < kNumScales; ++s) {
    const Image disp = predict_full_res(pyr, s);
    for (double d : disp.data()) CHECK(d == doctest::Approx(5.05).epsilon(1e-15));
  }
}

TEST_CASE("disparity saturates monotonically towards max") {
  const DisparityBounds b{0.1, 10.0};
  double prev = 0.0;
  for (double logit : {-5.0, 0.0, 5.0, 20.0}) {
    const double d = logit_to_disparity(logit, b);
    CHECK(d > prev);
    CHECK(d < 10.0);
    prev = d;
  }
  CHECK(logit_to_disparity(40.0, b) == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("logit for depth inverts the mapping") {
  const DisparityBounds b = DisparityBounds::FromDepthRange(0.1, 10.0);
  CHECK(b.min_disp == doctest::Approx(0.1));
  CHECK(b.max_disp == doctest::Approx(10.0));
  for (double depth : {0.2, 1.0, 2.0, 7.5}) {
    CHECK(1.0 / logit_to_disparity(logit_for_depth(depth, b), b) ==
          doctest::Approx(depth).epsilon(1e-12));
  }
  CHECK_THROWS_AS(logit_for_depth(20.0, b), std::invalid_argument);
}

TEST_CASE("disparity to depth is the reciprocal") {
  Image d(1, 3);
  d[0] = 0.5;
  d[1] = 0.1;
  d[2] = 10.0;
  const Image z = disparity_to_depth(d);
  CHECK(z[0] == 2.0);
  CHECK(z[1] == doctest::Approx(10.0));
  CHECK(z[2] == doctest::Approx(0.1));
}

TEST_CASE("single hot logit spreads as the separable bilinear kernel") {
  const DisparityBounds b{0.0 + 1e-9, 1.0};
  DepthPyramid pyr(16, 16, b, -50.0);
  const int gy = 3, gx = 2;
  auto grid = pyr.logits(1);
  grid[gy * pyr.grid_width(1) + gx] = 50.0;
  const Image full = predict_full_res(pyr, 1);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const double expected = b.min_disp + (b.max_disp - b.min_disp) *
                                               hat(y, gy, 2, 8) * hat(x, gx, 2, 8);
      CHECK(full(y, x) == doctest::Approx(expected).epsilon(1e-9));
    }
  }
}

TEST_CASE("full-res prediction matches a scalar pipeline") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  const DisparityBounds b{0.1, 10.0};
  DepthPyramid pyr(16, 24, b);
  for (double& v : pyr.parameters()) v = n(rng);
  for (int s = 0; s < kNumScales; ++s) {
    const int f = 1 << s;
    const int gh = pyr.grid_height(s), gw = pyr.grid_width(s);
    const auto logits = pyr.logits(s);
    const Image full = predict_full_res(pyr, s);
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 24; ++x) {
        double expected = 0.0;
        for (int i = 0; i < gh; ++i) {
          for (int j = 0; j < gw; ++j) {
            const double w = hat(y, i, f, gh) * hat(x, j, f, gw);
            if (w != 0.0) expected += w * logit_to_disparity(logits[i * gw + j], b);
          }
        }
        CHECK(full(y, x) == doctest::Approx(expected).epsilon(1e-12));
        CHECK(1.0 / full(y, x) == doctest::Approx(disparity_to_depth(full)(y, x)));
      }
    }
  }
}

TEST_CASE("raising a logit raises disparity and lowers depth") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  DepthPyramid pyr(8, 8);
  for (double& v : pyr.parameters()) v = n(rng);
  const Image before = predict_full_res(pyr, 0);
  pyr.logits(0)[27] += 0.1;
  const Image after = predict_full_res(pyr, 0);
  CHECK(after[27] > before[27]);
  CHECK(1.0 / after[27] < 1.0 / before[27]);
}

TEST_CASE("prediction gradients match finite differences") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  DepthPyramid pyr(8, 8);
  for (double& v : pyr.parameters()) v = n(rng);
  Image weights(8, 8);
  for (double& v : weights.data()) v = n(rng);
  for (int s = 0; s < kNumScales; ++s) {
    auto objective = [&](const DepthPyramid& p) {
      const Image d = predict_full_res(p, s);
      double sum = 0.0;
      for (std::size_t i = 0; i < d.size(); ++i) sum += weights[i] * d[i];
      return sum;
    };
    std::vector<double> grad(pyr.logits(s).size(), 0.0);
    predict_full_res_backward(pyr, s, weights, grad);
    const double h = 1e-4;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      DepthPyramid plus = pyr, minus = pyr;
      plus.logits(s)[i] += h;
      minus.logits(s)[i] -= h;
      const double fd = (objective(plus) - objective(minus)) / (2 * h);
      CHECK(rel_err(grad[i], fd) < 1e-4);
    }
  }
}

TEST_CASE("upsampling adjoint is the transpose") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  Image g(4, 3), f(16, 12);
  for (double& v : g.data()) v = n(rng);
  for (double& v : f.data()) v = n(rng);
  const Image up = upsample_bilinear(g, 4);
  const Image down = upsample_bilinear_adjoint(f, 4, 4, 3);
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < up.size(); ++i) lhs += up[i] * f[i];
  for (std::size_t i = 0; i < down.size(); ++i) rhs += down[i] * g[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("pyramid shape validation") {
  CHECK_THROWS_AS(DepthPyramid(12, 8), std::invalid_argument);
  CHECK_THROWS_AS(DepthPyramid(8, 8, DisparityBounds{1.0, 0.5}), std::invalid_argument);
  const DepthPyramid pyr(16, 32);
  CHECK(pyr.grid_height(3) == 2);
  CHECK(pyr.grid_width(3) == 4);
  CHECK(pyr.parameters().size() == 16 * 32 + 8 * 16 + 4 * 8 + 2 * 4);
  CHECK_THROWS_AS(predict_full_res(pyr, 4), std::out_of_range);
}
