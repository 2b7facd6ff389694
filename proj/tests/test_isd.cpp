#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "geodepth/isd.hpp"

using namespace geodepth;

namespace {

Image random_map(int h, int w, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Image m(h, w);
  for (double& v : m.data()) v = u(rng);
  return m;
}

}  // namespace

TEST_CASE("a single fold copies that scale") {
  std::mt19937_64 rng(1);
  const Image e = random_map(4, 4, rng), d = random_map(4, 4, rng);
  const DistillState s = fold_scale({}, e, d);
  CHECK(s.disp_best == d);
  CHECK(s.error_min == e);
  CHECK(s.folded == 1);
}

TEST_CASE("a strictly better scale takes over everywhere") {
  std::mt19937_64 rng(2);
  const Image e0 = random_map(4, 4, rng, 0.5, 1.0), d0 = random_map(4, 4, rng);
  const Image e1 = random_map(4, 4, rng, 0.0, 0.4), d1 = random_map(4, 4, rng);
  const DistillState s = fold_scale(fold_scale({}, e0, d0), e1, d1);
  CHECK(s.disp_best == d1);
  for (auto i : s.best_index.data()) CHECK(i == 1);
}

TEST_CASE("ties keep the earliest scale") {
  const Image e(2, 2, 1, 0.3);
  const Image d0(2, 2, 1, 1.0), d1(2, 2, 1, 2.0);
  const DistillState s = fold_scale(fold_scale({}, e, d0), e, d1);
  CHECK(s.disp_best == d0);
}

TEST_CASE("folding equals an exhaustive argmin on random stacks") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> level(0, 3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Image> errs, disps;
    for (int s = 0; s < 4; ++s) {
      // Quantised errors make ties common.
      Image e(8, 8);
      for (double& v : e.data()) v = 0.25 * level(rng);
      errs.push_back(e);
      disps.push_back(random_map(8, 8, rng));
    }
    DistillState state;
    for (int s = 0; s < 4; ++s) {
      const Image before = state.error_min;
      state = fold_scale(std::move(state), errs[s], disps[s]);
      if (s > 0) {
        for (std::size_t p = 0; p < before.size(); ++p) CHECK(state.error_min[p] <= before[p]);
      }
    }
    for (std::size_t p = 0; p < state.disp_best.size(); ++p) {
      int best = 0;
      for (int s = 1; s < 4; ++s) {
        if (errs[s][p] < errs[best][p]) best = s;
      }
      CHECK(state.best_index[p] == best);
      CHECK(state.disp_best[p] == disps[best][p]);
      CHECK(state.error_min[p] == errs[best][p]);
    }
  }
}

TEST_CASE("distillation loss values") {
  const Image best(4, 4, 1, 0.5);
  DistillState s = fold_scale({}, Image(4, 4, 1, 0.0), best);
  std::vector<Image> same(4, best);
  CHECK(isd_loss(s, same) == 0.0);
  std::vector<Image> one_off = same;
  for (double& v : one_off[2].data()) v += std::numbers::e - 1.0;
  CHECK(isd_loss(s, one_off) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("distillation loss matches a scalar sum of logs") {
  std::mt19937_64 rng(4);
  DistillState s = fold_scale({}, random_map(6, 6, rng), random_map(6, 6, rng));
  std::vector<Image> disps;
  for (int i = 0; i < 4; ++i) disps.push_back(random_map(6, 6, rng));
  double expected = 0.0;
  for (const Image& d : disps) {
    double sum = 0.0;
    for (int y = 0; y < 6; ++y) {
      for (int x = 0; x < 6; ++x) sum += std::log(std::abs(s.disp_best(y, x) - d(y, x)) + 1.0);
    }
    expected += sum / 36.0;
  }
  CHECK(isd_loss(s, disps) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("teacher receives no gradient and students match finite differences") {
  std::mt19937_64 rng(5);
  std::vector<Image> disps;
  for (int i = 0; i < 4; ++i) disps.push_back(random_map(6, 6, rng));
  DistillState s;
  for (int i = 0; i < 4; ++i) s = fold_scale(std::move(s), random_map(6, 6, rng), disps[i]);

  std::vector<Image> grads(4, Image(6, 6));
  isd_loss_backward(s, disps, 1.0, grads);
  // The teacher is a copy: moving the students leaves it fixed.
  const double h = 1e-6;
  for (int sc = 0; sc < 4; ++sc) {
    for (std::size_t p = 0; p < 36; p += 5) {
      if (s.disp_best[p] == disps[sc][p]) {
        CHECK(grads[sc][p] == 0.0);
        continue;
      }
      std::vector<Image> plus = disps, minus = disps;
      plus[sc][p] += h;
      minus[sc][p] -= h;
      const double fd = (isd_loss(s, plus) - isd_loss(s, minus)) / (2 * h);
      CHECK(grads[sc][p] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
  // Perturbing the teacher changes the loss value only.
  DistillState shifted = s;
  for (double& v : shifted.disp_best.data()) v += 0.1;
  CHECK(isd_loss(shifted, disps) != isd_loss(s, disps));
}

TEST_CASE("round loop runs n steps and rejects zero") {
  int calls = 0;
  const auto history = isd_round_loop(2, [&]() { return static_cast<double>(++calls); });
  CHECK(calls == 2);
  CHECK(history == std::vector<double>{1.0, 2.0});
  CHECK(isd_round_loop(1, [] { return 0.5; }).size() == 1);
  CHECK_THROWS_AS(isd_round_loop(0, [] { return 0.0; }), std::invalid_argument);
}
