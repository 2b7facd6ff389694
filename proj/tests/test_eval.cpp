#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "geodepth/eval.hpp"

using namespace geodepth;

namespace {

Image from(std::initializer_list<double> v, int h, int w) {
  Image img(h, w);
  std::size_t i = 0;
  for (double x : v) img[i++] = x;
  return img;
}

// Same inputs as tests/data/make_eval_golden.py.
void golden_inputs(double k, Image& pred, Image& gt) {
  pred = Image(4, 4);
  gt = Image(4, 4);
  for (int i = 0; i < 16; ++i) {
    gt[i] = 1.0 + 0.25 * i;
    pred[i] = k * (0.5 + 0.37 * ((i * 7) % 16));
  }
  gt[5] = 0.0;
  gt[15] = 12.0;
}

}  // namespace

TEST_CASE("hand-computed metrics without alignment") {
  const Image gt = from({1, 1, 1, 1}, 2, 2);
  const Image pred = from({1, 1, 1, 1.25}, 2, 2);
  const Metrics m = compute_metrics(pred, gt, false);
  CHECK(m.abs_rel == doctest::Approx(0.0625));
  CHECK(m.sq_rel == doctest::Approx(0.015625));
  CHECK(m.rmse == doctest::Approx(0.125));
  CHECK(m.rmse_log == doctest::Approx(std::log(1.25) / 2.0));
  CHECK(m.d1 == 0.75);  // a ratio of exactly 1.25 is not below the threshold
  CHECK(m.d2 == 1.0);
  CHECK(m.d3 == 1.0);
  CHECK(m.scale == 1.0);
  CHECK(m.count == 4);
}

TEST_CASE("perfect prediction") {
  const Image gt = from({0.5, 1.5, 2.5, 3.5}, 2, 2);
  const Metrics m = compute_metrics(gt, gt, true);
  CHECK(m.abs_rel == 0.0);
  CHECK(m.rmse == 0.0);
  CHECK(m.d1 == 1.0);
  CHECK(m.scale == 1.0);
}

TEST_CASE("median alignment makes metrics invariant to a global scale") {
  Image pred, gt;
  golden_inputs(1.0, pred, gt);
  const Metrics base = compute_metrics(pred, gt, true);
  for (double k : {0.1, 1.0, 7.0}) {
    CAPTURE(k);
    Image scaled = pred;
    for (double& v : scaled.data()) v *= k;
    const Metrics m = compute_metrics(scaled, gt, true);
    CHECK(m.abs_rel == doctest::Approx(base.abs_rel).epsilon(1e-12));
    CHECK(m.sq_rel == doctest::Approx(base.sq_rel).epsilon(1e-12));
    CHECK(m.rmse == doctest::Approx(base.rmse).epsilon(1e-12));
    CHECK(m.rmse_log == doctest::Approx(base.rmse_log).epsilon(1e-12));
    CHECK(m.d1 == base.d1);
    CHECK(m.scale == doctest::Approx(base.scale / k).epsilon(1e-12));
  }
}

TEST_CASE("delta accuracies are ordered and bounded") {
  Image pred, gt;
  golden_inputs(1.0, pred, gt);
  const Metrics m = compute_metrics(pred, gt, true);
  CHECK(0.0 <= m.d1);
  CHECK(m.d1 <= m.d2);
  CHECK(m.d2 <= m.d3);
  CHECK(m.d3 <= 1.0);
}

TEST_CASE("invalid ground truth is ignored and predictions are clamped") {
  const Image gt = from({0.0, 2.0, 20.0, 2.0}, 2, 2);
  const Image pred = from({5.0, 2.0, 5.0, 50.0}, 2, 2);
  const Metrics m = compute_metrics(pred, gt, false);
  CHECK(m.count == 2);
  CHECK(m.abs_rel == doctest::Approx(0.5 * (10.0 - 2.0) / 2.0));
}

TEST_CASE("scale spread") {
  const double two[] = {1.0, 3.0};
  CHECK(scale_std(two) == 1.0);
  const double same[] = {2.0, 2.0, 2.0};
  CHECK(scale_std(same) == 0.0);
  const double one[] = {1.0};
  CHECK_THROWS_AS(scale_std(one), std::invalid_argument);
  const EvalSummary s = summarize({"x"}, {Metrics{}});
  CHECK(std::isnan(s.scale_std));
}

TEST_CASE("error cases") {
  CHECK_THROWS_AS(compute_metrics(Image(2, 2, 1, 1.0), Image(2, 3, 1, 1.0), true),
                  std::invalid_argument);
  CHECK_THROWS_AS(compute_metrics(Image(2, 2, 1, 1.0), Image(2, 2, 1, 0.0), true),
                  std::invalid_argument);
  CHECK_THROWS_AS(summarize({"a", "b"}, {Metrics{}}), std::invalid_argument);
  CHECK_THROWS_AS(summarize({}, {}), std::invalid_argument);
}

TEST_CASE("metrics CSV matches the NumPy golden file") {
  Image pa, pb, gt;
  golden_inputs(1.0, pa, gt);
  golden_inputs(3.0, pb, gt);
  const EvalSummary s =
      summarize({"a", "b"}, {compute_metrics(pa, gt, true), compute_metrics(pb, gt, true)});
  std::ifstream in(std::string(GEODEPTH_TEST_DATA) + "/eval_golden.csv");
  REQUIRE(in);
  std::stringstream golden;
  golden << in.rdbuf();
  CHECK(metrics_csv(s) == golden.str());
}

TEST_CASE("table row follows the header column order") {
  Metrics m;
  m.abs_rel = 0.1234;
  m.d1 = 0.9;
  EvalSummary s = summarize({"a", "b"}, {m, m});
  const std::string header = metrics_table_header();
  const std::string row = metrics_table_row("full", s);
  CHECK(header.find("scale_std") < header.find("AbsRel"));
  CHECK(row.rfind("full", 0) == 0);
  CHECK(row.find("0.1234") != std::string::npos);
  CHECK(row.find("0.000") < row.find("0.1234"));
}
