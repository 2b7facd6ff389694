#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "geodepth/image.hpp"

namespace geodepth {

struct EvalOptions {
  bool median_align = true;
  /// Ground truth outside this range is ignored; predictions are clamped to it
  /// after alignment.
  double min_depth = 0.1;
  double max_depth = 10.0;
};

struct Metrics {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
  /// median(gt) / median(pred); 1 without alignment.
  double scale = 1.0;
  std::size_t count = 0;
};

/// Throws std::invalid_argument when no pixel has valid ground truth.
Metrics compute_metrics(const Image& pred, const Image& gt, const EvalOptions& opts = {});
/// Shorthand with default depth range.
Metrics compute_metrics(const Image& pred, const Image& gt, bool median_align);

/// Population standard deviation; throws std::invalid_argument for fewer than
/// two factors.
double scale_std(std::span<const double> factors);

struct EvalSummary {
  std::vector<std::string> names;
  std::vector<Metrics> per_image;
  /// Unweighted mean of the per-image metrics.
  Metrics mean;
  /// Spread of the per-image scale factors; NaN with fewer than two images.
  double scale_std = 0.0;
};

EvalSummary summarize(std::vector<std::string> names, std::vector<Metrics> per_image);

/// CSV with one row per image followed by a "mean" row.
std::string metrics_csv(const EvalSummary& s);
/// Column order: scale_std, AbsRel, SqRel, RMSE, RMSElog, d1, d2, d3.
std::string metrics_table_header();
std::string metrics_table_row(const std::string& label, const EvalSummary& s);

}  // namespace geodepth
