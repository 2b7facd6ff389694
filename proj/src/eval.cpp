#include "geodepth/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace geodepth {
namespace {

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace

Metrics compute_metrics(const Image& pred, const Image& gt, const EvalOptions& opts) {
  if (!pred.same_shape(gt) || gt.channels() != 1) {
    throw std::invalid_argument("prediction and ground truth shapes differ");
  }
  std::vector<double> p;
  std::vector<double> g;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] > opts.min_depth && gt[i] < opts.max_depth && pred[i] > 0.0) {
      p.push_back(pred[i]);
      g.push_back(gt[i]);
    }
  }
  if (p.empty()) throw std::invalid_argument("no pixel with valid ground truth");

  Metrics m;
  m.count = p.size();
  if (opts.median_align) {
    const double med_p = median_of(p);
    const double med_g = median_of(g);
    m.scale = med_g / med_p;
    for (double& v : p) v = v / med_p * med_g;
  }
  double abs_rel = 0, sq_rel = 0, se = 0, se_log = 0;
  std::size_t n1 = 0, n2 = 0, n3 = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = std::clamp(p[i], opts.min_depth, opts.max_depth);
    const double gi = g[i];
    const double diff = pi - gi;
    abs_rel += std::abs(diff) / gi;
    sq_rel += diff * diff / gi;
    se += diff * diff;
    const double dl = std::log(pi) - std::log(gi);
    se_log += dl * dl;
    const double ratio = std::max(pi / gi, gi / pi);
    n1 += ratio < 1.25;
    n2 += ratio < 1.25 * 1.25;
    n3 += ratio < 1.25 * 1.25 * 1.25;
  }
  const double n = static_cast<double>(p.size());
  m.abs_rel = abs_rel / n;
  m.sq_rel = sq_rel / n;
  m.rmse = std::sqrt(se / n);
  m.rmse_log = std::sqrt(se_log / n);
  m.d1 = static_cast<double>(n1) / n;
  m.d2 = static_cast<double>(n2) / n;
  m.d3 = static_cast<double>(n3) / n;
  return m;
}

Metrics compute_metrics(const Image& pred, const Image& gt, bool median_align) {
  EvalOptions opts;
  opts.median_align = median_align;
  return compute_metrics(pred, gt, opts);
}

double scale_std(std::span<const double> factors) {
  if (factors.size() < 2) {
    throw std::invalid_argument("scale_std needs at least two images");
  }
  double mean = 0.0;
  for (double f : factors) mean += f;
  mean /= static_cast<double>(factors.size());
  double var = 0.0;
  for (double f : factors) var += (f - mean) * (f - mean);
  return std::sqrt(var / static_cast<double>(factors.size()));
}

EvalSummary summarize(std::vector<std::string> names, std::vector<Metrics> per_image) {
  if (names.size() != per_image.size() || per_image.empty()) {
    throw std::invalid_argument("summarize: need one name per metrics entry");
  }
  EvalSummary s;
  s.names = std::move(names);
  s.per_image = std::move(per_image);
  std::vector<double> scales;
  s.mean.scale = 0.0;
  for (const Metrics& m : s.per_image) {
    s.mean.abs_rel += m.abs_rel;
    s.mean.sq_rel += m.sq_rel;
    s.mean.rmse += m.rmse;
    s.mean.rmse_log += m.rmse_log;
    s.mean.d1 += m.d1;
    s.mean.d2 += m.d2;
    s.mean.d3 += m.d3;
    s.mean.scale += m.scale;
    s.mean.count += m.count;
    scales.push_back(m.scale);
  }
  const double n = static_cast<double>(s.per_image.size());
  s.mean.abs_rel /= n;
  s.mean.sq_rel /= n;
  s.mean.rmse /= n;
  s.mean.rmse_log /= n;
  s.mean.d1 /= n;
  s.mean.d2 /= n;
  s.mean.d3 /= n;
  s.mean.scale /= n;
  s.scale_std = scales.size() >= 2 ? scale_std(scales)
                                   : std::numeric_limits<double>::quiet_NaN();
  return s;
}

std::string metrics_csv(const EvalSummary& s) {
  std::string out = "image,scale,abs_rel,sq_rel,rmse,rmse_log,d1,d2,d3\n";
  auto row = [&](const std::string& name, const Metrics& m) {
    out += fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n",
                       name, m.scale, m.abs_rel, m.sq_rel, m.rmse, m.rmse_log, m.d1,
                       m.d2, m.d3);
  };
  for (std::size_t i = 0; i < s.per_image.size(); ++i) row(s.names[i], s.per_image[i]);
  row("mean", s.mean);
  out += fmt::format("scale_std,{:.6f}\n", s.scale_std);
  return out;
}

std::string metrics_table_header() {
  return fmt::format("{:<14}{:>10}{:>9}{:>9}{:>9}{:>9}{:>8}{:>8}{:>8}\n", "config",
                     "scale_std", "AbsRel", "SqRel", "RMSE", "RMSElog", "d1", "d2",
                     "d3");
}

std::string metrics_table_row(const std::string& label, const EvalSummary& s) {
  const Metrics& m = s.mean;
  return fmt::format("{:<14}{:>10.3f}{:>9.4f}{:>9.4f}{:>9.4f}{:>9.4f}{:>8.3f}{:>8.3f}{:>8.3f}\n",
                     label, s.scale_std, m.abs_rel, m.sq_rel, m.rmse, m.rmse_log, m.d1,
                     m.d2, m.d3);
}

}  // namespace geodepth
