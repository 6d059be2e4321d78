// Copyright 2026 The BoxSAM-CPP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "boxsam/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace boxsam::metrics {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_pair(const MaskMap& pred, const MaskMap& gt, const char* metric) {
  if (!pred.same_shape(gt))
    throw InvalidInputError(std::string(metric) + ": prediction " + std::to_string(pred.height()) + "x" +
                            std::to_string(pred.width()) + " vs ground truth " + std::to_string(gt.height()) + "x" +
                            std::to_string(gt.width()));
  if (pred.empty()) throw InvalidInputError(std::string(metric) + ": empty maps");
  if (!gt.binary()) throw InvalidInputError(std::string(metric) + ": ground truth must be binary");
}

double mean_of(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Object-level similarity of the values that fall on the target region.
double object_similarity(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  if (values.size() > 1) {
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size() - 1);
  }
  return 2.0 * mean / (mean * mean + 1.0 + std::sqrt(var) + kEps);
}

double object_score(const MaskMap& pred, const MaskMap& gt) {
  std::vector<double> fg, bg;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt.values()[i] > 0.5f) {
      fg.push_back(pred.values()[i]);
    } else {
      bg.push_back(1.0 - pred.values()[i]);
    }
  }
  const double u = static_cast<double>(fg.size()) / static_cast<double>(gt.size());
  return u * object_similarity(fg) + (1.0 - u) * object_similarity(bg);
}

// Structural similarity of one rectangular block.
double block_ssim(const MaskMap& pred, const MaskMap& gt, int y0, int y1, int x0, int x1) {
  const double n = static_cast<double>(y1 - y0) * (x1 - x0);
  double mx = 0.0, my = 0.0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      mx += pred(y, x);
      my += gt(y, x);
    }
  mx /= n;
  my /= n;
  double sx = 0.0, sy = 0.0, sxy = 0.0;
  if (n > 1) {
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) {
        const double dx = pred(y, x) - mx;
        const double dy = gt(y, x) - my;
        sx += dx * dx;
        sy += dy * dy;
        sxy += dx * dy;
      }
    sx /= n - 1;
    sy /= n - 1;
    sxy /= n - 1;
  }
  const double a = 4.0 * mx * my * sxy;
  const double b = (mx * mx + my * my) * (sx + sy);
  if (a != 0.0) return a / (b + kEps);
  return b == 0.0 ? 1.0 : 0.0;
}

double region_score(const MaskMap& pred, const MaskMap& gt) {
  const int h = gt.height();
  const int w = gt.width();
  // Centroid of the target, rounded half-to-even, as a 1-based split index.
  double sy = 0.0, sx = 0.0, count = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (gt(y, x) > 0.5f) {
        sy += y;
        sx += x;
        count += 1.0;
      }
  int cx, cy;
  if (count == 0.0) {
    cx = static_cast<int>(std::nearbyint(w / 2.0));
    cy = static_cast<int>(std::nearbyint(h / 2.0));
  } else {
    cx = static_cast<int>(std::nearbyint(sx / count)) + 1;
    cy = static_cast<int>(std::nearbyint(sy / count)) + 1;
  }
  const double area = static_cast<double>(h) * w;
  const double w1 = static_cast<double>(cx) * cy / area;
  const double w2 = static_cast<double>(w - cx) * cy / area;
  const double w3 = static_cast<double>(cx) * (h - cy) / area;
  const double w4 = 1.0 - w1 - w2 - w3;
  double score = 0.0;
  auto add = [&](double weight, int y0, int y1, int x0, int x1) {
    if (y1 > y0 && x1 > x0) score += weight * block_ssim(pred, gt, y0, y1, x0, x1);
  };
  add(w1, 0, cy, 0, cx);
  add(w2, 0, cy, cx, w);
  add(w3, cy, h, 0, cx);
  add(w4, cy, h, cx, w);
  return score;
}

double enhanced_sum(double pred_fg, double gt_fg, double n, double tp, double fp, double fn, double tn) {
  const double mp = pred_fg / n;
  const double mg = gt_fg / n;
  auto enhanced = [](double a, double b) {
    const double align = 2.0 * a * b / (a * a + b * b + kEps);
    return (align + 1.0) * (align + 1.0) / 4.0;
  };
  return tp * enhanced(1.0 - mp, 1.0 - mg) + fp * enhanced(1.0 - mp, -mg) + fn * enhanced(-mp, 1.0 - mg) +
         tn * enhanced(-mp, -mg);
}

}  // namespace

double mae(const MaskMap& pred, const MaskMap& gt) {
  require_pair(pred, gt, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(static_cast<double>(pred.values()[i]) - gt.values()[i]);
  return s / static_cast<double>(pred.size());
}

double f_adaptive(const MaskMap& pred, const MaskMap& gt, double beta_squared) {
  require_pair(pred, gt, "f_adaptive");
  const double gt_count = static_cast<double>(gt.foreground_count());
  if (gt_count == 0.0) throw UndefinedMetricError("f_adaptive: ground truth has no foreground");
  const double threshold = std::min(2.0 * mean_of(pred.values()), 1.0);
  double predicted = 0.0, inter = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double v = pred.values()[i];
    if (v > 0.0 && v >= threshold) {
      predicted += 1.0;
      if (gt.values()[i] > 0.5f) inter += 1.0;
    }
  }
  if (inter == 0.0) return 0.0;
  const double precision = inter / predicted;
  const double recall = inter / gt_count;
  return (1.0 + beta_squared) * precision * recall / (beta_squared * precision + recall);
}

double s_measure(const MaskMap& pred, const MaskMap& gt, double alpha) {
  require_pair(pred, gt, "s_measure");
  const double y = static_cast<double>(gt.foreground_count()) / static_cast<double>(gt.size());
  double score;
  if (y == 0.0) {
    score = 1.0 - mean_of(pred.values());
  } else if (y == 1.0) {
    score = mean_of(pred.values());
  } else {
    score = alpha * object_score(pred, gt) + (1.0 - alpha) * region_score(pred, gt);
  }
  return std::clamp(score, 0.0, 1.0);
}

double e_measure_binary(const MaskMap& binary_pred, const MaskMap& gt) {
  require_pair(binary_pred, gt, "e_measure");
  const double n = static_cast<double>(gt.size());
  double tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const bool p = binary_pred.values()[i] > 0.5f;
    const bool g = gt.values()[i] > 0.5f;
    (p ? (g ? tp : fp) : (g ? fn : tn)) += 1.0;
  }
  const double gt_fg = tp + fn;
  const double pred_fg = tp + fp;
  if (gt_fg == 0.0) return (n - pred_fg) / n;
  if (gt_fg == n) return pred_fg / n;
  return std::clamp(enhanced_sum(pred_fg, gt_fg, n, tp, fp, fn, tn) / n, 0.0, 1.0);
}

double e_measure_mean(const MaskMap& pred, const MaskMap& gt, int thresholds) {
  require_pair(pred, gt, "e_measure_mean");
  if (thresholds < 1) throw InvalidInputError("e_measure_mean: thresholds must be >= 1");
  std::vector<float> on_fg, on_bg;
  for (std::size_t i = 0; i < gt.size(); ++i) (gt.values()[i] > 0.5f ? on_fg : on_bg).push_back(pred.values()[i]);
  std::sort(on_fg.begin(), on_fg.end());
  std::sort(on_bg.begin(), on_bg.end());
  const double n = static_cast<double>(gt.size());
  const double gt_fg = static_cast<double>(on_fg.size());
  auto above = [](const std::vector<float>& sorted, double t) {
    return static_cast<double>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t,
                                                               [](double a, float b) { return a < b; }));
  };
  double total = 0.0;
  for (int k = 0; k < thresholds; ++k) {
    const double t = static_cast<double>(k) / thresholds;
    const double tp = above(on_fg, t);
    const double fp = above(on_bg, t);
    const double pred_fg = tp + fp;
    double score;
    if (gt_fg == 0.0) {
      score = (n - pred_fg) / n;
    } else if (gt_fg == n) {
      score = pred_fg / n;
    } else {
      score = enhanced_sum(pred_fg, gt_fg, n, tp, fp, gt_fg - tp, n - gt_fg - fp) / n;
    }
    total += score;
  }
  return std::clamp(total / thresholds, 0.0, 1.0);
}

DiceIou dice_iou(const MaskMap& pred, const MaskMap& gt, double threshold) {
  require_pair(pred, gt, "dice_iou");
  double p = 0, g = 0, inter = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool pi = pred.values()[i] > threshold;
    const bool gi = gt.values()[i] > 0.5f;
    p += pi;
    g += gi;
    inter += pi && gi;
  }
  if (p + g == 0.0) return {1.0, 1.0};
  return {2.0 * inter / (p + g), inter / (p + g - inter)};
}

ImageMetrics evaluate_image(const std::string& id, const MaskMap& pred, const MaskMap& gt) {
  ImageMetrics m;
  m.id = id;
  m.mae = mae(pred, gt);
  try {
    m.f_adaptive = f_adaptive(pred, gt);
  } catch (const UndefinedMetricError&) {
    m.f_adaptive.reset();
  }
  m.s_alpha = s_measure(pred, gt);
  m.e_phi = e_measure_mean(pred, gt);
  const auto di = dice_iou(pred, gt);
  m.dice = di.dice;
  m.iou = di.iou;
  return m;
}

MetricReport aggregate(std::vector<ImageMetrics> images) {
  MetricReport r;
  r.images = std::move(images);
  r.image_count = r.images.size();
  if (r.images.empty()) return r;
  std::size_t f_count = 0;
  for (const auto& m : r.images) {
    r.mae += m.mae;
    r.s_alpha += m.s_alpha;
    r.e_phi += m.e_phi;
    r.dice += m.dice;
    r.iou += m.iou;
    if (m.f_adaptive) {
      r.f_adaptive += *m.f_adaptive;
      ++f_count;
    } else {
      r.f_skipped.push_back(m.id);
    }
  }
  const double n = static_cast<double>(r.image_count);
  r.mae /= n;
  r.s_alpha /= n;
  r.e_phi /= n;
  r.dice /= n;
  r.iou /= n;
  r.f_adaptive = f_count ? r.f_adaptive / static_cast<double>(f_count) : 0.0;
  return r;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json per_image = nlohmann::json::array();
  for (const auto& m : images) {
    per_image.push_back({{"id", m.id},
                         {"mae", m.mae},
                         {"f_adaptive", m.f_adaptive ? nlohmann::json(*m.f_adaptive) : nlohmann::json(nullptr)},
                         {"s_alpha", m.s_alpha},
                         {"e_phi", m.e_phi},
                         {"dice", m.dice},
                         {"iou", m.iou}});
  }
  return {{"image_count", image_count},
          {"mean",
           {{"s_alpha", s_alpha}, {"f_adaptive", f_adaptive}, {"mae", mae}, {"e_phi", e_phi}, {"dice", dice}, {"iou", iou}}},
          {"f_skipped", f_skipped},
          {"images", per_image}};
}

MetricReport MetricReport::from_json(const nlohmann::json& doc) {
  std::vector<ImageMetrics> images;
  for (const auto& item : doc.at("images")) {
    ImageMetrics m;
    m.id = item.at("id").get<std::string>();
    m.mae = item.at("mae").get<double>();
    if (!item.at("f_adaptive").is_null()) m.f_adaptive = item.at("f_adaptive").get<double>();
    m.s_alpha = item.at("s_alpha").get<double>();
    m.e_phi = item.at("e_phi").get<double>();
    m.dice = item.at("dice").get<double>();
    m.iou = item.at("iou").get<double>();
    images.push_back(std::move(m));
  }
  return aggregate(std::move(images));
}

std::string MetricReport::table(const std::string& name) const {
  std::ostringstream os;
  os << std::left << std::setw(16) << "dataset" << std::right << std::setw(8) << "images" << std::setw(9) << "S_alpha"
     << std::setw(9) << "F_beta" << std::setw(9) << "MAE" << std::setw(9) << "E_phi" << std::setw(9) << "mDice"
     << std::setw(9) << "mIoU" << '\n';
  os << std::fixed << std::setprecision(3);
  os << std::left << std::setw(16) << name << std::right << std::setw(8) << image_count << std::setw(9) << s_alpha
     << std::setw(9) << f_adaptive << std::setw(9) << mae << std::setw(9) << e_phi << std::setw(9) << dice
     << std::setw(9) << iou << '\n';
  return os.str();
}

std::string MetricReport::summary_line() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << "S=" << s_alpha << " F=" << f_adaptive << " MAE=" << mae
     << " E=" << e_phi << " mDice=" << dice << " mIoU=" << iou;
  return os.str();
}

}  // namespace boxsam::metrics
