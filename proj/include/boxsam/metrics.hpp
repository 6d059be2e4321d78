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

#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "boxsam/error.hpp"
#include "boxsam/mask.hpp"

namespace boxsam::metrics {

/// Raised when a metric has no defined value for an input (e.g. recall on an
/// empty ground truth).
class UndefinedMetricError : public Error {
 public:
  explicit UndefinedMetricError(const std::string& what) : Error(ErrorKind::kInvalidInput, what) {}
};

/// Mean absolute error.
double mae(const MaskMap& pred, const MaskMap& gt);

/// F-measure at the adaptive threshold min(2 * mean(pred), 1) with beta^2 = 0.3.
/// A pixel is foreground when pred >= threshold and pred > 0.
double f_adaptive(const MaskMap& pred, const MaskMap& gt, double beta_squared = 0.3);

/// Structure measure: alpha * object-aware + (1 - alpha) * region-aware
/// similarity, clamped to [0, 1].
double s_measure(const MaskMap& pred, const MaskMap& gt, double alpha = 0.5);

/// Enhanced-alignment measure averaged over `thresholds` evenly spaced
/// binarization thresholds t_k = k / thresholds, k = 0..thresholds-1, with
/// pred > t_k as foreground.
double e_measure_mean(const MaskMap& pred, const MaskMap& gt, int thresholds = 256);

/// Enhanced-alignment score of one binary prediction map.
double e_measure_binary(const MaskMap& binary_pred, const MaskMap& gt);

struct DiceIou {
  double dice = 0.0;
  double iou = 0.0;
};

/// Region overlap of pred > threshold with gt; both 1 when both sets are empty.
DiceIou dice_iou(const MaskMap& pred, const MaskMap& gt, double threshold = 0.5);

struct ImageMetrics {
  std::string id;
  double mae = 0.0;
  std::optional<double> f_adaptive;  // absent for empty ground truth
  double s_alpha = 0.0;
  double e_phi = 0.0;
  double dice = 0.0;
  double iou = 0.0;
};

ImageMetrics evaluate_image(const std::string& id, const MaskMap& pred, const MaskMap& gt);

struct MetricReport {
  std::vector<ImageMetrics> images;
  double mae = 0.0;
  double f_adaptive = 0.0;  // mean over images where it is defined
  double s_alpha = 0.0;
  double e_phi = 0.0;
  double dice = 0.0;
  double iou = 0.0;
  std::size_t image_count = 0;
  std::vector<std::string> f_skipped;  // ids with undefined F

  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& doc);
  // Plain-text table in the column order S, F, MAE, E, mDice, mIoU.
  std::string table(const std::string& name = "dataset") const;
  std::string summary_line() const;
};

/// Arithmetic means over images.
MetricReport aggregate(std::vector<ImageMetrics> images);

}  // namespace boxsam::metrics
