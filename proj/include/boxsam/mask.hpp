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

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace boxsam {

/// What a mask carries. Ground truth and pseudo-labels are always binary.
enum class MaskRole { kGroundTruth, kPseudoLabel, kPrediction };

std::string to_string(MaskRole role);

/// Axis-aligned pixel rectangle, half-open: [x_min, x_max) x [y_min, y_max).
struct BBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  int width() const { return x_max - x_min; }
  int height() const { return y_max - y_min; }
  std::int64_t area() const { return static_cast<std::int64_t>(width()) * height(); }
  bool contains(int x, int y) const { return x >= x_min && x < x_max && y >= y_min && y < y_max; }

  // Positive-area intersection; rectangles that only touch along an edge do not intersect.
  bool intersects(const BBox& other) const {
    return x_min < other.x_max && other.x_min < x_max && y_min < other.y_max && other.y_min < y_max;
  }
  BBox united(const BBox& other) const;

  // Throws InvalidInputError unless 0 <= min < max <= extent on both axes.
  void validate(int image_width, int image_height) const;

  auto operator<=>(const BBox&) const = default;
};

/// Prints [x_min, y_min, x_max, y_max].
std::ostream& operator<<(std::ostream& os, const BBox& box);

/// Single-channel H x W map with values in [0, 1], stored row-major.
class MaskMap {
 public:
  MaskMap() = default;
  MaskMap(int height, int width, MaskRole role = MaskRole::kPrediction, float fill = 0.0f);
  MaskMap(int height, int width, std::vector<float> values, MaskRole role = MaskRole::kPrediction);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  float operator()(int y, int x) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  float& operator()(int y, int x) { return values_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }

  MaskRole role() const { return role_; }
  // Throws InvalidInputError when a binary role is requested for non-binary values.
  void set_role(MaskRole role);

  bool binary() const;
  bool same_shape(const MaskMap& other) const { return height_ == other.height_ && width_ == other.width_; }
  std::size_t foreground_count() const;

  // Pixelwise comparison; role is not part of equality.
  bool operator==(const MaskMap& other) const {
    return height_ == other.height_ && width_ == other.width_ && values_ == other.values_;
  }

  // Throws InvalidInputError if any value is outside [0, 1] or a binary role holds non-binary data.
  void validate() const;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> values_;
  MaskRole role_ = MaskRole::kPrediction;
};

/// Values > threshold become 1, others 0.
MaskMap binarize(const MaskMap& mask, float threshold, MaskRole role = MaskRole::kPseudoLabel);

/// RGB image with interleaved values in [0, 1].
struct ImageSample {
  std::string id;
  int height = 0;
  int width = 0;
  std::vector<float> pixels;  // H * W * 3, row-major, RGB

  float at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

  void validate() const;
};

}  // namespace boxsam
