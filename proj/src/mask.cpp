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

#include "boxsam/mask.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "boxsam/error.hpp"

namespace boxsam {

std::string to_string(MaskRole role) {
  switch (role) {
    case MaskRole::kGroundTruth:
      return "ground-truth";
    case MaskRole::kPseudoLabel:
      return "pseudo-label";
    case MaskRole::kPrediction:
      return "prediction";
  }
  return "unknown";
}

std::ostream& operator<<(std::ostream& os, const BBox& b) {
  return os << '[' << b.x_min << ", " << b.y_min << ", " << b.x_max << ", " << b.y_max << ']';
}

BBox BBox::united(const BBox& other) const {
  return {std::min(x_min, other.x_min), std::min(y_min, other.y_min), std::max(x_max, other.x_max),
          std::max(y_max, other.y_max)};
}

void BBox::validate(int image_width, int image_height) const {
  if (x_min < 0 || x_min >= x_max || x_max > image_width || y_min < 0 || y_min >= y_max ||
      y_max > image_height) {
    std::ostringstream os;
    os << "box [" << x_min << ", " << y_min << ", " << x_max << ", " << y_max << "] outside "
       << image_width << "x" << image_height << " image or empty";
    throw InvalidInputError(os.str());
  }
}

MaskMap::MaskMap(int height, int width, MaskRole role, float fill)
    : height_(height), width_(width), values_(static_cast<std::size_t>(height) * width, fill), role_(role) {
  if (height < 0 || width < 0) throw InvalidInputError("negative mask dimensions");
  if (role != MaskRole::kPrediction && fill != 0.0f && fill != 1.0f)
    throw InvalidInputError("binary mask role requires fill value 0 or 1");
}

MaskMap::MaskMap(int height, int width, std::vector<float> values, MaskRole role)
    : height_(height), width_(width), values_(std::move(values)), role_(role) {
  if (height < 0 || width < 0) throw InvalidInputError("negative mask dimensions");
  if (values_.size() != static_cast<std::size_t>(height) * width)
    throw InvalidInputError("mask value count does not match " + std::to_string(height) + "x" +
                            std::to_string(width));
  validate();
}

void MaskMap::set_role(MaskRole role) {
  role_ = role;
  validate();
}

bool MaskMap::binary() const {
  return std::all_of(values_.begin(), values_.end(), [](float v) { return v == 0.0f || v == 1.0f; });
}

std::size_t MaskMap::foreground_count() const {
  return static_cast<std::size_t>(std::count_if(values_.begin(), values_.end(), [](float v) { return v > 0.0f; }));
}

void MaskMap::validate() const {
  for (float v : values_) {
    if (!(v >= 0.0f && v <= 1.0f)) throw InvalidInputError("mask value outside [0, 1]");
  }
  if (role_ != MaskRole::kPrediction && !binary())
    throw InvalidInputError(to_string(role_) + " mask must be binary");
}

MaskMap binarize(const MaskMap& mask, float threshold, MaskRole role) {
  std::vector<float> out(mask.size());
  std::transform(mask.values().begin(), mask.values().end(), out.begin(),
                 [threshold](float v) { return v > threshold ? 1.0f : 0.0f; });
  return MaskMap(mask.height(), mask.width(), std::move(out), role);
}

void ImageSample::validate() const {
  if (height < 8 || width < 8)
    throw InvalidInputError("image '" + id + "' is smaller than 8x8");
  if (pixels.size() != static_cast<std::size_t>(height) * width * 3)
    throw InvalidInputError("image '" + id + "' pixel buffer does not match its shape");
  for (float v : pixels) {
    if (!(v >= 0.0f && v <= 1.0f)) throw InvalidInputError("image '" + id + "' has values outside [0, 1]");
  }
}

}  // namespace boxsam
