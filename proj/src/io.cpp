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

#include "boxsam/io.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "boxsam/error.hpp"

namespace boxsam {
namespace {

void ensure_parent(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError(path.string(), "cannot create parent directory: " + ec.message());
}

void write_png(const std::filesystem::path& path, const cv::Mat& mat) {
  ensure_parent(path);
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), mat, {cv::IMWRITE_PNG_COMPRESSION, 6});
  } catch (const cv::Exception& e) {
    throw IoError(path.string(), e.what());
  }
  if (!ok) throw IoError(path.string(), "failed to write image");
}

}  // namespace

std::uint8_t quantize_unit(float value) {
  const float clamped = std::clamp(value, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(clamped * 255.0f));
}

MaskMap load_mask(const std::filesystem::path& path, MaskRole role) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (mat.empty()) throw IoError(path.string(), "cannot read mask image");
  const bool binary_role = role != MaskRole::kPrediction;
  std::vector<float> values(static_cast<std::size_t>(mat.rows) * mat.cols);
  for (int y = 0; y < mat.rows; ++y) {
    const auto* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < mat.cols; ++x) {
      const std::uint8_t v = row[x];
      values[static_cast<std::size_t>(y) * mat.cols + x] =
          binary_role ? (v >= 128 ? 1.0f : 0.0f) : static_cast<float>(v) / 255.0f;
    }
  }
  return MaskMap(mat.rows, mat.cols, std::move(values), role);
}

void save_mask(const std::filesystem::path& path, const MaskMap& mask) {
  mask.validate();
  cv::Mat mat(mask.height(), mask.width(), CV_8UC1);
  for (int y = 0; y < mask.height(); ++y) {
    auto* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < mask.width(); ++x) row[x] = quantize_unit(mask(y, x));
  }
  write_png(path, mat);
}

ImageSample load_image(const std::filesystem::path& path, std::string id) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (mat.empty()) throw IoError(path.string(), "cannot read image");
  ImageSample image{std::move(id), mat.rows, mat.cols, {}};
  image.pixels.resize(static_cast<std::size_t>(mat.rows) * mat.cols * 3);
  for (int y = 0; y < mat.rows; ++y) {
    const auto* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < mat.cols; ++x) {
      // OpenCV stores BGR.
      for (int c = 0; c < 3; ++c) image.at(y, x, c) = static_cast<float>(row[x][2 - c]) / 255.0f;
    }
  }
  return image;
}

void save_image(const std::filesystem::path& path, const ImageSample& image) {
  cv::Mat mat(image.height, image.width, CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    auto* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) row[x][2 - c] = quantize_unit(image.at(y, x, c));
    }
  }
  write_png(path, mat);
}

}  // namespace boxsam
