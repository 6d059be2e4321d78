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

#include <cstdint>
#include <filesystem>
#include <string>

#include "boxsam/mask.hpp"

namespace boxsam {

/// 8-bit encoding used by every mask file: round(v * 255).
std::uint8_t quantize_unit(float value);

/// Reads a single-channel 8-bit image and divides by 255. For binary roles
/// the stored values are binarized at 128 (half of full scale).
MaskMap load_mask(const std::filesystem::path& path, MaskRole role = MaskRole::kPrediction);

/// Writes a single-channel 8-bit PNG. Binary masks round-trip exactly.
void save_mask(const std::filesystem::path& path, const MaskMap& mask);

ImageSample load_image(const std::filesystem::path& path, std::string id);
void save_image(const std::filesystem::path& path, const ImageSample& image);

}  // namespace boxsam
