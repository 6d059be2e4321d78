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

#include <torch/torch.h>

#include <filesystem>
#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

namespace boxsam {

/// Versioned single-file archive of named tensors with a JSON header and a
/// trailing CRC-32 over every preceding byte.
///
/// Layout (little-endian):
///   "BXSMARCH" | u32 version | u64 header length | header JSON |
///   raw tensor bytes in header order | u32 crc32
inline constexpr std::uint32_t kArchiveVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, torch::Tensor>>;

struct Archive {
  nlohmann::json meta;
  NamedTensors arrays;

  const torch::Tensor* find(const std::string& name) const;
};

// Writes through a temporary file and renames, so a crash never leaves a
// truncated archive at `path`.
void write_archive(const std::filesystem::path& path, const nlohmann::json& meta, const NamedTensors& arrays);

// Throws IoError, ChecksumError (CRC mismatch or truncation) or
// InvalidInputError (bad magic / unsupported version).
Archive read_archive(const std::filesystem::path& path);

}  // namespace boxsam
