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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "boxsam/mask.hpp"

namespace boxsam {

enum class Split { kTrain, kFlagged, kTest };

std::string to_string(Split split);
Split split_from_string(const std::string& text);

struct ManifestEntry {
  std::string id;
  std::filesystem::path image;
  std::optional<std::filesystem::path> gt_mask;
  std::vector<BBox> boxes;
  std::optional<std::filesystem::path> pseudo_label;
  Split split = Split::kTrain;
};

/// Record set binding images, masks, boxes and split tags. Stored as JSON
/// {"entries": [...]} with boxes as [x_min, y_min, x_max, y_max]. Relative
/// paths are resolved against the manifest's directory on load and written
/// relative to it on save.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  static DatasetManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  // Unique ids; with check_paths, every referenced file must exist.
  void validate(bool check_paths = true) const;

  const ManifestEntry* find(const std::string& id) const;
  ManifestEntry* find(const std::string& id);
  DatasetManifest with_split(Split split) const;
  std::size_t count(Split split) const;
};

}  // namespace boxsam
