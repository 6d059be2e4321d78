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

#include <vector>

#include "boxsam/mask.hpp"

namespace boxsam {

enum class Connectivity { kFour = 4, kEight = 8 };

/// Label image produced by connected_components. Label 0 is background;
/// foreground labels are 1..count, numbered in raster order of each
/// component's first pixel.
struct ComponentLabeling {
  int height = 0;
  int width = 0;
  int count = 0;
  std::vector<int> labels;

  int operator()(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

ComponentLabeling connected_components(const MaskMap& mask, Connectivity connectivity = Connectivity::kEight);

/// Tight box of every component, indexed by label - 1.
std::vector<BBox> component_boxes(const ComponentLabeling& labeling);

/// Replaces intersecting boxes by their union until no two boxes intersect.
std::vector<BBox> merge_overlapping(std::vector<BBox> boxes);

/// One tight box per connected component, optionally merged to a fixed point.
/// Result is sorted by (y_min, x_min).
///
/// This is the box-annotation rule: a single object gets its smallest
/// enclosing box, separate objects get separate boxes, and objects whose boxes
/// overlap share one merged box.
std::vector<BBox> boxes_from_mask(const MaskMap& mask, bool merge_overlaps,
                                  Connectivity connectivity = Connectivity::kEight);

/// Number of annotation boxes a mask implies (merged boxes).
int count_boxes(const MaskMap& pseudo_label, Connectivity connectivity = Connectivity::kEight);

}  // namespace boxsam
