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

#include "boxsam/components.hpp"

#include <algorithm>
#include <numeric>

#include "boxsam/error.hpp"

namespace boxsam {
namespace {

class DisjointSet {
 public:
  int make() {
    parent_.push_back(static_cast<int>(parent_.size()));
    return parent_.back();
  }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent_[a] = b;
  }
  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<int> parent_;
};

}  // namespace

ComponentLabeling connected_components(const MaskMap& mask, Connectivity connectivity) {
  if (!mask.binary()) throw InvalidInputError("connected_components requires a binary mask");
  const int h = mask.height();
  const int w = mask.width();
  ComponentLabeling out{h, w, 0, std::vector<int>(static_cast<std::size_t>(h) * w, 0)};

  // First pass: provisional labels (1-based) with equivalences over the
  // already-visited causal neighbourhood.
  DisjointSet sets;
  sets.make();  // slot 0 = background
  const bool eight = connectivity == Connectivity::kEight;
  auto label_at = [&](int y, int x) { return out.labels[static_cast<std::size_t>(y) * w + x]; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask(y, x) == 0.0f) continue;
      int neighbours[4];
      int n = 0;
      if (x > 0 && label_at(y, x - 1)) neighbours[n++] = label_at(y, x - 1);
      if (y > 0) {
        if (label_at(y - 1, x)) neighbours[n++] = label_at(y - 1, x);
        if (eight && x > 0 && label_at(y - 1, x - 1)) neighbours[n++] = label_at(y - 1, x - 1);
        if (eight && x + 1 < w && label_at(y - 1, x + 1)) neighbours[n++] = label_at(y - 1, x + 1);
      }
      int label;
      if (n == 0) {
        label = sets.make();
      } else {
        label = *std::min_element(neighbours, neighbours + n);
        for (int i = 0; i < n; ++i) sets.unite(label, neighbours[i]);
      }
      out.labels[static_cast<std::size_t>(y) * w + x] = label;
    }
  }

  // Second pass: final labels in raster order of each root's first pixel.
  std::vector<int> final_label(sets.size(), 0);
  for (int& label : out.labels) {
    if (label == 0) continue;
    const int root = sets.find(label);
    if (final_label[root] == 0) final_label[root] = ++out.count;
    label = final_label[root];
  }
  return out;
}

std::vector<BBox> component_boxes(const ComponentLabeling& labeling) {
  std::vector<BBox> boxes(labeling.count, BBox{labeling.width, labeling.height, 0, 0});
  for (int y = 0; y < labeling.height; ++y) {
    for (int x = 0; x < labeling.width; ++x) {
      const int label = labeling(y, x);
      if (label == 0) continue;
      BBox& b = boxes[label - 1];
      b.x_min = std::min(b.x_min, x);
      b.y_min = std::min(b.y_min, y);
      b.x_max = std::max(b.x_max, x + 1);
      b.y_max = std::max(b.y_max, y + 1);
    }
  }
  return boxes;
}

std::vector<BBox> merge_overlapping(std::vector<BBox> boxes) {
  // Greedy absorption into groups, repeated over the group boxes until a round
  // performs no merge: a grown group can reach a group finalised earlier.
  bool merged_any = true;
  while (merged_any) {
    merged_any = false;
    std::vector<BBox> groups;
    std::vector<bool> used(boxes.size(), false);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (used[i]) continue;
      used[i] = true;
      BBox group = boxes[i];
      bool grew = true;
      while (grew) {
        grew = false;
        for (std::size_t j = 0; j < boxes.size(); ++j) {
          if (!used[j] && group.intersects(boxes[j])) {
            group = group.united(boxes[j]);
            used[j] = true;
            grew = true;
            merged_any = true;
          }
        }
      }
      groups.push_back(group);
    }
    boxes = std::move(groups);
  }
  return boxes;
}

std::vector<BBox> boxes_from_mask(const MaskMap& mask, bool merge_overlaps, Connectivity connectivity) {
  std::vector<BBox> boxes = component_boxes(connected_components(mask, connectivity));
  if (merge_overlaps) boxes = merge_overlapping(std::move(boxes));
  std::sort(boxes.begin(), boxes.end(), [](const BBox& a, const BBox& b) {
    return std::tie(a.y_min, a.x_min, a.y_max, a.x_max) < std::tie(b.y_min, b.x_min, b.y_max, b.x_max);
  });
  return boxes;
}

int count_boxes(const MaskMap& pseudo_label, Connectivity connectivity) {
  return static_cast<int>(boxes_from_mask(pseudo_label, true, connectivity).size());
}

}  // namespace boxsam
