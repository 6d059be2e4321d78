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

#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "boxsam/components.hpp"
#include "boxsam/mask.hpp"

namespace boxsam::testing {

inline std::filesystem::path data_dir() { return BOXSAM_TEST_DATA_DIR; }

/// Fresh empty directory under the system temp dir, unique per name.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("boxsam_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline MaskMap random_binary(int h, int w, double p, std::mt19937_64& rng,
                             MaskRole role = MaskRole::kPseudoLabel) {
  std::bernoulli_distribution on(p);
  MaskMap m(h, w, role);
  for (auto& v : m.values()) v = on(rng) ? 1.0f : 0.0f;
  return m;
}

inline MaskMap random_unit(int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  MaskMap m(h, w, MaskRole::kPrediction);
  for (auto& v : m.values()) v = u(rng);
  return m;
}

inline void fill_rect(MaskMap& m, int x0, int y0, int x1, int y1, float v = 1.0f) {
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) m(y, x) = v;
}

/// Component count by explicit stack flood fill.
inline int flood_fill_count(const MaskMap& m, int connectivity) {
  const int h = m.height(), w = m.width();
  std::vector<char> seen(static_cast<std::size_t>(h) * w, 0);
  int count = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (m(y, x) < 0.5f || seen[y * w + x]) continue;
      ++count;
      std::vector<std::pair<int, int>> stack{{y, x}};
      seen[y * w + x] = 1;
      while (!stack.empty()) {
        auto [cy, cx] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if ((dy == 0 && dx == 0) || (connectivity == 4 && dy != 0 && dx != 0)) continue;
            const int ny = cy + dy, nx = cx + dx;
            if (ny < 0 || ny >= h || nx < 0 || nx >= w || m(ny, nx) < 0.5f || seen[ny * w + nx]) continue;
            seen[ny * w + nx] = 1;
            stack.push_back({ny, nx});
          }
        }
      }
    }
  }
  return count;
}

}  // namespace boxsam::testing
