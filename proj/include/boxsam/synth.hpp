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
#include <json.hpp>
#include <random>
#include <vector>

#include "boxsam/manifest.hpp"
#include "boxsam/mask.hpp"

namespace boxsam::synth {

/// Textured camouflage scenes: value-noise backgrounds with blob-shaped
/// objects whose mean colour is offset from the background by `contrast`.
struct SynthConfig {
  int count = 16;       // training images
  int test_count = 0;   // additional images tagged as test
  int height = 96;
  int width = 96;
  int objects_min = 1;
  int objects_max = 2;
  double contrast = 0.5;      // 0: indistinguishable mean colour, 1: maximal offset
  double radius_min = 0.10;   // object radius as a fraction of min(height, width)
  double radius_max = 0.22;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const SynthConfig& config);
SynthConfig synth_config_from_json(const nlohmann::json& doc, SynthConfig defaults = {});

struct SynthSample {
  ImageSample image;
  MaskMap ground_truth;
  std::vector<BBox> boxes;  // one per object, pairwise separated by at least one pixel
};

/// Seeded per (config.seed, index); the same pair always yields the same sample.
SynthSample generate_sample(const SynthConfig& config, int index);

/// Writes images/<id>.png, masks/<id>.png and manifest.json under `out_dir`.
DatasetManifest generate(const SynthConfig& config, const std::filesystem::path& out_dir);

/// Multi-octave value noise in [0, 1].
std::vector<float> value_noise(int height, int width, double cell, int octaves, std::mt19937_64& rng);

/// Irregular blob around (cy, cx): a disc of the given radius perturbed by
/// smooth noise, reduced to the 8-connected component containing the centre.
MaskMap noisy_blob(int height, int width, double cy, double cx, double radius, std::mt19937_64& rng);

/// Uniform double in [lo, hi) drawn from the 53 high bits of one draw.
double uniform(std::mt19937_64& rng, double lo, double hi);
/// Uniform integer in [lo, hi].
int uniform_int(std::mt19937_64& rng, int lo, int hi);

}  // namespace boxsam::synth
