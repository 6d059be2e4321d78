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

#include "boxsam/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "boxsam/components.hpp"
#include "boxsam/error.hpp"
#include "boxsam/io.hpp"

namespace boxsam::synth {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

std::string sample_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "synth_%05d", index);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (count < 1) throw ConfigError("synth.count", "must be >= 1");
  if (test_count < 0) throw ConfigError("synth.test_count", "must be >= 0");
  if (height < 32 || width < 32 || height % 32 != 0 || width % 32 != 0) {
    throw ConfigError("synth.size", "height and width must be positive multiples of 32");
  }
  if (objects_min < 1 || objects_max < objects_min) {
    throw ConfigError("synth.objects", "need 1 <= objects_min <= objects_max");
  }
  if (!(contrast >= 0.0 && contrast <= 1.0)) throw ConfigError("synth.contrast", "must lie in [0, 1]");
  if (!(radius_min > 0.0 && radius_max >= radius_min && radius_max <= 0.45)) {
    throw ConfigError("synth.radius", "need 0 < radius_min <= radius_max <= 0.45");
  }
}

json to_json(const SynthConfig& c) {
  return json{{"count", c.count},           {"test_count", c.test_count}, {"height", c.height},
              {"width", c.width},           {"objects_min", c.objects_min}, {"objects_max", c.objects_max},
              {"contrast", c.contrast},     {"radius_min", c.radius_min}, {"radius_max", c.radius_max},
              {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const json& doc, SynthConfig c) {
  auto field = [&](const char* name, auto& target) {
    if (!doc.contains(name)) return;
    try {
      doc.at(name).get_to(target);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("synth.") + name, e.what());
    }
  };
  field("count", c.count);
  field("test_count", c.test_count);
  field("height", c.height);
  field("width", c.width);
  field("objects_min", c.objects_min);
  field("objects_max", c.objects_max);
  field("contrast", c.contrast);
  field("radius_min", c.radius_min);
  field("radius_max", c.radius_max);
  field("seed", c.seed);
  c.validate();
  return c;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(rng() % span);
}

std::vector<float> value_noise(int height, int width, double cell, int octaves, std::mt19937_64& rng) {
  std::vector<double> acc(static_cast<std::size_t>(height) * width, 0.0);
  double amplitude = 1.0, total = 0.0;
  for (int o = 0; o < octaves; ++o) {
    const double c = std::max(1.0, cell / std::pow(2.0, o));
    const int gh = static_cast<int>(std::ceil(height / c)) + 2;
    const int gw = static_cast<int>(std::ceil(width / c)) + 2;
    std::vector<double> lattice(static_cast<std::size_t>(gh) * gw);
    for (auto& v : lattice) v = uniform(rng, 0.0, 1.0);
    for (int y = 0; y < height; ++y) {
      const double fy = y / c;
      const int y0 = static_cast<int>(fy);
      const double ty = smoothstep(fy - y0);
      for (int x = 0; x < width; ++x) {
        const double fx = x / c;
        const int x0 = static_cast<int>(fx);
        const double tx = smoothstep(fx - x0);
        auto at = [&](int yy, int xx) { return lattice[static_cast<std::size_t>(yy) * gw + xx]; };
        const double top = at(y0, x0) * (1 - tx) + at(y0, x0 + 1) * tx;
        const double bottom = at(y0 + 1, x0) * (1 - tx) + at(y0 + 1, x0 + 1) * tx;
        acc[static_cast<std::size_t>(y) * width + x] += amplitude * (top * (1 - ty) + bottom * ty);
      }
    }
    total += amplitude;
    amplitude *= 0.5;
  }
  std::vector<float> out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i] / total);
  return out;
}

MaskMap noisy_blob(int height, int width, double cy, double cx, double radius, std::mt19937_64& rng) {
  const auto noise = value_noise(height, width, std::max(2.0, radius * 0.8), 2, rng);
  MaskMap raw(height, width, MaskRole::kGroundTruth);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double d = std::hypot(y - cy, x - cx) / radius;
      const double f = 1.0 - d + 0.7 * (noise[static_cast<std::size_t>(y) * width + x] - 0.5);
      raw(y, x) = f > 0.0 ? 1.0f : 0.0f;
    }
  }
  const int iy = std::clamp(static_cast<int>(std::lround(cy)), 0, height - 1);
  const int ix = std::clamp(static_cast<int>(std::lround(cx)), 0, width - 1);
  raw(iy, ix) = 1.0f;
  const auto labels = connected_components(raw, Connectivity::kEight);
  const int keep = labels(iy, ix);
  MaskMap blob(height, width, MaskRole::kGroundTruth);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) blob(y, x) = labels(y, x) == keep ? 1.0f : 0.0f;
  }
  return blob;
}

SynthSample generate_sample(const SynthConfig& config, int index) {
  config.validate();
  const int H = config.height, W = config.width;
  std::mt19937_64 rng(splitmix64(config.seed ^ splitmix64(static_cast<std::uint64_t>(index) + 1)));

  SynthSample s;
  s.ground_truth = MaskMap(H, W, MaskRole::kGroundTruth);
  const int objects = uniform_int(rng, config.objects_min, config.objects_max);
  const double scale = std::min(H, W);
  std::vector<BBox> placed;
  for (int k = 0; k < objects; ++k) {
    double radius = uniform(rng, config.radius_min, config.radius_max) * scale;
    for (int attempt = 0; attempt < 400; ++attempt) {
      const double margin = radius * 1.2 + 1.0;
      const double cy = uniform(rng, margin, std::max(margin, H - margin));
      const double cx = uniform(rng, margin, std::max(margin, W - margin));
      MaskMap blob = noisy_blob(H, W, cy, cx, radius, rng);
      const BBox box = boxes_from_mask(blob, false).front();
      const BBox padded{box.x_min - 1, box.y_min - 1, box.x_max + 1, box.y_max + 1};
      const bool clear = std::none_of(placed.begin(), placed.end(), [&](const BBox& b) { return b.intersects(padded); });
      if (clear) {
        placed.push_back(box);
        for (std::size_t i = 0; i < blob.values().size(); ++i) {
          if (blob.values()[i] > 0.0f) s.ground_truth.values()[i] = 1.0f;
        }
        break;
      }
      radius = std::max(2.0, radius * 0.97);
    }
  }
  if (placed.size() != static_cast<std::size_t>(objects)) {
    throw InvalidStateError("could not place " + std::to_string(objects) + " separated objects in a " +
                            std::to_string(H) + "x" + std::to_string(W) + " image");
  }
  s.boxes = boxes_from_mask(s.ground_truth, true);

  const bool brighter = (rng() & 1U) != 0;
  const double base = brighter ? uniform(rng, 0.15, 0.35) : uniform(rng, 0.65, 0.85);
  const double sign = brighter ? 1.0 : -1.0;
  double bg[3], fg[3];
  for (int c = 0; c < 3; ++c) {
    bg[c] = base + uniform(rng, -0.05, 0.05);
    fg[c] = bg[c] + config.contrast * (sign * 0.45 + uniform(rng, -0.03, 0.03));
  }
  const double cell = uniform(rng, 6.0, 14.0);
  const auto tex_bg = value_noise(H, W, cell, 3, rng);
  const auto tex_fg = value_noise(H, W, cell, 3, rng);

  s.image.id = sample_id(index);
  s.image.height = H;
  s.image.width = W;
  s.image.pixels.resize(static_cast<std::size_t>(H) * W * 3);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * W + x;
      const bool inside = s.ground_truth.values()[i] > 0.0f;
      const double t = (inside ? tex_fg[i] : tex_bg[i]) - 0.5;
      for (int c = 0; c < 3; ++c) {
        const double v = (inside ? fg[c] : bg[c]) + 0.2 * t;
        s.image.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return s;
}

DatasetManifest generate(const SynthConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  DatasetManifest manifest;
  const int total = config.count + config.test_count;
  for (int i = 0; i < total; ++i) {
    const SynthSample s = generate_sample(config, i);
    ManifestEntry e;
    e.id = s.image.id;
    e.image = out_dir / "images" / (e.id + ".png");
    e.gt_mask = out_dir / "masks" / (e.id + ".png");
    e.boxes = s.boxes;
    e.split = i < config.count ? Split::kTrain : Split::kTest;
    save_image(e.image, s.image);
    save_mask(*e.gt_mask, s.ground_truth);
    manifest.entries.push_back(std::move(e));
  }
  manifest.save(out_dir / "manifest.json");
  return manifest;
}

}  // namespace boxsam::synth
