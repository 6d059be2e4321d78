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
#include <functional>
#include <json.hpp>
#include <string>
#include <vector>

#include "boxsam/archive.hpp"
#include "boxsam/loss.hpp"
#include "boxsam/manifest.hpp"
#include "boxsam/mask.hpp"
#include "boxsam/mgnet.hpp"

namespace boxsam::train {

/// Optimisation protocol. Defaults follow the full-scale recipe: AdamW
/// (lr 1e-4, weight decay 0.1), lr divided by 10 after epoch 50, 100 epochs,
/// batch 16. The input size comes from the model config.
struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 0.1;
  double decay_factor = 0.1;
  int decay_epoch = 50;  // epochs 1..decay_epoch run at lr, later ones at lr * decay_factor
  int epochs = 100;
  int batch_size = 16;
  std::uint64_t seed = 0;
  bool deterministic = true;
  bool hflip = false;
  int checkpoint_every = 0;  // in epochs; 0 writes only the final checkpoint
  loss::LossOptions loss;

  void validate() const;
};

/// Batch size of the large-backbone preset.
inline constexpr int kLargeBackboneBatchSize = 12;

nlohmann::json to_json(const TrainConfig& config);
/// Reads the fields present in `doc` on top of `defaults`; errors name the field path.
TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig defaults = {});

/// Learning rate in effect during a 1-based epoch.
double learning_rate(const TrainConfig& config, int epoch);

/// Seeds torch and, in deterministic mode, pins a single intra-op thread and
/// deterministic kernels.
void set_determinism(std::uint64_t seed, bool deterministic);

struct TrainSample {
  std::string id;
  torch::Tensor image;   // (3, H, W) float in [0, 1]
  torch::Tensor target;  // (1, H, W) binary float
};

enum class Supervision { kGroundTruth, kPseudoLabel };

/// (3, height, width) tensor, bilinearly resized.
torch::Tensor image_tensor(const ImageSample& image, int height, int width);
/// (1, height, width) tensor, nearest-neighbour resized so it stays binary.
torch::Tensor mask_tensor(const MaskMap& mask, int height, int width);

/// Loads every entry of `manifest` with its supervision mask resized to the
/// input size. Throws InvalidStateError when an entry lacks the mask.
std::vector<TrainSample> load_samples(const DatasetManifest& manifest, Supervision supervision, int height,
                                      int width);

struct TrainLogRecord {
  std::int64_t step = 0;
  int epoch = 0;
  double lr = 0.0;
  loss::LossBreakdown loss;
  double wall_ms = 0.0;

  nlohmann::json to_json() const;
};

struct TrainOptions {
  std::filesystem::path checkpoint_path;  // empty: no checkpoint written
  std::filesystem::path log_path;         // empty: no JSON-lines log
  std::function<void(const TrainLogRecord&)> on_step;
};

struct TrainResult {
  net::MGNet model{nullptr};
  std::vector<TrainLogRecord> log;
  std::int64_t steps = 0;
};

/// Trains a freshly initialised model. Runs epochs * ceil(N / batch) steps.
/// A non-finite loss aborts with NumericError; checkpoints already on disk
/// are left untouched.
TrainResult train(const net::MGNetConfig& model_config, const TrainConfig& config,
                  const std::vector<TrainSample>& samples, const TrainOptions& options = {});

// --- checkpoints -----------------------------------------------------------

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  net::MGNetConfig model;
  nlohmann::json train;  // echo of the training config
  std::int64_t step = 0;
  NamedTensors state;    // parameters and buffers by qualified name
};

Checkpoint capture(const net::MGNet& model, std::int64_t step, const nlohmann::json& train_echo);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint state into `model`. Throws ConfigError naming the first
/// config field that differs, or the first tensor whose shape differs.
void restore(net::MGNet& model, const Checkpoint& checkpoint);
net::MGNet model_from_checkpoint(const Checkpoint& checkpoint);

// --- prediction ------------------------------------------------------------

/// sigmoid(P1) at the image's original resolution.
MaskMap predict_mask(net::MGNet& model, const ImageSample& image);

/// Writes `<out_dir>/<id>.png` for every manifest entry and returns the paths.
std::vector<std::filesystem::path> predict(net::MGNet& model, const DatasetManifest& manifest,
                                           const std::filesystem::path& out_dir);

}  // namespace boxsam::train
