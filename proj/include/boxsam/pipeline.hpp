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
#include <functional>
#include <json.hpp>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "boxsam/components.hpp"
#include "boxsam/manifest.hpp"
#include "boxsam/mask.hpp"
#include "boxsam/metrics.hpp"
#include "boxsam/mgnet.hpp"
#include "boxsam/train.hpp"

namespace boxsam::pseudo {

/// Box-promptable mask producer.
class PromptableSegmenter {
 public:
  virtual ~PromptableSegmenter() = default;
  /// Binary mask of the image's shape.
  virtual MaskMap segment(const ImageSample& image, std::span<const BBox> boxes) = 0;
  /// A file already holding exactly the mask `segment` returns for this
  /// image, which the manifest may reference instead of a fresh copy.
  virtual std::optional<std::filesystem::path> stored_path(const ImageSample& image) const;
};

struct OracleNoise {
  int extra_blob_count = 0;
  std::pair<int, int> blob_size_range{3, 8};  // blob radius in pixels
  int morph_jitter = 0;                       // max dilation/erosion steps of the clean mask
  double blob_probability = 1.0;              // chance that a sample receives any blobs
  std::uint64_t seed = 0;
};

/// Reference segmenter backed by ground truth: GT restricted to the union of
/// the prompt boxes, optionally morphologically jittered, plus injected
/// background blobs that neither touch the ground truth nor each other.
class OracleSegmenter : public PromptableSegmenter {
 public:
  using GroundTruthLookup = std::function<MaskMap(const std::string& id)>;

  explicit OracleSegmenter(GroundTruthLookup ground_truth, OracleNoise noise = {});
  static std::shared_ptr<OracleSegmenter> from_manifest(const DatasetManifest& manifest, OracleNoise noise = {});

  struct Detail {
    MaskMap clean;               // GT inside the box union
    MaskMap jittered;            // clean after morphological jitter
    std::vector<MaskMap> blobs;  // injected components, each 8-separated from everything else
    MaskMap output;
  };
  Detail segment_detail(const ImageSample& image, std::span<const BBox> boxes) const;
  MaskMap segment(const ImageSample& image, std::span<const BBox> boxes) override;

  const OracleNoise& noise() const { return noise_; }

 private:
  GroundTruthLookup ground_truth_;
  OracleNoise noise_;
};

/// Reads precomputed masks from `<directory>/<id>.png`, binarized at value > 0.
class ExternalMaskLoader : public PromptableSegmenter {
 public:
  explicit ExternalMaskLoader(std::filesystem::path directory);
  MaskMap segment(const ImageSample& image, std::span<const BBox> boxes) override;
  std::optional<std::filesystem::path> stored_path(const ImageSample& image) const override;
  std::filesystem::path path_for(const std::string& id) const;

 private:
  std::filesystem::path directory_;
};

struct SampleFailure {
  std::string id;
  std::string phase;
  std::string message;
};
nlohmann::json to_json(const SampleFailure& failure);

struct GenerationResult {
  DatasetManifest manifest;  // failed samples removed
  std::vector<SampleFailure> failures;
};

/// Segments every train entry with its boxes as prompts and writes the
/// binary result to `<out_dir>/<id>.png` (unless the segmenter already
/// stores it). Per-sample failures are recorded and the sample dropped.
GenerationResult generate_initial_pseudolabels(PromptableSegmenter& segmenter, const DatasetManifest& manifest,
                                               const std::filesystem::path& out_dir, int jobs = 1);

struct Partition {
  DatasetManifest consistent;  // split = train
  DatasetManifest flagged;     // split = flagged
};

/// An entry is consistent iff the box count implied by its pseudo-label
/// equals its number of annotation boxes. Test entries are ignored.
Partition partition_by_box_count(const DatasetManifest& manifest,
                                 Connectivity connectivity = Connectivity::kEight);

struct RpsReport {
  std::string id;
  int components_total = 0;
  int components_kept = 0;
  int components_removed = 0;
  int box_count_annotation = 0;
  int box_count_pseudo = 0;  // boxes implied by the refined label
  bool matched = false;

  nlohmann::json to_json() const;
  static RpsReport from_json(const nlohmann::json& doc);
};

struct RpsResult {
  MaskMap refined;
  RpsReport report;
};

/// Keeps a connected component of F whole when any of its pixels has
/// P > tau, and removes it whole otherwise.
RpsResult redundancy_process(const MaskMap& pseudo_label, const MaskMap& prediction, double tau = 0.0,
                             Connectivity connectivity = Connectivity::kEight);

/// Plain-text table of a report list.
std::string rps_table(const std::vector<RpsReport>& reports);

// --- orchestration ---------------------------------------------------------

struct SegmenterConfig {
  std::string kind = "oracle";  // "oracle" or "external"
  OracleNoise noise;
  std::filesystem::path directory;  // external masks
};

struct RpsConfig {
  double tau = 0.0;
  Connectivity connectivity = Connectivity::kEight;
};

struct PipelineConfig {
  SegmenterConfig segmenter;
  RpsConfig rps;
  net::MGNetConfig model;
  train::TrainConfig train;
  std::filesystem::path manifest;
  std::filesystem::path out_dir;
  int jobs = 1;

  void validate() const;
};

nlohmann::json to_json(const PipelineConfig& config);
/// {segmenter: {kind, params}, rps: {tau, connectivity}, model, train,
/// paths: {manifest, out_dir}, jobs}. Relative paths resolve against `base_dir`.
PipelineConfig pipeline_config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

/// Test seams for run_boxsam.
struct PipelineHooks {
  std::shared_ptr<PromptableSegmenter> segmenter;  // replaces the configured one
  // Replaces phase-3 training and phase-4 inference.
  std::function<MaskMap(const ManifestEntry&, const ImageSample&)> predictor;
  bool skip_retrain = false;
};

struct BoxsamResult {
  DatasetManifest initial_manifest;  // after phase 1
  DatasetManifest final_manifest;    // consistent entries plus refined flagged entries
  std::vector<RpsReport> reports;
  std::vector<SampleFailure> failures;
  std::vector<metrics::MetricReport> metrics;  // training set under each trained model, then test split
  std::vector<std::string> metric_names;
  std::filesystem::path initial_checkpoint;
  std::filesystem::path final_checkpoint;
  nlohmann::json timings;  // seconds per phase
};

/// Two-phase pipeline: (1) initial pseudo-labels, (2) box-count partition,
/// (3) train on consistent samples, (4) predict flagged images, (5) refine
/// flagged labels, (6) retrain from scratch on consistent plus refined.
///
/// Layout under out_dir:
///   pseudo/initial, predictions, pseudo/refined   8-bit PNG masks
///   manifest.initial.json, manifest.final.json
///   checkpoints/initial.ckpt, checkpoints/final.ckpt
///   reports/rps.json, reports/metrics_<name>.json, reports/summary.json
///   logs/train_*.jsonl, timings.json               wall-clock, not reproducible
BoxsamResult run_boxsam(const PipelineConfig& config, const PipelineHooks& hooks = {});

}  // namespace boxsam::pseudo
