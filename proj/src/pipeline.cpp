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

#include "boxsam/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>

#include "boxsam/error.hpp"
#include "boxsam/io.hpp"
#include "boxsam/parallel.hpp"
#include "boxsam/synth.hpp"

namespace boxsam::pseudo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// 3x3 binary dilation (grow = true) or erosion; pixels outside the image count as background.
MaskMap morph(const MaskMap& m, bool grow) {
  MaskMap out(m.height(), m.width(), m.role());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      bool any = false, all = true;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy, xx = x + dx;
          const bool on = yy >= 0 && yy < m.height() && xx >= 0 && xx < m.width() && m(yy, xx) > 0.5f;
          any = any || on;
          all = all && on;
        }
      }
      out(y, x) = (grow ? any : all) ? 1.0f : 0.0f;
    }
  }
  return out;
}

void add_into(MaskMap& dst, const MaskMap& src) {
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::max(d[i], s[i]);
}

bool overlaps(const MaskMap& a, const MaskMap& b) {
  auto va = a.values();
  auto vb = b.values();
  for (std::size_t i = 0; i < va.size(); ++i) {
    if (va[i] > 0.5f && vb[i] > 0.5f) return true;
  }
  return false;
}

void check_segmentation(const MaskMap& mask, const ImageSample& image) {
  if (mask.height() != image.height || mask.width() != image.width) {
    throw InvalidInputError("segmenter returned a " + std::to_string(mask.height()) + "x" +
                            std::to_string(mask.width()) + " mask for a " + std::to_string(image.height) + "x" +
                            std::to_string(image.width) + " image");
  }
  if (!mask.binary()) throw InvalidInputError("segmenter returned a non-binary mask");
}

void write_json(const fs::path& path, const json& doc) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw IoError(path.string(), "write failed");
}

bool is_training_entry(const ManifestEntry& e) { return e.split == Split::kTrain || e.split == Split::kFlagged; }

}  // namespace

std::optional<fs::path> PromptableSegmenter::stored_path(const ImageSample&) const { return std::nullopt; }

// --- segmenters ------------------------------------------------------------

OracleSegmenter::OracleSegmenter(GroundTruthLookup ground_truth, OracleNoise noise)
    : ground_truth_(std::move(ground_truth)), noise_(noise) {
  if (!ground_truth_) throw InvalidInputError("oracle segmenter needs a ground-truth lookup");
  if (noise_.extra_blob_count < 0) throw ConfigError("segmenter.params.extra_blob_count", "must be >= 0");
  if (noise_.blob_size_range.first < 1 || noise_.blob_size_range.second < noise_.blob_size_range.first) {
    throw ConfigError("segmenter.params.blob_size_range", "need 1 <= min <= max");
  }
  if (noise_.morph_jitter < 0) throw ConfigError("segmenter.params.morph_jitter", "must be >= 0");
  if (!(noise_.blob_probability >= 0.0 && noise_.blob_probability <= 1.0))
    throw ConfigError("segmenter.params.blob_probability", "must lie in [0, 1]");
}

std::shared_ptr<OracleSegmenter> OracleSegmenter::from_manifest(const DatasetManifest& manifest, OracleNoise noise) {
  std::unordered_map<std::string, fs::path> gt;
  for (const auto& e : manifest.entries) {
    if (e.gt_mask) gt.emplace(e.id, *e.gt_mask);
  }
  return std::make_shared<OracleSegmenter>(
      [gt = std::move(gt)](const std::string& id) {
        auto it = gt.find(id);
        if (it == gt.end()) throw InvalidStateError("oracle segmenter: sample '" + id + "' has no gt_mask");
        return load_mask(it->second, MaskRole::kGroundTruth);
      },
      noise);
}

OracleSegmenter::Detail OracleSegmenter::segment_detail(const ImageSample& image, std::span<const BBox> boxes) const {
  const MaskMap gt = ground_truth_(image.id);
  if (gt.height() != image.height || gt.width() != image.width) {
    throw InvalidInputError("ground truth of '" + image.id + "' does not match the image size");
  }
  const int H = image.height, W = image.width;
  Detail d;
  d.clean = MaskMap(H, W, MaskRole::kPseudoLabel);
  for (const auto& b : boxes) {
    b.validate(W, H);
    for (int y = b.y_min; y < b.y_max; ++y) {
      for (int x = b.x_min; x < b.x_max; ++x) d.clean(y, x) = gt(y, x) > 0.5f ? 1.0f : 0.0f;
    }
  }

  std::mt19937_64 rng(fnv1a(image.id) ^ mix(noise_.seed));
  d.jittered = d.clean;
  if (noise_.morph_jitter > 0) {
    const int steps = synth::uniform_int(rng, -noise_.morph_jitter, noise_.morph_jitter);
    for (int s = 0; s < std::abs(steps); ++s) d.jittered = morph(d.jittered, steps > 0);
  }

  d.output = d.jittered;
  MaskMap occupied = gt;
  add_into(occupied, d.output);
  MaskMap forbidden = morph(occupied, true);
  const auto [r_lo, r_hi] = noise_.blob_size_range;
  const bool noisy = noise_.blob_probability >= 1.0 || synth::uniform(rng, 0.0, 1.0) < noise_.blob_probability;
  for (int k = 0; noisy && k < noise_.extra_blob_count; ++k) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      const int radius = synth::uniform_int(rng, r_lo, r_hi);
      const double cy = synth::uniform(rng, radius, std::max<double>(radius, H - radius));
      const double cx = synth::uniform(rng, radius, std::max<double>(radius, W - radius));
      MaskMap blob = synth::noisy_blob(H, W, cy, cx, radius, rng);
      if (overlaps(blob, forbidden)) continue;
      blob.set_role(MaskRole::kPseudoLabel);
      add_into(d.output, blob);
      add_into(forbidden, morph(blob, true));
      d.blobs.push_back(std::move(blob));
      break;
    }
  }
  return d;
}

MaskMap OracleSegmenter::segment(const ImageSample& image, std::span<const BBox> boxes) {
  return segment_detail(image, boxes).output;
}

ExternalMaskLoader::ExternalMaskLoader(fs::path directory) : directory_(std::move(directory)) {
  if (!fs::is_directory(directory_)) throw IoError(directory_.string(), "mask directory does not exist");
}

fs::path ExternalMaskLoader::path_for(const std::string& id) const { return directory_ / (id + ".png"); }

MaskMap ExternalMaskLoader::segment(const ImageSample& image, std::span<const BBox>) {
  const MaskMap raw = load_mask(path_for(image.id), MaskRole::kPrediction);
  MaskMap mask = binarize(raw, 0.0f, MaskRole::kPseudoLabel);
  check_segmentation(mask, image);
  return mask;
}

std::optional<fs::path> ExternalMaskLoader::stored_path(const ImageSample& image) const {
  const fs::path path = path_for(image.id);
  const MaskMap raw = load_mask(path, MaskRole::kPrediction);
  return raw.binary() ? std::optional<fs::path>(path) : std::nullopt;
}

// --- phases ----------------------------------------------------------------

json to_json(const SampleFailure& f) { return json{{"id", f.id}, {"phase", f.phase}, {"message", f.message}}; }

GenerationResult generate_initial_pseudolabels(PromptableSegmenter& segmenter, const DatasetManifest& manifest,
                                               const fs::path& out_dir, int jobs) {
  for (const auto& e : manifest.entries) {
    if (e.split == Split::kTrain && e.boxes.empty()) {
      throw InvalidStateError("train sample '" + e.id + "' has no annotation boxes");
    }
  }
  const std::size_t n = manifest.entries.size();
  std::vector<std::optional<fs::path>> labels(n);
  std::vector<std::string> errors(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    const ManifestEntry& e = manifest.entries[i];
    if (e.split != Split::kTrain) return;
    try {
      const ImageSample image = load_image(e.image, e.id);
      if (auto stored = segmenter.stored_path(image)) {
        check_segmentation(load_mask(*stored, MaskRole::kPseudoLabel), image);
        labels[i] = *stored;
        return;
      }
      const MaskMap mask = segmenter.segment(image, e.boxes);
      check_segmentation(mask, image);
      const fs::path path = out_dir / (e.id + ".png");
      save_mask(path, mask);
      labels[i] = path;
    } catch (const std::exception& ex) {
      errors[i] = ex.what();
    }
  });

  GenerationResult result;
  for (std::size_t i = 0; i < n; ++i) {
    ManifestEntry e = manifest.entries[i];
    if (!errors[i].empty()) {
      result.failures.push_back({e.id, "pseudo", errors[i]});
      continue;
    }
    if (labels[i]) e.pseudo_label = *labels[i];
    result.manifest.entries.push_back(std::move(e));
  }
  return result;
}

Partition partition_by_box_count(const DatasetManifest& manifest, Connectivity connectivity) {
  Partition p;
  for (const auto& e : manifest.entries) {
    if (!is_training_entry(e)) continue;
    if (!e.pseudo_label) throw InvalidStateError("sample '" + e.id + "' has no pseudo_label");
    const MaskMap label = load_mask(*e.pseudo_label, MaskRole::kPseudoLabel);
    ManifestEntry copy = e;
    if (count_boxes(label, connectivity) == static_cast<int>(e.boxes.size())) {
      copy.split = Split::kTrain;
      p.consistent.entries.push_back(std::move(copy));
    } else {
      copy.split = Split::kFlagged;
      p.flagged.entries.push_back(std::move(copy));
    }
  }
  return p;
}

json RpsReport::to_json() const {
  return json{{"id", id},
              {"components_total", components_total},
              {"components_kept", components_kept},
              {"components_removed", components_removed},
              {"box_count_annotation", box_count_annotation},
              {"box_count_pseudo", box_count_pseudo},
              {"matched", matched}};
}

RpsReport RpsReport::from_json(const json& doc) {
  RpsReport r;
  try {
    doc.at("id").get_to(r.id);
    doc.at("components_total").get_to(r.components_total);
    doc.at("components_kept").get_to(r.components_kept);
    doc.at("components_removed").get_to(r.components_removed);
    doc.at("box_count_annotation").get_to(r.box_count_annotation);
    doc.at("box_count_pseudo").get_to(r.box_count_pseudo);
    doc.at("matched").get_to(r.matched);
  } catch (const json::exception& e) {
    throw InvalidInputError(std::string("malformed RPS report: ") + e.what());
  }
  return r;
}

RpsResult redundancy_process(const MaskMap& pseudo_label, const MaskMap& prediction, double tau,
                             Connectivity connectivity) {
  if (!pseudo_label.same_shape(prediction)) {
    throw InvalidInputError("pseudo-label and prediction differ in shape");
  }
  if (!pseudo_label.binary()) throw InvalidInputError("pseudo-label must be binary");
  if (!(tau >= 0.0 && tau < 1.0)) throw InvalidInputError("tau must lie in [0, 1)");

  const ComponentLabeling labels = connected_components(pseudo_label, connectivity);
  std::vector<char> keep(static_cast<std::size_t>(labels.count) + 1, 0);
  auto p = prediction.values();
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    const int l = labels.labels[i];
    if (l > 0 && p[i] > tau) keep[static_cast<std::size_t>(l)] = 1;
  }
  RpsResult r;
  r.refined = MaskMap(pseudo_label.height(), pseudo_label.width(), MaskRole::kPseudoLabel);
  auto out = r.refined.values();
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    out[i] = keep[static_cast<std::size_t>(labels.labels[i])] && labels.labels[i] > 0 ? 1.0f : 0.0f;
  }
  r.report.components_total = labels.count;
  r.report.components_kept = static_cast<int>(std::count(keep.begin() + 1, keep.end(), 1));
  r.report.components_removed = r.report.components_total - r.report.components_kept;
  r.report.box_count_pseudo = count_boxes(r.refined, connectivity);
  return r;
}

std::string rps_table(const std::vector<RpsReport>& reports) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-24s %6s %6s %8s %10s %10s %8s\n", "id", "total", "kept", "removed",
                "boxes_ann", "boxes_lbl", "matched");
  out << line;
  int total = 0, kept = 0, removed = 0, matched = 0;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof(line), "%-24s %6d %6d %8d %10d %10d %8s\n", r.id.c_str(), r.components_total,
                  r.components_kept, r.components_removed, r.box_count_annotation, r.box_count_pseudo,
                  r.matched ? "yes" : "no");
    out << line;
    total += r.components_total;
    kept += r.components_kept;
    removed += r.components_removed;
    matched += r.matched ? 1 : 0;
  }
  std::snprintf(line, sizeof(line), "%-24s %6d %6d %8d %10s %10s %5d/%-3zu\n", "(all)", total, kept, removed, "", "",
                matched, reports.size());
  out << line;
  return out.str();
}

// --- configuration ---------------------------------------------------------

namespace {

// Re-raises a nested section's ConfigError with the section prefixed to the field.
template <typename Fn>
auto within(const std::string& section, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    throw ConfigError(section + "." + e.field(), what.substr(std::min(what.size(), e.field().size() + 2)));
  }
}

}  // namespace

void PipelineConfig::validate() const {
  if (segmenter.kind != "oracle" && segmenter.kind != "external") {
    throw ConfigError("segmenter.kind", "expected 'oracle' or 'external', got '" + segmenter.kind + "'");
  }
  if (segmenter.kind == "external" && segmenter.directory.empty()) {
    throw ConfigError("segmenter.params.directory", "required for the external segmenter");
  }
  if (segmenter.noise.extra_blob_count < 0) throw ConfigError("segmenter.params.extra_blob_count", "must be >= 0");
  if (segmenter.noise.blob_size_range.first < 1 ||
      segmenter.noise.blob_size_range.second < segmenter.noise.blob_size_range.first) {
    throw ConfigError("segmenter.params.blob_size_range", "need 1 <= min <= max");
  }
  if (segmenter.noise.morph_jitter < 0) throw ConfigError("segmenter.params.morph_jitter", "must be >= 0");
  if (!(segmenter.noise.blob_probability >= 0.0 && segmenter.noise.blob_probability <= 1.0))
    throw ConfigError("segmenter.params.blob_probability", "must lie in [0, 1]");
  if (!(rps.tau >= 0.0 && rps.tau < 1.0)) throw ConfigError("rps.tau", "must lie in [0, 1)");
  if (jobs < 1) throw ConfigError("jobs", "must be >= 1");
  if (manifest.empty()) throw ConfigError("paths.manifest", "required");
  if (out_dir.empty()) throw ConfigError("paths.out_dir", "required");
  within("model", [&] { model.validate(); });
  train.validate();
}

json to_json(const PipelineConfig& c) {
  json params;
  if (c.segmenter.kind == "external") {
    params = {{"directory", c.segmenter.directory.string()}};
  } else {
    params = {{"extra_blob_count", c.segmenter.noise.extra_blob_count},
              {"blob_size_range", {c.segmenter.noise.blob_size_range.first, c.segmenter.noise.blob_size_range.second}},
              {"morph_jitter", c.segmenter.noise.morph_jitter},
              {"blob_probability", c.segmenter.noise.blob_probability},
              {"seed", c.segmenter.noise.seed}};
  }
  return json{{"segmenter", {{"kind", c.segmenter.kind}, {"params", params}}},
              {"rps", {{"tau", c.rps.tau}, {"connectivity", static_cast<int>(c.rps.connectivity)}}},
              {"model", net::to_json(c.model)},
              {"train", train::to_json(c.train)},
              {"paths", {{"manifest", c.manifest.string()}, {"out_dir", c.out_dir.string()}}},
              {"jobs", c.jobs}};
}

PipelineConfig pipeline_config_from_json(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("(root)", "pipeline config must be a JSON object");
  PipelineConfig c;
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  auto get = [](const json& obj, const std::string& field, const char* name, auto& target) {
    if (!obj.contains(name)) return;
    try {
      obj.at(name).get_to(target);
    } catch (const json::exception& e) {
      throw ConfigError(field, e.what());
    }
  };
  if (doc.contains("segmenter")) {
    const json& s = doc.at("segmenter");
    if (!s.is_object()) throw ConfigError("segmenter", "must be an object");
    get(s, "segmenter.kind", "kind", c.segmenter.kind);
    if (s.contains("params")) {
      const json& p = s.at("params");
      if (!p.is_object()) throw ConfigError("segmenter.params", "must be an object");
      get(p, "segmenter.params.extra_blob_count", "extra_blob_count", c.segmenter.noise.extra_blob_count);
      if (p.contains("blob_size_range")) {
        std::array<int, 2> range{};
        get(p, "segmenter.params.blob_size_range", "blob_size_range", range);
        c.segmenter.noise.blob_size_range = {range[0], range[1]};
      }
      get(p, "segmenter.params.morph_jitter", "morph_jitter", c.segmenter.noise.morph_jitter);
      get(p, "segmenter.params.blob_probability", "blob_probability", c.segmenter.noise.blob_probability);
      get(p, "segmenter.params.seed", "seed", c.segmenter.noise.seed);
      if (p.contains("directory")) {
        std::string dir;
        get(p, "segmenter.params.directory", "directory", dir);
        c.segmenter.directory = resolve(dir);
      }
    }
  }
  if (doc.contains("rps")) {
    const json& r = doc.at("rps");
    get(r, "rps.tau", "tau", c.rps.tau);
    if (r.contains("connectivity")) {
      int conn = 8;
      get(r, "rps.connectivity", "connectivity", conn);
      if (conn != 4 && conn != 8) throw ConfigError("rps.connectivity", "must be 4 or 8");
      c.rps.connectivity = static_cast<Connectivity>(conn);
    }
  }
  if (doc.contains("model")) c.model = within("model", [&] { return net::mgnet_config_from_json(doc.at("model")); });
  if (doc.contains("train")) c.train = train::train_config_from_json(doc.at("train"));
  if (doc.contains("paths")) {
    const json& p = doc.at("paths");
    std::string manifest, out;
    get(p, "paths.manifest", "manifest", manifest);
    get(p, "paths.out_dir", "out_dir", out);
    if (!manifest.empty()) c.manifest = resolve(manifest);
    if (!out.empty()) c.out_dir = resolve(out);
  }
  get(doc, "jobs", "jobs", c.jobs);
  return c;
}

// --- orchestration ---------------------------------------------------------

namespace {

class PhaseClock {
 public:
  explicit PhaseClock(json& sink) : sink_(sink) {}
  void start() { t0_ = std::chrono::steady_clock::now(); }
  void stop(const std::string& name) {
    sink_[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  json& sink_;
  std::chrono::steady_clock::time_point t0_;
};

metrics::MetricReport evaluate_model(net::MGNet& model, const std::vector<const ManifestEntry*>& entries) {
  std::vector<metrics::ImageMetrics> rows;
  for (const ManifestEntry* e : entries) {
    const ImageSample image = load_image(e->image, e->id);
    const MaskMap gt = load_mask(*e->gt_mask, MaskRole::kGroundTruth);
    rows.push_back(metrics::evaluate_image(e->id, train::predict_mask(model, image), gt));
  }
  return metrics::aggregate(std::move(rows));
}

}  // namespace

BoxsamResult run_boxsam(const PipelineConfig& config, const PipelineHooks& hooks) {
  config.validate();
  BoxsamResult result;
  PhaseClock clock(result.timings);
  const fs::path& out = config.out_dir;
  fs::create_directories(out);

  const DatasetManifest source = DatasetManifest::load(config.manifest);
  source.validate();

  std::shared_ptr<PromptableSegmenter> segmenter = hooks.segmenter;
  if (!segmenter) {
    if (config.segmenter.kind == "external") {
      segmenter = std::make_shared<ExternalMaskLoader>(config.segmenter.directory);
    } else {
      segmenter = OracleSegmenter::from_manifest(source, config.segmenter.noise);
    }
  }

  // (1) initial pseudo-labels
  clock.start();
  GenerationResult generated = generate_initial_pseudolabels(*segmenter, source, out / "pseudo" / "initial", config.jobs);
  result.failures = generated.failures;
  result.initial_manifest = generated.manifest;
  result.initial_manifest.save(out / "manifest.initial.json");
  clock.stop("pseudo");

  // (2) box-count partition
  clock.start();
  Partition part = partition_by_box_count(result.initial_manifest, config.rps.connectivity);
  clock.stop("partition");
  if (part.consistent.entries.empty()) {
    throw InvalidStateError("no sample has a pseudo-label whose box count matches its annotation (" +
                            std::to_string(part.flagged.entries.size()) +
                            " flagged); the initial model cannot be trained");
  }

  const int H = config.model.input_height, W = config.model.input_width;

  // (3) initial model
  net::MGNet initial_model{nullptr};
  if (!hooks.predictor) {
    clock.start();
    result.initial_checkpoint = out / "checkpoints" / "initial.ckpt";
    train::TrainOptions opts;
    opts.checkpoint_path = result.initial_checkpoint;
    opts.log_path = out / "logs" / "train_initial.jsonl";
    const auto samples = train::load_samples(part.consistent, train::Supervision::kPseudoLabel, H, W);
    initial_model = train::train(config.model, config.train, samples, opts).model;
    clock.stop("train_initial");
  }

  // (4) predictions on flagged images
  clock.start();
  const std::size_t nf = part.flagged.entries.size();
  std::vector<fs::path> prediction_paths(nf);
  for (std::size_t i = 0; i < nf; ++i) {
    const ManifestEntry& e = part.flagged.entries[i];
    const ImageSample image = load_image(e.image, e.id);
    MaskMap pred = hooks.predictor ? hooks.predictor(e, image) : train::predict_mask(initial_model, image);
    prediction_paths[i] = out / "predictions" / (e.id + ".png");
    save_mask(prediction_paths[i], pred);
  }
  clock.stop("predict");

  // (5) redundancy processing of flagged labels
  clock.start();
  std::vector<RpsReport> reports(nf);
  std::vector<fs::path> refined_paths(nf);
  parallel_for(nf, config.jobs, [&](std::size_t i) {
    const ManifestEntry& e = part.flagged.entries[i];
    const MaskMap f = load_mask(*e.pseudo_label, MaskRole::kPseudoLabel);
    const MaskMap p = load_mask(prediction_paths[i], MaskRole::kPrediction);
    RpsResult r = redundancy_process(f, p, config.rps.tau, config.rps.connectivity);
    r.report.id = e.id;
    r.report.box_count_annotation = static_cast<int>(e.boxes.size());
    r.report.matched = r.report.box_count_pseudo == r.report.box_count_annotation;
    refined_paths[i] = out / "pseudo" / "refined" / (e.id + ".png");
    save_mask(refined_paths[i], r.refined);
    reports[i] = std::move(r.report);
  });
  result.reports = reports;
  clock.stop("rps");

  std::unordered_map<std::string, std::size_t> flagged_index;
  for (std::size_t i = 0; i < nf; ++i) flagged_index.emplace(part.flagged.entries[i].id, i);
  std::unordered_map<std::string, bool> consistent_ids;
  for (const auto& e : part.consistent.entries) consistent_ids.emplace(e.id, true);
  for (const auto& e : result.initial_manifest.entries) {
    ManifestEntry copy = e;
    if (auto it = flagged_index.find(e.id); it != flagged_index.end()) {
      copy.split = Split::kFlagged;
      copy.pseudo_label = refined_paths[it->second];
    } else if (consistent_ids.count(e.id)) {
      copy.split = Split::kTrain;
    }
    result.final_manifest.entries.push_back(std::move(copy));
  }
  result.final_manifest.save(out / "manifest.final.json");

  // (6) retrain from scratch on consistent + refined
  net::MGNet final_model{nullptr};
  if (!hooks.skip_retrain) {
    clock.start();
    DatasetManifest training;
    for (const auto& e : result.final_manifest.entries) {
      if (is_training_entry(e)) training.entries.push_back(e);
    }
    result.final_checkpoint = out / "checkpoints" / "final.ckpt";
    train::TrainOptions opts;
    opts.checkpoint_path = result.final_checkpoint;
    opts.log_path = out / "logs" / "train_final.jsonl";
    const auto samples = train::load_samples(training, train::Supervision::kPseudoLabel, H, W);
    final_model = train::train(config.model, config.train, samples, opts).model;
    clock.stop("train_final");
  }

  // Metrics against ground truth where it exists.
  clock.start();
  std::vector<const ManifestEntry*> train_gt, test_gt;
  for (const auto& e : result.final_manifest.entries) {
    if (!e.gt_mask) continue;
    (is_training_entry(e) ? train_gt : test_gt).push_back(&e);
  }
  auto emit = [&](const std::string& name, net::MGNet& model, const std::vector<const ManifestEntry*>& entries) {
    if (entries.empty() || !model) return;
    metrics::MetricReport report = evaluate_model(model, entries);
    write_json(out / "reports" / ("metrics_" + name + ".json"), report.to_json());
    result.metric_names.push_back(name);
    result.metrics.push_back(std::move(report));
  };
  emit("train_initial", initial_model, train_gt);
  emit("train_final", final_model, train_gt);
  emit("test_final", final_model, test_gt);
  clock.stop("evaluate");

  json rps_doc{{"tau", config.rps.tau},
               {"connectivity", static_cast<int>(config.rps.connectivity)},
               {"samples", json::array()}};
  for (const auto& r : result.reports) rps_doc["samples"].push_back(r.to_json());
  write_json(out / "reports" / "rps.json", rps_doc);

  json summary{{"samples", source.entries.size()},
               {"pseudo_labeled", result.initial_manifest.count(Split::kTrain)},
               {"consistent", part.consistent.entries.size()},
               {"flagged", nf},
               {"failures", json::array()},
               {"metrics", json::object()}};
  for (const auto& f : result.failures) summary["failures"].push_back(to_json(f));
  for (std::size_t i = 0; i < result.metrics.size(); ++i) {
    summary["metrics"][result.metric_names[i]] = result.metrics[i].summary_line();
  }
  write_json(out / "reports" / "summary.json", summary);
  write_json(out / "timings.json", result.timings);
  return result;
}

}  // namespace boxsam::pseudo
