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

#include "boxsam/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "boxsam/components.hpp"
#include "boxsam/error.hpp"
#include "boxsam/io.hpp"
#include "boxsam/manifest.hpp"
#include "boxsam/metrics.hpp"
#include "boxsam/parallel.hpp"
#include "boxsam/pipeline.hpp"
#include "boxsam/synth.hpp"
#include "boxsam/train.hpp"

namespace boxsam::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path, const std::string& field) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(field, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& doc) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << doc.dump(2) << '\n';
}

// Refuses to write into an existing, non-empty output unless forced.
void claim_output(const fs::path& path, bool force, const std::string& flag) {
  if (!fs::exists(path) || force) return;
  if (fs::is_directory(path) && fs::is_empty(path)) return;
  throw ConfigError(flag, path.string() + " already exists; pass --force to overwrite");
}

std::optional<std::uint64_t> env_seed() {
  const char* text = std::getenv("BOXSAM_SEED");
  if (text == nullptr || *text == '\0') return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(text, &end, 10);
  if (*end != '\0') throw ConfigError("BOXSAM_SEED", std::string("not an unsigned integer: '") + text + "'");
  return v;
}

std::vector<fs::path> png_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string(), "not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

Connectivity connectivity_from(int value) {
  if (value != 4 && value != 8) throw ConfigError("--connectivity", "must be 4 or 8");
  return static_cast<Connectivity>(value);
}

template <typename T>
void override_with(const std::optional<T>& flag, T& target) {
  if (flag) target = *flag;
}

struct ModelFlags {
  std::optional<int> width, input_height, input_width, encoder_depth;
  bool no_cmd = false, no_cem = false, no_mfam = false;

  void attach(CLI::App* app) {
    app->add_option("--width", width, "Decoder width D (even, >= 8)");
    app->add_option("--input-height", input_height, "Network input height (multiple of 32)");
    app->add_option("--input-width", input_width, "Network input width (multiple of 32)");
    app->add_option("--encoder-depth", encoder_depth, "Residual blocks per encoder stage");
    app->add_flag("--no-cmd", no_cmd, "Ablate the cascaded mask decoder");
    app->add_flag("--no-cem", no_cem, "Ablate the context enhancement module");
    app->add_flag("--no-mfam", no_mfam, "Ablate mask-guided aggregation");
  }
  void override(net::MGNetConfig& c) const {
    override_with(width, c.width);
    override_with(input_height, c.input_height);
    override_with(input_width, c.input_width);
    override_with(encoder_depth, c.encoder.depth);
    if (no_cmd) c.use_cmd = false;
    if (no_cem) c.use_cem = false;
    if (no_mfam) c.use_mfam = false;
    c.validate();
  }
};

struct TrainFlags {
  std::optional<double> lr, weight_decay, decay_factor;
  std::optional<int> decay_epoch, epochs, batch_size, checkpoint_every;
  std::optional<std::uint64_t> seed;
  bool hflip = false, nondeterministic = false;

  void attach(CLI::App* app) {
    app->add_option("--lr", lr, "Base learning rate");
    app->add_option("--weight-decay", weight_decay, "AdamW weight decay");
    app->add_option("--decay-factor", decay_factor, "Learning-rate multiplier after the decay epoch");
    app->add_option("--decay-epoch", decay_epoch, "Last epoch at the base learning rate");
    app->add_option("--epochs", epochs, "Training epochs");
    app->add_option("--batch-size", batch_size, "Images per step");
    app->add_option("--checkpoint-every", checkpoint_every, "Checkpoint interval in epochs (0: end only)");
    app->add_option("--seed", seed, "Random seed (overrides BOXSAM_SEED and the config)");
    app->add_flag("--hflip", hflip, "Random horizontal flips");
    app->add_flag("--nondeterministic", nondeterministic, "Allow multi-threaded kernels");
  }
  void override(train::TrainConfig& c) const {
    if (auto s = env_seed()) c.seed = *s;
    override_with(lr, c.lr);
    override_with(weight_decay, c.weight_decay);
    override_with(decay_factor, c.decay_factor);
    override_with(decay_epoch, c.decay_epoch);
    override_with(epochs, c.epochs);
    override_with(batch_size, c.batch_size);
    override_with(checkpoint_every, c.checkpoint_every);
    override_with(seed, c.seed);
    if (hflip) c.hflip = true;
    if (nondeterministic) c.deterministic = false;
    c.validate();
  }
};

struct Command {
  CLI::App* app = nullptr;
  std::function<void()> run;
};

// --- subcommands -----------------------------------------------------------

void add_synth(CLI::App& root, std::vector<Command>& cmds, std::ostream& out) {
  auto* app = root.add_subcommand("synth", "Generate a synthetic camouflage dataset");
  struct Opts {
    std::string out_dir, config;
    std::optional<int> count, test_count, height, width, objects_min, objects_max;
    std::optional<double> contrast, radius_min, radius_max;
    std::optional<std::uint64_t> seed;
    bool force = false;
  };
  auto o = std::make_shared<Opts>();
  app->add_option("--out", o->out_dir, "Output directory")->required();
  app->add_option("--config", o->config, "JSON file with synth settings");
  app->add_option("--count", o->count, "Training images");
  app->add_option("--test-count", o->test_count, "Additional test images");
  app->add_option("--height", o->height, "Image height (multiple of 32)");
  app->add_option("--width", o->width, "Image width (multiple of 32)");
  app->add_option("--objects-min", o->objects_min, "Minimum objects per image");
  app->add_option("--objects-max", o->objects_max, "Maximum objects per image");
  app->add_option("--contrast", o->contrast, "Foreground colour offset in [0, 1]");
  app->add_option("--radius-min", o->radius_min, "Minimum object radius, fraction of image size");
  app->add_option("--radius-max", o->radius_max, "Maximum object radius, fraction of image size");
  app->add_option("--seed", o->seed, "Random seed (overrides BOXSAM_SEED and the config)");
  app->add_flag("--force", o->force, "Overwrite an existing output directory");
  cmds.push_back({app, [o, &out] {
                    synth::SynthConfig c;
                    if (!o->config.empty()) {
                      json doc = read_json(o->config, "--config");
                      c = synth::synth_config_from_json(doc.contains("synth") ? doc.at("synth") : doc);
                    }
                    if (auto s = env_seed()) c.seed = *s;
                    override_with(o->count, c.count);
                    override_with(o->test_count, c.test_count);
                    override_with(o->height, c.height);
                    override_with(o->width, c.width);
                    override_with(o->objects_min, c.objects_min);
                    override_with(o->objects_max, c.objects_max);
                    override_with(o->contrast, c.contrast);
                    override_with(o->radius_min, c.radius_min);
                    override_with(o->radius_max, c.radius_max);
                    override_with(o->seed, c.seed);
                    c.validate();
                    claim_output(o->out_dir, o->force, "--out");
                    const DatasetManifest m = synth::generate(c, o->out_dir);
                    write_json(fs::path(o->out_dir) / "synth_config.json", synth::to_json(c));
                    out << "synth: images=" << m.entries.size() << " train=" << m.count(Split::kTrain)
                        << " test=" << m.count(Split::kTest)
                        << " manifest=" << (fs::path(o->out_dir) / "manifest.json").string() << '\n';
                  }});
}

void add_boxes(CLI::App& root, std::vector<Command>& cmds, std::ostream& out) {
  auto* app = root.add_subcommand("boxes", "Derive annotation boxes from a directory of masks");
  struct Opts {
    std::string masks, out_file;
    int connectivity = 8;
    bool no_merge = false, force = false;
  };
  auto o = std::make_shared<Opts>();
  app->add_option("--masks", o->masks, "Directory of binary PNG masks")->required();
  app->add_option("--out", o->out_file, "Output JSON file")->required();
  app->add_option("--connectivity", o->connectivity, "Pixel connectivity, 4 or 8");
  app->add_flag("--no-merge", o->no_merge, "Keep overlapping component boxes separate");
  app->add_flag("--force", o->force, "Overwrite an existing output file");
  cmds.push_back({app, [o, &out] {
                    const Connectivity conn = connectivity_from(o->connectivity);
                    claim_output(o->out_file, o->force, "--out");
                    json doc = json::object();
                    std::size_t total = 0;
                    const auto files = png_files(o->masks);
                    for (const auto& f : files) {
                      const MaskMap m = load_mask(f, MaskRole::kGroundTruth);
                      json boxes = json::array();
                      for (const auto& b : boxes_from_mask(m, !o->no_merge, conn)) {
                        boxes.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
                        ++total;
                      }
                      doc[f.stem().string()] = boxes;
                    }
                    write_json(o->out_file, doc);
                    out << "boxes: masks=" << files.size() << " boxes=" << total << " out=" << o->out_file << '\n';
                  }});
}

struct SegmenterFlags {
  std::string config, segmenter;
  std::string masks_dir;
  std::optional<int> extra_blobs, blob_min, blob_max, morph_jitter;
  std::optional<double> blob_probability;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* app) {
    app->add_option("--segmenter", segmenter, "Segmenter kind: oracle or external");
    app->add_option("--masks-dir", masks_dir, "Directory of precomputed masks for the external segmenter");
    app->add_option("--extra-blobs", extra_blobs, "Oracle: background blobs injected per image");
    app->add_option("--blob-min", blob_min, "Oracle: minimum blob radius in pixels");
    app->add_option("--blob-max", blob_max, "Oracle: maximum blob radius in pixels");
    app->add_option("--morph-jitter", morph_jitter, "Oracle: maximum dilation/erosion steps");
    app->add_option("--blob-probability", blob_probability, "Oracle: chance that an image receives blobs");
    app->add_option("--seed", seed, "Oracle noise seed (overrides BOXSAM_SEED and the config)");
  }
  pseudo::SegmenterConfig resolve(const pseudo::SegmenterConfig& base) const {
    pseudo::SegmenterConfig c = base;
    if (auto s = env_seed()) c.noise.seed = *s;
    if (!segmenter.empty()) c.kind = segmenter;
    if (!masks_dir.empty()) c.directory = masks_dir;
    override_with(extra_blobs, c.noise.extra_blob_count);
    override_with(blob_min, c.noise.blob_size_range.first);
    override_with(blob_max, c.noise.blob_size_range.second);
    override_with(morph_jitter, c.noise.morph_jitter);
    override_with(blob_probability, c.noise.blob_probability);
    override_with(seed, c.noise.seed);
    if (c.kind != "oracle" && c.kind != "external") throw ConfigError("--segmenter", "expected oracle or external");
    if (c.kind == "external" && c.directory.empty()) throw ConfigError("--masks-dir", "required for external");
    return c;
  }
};

void add_pseudo(CLI::App& root, std::vector<Command>& cmds, std::ostream& out) {
  auto* app = root.add_subcommand("pseudo", "Generate initial pseudo-labels from box prompts");
  struct Opts {
    std::string manifest, out_dir, config;
    int jobs = 1;
    bool force = false;
    SegmenterFlags seg;
  };
  auto o = std::make_shared<Opts>();
  app->add_option("--manifest", o->manifest, "Dataset manifest with boxes")->required();
  app->add_option("--out", o->out_dir, "Output directory")->required();
  app->add_option("--config", o->config, "Pipeline config supplying the segmenter section");
  o->seg.attach(app);
  app->add_option("--jobs", o->jobs, "Worker threads");
  app->add_flag("--force", o->force, "Overwrite an existing output directory");
  cmds.push_back({app, [o, &out] {
                    pseudo::SegmenterConfig base;
                    if (!o->config.empty()) {
                      base = pseudo::pipeline_config_from_json(read_json(o->config, "--config"),
                                                               fs::path(o->config).parent_path())
                                 .segmenter;
                    }
                    const pseudo::SegmenterConfig sc = o->seg.resolve(base);
                    if (o->jobs < 1) throw ConfigError("--jobs", "must be >= 1");
                    const DatasetManifest manifest = DatasetManifest::load(o->manifest);
                    claim_output(o->out_dir, o->force, "--out");
                    std::shared_ptr<pseudo::PromptableSegmenter> seg;
                    if (sc.kind == "external") {
                      seg = std::make_shared<pseudo::ExternalMaskLoader>(sc.directory);
                    } else {
                      seg = pseudo::OracleSegmenter::from_manifest(manifest, sc.noise);
                    }
                    const fs::path dir(o->out_dir);
                    auto result = pseudo::generate_initial_pseudolabels(*seg, manifest, dir / "labels", o->jobs);
                    result.manifest.save(dir / "manifest.json");
                    json failures = json::array();
                    for (const auto& f : result.failures) failures.push_back(pseudo::to_json(f));
                    write_json(dir / "failures.json", failures);
                    out << "pseudo: labeled=" << result.manifest.count(Split::kTrain)
                        << " failed=" << result.failures.size()
                        << " manifest=" << (dir / "manifest.json").string() << '\n';
                  }});
}

void add_partition(CLI::App& root, std::vector<Command>& cmds, std::ostream& out) {
  auto* app = root.add_subcommand("partition", "Split pseudo-labelled samples by box-count consistency");
  struct Opts {
    std::string manifest, out_dir;
    int connectivity = 8;
    bool force = false;
  };
  auto o = std::make_shared<Opts>();
  app->add_option("--manifest", o->manifest, "Manifest with pseudo-label paths")->required();
  app->add_option("--out", o->out_dir, "Output directory")->required();
  app->add_option("--connectivity", o->connectivity, "Pixel connectivity, 4 or 8");
  app->add_flag("--force", o->force, "Overwrite an existing output directory");
  cmds.push_back({app, [o, &out] {
                    const Connectivity conn = connectivity_from(o->connectivity);
                    const DatasetManifest manifest = DatasetManifest::load(o->manifest);
                    claim_output(o->out_dir, o->force, "--out");
                    const auto part = pseudo::partition_by_box_count(manifest, conn);
                    const fs::path dir(o->out_dir);
                    fs::create_directories(dir);
                    part.consistent.save(dir / "consistent.json");
                    part.flagged.save(dir / "flagged.json");
                    DatasetManifest merged;
                    for (const auto& e : manifest.entries) {
                      if (const auto* c = part.consistent.find(e.id)) {
                        merged.entries.push_back(*c);
                      } else if (const auto* f = part.flagged.find(e.id)) {
                        merged.entries.push_back(*f);
                      } else {
                        merged.entries.push_back(e);
                      }
                    }
                    merged.save(dir / "manifest.json");
                    out << "partition: consistent=" << part.consistent.entries.size()
                        << " flagged=" << part.flagged.entries.size() << '\n';
                  }});
}

void add_rps(CLI::App& root, std::vector<Command>& cmds, std::ostream& out) {
  auto* app = root.add_subcommand("rps", "Refine pseudo-labels against predictions (redundancy processing)");
  struct Opts {
    std::string labels, predictions, out_dir, manifest;
    double tau = 0.0;
    int connectivity = 8;
    int jobs = 1;
    bool force = false;
  };
  auto o = std::make_shared<Opts>();
  app->add_option("--labels", o->labels, "Directory of binary pseudo-label PNGs")->required();
  app->add_option("--predictions", o->predictions, "Directory of prediction PNGs with matching names")->required();
  app->add_option("--out", o->out_dir, "Output directory for refined labels and rps.json")->required();
  app->add_option("--manifest", o->manifest, "Manifest supplying annotation box counts");
  app->add_option("--tau", o->tau, "Keep a component when any prediction value exceeds tau");
  app->add_option("--connectivity", o->connectivity, "Pixel connectivity, 4 or 8");
  app->add_option("--jobs", o->jobs, "Worker threads");
  app->add_flag("--force", o->force, "Overwrite an existing output directory");
  cmds.push_back({app, [o, &out] {
                    const Connectivity conn = connectivity_from(o->connectivity);
                    if (!(o->tau >= 0.0 && o->tau < 1.0)) throw ConfigError("--tau", "must lie in [0, 1)");
                    if (o->jobs < 1) throw ConfigError("--jobs", "must be >= 1");
                    std::optional<DatasetManifest> manifest;
                    if (!o->manifest.empty()) manifest = DatasetManifest::load(o->manifest);
                    const auto files = png_files(o->labels);
                    claim_output(o->out_dir, o->force, "--out");
                    const fs::path dir(o->out_dir);
                    std::vector<pseudo::RpsReport> reports(files.size());
                    parallel_for(files.size(), o->jobs, [&](std::size_t i) {
                      const std::string id = files[i].stem().string();
                      const fs::path pred_path = fs::path(o->predictions) / files[i].filename();
                      const MaskMap f = load_mask(files[i], MaskRole::kPseudoLabel);
                      const MaskMap p = load_mask(pred_path, MaskRole::kPrediction);
                      auto r = pseudo::redundancy_process(f, p, o->tau, conn);
                      r.report.id = id;
                      if (manifest) {
                        if (const auto* e = manifest->find(id)) {
                          r.report.box_count_annotation = static_cast<int>(e->boxes.size());
                        }
                      }
                      r.report.matched = r.report.box_count_pseudo == r.report.box_count_annotation;
                      save_mask(dir / files[i].filename(), r.refined);
                      reports[i] = r.report;
                    });
                    json doc{{"tau", o->tau}, {"connectivity", o->connectivity}, {"samples", json::array()}};
                    int total = 0, kept = 0, removed = 0;
                    for (const auto& r : reports) {
                      doc["samples"].push_back(r.to_json());
                      total += r.components_total;
                      kept += r.components_kept;
                      removed += r.components_removed;
                    }
                    write_json(dir / "rps.json", doc);
                    out << "rps: samples=" << reports.size() << " components=" << total << " kept=" << kept
                        << " removed=" << removed << '\n';
                  }});
}

void add_train(CLI::App& root, std::vector<Command>& cmds, std::ostream& out) {
  auto* app = root.add_subcommand("train", "Train MGNet on a manifest");
  struct Opts {
    std::string manifest, out_dir, config, supervision = "pseudo";
    bool force = false;
    ModelFlags model;
    TrainFlags train;
  };
  auto o = std::make_shared<Opts>();
  app->add_option("--manifest", o->manifest, "Dataset manifest (train and flagged entries are used)")->required();
  app->add_option("--out", o->out_dir, "Output directory for model.ckpt, train.jsonl, config.json")->required();
  app->add_option("--config", o->config, "JSON config with model and train sections");
  app->add_option("--supervision", o->supervision, "Supervision masks: pseudo or gt");
  o->model.attach(app);
  o->train.attach(app);
  app->add_flag("--force", o->force, "Overwrite an existing output directory");
  cmds.push_back({app, [o, &out] {
                    net::MGNetConfig mc;
                    train::TrainConfig tc;
                    if (!o->config.empty()) {
                      const json doc = read_json(o->config, "--config");
                      if (doc.contains("model")) mc = net::mgnet_config_from_json(doc.at("model"));
                      if (doc.contains("train")) tc = train::train_config_from_json(doc.at("train"));
                    }
                    o->model.override(mc);
                    o->train.override(tc);
                    if (o->supervision != "pseudo" && o->supervision != "gt") {
                      throw ConfigError("--supervision", "expected pseudo or gt");
                    }
                    const DatasetManifest manifest = DatasetManifest::load(o->manifest);
                    DatasetManifest training;
                    for (const auto& e : manifest.entries) {
                      if (e.split != Split::kTest) training.entries.push_back(e);
                    }
                    if (training.entries.empty()) throw InvalidStateError("manifest has no training entries");
                    claim_output(o->out_dir, o->force, "--out");
                    const fs::path dir(o->out_dir);
                    write_json(dir / "config.json", json{{"model", net::to_json(mc)}, {"train", train::to_json(tc)}});
                    const auto sup = o->supervision == "gt" ? train::Supervision::kGroundTruth
                                                            : train::Supervision::kPseudoLabel;
                    const auto samples = train::load_samples(training, sup, mc.input_height, mc.input_width);
                    train::TrainOptions opts;
                    opts.checkpoint_path = dir / "model.ckpt";
                    opts.log_path = dir / "train.jsonl";
                    const auto result = train::train(mc, tc, samples, opts);
                    std::ostringstream loss;
                    loss << std::setprecision(6) << result.log.back().loss.total;
                    out << "train: steps=" << result.steps << " final_loss=" << loss.str()
                        << " checkpoint=" << opts.checkpoint_path.string() << '\n';
                  }});
}

void add_predict(CLI::App& root, std::vector<Command>& cmds, std::ostream& out) {
  auto* app = root.add_subcommand("predict", "Write sigmoid(P1) masks for manifest images");
  struct Opts {
    std::string checkpoint, manifest, out_dir, split = "all";
    bool force = false;
  };
  auto o = std::make_shared<Opts>();
  app->add_option("--checkpoint", o->checkpoint, "Model checkpoint")->required();
  app->add_option("--manifest", o->manifest, "Dataset manifest")->required();
  app->add_option("--out", o->out_dir, "Output directory for <id>.png predictions")->required();
  app->add_option("--split", o->split, "Entries to predict: all, train, flagged or test");
  app->add_flag("--force", o->force, "Overwrite an existing output directory");
  cmds.push_back({app, [o, &out] {
                    if (o->split != "all") split_from_string(o->split);
                    const train::Checkpoint ckpt = train::load_checkpoint(o->checkpoint);
                    DatasetManifest manifest = DatasetManifest::load(o->manifest);
                    if (o->split != "all") manifest = manifest.with_split(split_from_string(o->split));
                    claim_output(o->out_dir, o->force, "--out");
                    net::MGNet model = train::model_from_checkpoint(ckpt);
                    train::set_determinism(0, true);
                    const auto written = train::predict(model, manifest, o->out_dir);
                    out << "predict: images=" << written.size() << " out=" << o->out_dir << '\n';
                  }});
}

void add_eval(CLI::App& root, std::vector<Command>& cmds, std::ostream& out) {
  auto* app = root.add_subcommand("eval", "Score prediction masks against ground truth");
  struct Opts {
    std::string pred, gt, out_file, name = "dataset";
    bool force = false;
  };
  auto o = std::make_shared<Opts>();
  app->add_option("--pred", o->pred, "Directory of prediction PNGs")->required();
  app->add_option("--gt", o->gt, "Directory of ground-truth PNGs with matching names")->required();
  app->add_option("--out", o->out_file, "Write the MetricReport JSON here");
  app->add_option("--name", o->name, "Dataset label for the table");
  app->add_flag("--force", o->force, "Overwrite an existing report file");
  cmds.push_back({app, [o, &out] {
                    if (!o->out_file.empty()) claim_output(o->out_file, o->force, "--out");
                    std::vector<metrics::ImageMetrics> rows;
                    for (const auto& g : png_files(o->gt)) {
                      const fs::path p = fs::path(o->pred) / g.filename();
                      if (!fs::exists(p)) throw InvalidInputError("no prediction for " + g.filename().string());
                      rows.push_back(metrics::evaluate_image(g.stem().string(), load_mask(p, MaskRole::kPrediction),
                                                             load_mask(g, MaskRole::kGroundTruth)));
                    }
                    if (rows.empty()) throw InvalidInputError("no ground-truth masks in " + o->gt);
                    const auto report = metrics::aggregate(std::move(rows));
                    if (!o->out_file.empty()) write_json(o->out_file, report.to_json());
                    out << report.table(o->name);
                    out << "eval: images=" << report.image_count << ' ' << report.summary_line() << '\n';
                  }});
}

void add_boxsam(CLI::App& root, std::vector<Command>& cmds, std::ostream& out) {
  auto* app = root.add_subcommand("boxsam", "Run the full two-phase pseudo-label pipeline");
  struct Opts {
    std::string config, manifest, out_dir;
    std::optional<double> tau;
    std::optional<int> jobs;
    bool force = false;
    ModelFlags model;
    TrainFlags train;
  };
  auto o = std::make_shared<Opts>();
  app->add_option("--config", o->config, "Pipeline config JSON")->required();
  app->add_option("--manifest", o->manifest, "Override paths.manifest");
  app->add_option("--out", o->out_dir, "Override paths.out_dir");
  app->add_option("--tau", o->tau, "Override rps.tau");
  app->add_option("--jobs", o->jobs, "Worker threads");
  o->model.attach(app);
  o->train.attach(app);
  app->add_flag("--force", o->force, "Overwrite an existing output directory");
  cmds.push_back({app, [o, &out] {
                    auto c = pseudo::pipeline_config_from_json(read_json(o->config, "--config"),
                                                               fs::path(o->config).parent_path());
                    if (auto s = env_seed()) c.segmenter.noise.seed = *s;
                    if (!o->manifest.empty()) c.manifest = o->manifest;
                    if (!o->out_dir.empty()) c.out_dir = o->out_dir;
                    override_with(o->tau, c.rps.tau);
                    override_with(o->jobs, c.jobs);
                    o->model.override(c.model);
                    o->train.override(c.train);
                    c.validate();
                    claim_output(c.out_dir, o->force, "--out");
                    fs::create_directories(c.out_dir);
                    write_json(c.out_dir / "config.json", pseudo::to_json(c));
                    const auto r = pseudo::run_boxsam(c);
                    int removed = 0;
                    for (const auto& rep : r.reports) removed += rep.components_removed;
                    out << "boxsam: consistent=" << r.final_manifest.count(Split::kTrain)
                        << " flagged=" << r.reports.size() << " removed=" << removed
                        << " failures=" << r.failures.size() << " checkpoint=" << r.final_checkpoint.string();
                    for (std::size_t i = 0; i < r.metrics.size(); ++i) {
                      if (r.metric_names[i] == "train_final") out << ' ' << r.metrics[i].summary_line();
                    }
                    out << '\n';
                  }});
}

void render_report(const fs::path& path, std::ostream& out) {
  if (path.extension() == ".jsonl") {
    std::ifstream in(path);
    if (!in) throw IoError(path.string(), "cannot open");
    std::map<int, std::pair<double, int>> per_epoch;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json rec = json::parse(line);
      auto& acc = per_epoch[rec.at("epoch").get<int>()];
      acc.first += rec.at("loss").at("total").get<double>();
      acc.second += 1;
    }
    out << path.filename().string() << '\n' << "epoch  steps  mean_loss\n";
    for (const auto& [epoch, acc] : per_epoch) {
      out << std::setw(5) << epoch << "  " << std::setw(5) << acc.second << "  " << std::fixed
          << std::setprecision(6) << acc.first / acc.second << '\n';
    }
    out.unsetf(std::ios::floatfield);
    return;
  }
  const json doc = read_json(path, "report");
  if (doc.is_object() && doc.contains("samples") && doc.contains("tau")) {
    std::vector<pseudo::RpsReport> reports;
    for (const auto& s : doc.at("samples")) reports.push_back(pseudo::RpsReport::from_json(s));
    out << path.filename().string() << " (tau=" << doc.at("tau").get<double>() << ")\n" << pseudo::rps_table(reports);
  } else if (doc.is_object() && doc.contains("images") && doc.contains("mean")) {
    out << metrics::MetricReport::from_json(doc).table(path.stem().string());
  } else if (doc.is_object()) {
    out << path.filename().string() << '\n';
    for (const auto& [key, value] : doc.items()) out << "  " << key << ": " << value.dump() << '\n';
  } else {
    throw InvalidInputError(path.string() + ": unrecognised report");
  }
}

void add_report(CLI::App& root, std::vector<Command>& cmds, std::ostream& out) {
  auto* app = root.add_subcommand("report", "Render JSON reports and training logs as text tables");
  auto files = std::make_shared<std::vector<std::string>>();
  app->add_option("files", *files, "Report files (metrics, rps, summary JSON or a .jsonl log)")->required();
  cmds.push_back({app, [files, &out] {
                    for (const auto& f : *files) render_report(f, out);
                    out << "report: files=" << files->size() << '\n';
                  }});
}

int code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kConfig:
      return kExitConfig;
    case ErrorKind::kInvalidInput:
    case ErrorKind::kInvalidState:
    case ErrorKind::kIo:
    case ErrorKind::kChecksum:
      return kExitData;
    case ErrorKind::kNumeric:
      return kExitRuntime;
  }
  return kExitRuntime;
}

}  // namespace

std::vector<std::string> subcommands() {
  return {"synth", "boxes", "pseudo", "partition", "rps", "train", "predict", "eval", "boxsam", "report"};
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Box-supervised camouflaged object detection toolkit", "boxsam"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", "boxsam 0.1.0");
  std::vector<Command> cmds;
  add_synth(app, cmds, out);
  add_boxes(app, cmds, out);
  add_pseudo(app, cmds, out);
  add_partition(app, cmds, out);
  add_rps(app, cmds, out);
  add_train(app, cmds, out);
  add_predict(app, cmds, out);
  add_eval(app, cmds, out);
  add_boxsam(app, cmds, out);
  add_report(app, cmds, out);

  std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  try {
    for (const auto& c : cmds) {
      if (c.app->parsed()) c.run();
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace boxsam::cli
