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

#include "boxsam/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "boxsam/error.hpp"
#include "boxsam/io.hpp"

namespace boxsam::train {

namespace F = torch::nn::functional;
using nlohmann::json;

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr", "must be positive");
  if (weight_decay < 0.0) throw ConfigError("train.weight_decay", "must be >= 0");
  if (!(decay_factor > 0.0)) throw ConfigError("train.decay_factor", "must be positive");
  if (decay_epoch < 0) throw ConfigError("train.decay_epoch", "must be >= 0");
  if (epochs < 1) throw ConfigError("train.epochs", "must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every", "must be >= 0");
  if (loss.window < 1 || loss.window % 2 == 0) throw ConfigError("train.loss.window", "must be a positive odd number");
  if (!(loss.smooth > 0.0)) throw ConfigError("train.loss.smooth", "must be positive");
}

json to_json(const TrainConfig& c) {
  return json{
      {"lr", c.lr},
      {"weight_decay", c.weight_decay},
      {"decay_factor", c.decay_factor},
      {"decay_epoch", c.decay_epoch},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"seed", c.seed},
      {"deterministic", c.deterministic},
      {"hflip", c.hflip},
      {"checkpoint_every", c.checkpoint_every},
      {"loss", {{"window", c.loss.window}, {"boundary_gain", c.loss.boundary_gain}, {"smooth", c.loss.smooth}}},
  };
}

TrainConfig train_config_from_json(const json& doc, TrainConfig c) {
  if (!doc.is_object()) throw ConfigError("train", "must be an object");
  auto field = [](const json& obj, const std::string& prefix, const char* name, auto& target) {
    if (!obj.contains(name)) return;
    try {
      obj.at(name).get_to(target);
    } catch (const json::exception& e) {
      throw ConfigError(prefix + name, e.what());
    }
  };
  field(doc, "train.", "lr", c.lr);
  field(doc, "train.", "weight_decay", c.weight_decay);
  field(doc, "train.", "decay_factor", c.decay_factor);
  field(doc, "train.", "decay_epoch", c.decay_epoch);
  field(doc, "train.", "epochs", c.epochs);
  field(doc, "train.", "batch_size", c.batch_size);
  field(doc, "train.", "seed", c.seed);
  field(doc, "train.", "deterministic", c.deterministic);
  field(doc, "train.", "hflip", c.hflip);
  field(doc, "train.", "checkpoint_every", c.checkpoint_every);
  if (doc.contains("loss")) {
    const json& l = doc.at("loss");
    if (!l.is_object()) throw ConfigError("train.loss", "must be an object");
    field(l, "train.loss.", "window", c.loss.window);
    field(l, "train.loss.", "boundary_gain", c.loss.boundary_gain);
    field(l, "train.loss.", "smooth", c.loss.smooth);
  }
  c.validate();
  return c;
}

double learning_rate(const TrainConfig& config, int epoch) {
  if (epoch < 1) throw InvalidInputError("epochs are numbered from 1");
  return epoch <= config.decay_epoch ? config.lr : config.lr * config.decay_factor;
}

void set_determinism(std::uint64_t seed, bool deterministic) {
  torch::manual_seed(seed);
  if (deterministic) {
    at::set_num_threads(1);
    at::globalContext().setDeterministicAlgorithms(true, true);
  }
}

torch::Tensor image_tensor(const ImageSample& image, int height, int width) {
  image.validate();
  auto hwc = torch::from_blob(const_cast<float*>(image.pixels.data()), {image.height, image.width, 3},
                              torch::kFloat32);
  auto chw = hwc.permute({2, 0, 1}).contiguous().unsqueeze(0);
  return net::resize_bilinear(chw, height, width).squeeze(0).clamp(0.0, 1.0).contiguous();
}

torch::Tensor mask_tensor(const MaskMap& mask, int height, int width) {
  auto values = mask.values();
  auto t = torch::from_blob(const_cast<float*>(values.data()), {1, 1, mask.height(), mask.width()},
                            torch::kFloat32)
               .clone();
  if (t.size(2) != height || t.size(3) != width) {
    t = F::interpolate(t, F::InterpolateFuncOptions()
                              .size(std::vector<int64_t>{height, width})
                              .mode(torch::kNearest));
  }
  return t.squeeze(0).contiguous();
}

std::vector<TrainSample> load_samples(const DatasetManifest& manifest, Supervision supervision, int height,
                                      int width) {
  std::vector<TrainSample> out;
  out.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    const auto& path = supervision == Supervision::kGroundTruth ? e.gt_mask : e.pseudo_label;
    if (!path) {
      throw InvalidStateError("entry '" + e.id + "' has no " +
                              (supervision == Supervision::kGroundTruth ? "gt_mask" : "pseudo_label"));
    }
    const ImageSample image = load_image(e.image, e.id);
    const MaskRole role = supervision == Supervision::kGroundTruth ? MaskRole::kGroundTruth : MaskRole::kPseudoLabel;
    const MaskMap mask = load_mask(*path, role);
    if (mask.height() != image.height || mask.width() != image.width) {
      throw InvalidInputError("entry '" + e.id + "': mask size differs from image size");
    }
    out.push_back({e.id, image_tensor(image, height, width), mask_tensor(mask, height, width)});
  }
  return out;
}

json TrainLogRecord::to_json() const {
  return json{{"step", step}, {"epoch", epoch}, {"lr", lr}, {"loss", loss::to_json(loss)}, {"wall_ms", wall_ms}};
}

TrainResult train(const net::MGNetConfig& model_config, const TrainConfig& config,
                  const std::vector<TrainSample>& samples, const TrainOptions& options) {
  model_config.validate();
  config.validate();
  if (samples.empty()) throw InvalidInputError("training set is empty");
  for (const auto& s : samples) {
    if (s.image.size(1) != model_config.input_height || s.image.size(2) != model_config.input_width ||
        s.target.size(1) != model_config.input_height || s.target.size(2) != model_config.input_width) {
      throw InvalidInputError("sample '" + s.id + "' does not match the model input size");
    }
  }

  const std::size_t coarsest = static_cast<std::size_t>(model_config.input_height / 32) * (model_config.input_width / 32);
  const std::size_t tail = samples.size() % static_cast<std::size_t>(config.batch_size);
  if (coarsest == 1 && (samples.size() == 1 || config.batch_size == 1 || tail == 1)) {
    throw InvalidInputError("a single-sample batch at a 32x32 input leaves 1x1 stride-32 maps, which batch "
                            "normalization cannot train on; change the batch size or the input size");
  }

  set_determinism(config.seed, config.deterministic);
  TrainResult result;
  result.model = net::MGNet(model_config);
  net::MGNet& model = result.model;
  model->train();

  torch::optim::AdamW optimizer(model->parameters(),
                                torch::optim::AdamWOptions(config.lr).weight_decay(config.weight_decay));

  std::ofstream log;
  if (!options.log_path.empty()) {
    if (options.log_path.has_parent_path()) std::filesystem::create_directories(options.log_path.parent_path());
    log.open(options.log_path, std::ios::trunc);
    if (!log) throw IoError(options.log_path.string(), "cannot open log for writing");
  }

  const json echo = to_json(config);
  std::mt19937_64 rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(samples.size());
  const auto start = std::chrono::steady_clock::now();
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = learning_rate(config, epoch);
    for (auto& group : optimizer.param_groups()) {
      static_cast<torch::optim::AdamWOptions&>(group.options()).lr(lr);
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      std::vector<torch::Tensor> images, targets;
      for (std::size_t k = begin; k < end; ++k) {
        torch::Tensor img = samples[order[k]].image;
        torch::Tensor tgt = samples[order[k]].target;
        if (config.hflip && (rng() & 1U)) {
          img = img.flip({2});
          tgt = tgt.flip({2});
        }
        images.push_back(img);
        targets.push_back(tgt);
      }
      const auto x = torch::stack(images);
      const auto y = torch::stack(targets);

      const auto out = model->forward(x);
      for (const auto& logits : out.logits) {
        if (!torch::isfinite(logits).all().item<bool>())
          throw NumericError("non-finite network output at step " + std::to_string(result.steps + 1));
      }
      loss::LossBreakdown breakdown = loss::total_loss(out.logits, y, config.loss);
      if (!std::isfinite(breakdown.total)) {
        throw NumericError("non-finite loss at step " + std::to_string(result.steps + 1));
      }
      optimizer.zero_grad();
      breakdown.total_tensor.backward();
      optimizer.step();
      breakdown.total_tensor = torch::Tensor();

      ++result.steps;
      TrainLogRecord rec;
      rec.step = result.steps;
      rec.epoch = epoch;
      rec.lr = lr;
      rec.loss = std::move(breakdown);
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      if (log) log << rec.to_json().dump() << '\n' << std::flush;
      if (options.on_step) options.on_step(rec);
      result.log.push_back(std::move(rec));
    }

    if (!options.checkpoint_path.empty() && config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 &&
        epoch != config.epochs) {
      save_checkpoint(options.checkpoint_path, capture(model, result.steps, echo));
    }
  }
  if (!options.checkpoint_path.empty()) save_checkpoint(options.checkpoint_path, capture(model, result.steps, echo));
  model->eval();
  return result;
}

// --- checkpoints -----------------------------------------------------------

namespace {

// First path at which two JSON documents differ, or empty when equal.
std::string first_difference(const json& a, const json& b, const std::string& path) {
  if (a.is_object() && b.is_object()) {
    for (const auto& [key, value] : a.items()) {
      const std::string sub = path.empty() ? key : path + "." + key;
      if (!b.contains(key)) return sub;
      std::string d = first_difference(value, b.at(key), sub);
      if (!d.empty()) return d;
    }
    for (const auto& [key, value] : b.items()) {
      if (!a.contains(key)) return path.empty() ? key : path + "." + key;
    }
    return {};
  }
  return a == b ? std::string{} : (path.empty() ? std::string("(root)") : path);
}

}  // namespace

Checkpoint capture(const net::MGNet& model, std::int64_t step, const json& train_echo) {
  Checkpoint c;
  c.model = model->config();
  c.train = train_echo;
  c.step = step;
  for (const auto& item : model->named_parameters(true)) {
    c.state.emplace_back(item.key(), item.value().detach().clone());
  }
  for (const auto& item : model->named_buffers(true)) {
    c.state.emplace_back(item.key(), item.value().detach().clone());
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const json meta{{"format", "boxsam-checkpoint"},
                  {"format_version", kCheckpointFormatVersion},
                  {"model", net::to_json(checkpoint.model)},
                  {"train", checkpoint.train},
                  {"step", checkpoint.step}};
  write_archive(path, meta, checkpoint.state);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Archive archive = read_archive(path);
  const json& meta = archive.meta;
  if (meta.value("format", std::string()) != "boxsam-checkpoint") {
    throw InvalidInputError(path.string() + ": not a checkpoint archive");
  }
  const int version = meta.value("format_version", -1);
  if (version != kCheckpointFormatVersion) {
    throw InvalidInputError(path.string() + ": unsupported checkpoint version " + std::to_string(version) +
                            " (expected " + std::to_string(kCheckpointFormatVersion) + ")");
  }
  Checkpoint c;
  c.model = net::mgnet_config_from_json(meta.at("model"));
  c.train = meta.value("train", json::object());
  c.step = meta.value("step", std::int64_t{0});
  c.state = std::move(archive.arrays);
  return c;
}

void restore(net::MGNet& model, const Checkpoint& checkpoint) {
  const std::string diff = first_difference(net::to_json(model->config()), net::to_json(checkpoint.model), "");
  if (!diff.empty()) {
    throw ConfigError(diff, "checkpoint was written for a different model configuration");
  }
  std::unordered_map<std::string, const torch::Tensor*> by_name;
  for (const auto& [name, tensor] : checkpoint.state) by_name[name] = &tensor;

  torch::NoGradGuard guard;
  auto copy_into = [&](const std::string& name, torch::Tensor& dst) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw InvalidInputError("checkpoint is missing tensor '" + name + "'");
    const torch::Tensor& src = *it->second;
    if (src.sizes() != dst.sizes()) throw ConfigError(name, "tensor shape differs from the checkpoint");
    dst.copy_(src);
  };
  for (auto& item : model->named_parameters(true)) copy_into(item.key(), item.value());
  for (auto& item : model->named_buffers(true)) copy_into(item.key(), item.value());
}

net::MGNet model_from_checkpoint(const Checkpoint& checkpoint) {
  net::MGNet model(checkpoint.model);
  restore(model, checkpoint);
  model->eval();
  return model;
}

// --- prediction ------------------------------------------------------------

MaskMap predict_mask(net::MGNet& model, const ImageSample& image) {
  const auto& cfg = model->config();
  torch::NoGradGuard guard;
  model->eval();
  const auto x = image_tensor(image, cfg.input_height, cfg.input_width).unsqueeze(0);
  const auto out = model->forward(x);
  auto prob = net::resize_bilinear(torch::sigmoid(out.logits[0]), image.height, image.width)
                  .clamp(0.0, 1.0)
                  .contiguous();
  const float* p = prob.data_ptr<float>();
  std::vector<float> values(p, p + static_cast<std::size_t>(image.height) * image.width);
  return MaskMap(image.height, image.width, std::move(values), MaskRole::kPrediction);
}

std::vector<std::filesystem::path> predict(net::MGNet& model, const DatasetManifest& manifest,
                                           const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (const auto& e : manifest.entries) {
    const ImageSample image = load_image(e.image, e.id);
    const auto path = out_dir / (e.id + ".png");
    save_mask(path, predict_mask(model, image));
    written.push_back(path);
  }
  return written;
}

}  // namespace boxsam::train
