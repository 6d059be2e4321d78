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

#include <doctest.h>

#include <fstream>
#include <iterator>
#include <limits>

#include "boxsam/archive.hpp"
#include "boxsam/error.hpp"
#include "boxsam/io.hpp"
#include "boxsam/synth.hpp"
#include "boxsam/train.hpp"
#include "common/mgnet_checks.hpp"
#include "test_util.hpp"

using namespace boxsam;
namespace fs = std::filesystem;

namespace {

net::MGNetConfig tiny_model() {
  auto c = testing::small_config(8, 32);
  c.encoder.channels = {8, 8, 16, 16};
  return c;
}

train::TrainConfig quick(int epochs, int batch) {
  train::TrainConfig c;
  c.epochs = epochs;
  c.batch_size = batch;
  c.lr = 1e-3;
  c.seed = 4;
  return c;
}

std::vector<train::TrainSample> synth_samples(int n, int size = 32) {
  synth::SynthConfig sc;
  sc.count = n;
  sc.height = 64;
  sc.width = 64;
  sc.contrast = 1.0;
  std::vector<train::TrainSample> out;
  for (int i = 0; i < n; ++i) {
    const auto s = synth::generate_sample(sc, i);
    out.push_back({s.image.id, train::image_tensor(s.image, size, size), train::mask_tensor(s.ground_truth, size, size)});
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("learning rate has two plateaus") {
    train::TrainConfig c;
    std::vector<double> trace;
    for (int e = 1; e <= c.epochs; ++e) trace.push_back(train::learning_rate(c, e));
    CHECK(trace.front() == 1e-4);
    CHECK(trace[49] == 1e-4);
    CHECK(trace[50] == doctest::Approx(1e-5));
    CHECK(trace.back() == doctest::Approx(1e-5));
    std::sort(trace.begin(), trace.end());
    trace.erase(std::unique(trace.begin(), trace.end()), trace.end());
    REQUIRE(trace.size() == 2);
    CHECK(trace[1] / trace[0] == doctest::Approx(10.0));
    CHECK_THROWS_AS(train::learning_rate(c, 0), InvalidInputError);
  }

  TEST_CASE("config validation and JSON") {
    train::TrainConfig c;
    c.hflip = true;
    c.loss.window = 15;
    CHECK(train::to_json(train::train_config_from_json(train::to_json(c))) == train::to_json(c));
    auto expect_field = [](const nlohmann::json& doc, const std::string& field) {
      try {
        train::train_config_from_json(doc).validate();
        FAIL("expected ConfigError for " << field);
      } catch (const ConfigError& e) {
        CHECK(e.field() == field);
      }
    };
    expect_field({{"lr", -1.0}}, "train.lr");
    expect_field({{"epochs", 0}}, "train.epochs");
    expect_field({{"batch_size", 0}}, "train.batch_size");
    expect_field({{"lr", "fast"}}, "train.lr");
    CHECK(train::kLargeBackboneBatchSize == 12);
  }

  TEST_CASE("step count is epochs times batches per epoch") {
    auto samples = synth_samples(4);
    const auto r = train::train(tiny_model(), quick(1, 2), samples);
    CHECK(r.steps == 2);
    CHECK(r.log.size() == 2);
    CHECK(r.log[1].epoch == 1);
    samples.push_back(samples[0]);
    samples.push_back(samples[1]);
    CHECK(train::train(tiny_model(), quick(2, 4), samples).steps == 4);
    samples.pop_back();
    CHECK_THROWS_AS(train::train(tiny_model(), quick(1, 2), samples), InvalidInputError);
  }

  TEST_CASE("seeded runs reproduce the loss trace") {
    const auto samples = synth_samples(4);
    auto cfg = quick(2, 2);
    cfg.hflip = true;
    const auto a = train::train(tiny_model(), cfg, samples);
    const auto b = train::train(tiny_model(), cfg, samples);
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].loss.total == b.log[i].loss.total);
    cfg.seed = 5;
    const auto c = train::train(tiny_model(), cfg, samples);
    CHECK(c.log[0].loss.total != a.log[0].loss.total);
  }

  TEST_CASE("training loss falls") {
    const auto samples = synth_samples(8);
    const auto r = train::train(tiny_model(), quick(10, 4), samples);
    const double first = (r.log[0].loss.total + r.log[1].loss.total) / 2;
    const double last = (r.log[18].loss.total + r.log[19].loss.total) / 2;
    CHECK(last < first);
  }

  TEST_CASE("checkpoint round-trip reproduces the forward pass exactly") {
    const auto dir = testing::temp_dir("train_ckpt");
    const auto samples = synth_samples(4);
    train::TrainOptions opts;
    opts.checkpoint_path = dir / "model.ckpt";
    opts.log_path = dir / "train.jsonl";
    auto r = train::train(tiny_model(), quick(1, 4), samples, opts);
    const auto ckpt = train::load_checkpoint(opts.checkpoint_path);
    CHECK(ckpt.step == 1);
    CHECK(ckpt.train == train::to_json(quick(1, 4)));
    auto loaded = train::model_from_checkpoint(ckpt);
    const auto x = torch::rand({2, 3, 32, 32});
    torch::NoGradGuard guard;
    CHECK(torch::equal(r.model->forward(x).logits[0], loaded->forward(x).logits[0]));

    std::ifstream log(opts.log_path);
    std::string line;
    REQUIRE(std::getline(log, line));
    const auto rec = nlohmann::json::parse(line);
    CHECK(rec["step"] == 1);
    CHECK(rec.contains("lr"));

    auto other = tiny_model();
    other.width = 16;
    net::MGNet wrong(other);
    try {
      train::restore(wrong, ckpt);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.field() == "width");
    }
  }

  TEST_CASE("corrupt and foreign checkpoints are rejected") {
    const auto dir = testing::temp_dir("train_ckpt_bad");
    net::MGNet model(tiny_model());
    train::save_checkpoint(dir / "a.ckpt", train::capture(model, 0, {}));
    auto bytes = slurp(dir / "a.ckpt");
    bytes[bytes.size() / 2] ^= 0x10;
    std::ofstream(dir / "b.ckpt", std::ios::binary) << bytes;
    CHECK_THROWS_AS(train::load_checkpoint(dir / "b.ckpt"), ChecksumError);

    const auto archive = read_archive(dir / "a.ckpt");
    auto meta = archive.meta;
    meta["format_version"] = train::kCheckpointFormatVersion + 1;
    write_archive(dir / "c.ckpt", meta, archive.arrays);
    CHECK_THROWS_AS(train::load_checkpoint(dir / "c.ckpt"), InvalidInputError);
    CHECK_THROWS_AS(train::load_checkpoint(dir / "missing.ckpt"), IoError);
  }

  TEST_CASE("NaN aborts training and leaves the checkpoint on disk") {
    const auto dir = testing::temp_dir("train_nan");
    auto samples = synth_samples(4);
    train::TrainOptions opts;
    opts.checkpoint_path = dir / "model.ckpt";
    train::train(tiny_model(), quick(1, 4), samples, opts);
    const auto before = slurp(opts.checkpoint_path);

    samples[2].image[0][5][5] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(train::train(tiny_model(), quick(2, 2), samples, opts), NumericError);
    CHECK(slurp(opts.checkpoint_path) == before);
  }

  TEST_CASE("samples must match the input size") {
    const auto samples = synth_samples(2, 64);
    CHECK_THROWS_AS(train::train(tiny_model(), quick(1, 2), samples), InvalidInputError);
    CHECK_THROWS_AS(train::train(tiny_model(), quick(1, 2), {}), InvalidInputError);
  }

  TEST_CASE("predict writes one deterministic PNG per entry") {
    const auto dir = testing::temp_dir("train_predict");
    synth::SynthConfig sc;
    sc.count = 3;
    sc.height = 64;
    sc.width = 96;
    const auto manifest = synth::generate(sc, dir / "data");
    net::MGNet model(tiny_model());
    model->eval();
    const auto paths = train::predict(model, manifest, dir / "a");
    REQUIRE(paths.size() == 3);
    train::predict(model, manifest, dir / "b");
    for (const auto& e : manifest.entries) {
      const auto p = dir / "a" / (e.id + ".png");
      CHECK(fs::exists(p));
      CHECK(slurp(p) == slurp(dir / "b" / (e.id + ".png")));
      const auto m = load_mask(p);
      CHECK(m.height() == 64);
      CHECK(m.width() == 96);
    }
  }

  TEST_CASE("supervision masks load at the input size") {
    const auto dir = testing::temp_dir("train_load");
    synth::SynthConfig sc;
    sc.count = 2;
    auto manifest = synth::generate(sc, dir);
    const auto gt = train::load_samples(manifest, train::Supervision::kGroundTruth, 32, 32);
    REQUIRE(gt.size() == 2);
    CHECK(gt[0].image.sizes() == torch::IntArrayRef({3, 32, 32}));
    CHECK(gt[0].target.sizes() == torch::IntArrayRef({1, 32, 32}));
    CHECK(((gt[0].target == 0) | (gt[0].target == 1)).all().item<bool>());
    CHECK_THROWS_AS(train::load_samples(manifest, train::Supervision::kPseudoLabel, 32, 32), InvalidStateError);
  }
}
