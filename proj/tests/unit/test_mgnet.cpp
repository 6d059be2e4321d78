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

#include "boxsam/archive.hpp"
#include "boxsam/error.hpp"
#include "boxsam/mgnet.hpp"
#include "common/mgnet_checks.hpp"
#include "test_util.hpp"

using namespace boxsam;
using net::MGNet;

namespace {

// Bounding extent (rows, cols) of the nonzero entries of a (1, C, H, W) map.
std::pair<int64_t, int64_t> nonzero_extent(const torch::Tensor& t) {
  const auto nz = t.abs().sum({0, 1}).nonzero();
  if (nz.size(0) == 0) return {0, 0};
  const auto rows = nz.select(1, 0);
  const auto cols = nz.select(1, 1);
  return {rows.max().item<int64_t>() - rows.min().item<int64_t>() + 1,
          cols.max().item<int64_t>() - cols.min().item<int64_t>() + 1};
}

}  // namespace

TEST_SUITE("mgnet") {
  TEST_CASE("output shapes follow the pyramid strides") {
    torch::manual_seed(0);
    MGNet model(testing::small_config(16, 64));
    model->eval();
    const auto out = model->forward(torch::rand({2, 3, 64, 64}));
    for (const auto& p : out.logits) CHECK(p.sizes() == torch::IntArrayRef({2, 1, 64, 64}));
    CHECK(out.guidance.sizes() == torch::IntArrayRef({2, 1, 16, 16}));
    for (int i = 0; i < 4; ++i) {
      const int64_t s = 64 / (4 << i);
      CHECK(out.context[i].sizes() == torch::IntArrayRef({2, 16, s, s}));
    }
    for (int i = 0; i < 3; ++i) {
      const int64_t s = 64 / (4 << i);
      CHECK(out.aggregated[i].sizes() == torch::IntArrayRef({2, 16, s, s}));
      CHECK(out.foreground[i].sizes() == torch::IntArrayRef({2, 1, s, s}));
    }
  }

  TEST_CASE("foreground and background guidance are complementary") {
    for (auto order : {net::GuidanceOrder::kResizeThenSigmoid, net::GuidanceOrder::kSigmoidThenResize}) {
      auto cfg = testing::small_config(8, 64);
      cfg.guidance_order = order;
      torch::manual_seed(1);
      MGNet model(cfg);
      for (int trial = 0; trial < 3; ++trial) {
        const auto out = model->forward(torch::rand({1, 3, 64, 64}));
        CHECK(testing::complement_deviation(out) <= 1e-6);
        for (int i = 0; i < 3; ++i) {
          CHECK(out.foreground[i].min().item<float>() >= 0.0f);
          CHECK(out.foreground[i].max().item<float>() <= 1.0f);
        }
      }
    }
  }

  TEST_CASE("zeroing the aggregation convolutions leaves the residual path") {
    torch::manual_seed(2);
    MGNet model(testing::small_config(8, 64));
    model->eval();
    CHECK(testing::residual_surgery_exact(model, torch::rand({1, 3, 64, 64})));
  }

  TEST_CASE("CEM branch receptive field grows with the dilation rate") {
    torch::manual_seed(3);
    net::Cem cem(8, 8, std::array<int, 3>{1, 3, 5}, 4);
    cem->eval();
    torch::NoGradGuard guard;
    for (auto& item : cem->named_parameters()) {
      if (item.key().find("bias") != std::string::npos)
        item.value().zero_();
      else
        item.value().uniform_(0.1, 1.0);
    }
    auto impulse = torch::zeros({1, 8, 33, 33});
    impulse.index_put_({0, torch::indexing::Slice(), 16, 16}, 1.0);
    std::vector<int64_t> extents;
    for (std::size_t j = 0; j < 3; ++j) {
      const auto out = cem->branch(j, impulse);
      CHECK(out.size(1) == 8);
      const auto [rows, cols] = nonzero_extent(out);
      CHECK(rows == cols);
      extents.push_back(rows);
    }
    // 3x3 conv followed by a 3x3 conv of dilation d: extent 3 + 2d.
    CHECK(extents[0] == 5);
    CHECK(extents[1] == 9);
    CHECK(extents[2] == 13);
  }

  TEST_CASE("CBAM gates lie in the unit interval") {
    torch::manual_seed(4);
    net::Cbam cbam(8, 4, 7);
    const auto r = cbam->forward_with_gates(torch::randn({2, 8, 12, 12}));
    CHECK(r.channel_gate.sizes() == torch::IntArrayRef({2, 8, 1, 1}));
    CHECK(r.spatial_gate.sizes() == torch::IntArrayRef({2, 1, 12, 12}));
    CHECK(r.channel_gate.min().item<float>() > 0.0f);
    CHECK(r.spatial_gate.max().item<float>() < 1.0f);
  }

  TEST_CASE("single-module ablations build and run") {
    for (int variant = 0; variant < 4; ++variant) {
      auto cfg = testing::small_config(8, 32);
      cfg.use_cmd = variant != 1;
      cfg.use_cem = variant != 2;
      cfg.use_mfam = variant != 3;
      torch::manual_seed(5);
      MGNet model(cfg);
      const auto out = model->forward(torch::rand({2, 3, 32, 32}));
      CHECK(out.logits[0].sizes() == torch::IntArrayRef({2, 1, 32, 32}));
      CHECK(out.foreground[0].defined() == cfg.use_mfam);
      bool has_cbam = false, has_mfam = false, has_cem = false;
      for (const auto& item : model->named_parameters()) {
        has_cbam = has_cbam || item.key().find("cbam") != std::string::npos;
        has_mfam = has_mfam || item.key().find("mfam") != std::string::npos;
        has_cem = has_cem || item.key().find("cem") != std::string::npos;
      }
      CHECK(has_cbam == cfg.use_cmd);
      CHECK(has_mfam == cfg.use_mfam);
      CHECK(has_cem == cfg.use_cem);
    }
  }

  TEST_CASE("gradients match central finite differences") {
    const auto samples = testing::gradient_check(testing::small_config(8, 32), 6, 21);
    REQUIRE(samples.size() == 6);
    for (const auto& s : samples) {
      INFO(s.name << "[" << s.index << "] analytic=" << s.analytic << " numeric=" << s.numeric);
      CHECK(s.relative_error < 1e-3);
    }
  }

  TEST_CASE("every parameter is reached by the loss gradient") {
    torch::manual_seed(6);
    MGNet model(testing::small_config(16, 32));
    model->eval();
    const auto out = model->forward(torch::rand({2, 3, 32, 32}));
    loss::total_loss(out.logits, testing::random_target(2, 32, 7)).total_tensor.backward();
    int total = 0, nonzero = 0;
    for (const auto& item : model->named_parameters()) {
      INFO(item.key());
      REQUIRE(item.value().grad().defined());
      ++total;
      nonzero += item.value().grad().abs().sum().item<double>() > 0.0;
    }
    // squeeze layers with a handful of hidden units can be dead on one batch
    CHECK(nonzero >= total * 9 / 10);
  }

  TEST_CASE("zero-init residual option zeroes the last norm scale") {
    auto cfg = testing::small_config(8, 32);
    cfg.encoder.zero_init_residual = true;
    MGNet model(cfg);
    bool found = false;
    for (const auto& item : model->named_parameters()) {
      if (item.key().find("stage") != std::string::npos && item.key().ends_with(".b.bn.weight")) {
        found = true;
        CHECK(item.value().abs().sum().item<double>() == 0.0);
      }
    }
    CHECK(found);
  }

  TEST_CASE("config validation names the offending field") {
    auto expect_field = [](net::MGNetConfig c, const std::string& field) {
      try {
        c.validate();
        FAIL("expected ConfigError for " << field);
      } catch (const ConfigError& e) {
        CHECK(e.field() == field);
      }
    };
    auto c = testing::small_config(8, 32);
    c.width = 7;
    expect_field(c, "width");
    c = testing::small_config(8, 32);
    c.width = 6;
    expect_field(c, "width");
    c = testing::small_config(8, 32);
    c.input_height = 40;
    expect_field(c, "input_size.height");

    MGNet model(testing::small_config(8, 32));
    try {
      model->forward(torch::rand({1, 3, 64, 64}));
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.field() == "input_size");
    }
  }

  TEST_CASE("config JSON round-trip") {
    auto c = testing::small_config(16, 64);
    c.use_cem = false;
    c.guidance_order = net::GuidanceOrder::kSigmoidThenResize;
    c.dilations = {1, 2, 4};
    const auto back = net::mgnet_config_from_json(net::to_json(c));
    CHECK(net::to_json(back) == net::to_json(c));
    CHECK_THROWS_AS(net::mgnet_config_from_json({{"width", "wide"}}), ConfigError);
    CHECK_THROWS_AS(net::mgnet_config_from_json({{"guidance_order", "sideways"}}), ConfigError);
  }

  TEST_CASE("external-adapter models consume precomputed pyramids") {
    const auto dir = testing::temp_dir("pyramid");
    auto cfg = testing::small_config(8, 32);
    cfg.encoder.kind = net::EncoderKind::kExternalAdapter;
    for (const std::string id : {"a", "b"}) {
      NamedTensors levels;
      for (int i = 0; i < 4; ++i) {
        const int64_t s = 32 / (4 << i);
        levels.emplace_back("F" + std::to_string(i + 1), torch::randn({cfg.encoder.channels[i], s, s}));
      }
      write_archive(dir / (id + ".pyr"), {}, levels);
    }
    const auto pyramid = net::load_external_pyramid(dir.string(), {"a", "b"}, cfg);
    CHECK(pyramid[0].sizes() == torch::IntArrayRef({2, 8, 8, 8}));
    MGNet model(cfg);
    const auto out = model->forward_features(pyramid, 32, 32);
    CHECK(out.logits[0].sizes() == torch::IntArrayRef({2, 1, 32, 32}));
    CHECK_THROWS_AS(model->forward(torch::rand({1, 3, 32, 32})), ConfigError);
    CHECK_THROWS_AS(model->forward_features(pyramid, 64, 64), ConfigError);
  }
}
