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

#include <cmath>
#include <limits>

#include "boxsam/error.hpp"
#include "boxsam/loss.hpp"
#include "common/loss_oracle.hpp"

using namespace boxsam;
using testing::as_tensor;

TEST_SUITE("loss") {
  TEST_CASE("pixel weight matches a window-average oracle") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      const auto c = testing::random_loss_case(rng);
      for (int window : {3, 7, 31}) {
        loss::LossOptions opt;
        opt.window = window;
        const auto w = loss::pixel_weight(as_tensor(c.target, c.height, c.width), opt);
        const auto expected = as_tensor(testing::naive_weight(c, window, opt.boundary_gain), c.height, c.width);
        CHECK((w - expected).abs().max().item<double>() < 1e-12);
      }
    }
  }

  TEST_CASE("single foreground pixel weight") {
    auto target = torch::zeros({1, 1, 64, 64}, torch::kFloat64);
    target.index_put_({0, 0, 32, 32}, 1.0);
    const auto w = loss::pixel_weight(target);
    const double mean = 1.0 / (31.0 * 31.0);
    CHECK(w[0][0][32][32].item<double>() == doctest::Approx(1.0 + 5.0 * (1.0 - mean)).epsilon(1e-12));
    CHECK(w[0][0][32][33].item<double>() == doctest::Approx(1.0 + 5.0 * mean).epsilon(1e-12));
    CHECK(w[0][0][0][0].item<double>() == 1.0);
  }

  TEST_CASE("wBCE and wIoU match plain summation") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 50; ++trial) {
      const auto c = testing::random_loss_case(rng);
      const auto logits = as_tensor(c.logits, c.height, c.width);
      const auto target = as_tensor(c.target, c.height, c.width);
      const auto w = loss::pixel_weight(target);
      const auto nw = testing::naive_weight(c, 31, 5.0);
      CHECK(std::abs(loss::weighted_bce(logits, target, w).item<double>() - testing::naive_wbce(c, nw)) < 1e-10);
      CHECK(std::abs(loss::weighted_iou(logits, target, w).item<double>() - testing::naive_wiou(c, nw, 1.0)) <
            1e-10);
    }
  }

  TEST_CASE("batch loss is the mean of per-image losses") {
    std::mt19937_64 rng(13);
    auto a = testing::random_loss_case(rng);
    auto b = testing::random_loss_case(rng);
    b.height = a.height;
    b.width = a.width;
    b.logits.resize(a.logits.size(), 0.5);
    b.target.resize(a.target.size(), 1.0);
    const auto logits = torch::cat({as_tensor(a.logits, a.height, a.width), as_tensor(b.logits, b.height, b.width)});
    const auto target = torch::cat({as_tensor(a.target, a.height, a.width), as_tensor(b.target, b.height, b.width)});
    const auto w = loss::pixel_weight(target);
    const double expected = 0.5 * (testing::naive_wbce(a, testing::naive_weight(a, 31, 5.0)) +
                                   testing::naive_wbce(b, testing::naive_weight(b, 31, 5.0)));
    CHECK(std::abs(loss::weighted_bce(logits, target, w).item<double>() - expected) < 1e-10);
  }

  TEST_CASE("stable on saturated logits") {
    auto target = torch::zeros({1, 1, 8, 8}, torch::kFloat64);
    target.index_put_({0, 0, torch::indexing::Slice(0, 4)}, 1.0);
    const auto logits = (target * 2.0 - 1.0) * 200.0;
    const auto w = loss::pixel_weight(target);
    const double bce = loss::weighted_bce(logits, target, w).item<double>();
    CHECK(std::isfinite(bce));
    CHECK(bce < 1e-12);
    const double wrong = loss::weighted_bce(-logits, target, w).item<double>();
    CHECK(wrong == doctest::Approx(200.0).epsilon(1e-9));
  }

  TEST_CASE("total loss sums four hybrid terms") {
    std::mt19937_64 rng(14);
    const auto c = testing::random_loss_case(rng);
    const auto target = as_tensor(c.target, c.height, c.width);
    std::vector<torch::Tensor> outs;
    double expected = 0.0;
    const auto nw = testing::naive_weight(c, 31, 5.0);
    for (int i = 0; i < 4; ++i) {
      auto ci = c;
      for (auto& v : ci.logits) v *= 0.25 * (i + 1);
      outs.push_back(as_tensor(ci.logits, c.height, c.width));
      expected += testing::naive_wbce(ci, nw) + testing::naive_wiou(ci, nw, 1.0);
    }
    const auto b = loss::total_loss(outs, target);
    CHECK(std::abs(b.total - expected) < 1e-10);
    double parts = 0.0;
    for (const auto& t : b.outputs) parts += t.wbce + t.wiou;
    CHECK(std::abs(parts - b.total) < 1e-12);
    CHECK(loss::to_json(b)["outputs"].size() == 4);
  }

  TEST_CASE("total loss rejects bad input") {
    const auto target = torch::zeros({1, 1, 8, 8});
    std::vector<torch::Tensor> three(3, torch::zeros({1, 1, 8, 8}));
    CHECK_THROWS_AS(loss::total_loss(three, target), InvalidInputError);
    std::vector<torch::Tensor> four(4, torch::zeros({1, 1, 8, 8}));
    four[2] = torch::full({1, 1, 8, 8}, std::numeric_limits<float>::quiet_NaN());
    CHECK_THROWS_AS(loss::total_loss(four, target), InvalidInputError);
    four[2] = torch::zeros({1, 1, 8, 8});
    CHECK_THROWS_AS(loss::total_loss(four, torch::full({1, 1, 8, 8}, INFINITY)), InvalidInputError);
    CHECK_THROWS_AS(loss::total_loss(four, torch::zeros({1, 1, 4, 8})), InvalidInputError);
    loss::LossOptions even;
    even.window = 4;
    CHECK_THROWS_AS(loss::pixel_weight(target, even), InvalidInputError);
  }
}
