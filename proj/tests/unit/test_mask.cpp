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

#include "boxsam/error.hpp"
#include "boxsam/io.hpp"
#include "boxsam/mask.hpp"
#include "test_util.hpp"

using namespace boxsam;

TEST_SUITE("mask") {
  TEST_CASE("binary roles reject non-binary values") {
    CHECK_THROWS_AS(MaskMap(2, 2, {0.0f, 0.5f, 1.0f, 0.0f}, MaskRole::kGroundTruth), InvalidInputError);
    CHECK_THROWS_AS(MaskMap(2, 2, {0.0f, 0.5f, 1.0f, 0.0f}, MaskRole::kPseudoLabel), InvalidInputError);
    MaskMap pred(2, 2, {0.0f, 0.5f, 1.0f, 0.0f}, MaskRole::kPrediction);
    CHECK_FALSE(pred.binary());
    CHECK_THROWS_AS(pred.set_role(MaskRole::kGroundTruth), InvalidInputError);
  }

  TEST_CASE("values outside the unit interval are rejected") {
    CHECK_THROWS_AS(MaskMap(1, 2, {0.0f, 1.5f}), InvalidInputError);
    CHECK_THROWS_AS(MaskMap(1, 2, {-0.1f, 0.0f}), InvalidInputError);
    CHECK_THROWS_AS(MaskMap(2, 2, {0.0f, 1.0f}), InvalidInputError);
  }

  TEST_CASE("binarize is strict") {
    MaskMap m(1, 3, {0.2f, 0.5f, 0.7f});
    const MaskMap b = binarize(m, 0.5f);
    CHECK(b(0, 0) == 0.0f);
    CHECK(b(0, 1) == 0.0f);
    CHECK(b(0, 2) == 1.0f);
    CHECK(b.role() == MaskRole::kPseudoLabel);
  }

  TEST_CASE("box geometry is half-open") {
    const BBox a{0, 0, 4, 4};
    const BBox touching{4, 0, 8, 4};
    const BBox overlapping{3, 3, 6, 6};
    CHECK(a.area() == 16);
    CHECK_FALSE(a.intersects(touching));
    CHECK(a.intersects(overlapping));
    CHECK(a.united(overlapping) == BBox{0, 0, 6, 6});
    CHECK(a.contains(3, 3));
    CHECK_FALSE(a.contains(4, 0));
    CHECK_NOTHROW(a.validate(4, 4));
    CHECK_THROWS_AS(a.validate(3, 4), InvalidInputError);
    CHECK_THROWS_AS((BBox{2, 2, 2, 3}.validate(8, 8)), InvalidInputError);
  }

  TEST_CASE("binary masks round-trip exactly through PNG") {
    std::mt19937_64 rng(7);
    const auto dir = testing::temp_dir("mask_io");
    const MaskMap m = testing::random_binary(13, 17, 0.4, rng, MaskRole::kGroundTruth);
    save_mask(dir / "m.png", m);
    const MaskMap back = load_mask(dir / "m.png", MaskRole::kGroundTruth);
    CHECK(back == m);
  }

  TEST_CASE("predictions are stored as round(v * 255)") {
    const auto dir = testing::temp_dir("mask_quant");
    MaskMap m(1, 4, {0.0f, 0.5f, 1.0f / 510.0f * 0.99f, 1.0f});
    save_mask(dir / "p.png", m);
    const MaskMap back = load_mask(dir / "p.png");
    CHECK(back(0, 0) == 0.0f);
    CHECK(back(0, 1) == doctest::Approx(128.0 / 255.0));
    CHECK(back(0, 2) == 0.0f);
    CHECK(back(0, 3) == 1.0f);
    CHECK(quantize_unit(0.5f) == 128);
  }

  TEST_CASE("binary roles binarize stored values at half scale") {
    const auto dir = testing::temp_dir("mask_binarize");
    save_mask(dir / "g.png", MaskMap(1, 3, {0.3f, 127.0f / 255.0f, 128.0f / 255.0f}));
    const MaskMap g = load_mask(dir / "g.png", MaskRole::kGroundTruth);
    CHECK(g(0, 0) == 0.0f);
    CHECK(g(0, 1) == 0.0f);
    CHECK(g(0, 2) == 1.0f);
  }

  TEST_CASE("images round-trip through PNG at 8-bit precision") {
    const auto dir = testing::temp_dir("image_io");
    ImageSample img{"x", 9, 8, {}};
    std::mt19937_64 rng(3);
    for (int i = 0; i < 9 * 8 * 3; ++i) img.pixels.push_back(static_cast<float>(rng() % 256) / 255.0f);
    save_image(dir / "x.png", img);
    const ImageSample back = load_image(dir / "x.png", "x");
    CHECK(back.height == 9);
    CHECK(back.width == 8);
    CHECK(back.pixels == img.pixels);
  }

  TEST_CASE("missing files raise I/O errors") {
    CHECK_THROWS_AS(load_mask("/nonexistent/mask.png"), IoError);
    CHECK_THROWS_AS(load_image("/nonexistent/img.png", "x"), IoError);
  }

  TEST_CASE("image validation") {
    ImageSample small{"s", 4, 4, std::vector<float>(48, 0.0f)};
    CHECK_THROWS_AS(small.validate(), InvalidInputError);
    ImageSample bad{"b", 8, 8, std::vector<float>(192, 2.0f)};
    CHECK_THROWS_AS(bad.validate(), InvalidInputError);
  }
}
