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

#include "boxsam/archive.hpp"
#include "boxsam/error.hpp"
#include "test_util.hpp"

using namespace boxsam;
namespace fs = std::filesystem;

namespace {

void flip_byte(const fs::path& path, std::size_t offset) {
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  f.seekg(static_cast<std::streamoff>(offset));
  char c;
  f.get(c);
  f.seekp(static_cast<std::streamoff>(offset));
  f.put(static_cast<char>(c ^ 0x10));
}

}  // namespace

TEST_SUITE("archive") {
  TEST_CASE("tensors and metadata round-trip bit-exactly") {
    const auto dir = testing::temp_dir("archive_rt");
    torch::manual_seed(0);
    NamedTensors arrays{{"w", torch::randn({3, 4, 5})},
                        {"d", torch::randn({7}, torch::kFloat64)},
                        {"n", torch::arange(6, torch::kInt64).reshape({2, 3})},
                        {"scalar", torch::tensor(3.5f)}};
    const nlohmann::json meta{{"k", "v"}, {"n", 3}};
    write_archive(dir / "a.bin", meta, arrays);
    const Archive back = read_archive(dir / "a.bin");
    CHECK(back.meta == meta);
    REQUIRE(back.arrays.size() == arrays.size());
    for (std::size_t i = 0; i < arrays.size(); ++i) {
      CHECK(back.arrays[i].first == arrays[i].first);
      CHECK(back.arrays[i].second.dtype() == arrays[i].second.dtype());
      CHECK(back.arrays[i].second.sizes() == arrays[i].second.sizes());
      CHECK(torch::equal(back.arrays[i].second, arrays[i].second));
    }
    REQUIRE(back.find("d") != nullptr);
    CHECK(back.find("missing") == nullptr);
  }

  TEST_CASE("a flipped byte anywhere is detected") {
    const auto dir = testing::temp_dir("archive_flip");
    write_archive(dir / "a.bin", {{"x", 1}}, {{"t", torch::ones({64})}});
    const auto size = fs::file_size(dir / "a.bin");
    for (std::size_t offset : {std::size_t{20}, std::size_t{40}, static_cast<std::size_t>(size - 10),
                               static_cast<std::size_t>(size - 1)}) {
      fs::copy_file(dir / "a.bin", dir / "b.bin", fs::copy_options::overwrite_existing);
      flip_byte(dir / "b.bin", offset);
      CHECK_THROWS_AS(read_archive(dir / "b.bin"), ChecksumError);
    }
  }

  TEST_CASE("truncation, bad magic, unsupported version, missing file") {
    const auto dir = testing::temp_dir("archive_bad");
    write_archive(dir / "a.bin", {}, {{"t", torch::ones({16})}});
    const auto size = fs::file_size(dir / "a.bin");
    fs::copy_file(dir / "a.bin", dir / "short.bin");
    fs::resize_file(dir / "short.bin", size - 20);
    CHECK_THROWS_AS(read_archive(dir / "short.bin"), ChecksumError);

    fs::copy_file(dir / "a.bin", dir / "magic.bin");
    flip_byte(dir / "magic.bin", 0);
    CHECK_THROWS_AS(read_archive(dir / "magic.bin"), InvalidInputError);

    fs::copy_file(dir / "a.bin", dir / "version.bin");
    flip_byte(dir / "version.bin", 8);
    CHECK_THROWS_AS(read_archive(dir / "version.bin"), InvalidInputError);

    CHECK_THROWS_AS(read_archive(dir / "absent.bin"), IoError);
  }
}
