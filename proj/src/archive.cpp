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

#include "boxsam/archive.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "boxsam/error.hpp"

namespace boxsam {
namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "archive format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'B', 'X', 'S', 'M', 'A', 'R', 'C', 'H'};

std::string dtype_name(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32:
      return "f32";
    case torch::kFloat64:
      return "f64";
    case torch::kInt64:
      return "i64";
    default:
      throw InvalidInputError(std::string("unsupported tensor dtype ") + c10::toString(t));
  }
}

torch::ScalarType dtype_from_name(const std::string& name) {
  if (name == "f32") return torch::kFloat32;
  if (name == "f64") return torch::kFloat64;
  if (name == "i64") return torch::kInt64;
  throw InvalidInputError("unsupported dtype '" + name + "' in archive");
}

template <typename T>
void append_pod(std::string& buf, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  buf.append(bytes, sizeof(T));
}

template <typename T>
T read_pod(const std::string& buf, std::size_t& pos, const fs::path& path) {
  if (pos + sizeof(T) > buf.size()) throw ChecksumError(path.string() + ": archive truncated");
  T value;
  std::memcpy(&value, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

std::uint32_t crc_of(const char* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  while (size > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

const torch::Tensor* Archive::find(const std::string& name) const {
  for (const auto& [n, t] : arrays)
    if (n == name) return &t;
  return nullptr;
}

void write_archive(const fs::path& path, const json& meta, const NamedTensors& arrays) {
  json entries = json::array();
  std::string blob;
  for (const auto& [name, tensor] : arrays) {
    const torch::Tensor t = tensor.detach().to(torch::kCPU).contiguous();
    const std::size_t nbytes = static_cast<std::size_t>(t.numel()) * t.element_size();
    entries.push_back({{"name", name},
                       {"dtype", dtype_name(t.scalar_type())},
                       {"shape", t.sizes().vec()},
                       {"offset", blob.size()},
                       {"nbytes", nbytes}});
    blob.append(static_cast<const char*>(t.data_ptr()), nbytes);
  }
  json header = {{"meta", meta}, {"arrays", entries}};
  const std::string header_text = header.dump();

  std::string buf(kMagic, sizeof(kMagic));
  append_pod<std::uint32_t>(buf, kArchiveVersion);
  append_pod<std::uint64_t>(buf, header_text.size());
  buf += header_text;
  buf += blob;
  append_pod<std::uint32_t>(buf, crc_of(buf.data(), buf.size()));

  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(tmp.string(), "cannot open for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError(tmp.string(), "write failed");
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError(path.string(), "cannot move archive into place: " + ec.message());
}

Archive read_archive(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open archive");
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < sizeof(kMagic) + 4 + 8 + 4 || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw InvalidInputError(path.string() + ": not a BoxSAM archive");
  std::size_t pos = sizeof(kMagic);
  const auto version = read_pod<std::uint32_t>(buf, pos, path);
  if (version != kArchiveVersion)
    throw InvalidInputError(path.string() + ": archive version " + std::to_string(version) +
                            " unsupported (expected " + std::to_string(kArchiveVersion) + ")");

  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
  if (crc_of(buf.data(), buf.size() - 4) != stored_crc)
    throw ChecksumError(path.string() + ": checksum mismatch, archive is corrupt");

  const auto header_len = read_pod<std::uint64_t>(buf, pos, path);
  if (pos + header_len > buf.size() - 4) throw ChecksumError(path.string() + ": archive truncated");
  json header;
  try {
    header = json::parse(buf.substr(pos, header_len));
  } catch (const json::exception& e) {
    throw InvalidInputError(path.string() + ": corrupt archive header: " + e.what());
  }
  pos += header_len;
  const std::size_t data_start = pos;
  const std::size_t data_end = buf.size() - 4;

  Archive archive;
  archive.meta = header.value("meta", json::object());
  for (const auto& entry : header.at("arrays")) {
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto nbytes = entry.at("nbytes").get<std::size_t>();
    if (data_start + offset + nbytes > data_end) throw ChecksumError(path.string() + ": array data truncated");
    const auto shape = entry.at("shape").get<std::vector<int64_t>>();
    torch::Tensor t = torch::empty(shape, torch::TensorOptions().dtype(dtype_from_name(entry.at("dtype"))));
    if (static_cast<std::size_t>(t.numel()) * t.element_size() != nbytes)
      throw InvalidInputError(path.string() + ": array '" + entry.at("name").get<std::string>() +
                              "' size does not match its shape");
    std::memcpy(t.data_ptr(), buf.data() + data_start + offset, nbytes);
    archive.arrays.emplace_back(entry.at("name").get<std::string>(), std::move(t));
  }
  return archive;
}

}  // namespace boxsam
