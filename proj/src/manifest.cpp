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

#include "boxsam/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <set>

#include "boxsam/error.hpp"

namespace boxsam {
namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kFlagged:
      return "flagged";
    case Split::kTest:
      return "test";
  }
  return "unknown";
}

Split split_from_string(const std::string& text) {
  if (text == "train") return Split::kTrain;
  if (text == "flagged") return Split::kFlagged;
  if (text == "test") return Split::kTest;
  throw InvalidInputError("unknown split '" + text + "'");
}

namespace {

fs::path resolve(const fs::path& base, const std::string& text) {
  fs::path p(text);
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

std::string relativize(const fs::path& base, const fs::path& p) {
  if (base.empty()) return p.generic_string();
  const fs::path abs_base = fs::absolute(base).lexically_normal();
  const fs::path abs_p = fs::absolute(p).lexically_normal();
  const fs::path rel = abs_p.lexically_relative(abs_base);
  if (rel.empty()) return abs_p.generic_string();
  return rel.generic_string();
}

}  // namespace

DatasetManifest DatasetManifest::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open manifest");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidInputError(path.string() + ": malformed manifest JSON: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array())
    throw InvalidInputError(path.string() + ": manifest requires an \"entries\" array");

  const fs::path base = path.parent_path();
  DatasetManifest manifest;
  std::size_t index = 0;
  for (const auto& item : doc["entries"]) {
    const std::string where = path.string() + ": entries[" + std::to_string(index++) + "]";
    try {
      ManifestEntry entry;
      entry.id = item.at("id").get<std::string>();
      entry.image = resolve(base, item.at("image").get<std::string>());
      if (item.contains("gt_mask") && !item["gt_mask"].is_null())
        entry.gt_mask = resolve(base, item["gt_mask"].get<std::string>());
      if (item.contains("pseudo_label") && !item["pseudo_label"].is_null())
        entry.pseudo_label = resolve(base, item["pseudo_label"].get<std::string>());
      for (const auto& b : item.value("boxes", json::array())) {
        if (!b.is_array() || b.size() != 4) throw InvalidInputError("box must be [x_min, y_min, x_max, y_max]");
        entry.boxes.push_back({b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()});
      }
      entry.split = split_from_string(item.value("split", std::string("train")));
      manifest.entries.push_back(std::move(entry));
    } catch (const json::exception& e) {
      throw InvalidInputError(where + ": " + e.what());
    } catch (const InvalidInputError& e) {
      throw InvalidInputError(where + ": " + e.what());
    }
  }
  manifest.validate(true);
  return manifest;
}

void DatasetManifest::save(const fs::path& path) const {
  validate(false);
  const fs::path base = path.parent_path();
  json entries_json = json::array();
  for (const auto& e : entries) {
    json item;
    item["id"] = e.id;
    item["image"] = relativize(base, e.image);
    item["gt_mask"] = e.gt_mask ? json(relativize(base, *e.gt_mask)) : json(nullptr);
    json boxes_json = json::array();
    for (const auto& b : e.boxes) boxes_json.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
    item["boxes"] = std::move(boxes_json);
    item["pseudo_label"] = e.pseudo_label ? json(relativize(base, *e.pseudo_label)) : json(nullptr);
    item["split"] = to_string(e.split);
    entries_json.push_back(std::move(item));
  }
  json doc;
  doc["entries"] = std::move(entries_json);
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot write manifest");
  out << doc.dump(2) << '\n';
  if (!out) throw IoError(path.string(), "write failed");
}

void DatasetManifest::validate(bool check_paths) const {
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (e.id.empty()) throw InvalidInputError("manifest entry with empty id");
    if (!seen.insert(e.id).second) throw InvalidInputError("duplicate sample id '" + e.id + "'");
    if (!check_paths) continue;
    auto require = [&](const fs::path& p, const char* field) {
      if (!fs::exists(p)) throw IoError(p.string(), std::string("missing ") + field + " for sample '" + e.id + "'");
    };
    require(e.image, "image");
    if (e.gt_mask) require(*e.gt_mask, "gt_mask");
    if (e.pseudo_label) require(*e.pseudo_label, "pseudo_label");
  }
}

const ManifestEntry* DatasetManifest::find(const std::string& id) const {
  for (const auto& e : entries)
    if (e.id == id) return &e;
  return nullptr;
}

ManifestEntry* DatasetManifest::find(const std::string& id) {
  for (auto& e : entries)
    if (e.id == id) return &e;
  return nullptr;
}

DatasetManifest DatasetManifest::with_split(Split split) const {
  DatasetManifest out;
  for (const auto& e : entries)
    if (e.split == split) out.entries.push_back(e);
  return out;
}

std::size_t DatasetManifest::count(Split split) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [split](const ManifestEntry& e) { return e.split == split; }));
}

}  // namespace boxsam
