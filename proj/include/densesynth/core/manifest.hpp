#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "densesynth/core/density.hpp"
#include "densesynth/core/error.hpp"
#include "densesynth/core/hash.hpp"
#include "densesynth/core/image.hpp"
#include "densesynth/core/types.hpp"

namespace densesynth {

using json = nlohmann::json;

/// Ordered collection of records plus free-form provenance notes.
///
/// On disk a manifest is one JSON document:
///
///     {
///       "split": "TRAIN" | "VAL" | "TEST",
///       "provenance": { ... free-form ... },
///       "records": [
///         { "id": "...", "dataset": "PHANTOM", "view": "CC" | "MLO",
///           "laterality": "L" | "R", "image": "images/<id>.png",
///           "bit_depth": 16, "height": 256, "width": 160,
///           "density": { "kind": "LIBRA_PERCENT", "value": 12.5 } | null,
///           "health": "NORMAL" | "WITH_MASSES",
///           "annotations": [ { "x": 0, "y": 0, "w": 1, "h": 1 } ],
///           "provenance": { "source_id": "...", "model_key": "..." }   // synthetic only
///         } ] }
///
/// Image paths are relative to the manifest's directory. BIRADS_DIRECT
/// densities serialize their value as the letter A..D.
struct Manifest {
  std::vector<MammogramRecord> records;
  json provenance = json::object();
  Split split = Split::TRAIN;

  [[nodiscard]] std::size_t size() const noexcept { return records.size(); }
  [[nodiscard]] bool empty() const noexcept { return records.empty(); }

  void validate() const {
    std::set<std::string> seen;
    for (const auto& r : records) {
      validate_record(r);
      if (r.density) validate_density(*r.density);
      if (!seen.insert(r.id).second) throw InvalidInput("duplicate record id in manifest: " + r.id);
    }
  }
};

inline json box_to_json(const MassBox& b) { return {{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}}; }
inline MassBox box_from_json(const json& j) {
  return {j.at("x").get<double>(), j.at("y").get<double>(), j.at("w").get<double>(),
          j.at("h").get<double>()};
}

inline json density_to_json(const DensityMeasure& d) {
  json j{{"kind", to_string(d.kind)}};
  if (d.kind == DensityKind::BIRADS_DIRECT) {
    j["value"] = to_string(static_cast<DensityCategory>(static_cast<int>(d.value) - 1));
  } else {
    j["value"] = d.value;
  }
  return j;
}

inline DensityMeasure density_from_json(const json& j) {
  DensityMeasure d;
  d.kind = parse_density_kind(j.at("kind").get<std::string>());
  const auto& v = j.at("value");
  if (v.is_string()) {
    d.value = static_cast<int>(parse_category(v.get<std::string>())) + 1;
  } else {
    d.value = v.get<double>();
  }
  return d;
}

inline json record_to_json(const MammogramRecord& r) {
  json j{{"id", r.id},
         {"dataset", r.dataset_tag},
         {"view", to_string(r.view)},
         {"laterality", to_string(r.laterality)},
         {"image", r.image_path},
         {"bit_depth", r.image.bit_depth},
         {"height", r.image.height},
         {"width", r.image.width},
         {"health", to_string(r.health)}};
  j["density"] = r.density ? density_to_json(*r.density) : json(nullptr);
  json boxes = json::array();
  for (const auto& b : r.annotations) boxes.push_back(box_to_json(b));
  j["annotations"] = std::move(boxes);
  if (r.provenance) {
    j["provenance"] = {{"source_id", r.provenance->source_id},
                       {"model_key", r.provenance->model_key}};
  }
  return j;
}

inline MammogramRecord record_from_json(const json& j) {
  MammogramRecord r;
  r.id = j.at("id").get<std::string>();
  r.dataset_tag = j.value("dataset", std::string{});
  r.view = parse_view(j.at("view").get<std::string>());
  r.laterality = parse_laterality(j.at("laterality").get<std::string>());
  r.image_path = j.value("image", std::string{});
  r.image.bit_depth = j.value("bit_depth", 16);
  r.image.height = j.value("height", 0);
  r.image.width = j.value("width", 0);
  r.health = parse_health(j.at("health").get<std::string>());
  if (j.contains("density") && !j["density"].is_null()) r.density = density_from_json(j["density"]);
  for (const auto& b : j.value("annotations", json::array())) r.annotations.push_back(box_from_json(b));
  if (j.contains("provenance")) {
    r.provenance = Provenance{j["provenance"].at("source_id").get<std::string>(),
                              j["provenance"].at("model_key").get<std::string>()};
  }
  return r;
}

inline std::string sanitize_filename(std::string_view id) {
  std::string out;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  return out;
}

inline json manifest_to_json(const Manifest& m) {
  json records = json::array();
  for (const auto& r : m.records) records.push_back(record_to_json(r));
  return {{"split", to_string(m.split)}, {"provenance", m.provenance}, {"records", std::move(records)}};
}

/// Writes the manifest JSON and any in-memory images to `images/` next to it.
/// Records whose image is not loaded keep their existing path untouched.
inline void save_manifest(Manifest m, const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  m.validate();
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  fs::create_directories(dir);
  for (auto& r : m.records) {
    if (r.image.empty()) continue;
    if (r.image_path.empty()) r.image_path = "images/" + sanitize_filename(r.id) + ".png";
    write_png(r.image, dir / r.image_path, 16);
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest: " + path.string());
  out << manifest_to_json(m).dump(2) << '\n';
}

inline Manifest manifest_from_json(const json& j) {
  Manifest m;
  m.split = parse_split(j.value("split", std::string("TRAIN")));
  m.provenance = j.value("provenance", json::object());
  for (const auto& r : j.at("records")) m.records.push_back(record_from_json(r));
  return m;
}

inline Manifest load_manifest(const std::filesystem::path& path, bool load_images = true) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidInput("malformed manifest " + path.string() + ": " + e.what());
  }
  Manifest m = manifest_from_json(j);
  if (load_images) {
    const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    for (auto& r : m.records) {
      if (r.image_path.empty()) continue;
      const int depth = r.image.bit_depth;
      r.image = read_png(dir / r.image_path);
      r.image.bit_depth = depth;
    }
  }
  m.validate();
  return m;
}

/// Content hash over record metadata and pixels; stable across runs.
inline std::string manifest_hash(const Manifest& m) {
  std::uint64_t h = fnv1a64(manifest_to_json(m).dump());
  for (const auto& r : m.records) {
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(r.image.pixels.data()),
                                 r.image.pixels.size() * sizeof(float)),
                h);
  }
  return hex64(h);
}

}  // namespace densesynth
