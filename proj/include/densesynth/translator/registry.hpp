#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "densesynth/core/density.hpp"
#include "densesynth/core/error.hpp"
#include "densesynth/core/manifest.hpp"
#include "densesynth/core/types.hpp"

namespace densesynth::translator {

enum class ViewScope { CC, MLO, BOTH };

inline std::string to_string(ViewScope s) {
  switch (s) {
    case ViewScope::CC: return "CC";
    case ViewScope::MLO: return "MLO";
    case ViewScope::BOTH: return "BOTH";
  }
  return "";
}

inline ViewScope parse_view_scope(std::string_view s) {
  if (s == "CC") return ViewScope::CC;
  if (s == "MLO") return ViewScope::MLO;
  if (s == "BOTH") return ViewScope::BOTH;
  throw InvalidInput("unknown view scope: " + std::string(s));
}

inline bool scope_covers(ViewScope s, View v) {
  return s == ViewScope::BOTH || (s == ViewScope::CC) == (v == View::CC);
}

/// "OP-CC", "CS-MLO", "BC-All".
inline std::string model_key(std::string_view dataset_tag, ViewScope scope) {
  return dataset_family(dataset_tag) + "-" + (scope == ViewScope::BOTH ? "All" : to_string(scope));
}

struct DatasetSummary {
  std::string tag;
  /// Healthy low- plus high-density images available for translator training.
  int normal_images = 0;
};

struct RegistryEntry {
  std::string key;
  std::string dataset_tag;
  ViewScope scope = ViewScope::BOTH;
  std::string checkpoint;  // relative to the index file
  int n_source = 0;
  int n_target = 0;
};

struct Registry {
  std::vector<RegistryEntry> entries;

  [[nodiscard]] const RegistryEntry* find(std::string_view key) const {
    for (const auto& e : entries)
      if (e.key == key) return &e;
    return nullptr;
  }

  /// Model of `family` that serves `view`; throws naming the gap.
  [[nodiscard]] const RegistryEntry& model_for(std::string_view family, View view) const {
    for (const auto& e : entries)
      if (dataset_family(e.dataset_tag) == family && scope_covers(e.scope, view)) return e;
    throw InvalidInput("registry has no model for family " + std::string(family) + " view " + to_string(view));
  }

  [[nodiscard]] std::vector<std::string> families() const {
    std::vector<std::string> out;
    for (const auto& e : entries) {
      const auto f = dataset_family(e.dataset_tag);
      if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
    }
    return out;
  }
};

inline constexpr int kSmallDatasetThreshold = 300;

/// Tags with fewer than `small_threshold` healthy A+D images get one model for
/// both views; larger tags get separate CC and MLO models.
inline Registry build_registry(const std::vector<DatasetSummary>& datasets,
                               int small_threshold = kSmallDatasetThreshold) {
  Registry r;
  std::set<std::string> keys;
  for (const auto& d : datasets) {
    std::vector<ViewScope> scopes;
    if (d.normal_images < small_threshold)
      scopes = {ViewScope::BOTH};
    else
      scopes = {ViewScope::CC, ViewScope::MLO};
    for (auto s : scopes) {
      RegistryEntry e;
      e.key = model_key(d.tag, s);
      e.dataset_tag = d.tag;
      e.scope = s;
      e.checkpoint = "models/" + e.key + ".pt";
      if (!keys.insert(e.key).second) throw InvalidInput("duplicate registry key " + e.key);
      r.entries.push_back(std::move(e));
    }
  }
  return r;
}

/// Per-tag count of healthy A and D records.
inline std::vector<DatasetSummary> summarize_datasets(const Manifest& m) {
  std::map<std::string, int> counts;
  for (const auto& r : m.records) {
    if (r.health != Health::NORMAL || !r.density || r.is_synthetic()) continue;
    const auto c = map_density(*r.density);
    if (c == DensityCategory::A || c == DensityCategory::D) counts[r.dataset_tag]++;
  }
  std::vector<DatasetSummary> out;
  for (const auto& [tag, n] : counts) out.push_back({tag, n});
  return out;
}

/// Splits a manifest into the (low, high) density training domains of one
/// registry entry: healthy BI-RADS A and D records of the tag and view scope.
inline std::pair<Manifest, Manifest> training_domains(const Manifest& m, const RegistryEntry& e) {
  Manifest low, high;
  low.provenance = high.provenance = {{"registry_key", e.key}};
  for (const auto& r : m.records) {
    if (r.dataset_tag != e.dataset_tag || !scope_covers(e.scope, r.view) || r.is_synthetic() || !r.density) continue;
    if (r.health != Health::NORMAL) continue;
    const auto c = map_density(*r.density);
    if (c == DensityCategory::A) low.records.push_back(r);
    if (c == DensityCategory::D) high.records.push_back(r);
  }
  return {std::move(low), std::move(high)};
}

/// Synthetic companion of `source` produced by model `key`: same geometry,
/// view, health and boxes, tagged as BI-RADS D.
inline MammogramRecord synthetic_record(const MammogramRecord& source, const std::string& key, Image image) {
  MammogramRecord out;
  out.id = source.id + "-SYN-" + key;
  out.dataset_tag = source.dataset_tag + "-SYN";
  out.view = source.view;
  out.laterality = source.laterality;
  out.image = std::move(image);
  out.density = DensityMeasure{DensityKind::BIRADS_DIRECT, 4};
  out.health = source.health;
  out.annotations = source.annotations;
  out.provenance = Provenance{source.id, key};
  return out;
}

inline json registry_to_json(const Registry& r) {
  json models = json::array();
  for (const auto& e : r.entries)
    models.push_back({{"key", e.key},
                      {"dataset", e.dataset_tag},
                      {"view_scope", to_string(e.scope)},
                      {"checkpoint", e.checkpoint},
                      {"n_source", e.n_source},
                      {"n_target", e.n_target}});
  return {{"models", models}};
}

inline Registry registry_from_json(const json& j) {
  Registry r;
  std::set<std::string> keys;
  for (const auto& m : j.at("models")) {
    RegistryEntry e{m.at("key").get<std::string>(), m.at("dataset").get<std::string>(),
                    parse_view_scope(m.at("view_scope").get<std::string>()), m.value("checkpoint", ""),
                    m.value("n_source", 0), m.value("n_target", 0)};
    if (!keys.insert(e.key).second) throw InvalidInput("duplicate registry key " + e.key);
    r.entries.push_back(std::move(e));
  }
  return r;
}

inline void save_registry(const Registry& r, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << registry_to_json(r).dump(2) << '\n';
}

inline Registry load_registry(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read registry " + path.string());
  return registry_from_json(json::parse(in));
}

}  // namespace densesynth::translator
