#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "densesynth/core/density.hpp"
#include "densesynth/core/manifest.hpp"

namespace densesynth {

struct RejectedRecord {
  std::string id;
  std::string reason;
};

struct Stratification {
  /// Indexed by DensityCategory (A..D).
  std::array<Manifest, 4> buckets;
  std::vector<RejectedRecord> rejects;

  Manifest& operator[](DensityCategory c) { return buckets[static_cast<int>(c)]; }
  const Manifest& operator[](DensityCategory c) const { return buckets[static_cast<int>(c)]; }
};

/// Partitions a manifest by BI-RADS category, preserving input order inside
/// each bucket. Records without a usable density go to `rejects`.
inline Stratification stratify(const Manifest& manifest) {
  Stratification out;
  for (auto& b : out.buckets) {
    b.split = manifest.split;
    b.provenance = manifest.provenance;
  }
  for (std::size_t i = 0; i < out.buckets.size(); ++i) {
    out.buckets[i].provenance["density_category"] = to_string(static_cast<DensityCategory>(i));
  }
  for (const auto& r : manifest.records) {
    if (!r.density) {
      out.rejects.push_back({r.id, "missing density measure"});
      continue;
    }
    try {
      out[map_density(*r.density)].records.push_back(r);
    } catch (const InvalidDensity& e) {
      out.rejects.push_back({r.id, e.what()});
    }
  }
  return out;
}

/// One JSON object per line: {"id": ..., "reason": ...}.
inline void write_rejects(const std::vector<RejectedRecord>& rejects,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write rejects report: " + path.string());
  for (const auto& r : rejects) out << json{{"id", r.id}, {"reason", r.reason}}.dump() << '\n';
}

}  // namespace densesynth
