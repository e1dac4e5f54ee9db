#pragma once

#include <string>
#include <vector>

#include "densesynth/core/geometry.hpp"
#include "densesynth/core/manifest.hpp"
#include "densesynth/core/stratify.hpp"

namespace densesynth {

/// Crops a record to its breast region and resizes it to the target frame,
/// carrying annotations through the same transform.
inline MammogramRecord preprocess_record(const MammogramRecord& r, int target_h, int target_w) {
  const auto cropped = crop_to_breast(r.image);
  auto resized = resize_keep_aspect(cropped.image, r.annotations, target_h, target_w, &cropped.transform);
  MammogramRecord out = r;
  out.image = std::move(resized.image);
  out.image_path.clear();
  out.annotations = std::move(resized.boxes);
  return out;
}

struct IngestResult {
  Manifest manifest;
  std::vector<RejectedRecord> rejects;
};

/// Normalizes every record of a raw manifest; records that cannot be
/// preprocessed or validated are reported instead of aborting the batch.
inline IngestResult ingest(const Manifest& raw, int target_h = kTargetHeight, int target_w = kTargetWidth) {
  IngestResult out;
  out.manifest.split = raw.split;
  out.manifest.provenance = raw.provenance;
  out.manifest.provenance["ingest"] = {{"target_height", target_h}, {"target_width", target_w}};
  for (const auto& r : raw.records) {
    try {
      auto p = preprocess_record(r, target_h, target_w);
      validate_record(p);
      out.manifest.records.push_back(std::move(p));
    } catch (const InvalidInput& e) {
      out.rejects.push_back({r.id, e.what()});
    }
  }
  return out;
}

}  // namespace densesynth
