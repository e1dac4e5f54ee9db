#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "densesynth/core/error.hpp"
#include "densesynth/core/image.hpp"
#include "densesynth/core/manifest.hpp"
#include "densesynth/detection/boxes.hpp"

namespace densesynth::detection {

/// A trained detector. predict is deterministic and read-only.
class DetectorModel {
 public:
  virtual ~DetectorModel() = default;
  [[nodiscard]] virtual std::vector<ScoredBox> predict(const MammogramRecord& record) const = 0;
  virtual void save(const std::filesystem::path& path) const = 0;
};

/// Pluggable training backend; an external detector attaches here.
class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  [[nodiscard]] virtual std::string name() const = 0;
  virtual std::unique_ptr<DetectorModel> train(const Manifest& manifest, std::uint64_t seed, int epochs) = 0;
  virtual std::unique_ptr<DetectorModel> load(const std::filesystem::path& path) = 0;
};

/// Horizontal mirror of a record: pixels and boxes flipped together.
inline MammogramRecord flip_record(const MammogramRecord& r) {
  MammogramRecord out = r;
  out.image = flip_horizontal(r.image);
  for (auto& b : out.annotations) b = flip_box(b, r.image.width);
  return out;
}

inline bool has_annotations(const Manifest& m) {
  return std::any_of(m.records.begin(), m.records.end(),
                     [](const MammogramRecord& r) { return !r.annotations.empty(); });
}

inline std::unique_ptr<DetectorModel> train_detector(DetectorBackend& backend, const Manifest& manifest,
                                                     std::uint64_t seed, int epochs) {
  if (manifest.empty()) throw InvalidInput("train_detector: empty manifest");
  if (!has_annotations(manifest)) throw InvalidInput("train_detector: manifest has no annotated records");
  if (epochs < 0) throw InvalidInput("train_detector: epochs must be non-negative");
  return backend.train(manifest, seed, epochs);
}

/// Checks the output contract: boxes inside the image, scores finite in [0, 1].
inline void check_predictions(const MammogramRecord& r, const std::vector<ScoredBox>& boxes) {
  for (const auto& b : boxes) {
    if (!(std::isfinite(b.score) && b.score >= 0.0 && b.score <= 1.0))
      throw Error("detector emitted score outside [0, 1] for " + r.id);
    if (b.box.x < 0 || b.box.y < 0 || b.box.w <= 0 || b.box.h <= 0 || b.box.right() > r.image.width + 1e-9 ||
        b.box.bottom() > r.image.height + 1e-9)
      throw Error("detector emitted box outside image " + r.id);
  }
}

inline PredictionMap predict_all(const DetectorModel& model, const Manifest& manifest) {
  PredictionMap out;
  for (const auto& r : manifest.records) {
    auto boxes = model.predict(r);
    check_predictions(r, boxes);
    out[r.id] = std::move(boxes);
  }
  return out;
}

}  // namespace densesynth::detection
