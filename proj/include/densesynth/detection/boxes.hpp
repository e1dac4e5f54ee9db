#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "densesynth/core/error.hpp"
#include "densesynth/core/types.hpp"

namespace densesynth {

/// Detector output: a box with confidence in [0, 1].
struct ScoredBox {
  MassBox box;
  double score = 0.0;
  bool operator==(const ScoredBox&) const = default;
};

/// Predictions keyed by record id.
using PredictionMap = std::map<std::string, std::vector<ScoredBox>>;
/// Ground-truth lesions keyed by record id; images without lesions map to {}.
using GroundTruthMap = std::map<std::string, std::vector<MassBox>>;

inline double iou(const MassBox& a, const MassBox& b) {
  const double ix = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// Mirrors a box across the vertical axis of an image of width `image_width`.
inline MassBox flip_box(const MassBox& b, double image_width) {
  return {image_width - b.x - b.w, b.y, b.w, b.h};
}

/// Greedy NMS: keeps boxes in descending score order, dropping any whose IoU
/// with a kept box exceeds `threshold`.
inline std::vector<ScoredBox> non_max_suppression(std::vector<ScoredBox> boxes, double threshold,
                                                  std::size_t max_keep = 100) {
  std::stable_sort(boxes.begin(), boxes.end(),
                   [](const ScoredBox& a, const ScoredBox& b) { return a.score > b.score; });
  std::vector<ScoredBox> kept;
  for (const auto& cand : boxes) {
    if (kept.size() >= max_keep) break;
    const bool clash = std::any_of(kept.begin(), kept.end(),
                                   [&](const ScoredBox& k) { return iou(k.box, cand.box) > threshold; });
    if (!clash) kept.push_back(cand);
  }
  return kept;
}

/// JSON-lines persistence, one image per line:
///   {"id": "...", "boxes": [{"x":..,"y":..,"w":..,"h":..,"score":..}]}
inline void write_predictions(const PredictionMap& preds, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write predictions: " + path.string());
  for (const auto& [id, boxes] : preds) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& b : boxes)
      arr.push_back({{"x", b.box.x}, {"y", b.box.y}, {"w", b.box.w}, {"h", b.box.h}, {"score", b.score}});
    out << nlohmann::json{{"id", id}, {"boxes", arr}}.dump() << '\n';
  }
}

inline PredictionMap read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open predictions: " + path.string());
  PredictionMap preds;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    auto& boxes = preds[j.at("id").get<std::string>()];
    for (const auto& b : j.at("boxes")) {
      boxes.push_back({{b.at("x").get<double>(), b.at("y").get<double>(), b.at("w").get<double>(),
                        b.at("h").get<double>()},
                       b.at("score").get<double>()});
    }
  }
  return preds;
}

}  // namespace densesynth
