#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "densesynth/core/error.hpp"
#include "densesynth/core/manifest.hpp"
#include "densesynth/detection/boxes.hpp"

namespace densesynth::eval {

inline constexpr double kDefaultIouThreshold = 0.1;

struct FrocPoint {
  double threshold = 0.0;
  double fppi = 0.0;
  double sensitivity = 0.0;
};

struct FrocResult {
  /// One point per distinct score, descending threshold (ascending FPPI).
  std::vector<FrocPoint> points;
  /// Normalized area under sensitivity over FPPI in (0, 1), percent.
  double auc_percent = 0.0;
  std::size_t n_images = 0;
  std::size_t n_lesions = 0;
  double iou_threshold = kDefaultIouThreshold;
};

/// Per-image match state of each prediction after greedy one-to-one
/// matching. Predictions are visited by descending score (ties by input
/// order); each takes the unmatched lesion with the highest IoU above the
/// threshold. Because earlier predictions never depend on later ones, the
/// matching restricted to scores >= t is the prefix of this one.
struct ImageMatch {
  std::vector<std::size_t> order;       ///< prediction indices, match order
  std::vector<int> matched_lesion;      ///< per prediction (input index), -1 = FP
};

inline ImageMatch greedy_match(const std::vector<ScoredBox>& preds, const std::vector<MassBox>& lesions,
                               double iou_threshold) {
  ImageMatch m;
  m.order.resize(preds.size());
  std::iota(m.order.begin(), m.order.end(), 0);
  std::stable_sort(m.order.begin(), m.order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
  m.matched_lesion.assign(preds.size(), -1);
  std::vector<bool> taken(lesions.size(), false);
  for (std::size_t p : m.order) {
    int best = -1;
    double best_iou = iou_threshold;
    for (std::size_t l = 0; l < lesions.size(); ++l) {
      if (taken[l]) continue;
      const double v = iou(preds[p].box, lesions[l]);
      if (v > best_iou) {
        best_iou = v;
        best = static_cast<int>(l);
      }
    }
    if (best >= 0) {
      taken[best] = true;
      m.matched_lesion[p] = best;
    }
  }
  return m;
}

inline void validate_scores(const PredictionMap& preds, const GroundTruthMap& truth) {
  for (const auto& [id, boxes] : preds) {
    if (!truth.contains(id)) throw InvalidInput("prediction for unknown image: " + id);
    for (const auto& b : boxes)
      if (!std::isfinite(b.score)) throw InvalidInput("non-finite score for image " + id);
  }
}

/// Trapezoidal area under the piecewise-linear curve through (0, 0) and
/// `points`, clipped to FPPI in [0, 1] and extended flat past the last point.
inline double froc_auc_percent(const std::vector<FrocPoint>& points) {
  double area = 0.0;
  double f0 = 0.0, s0 = 0.0;
  for (const auto& p : points) {
    if (f0 >= 1.0) break;
    double f1 = p.fppi, s1 = p.sensitivity;
    if (f1 > 1.0) {
      s1 = s0 + (s1 - s0) * (1.0 - f0) / (f1 - f0);
      f1 = 1.0;
    }
    area += (f1 - f0) * (s0 + s1) / 2.0;
    f0 = f1;
    s0 = s1;
  }
  if (f0 < 1.0) area += (1.0 - f0) * s0;
  return 100.0 * area;
}

inline FrocResult froc_curve(const PredictionMap& preds, const GroundTruthMap& truth,
                             double iou_threshold = kDefaultIouThreshold) {
  validate_scores(preds, truth);
  FrocResult out;
  out.n_images = truth.size();
  out.iou_threshold = iou_threshold;
  for (const auto& [id, lesions] : truth) out.n_lesions += lesions.size();
  if (out.n_lesions == 0) throw InvalidInput("froc_curve: ground truth contains no lesions");

  struct Entry {
    double score;
    bool tp;
  };
  std::vector<Entry> entries;
  for (const auto& [id, lesions] : truth) {
    auto it = preds.find(id);
    if (it == preds.end()) continue;
    const auto m = greedy_match(it->second, lesions, iou_threshold);
    for (std::size_t p = 0; p < it->second.size(); ++p)
      entries.push_back({it->second[p].score, m.matched_lesion[p] >= 0});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.score > b.score; });
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < entries.size();) {
    const double t = entries[i].score;
    // Equal scores enter together.
    for (; i < entries.size() && entries[i].score == t; ++i) (entries[i].tp ? tp : fp)++;
    out.points.push_back({t, static_cast<double>(fp) / out.n_images,
                          static_cast<double>(tp) / out.n_lesions});
  }
  out.auc_percent = froc_auc_percent(out.points);
  return out;
}

/// Highest sensitivity reached at FPPI <= `max_fppi` (0 when no point qualifies).
inline double sensitivity_at(const FrocResult& froc, double max_fppi) {
  double best = 0.0;
  for (const auto& p : froc.points)
    if (p.fppi <= max_fppi) best = std::max(best, p.sensitivity);
  return best;
}

inline GroundTruthMap ground_truth_from(const Manifest& m) {
  GroundTruthMap gt;
  for (const auto& r : m.records) gt[r.id] = r.annotations;
  return gt;
}

}  // namespace densesynth::eval
