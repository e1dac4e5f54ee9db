#pragma once
// Independent reference computations used only by tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "densesynth/detection/boxes.hpp"

namespace oracle {

using densesynth::GroundTruthMap;
using densesynth::MassBox;
using densesynth::PredictionMap;

inline double box_iou(const MassBox& a, const MassBox& b) {
  // Rasterization-free, computed from corner extents.
  const double x0 = std::max(a.x, b.x), x1 = std::min(a.x + a.w, b.x + b.w);
  const double y0 = std::max(a.y, b.y), y1 = std::min(a.y + a.h, b.y + b.h);
  const double inter = (x1 > x0 && y1 > y0) ? (x1 - x0) * (y1 - y0) : 0.0;
  return inter / (a.w * a.h + b.w * b.h - inter);
}

struct Point {
  double fppi, sens;
};

/// Re-runs the matching from scratch at every distinct score threshold.
inline std::vector<Point> froc_points(const PredictionMap& preds, const GroundTruthMap& gt, double thr) {
  std::set<double, std::greater<>> thresholds;
  for (const auto& [id, boxes] : preds)
    for (const auto& b : boxes) thresholds.insert(b.score);
  std::size_t lesions = 0;
  for (const auto& [id, l] : gt) lesions += l.size();
  std::vector<Point> pts;
  for (double t : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (const auto& [id, les] : gt) {
      auto it = preds.find(id);
      if (it == preds.end()) continue;
      std::vector<bool> used_pred(it->second.size(), false), used_les(les.size(), false);
      while (true) {
        // highest remaining score, lowest index on ties
        int pick = -1;
        for (std::size_t p = 0; p < it->second.size(); ++p) {
          if (used_pred[p] || it->second[p].score < t) continue;
          if (pick < 0 || it->second[p].score > it->second[pick].score) pick = static_cast<int>(p);
        }
        if (pick < 0) break;
        used_pred[pick] = true;
        int best = -1;
        double best_v = thr;
        for (std::size_t l = 0; l < les.size(); ++l) {
          if (used_les[l]) continue;
          const double v = box_iou(it->second[pick].box, les[l]);
          if (v > best_v) {
            best_v = v;
            best = static_cast<int>(l);
          }
        }
        if (best >= 0) {
          used_les[best] = true;
          ++tp;
        } else {
          ++fp;
        }
      }
    }
    pts.push_back({static_cast<double>(fp) / gt.size(), static_cast<double>(tp) / lesions});
  }
  return pts;
}

/// Integrates the polyline through (0,0) and `pts` over [0,1] by the
/// midpoint rule on every breakpoint interval (exact for linear pieces).
inline double froc_auc_percent(const std::vector<Point>& pts) {
  std::vector<Point> poly{{0.0, 0.0}};
  poly.insert(poly.end(), pts.begin(), pts.end());
  std::set<double> breaks{0.0, 1.0};
  for (const auto& p : poly)
    if (p.fppi < 1.0) breaks.insert(p.fppi);
  auto value_at = [&](double f) {
    for (std::size_t i = 1; i < poly.size(); ++i) {
      const auto& a = poly[i - 1];
      const auto& b = poly[i];
      if (a.fppi < f && f < b.fppi) return a.sens + (b.sens - a.sens) * (f - a.fppi) / (b.fppi - a.fppi);
    }
    return poly.back().sens;  // beyond the last vertex: flat extension
  };
  double area = 0.0;
  for (auto it = breaks.begin(); std::next(it) != breaks.end(); ++it) {
    const double a = *it, b = *std::next(it);
    area += (b - a) * value_at(0.5 * (a + b));
  }
  return 100.0 * area;
}

struct DelongVariance {
  double auc_a, auc_b, var_a, var_b, cov_ab;
};

/// O(m n) structural components straight from the kernel definition.
inline DelongVariance delong_naive(const std::vector<double>& a, const std::vector<double>& b,
                                   const std::vector<bool>& labels) {
  auto psi = [](double x, double y) { return x > y ? 1.0 : (x == y ? 0.5 : 0.0); };
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);
  const double m = pos.size(), n = neg.size();
  auto components = [&](const std::vector<double>& s, std::vector<double>& v10, std::vector<double>& v01) {
    v10.assign(pos.size(), 0.0);
    v01.assign(neg.size(), 0.0);
    double auc = 0.0;
    for (std::size_t i = 0; i < pos.size(); ++i)
      for (std::size_t j = 0; j < neg.size(); ++j) {
        const double k = psi(s[pos[i]], s[neg[j]]);
        v10[i] += k / n;
        v01[j] += k / m;
        auc += k / (m * n);
      }
    return auc;
  };
  std::vector<double> a10, a01, b10, b01;
  DelongVariance r{};
  r.auc_a = components(a, a10, a01);
  r.auc_b = components(b, b10, b01);
  auto cov = [](const std::vector<double>& x, const std::vector<double>& y, double mx, double my) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - mx) * (y[i] - my);
    return acc / (x.size() - 1.0);
  };
  r.var_a = cov(a10, a10, r.auc_a, r.auc_a) / m + cov(a01, a01, r.auc_a, r.auc_a) / n;
  r.var_b = cov(b10, b10, r.auc_b, r.auc_b) / m + cov(b01, b01, r.auc_b, r.auc_b) / n;
  r.cov_ab = cov(a10, b10, r.auc_a, r.auc_b) / m + cov(a01, b01, r.auc_a, r.auc_b) / n;
  return r;
}

/// Pairwise-enumeration ROC AUC (ties count one half).
inline double roc_auc(const std::vector<double>& positives, const std::vector<double>& negatives) {
  double acc = 0.0;
  for (double p : positives)
    for (double q : negatives) acc += p > q ? 1.0 : (p == q ? 0.5 : 0.0);
  return acc / (positives.size() * negatives.size());
}

}  // namespace oracle
