#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "densesynth/core/error.hpp"
#include "densesynth/eval/froc.hpp"

namespace densesynth::eval {

/// Midranks (1-based, ties share the average rank).
inline std::vector<double> midranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && x[idx[j]] == x[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j - 1) + 1.0;
    for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = r;
    i = j;
  }
  return ranks;
}

/// Structural components of one model's AUC.
struct StructuralComponents {
  double auc = 0.0;
  std::vector<double> v10;  ///< per positive
  std::vector<double> v01;  ///< per negative
};

/// Midrank-based components, O(n log n).
inline StructuralComponents structural_components(std::span<const double> positives,
                                                  std::span<const double> negatives) {
  const std::size_t m = positives.size(), n = negatives.size();
  if (m == 0 || n == 0) throw InvalidInput("DeLong needs at least one positive and one negative");
  std::vector<double> pooled(positives.begin(), positives.end());
  pooled.insert(pooled.end(), negatives.begin(), negatives.end());
  const auto tz = midranks(pooled);
  const auto tx = midranks(positives);
  const auto ty = midranks(negatives);
  StructuralComponents sc;
  sc.v10.resize(m);
  sc.v01.resize(n);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sc.v10[i] = (tz[i] - tx[i]) / static_cast<double>(n);
    rank_sum += tz[i];
  }
  for (std::size_t j = 0; j < n; ++j) sc.v01[j] = 1.0 - (tz[m + j] - ty[j]) / static_cast<double>(m);
  sc.auc = (rank_sum - m * (m + 1) / 2.0) / (static_cast<double>(m) * n);
  return sc;
}

struct DelongResult {
  double auc_a = 0.0;
  double auc_b = 0.0;
  double var_a = 0.0;
  double var_b = 0.0;
  double cov_ab = 0.0;
  double z = 0.0;
  double p_value = 1.0;
  bool degenerate = false;
};

namespace detail {

inline double cov(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  if (n < 2) return 0.0;
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += (a[i] - ma) * (b[i] - mb);
  return acc / static_cast<double>(n - 1);
}

}  // namespace detail

/// Combines two models' structural components into the paired DeLong test.
inline DelongResult delong_from_components(const StructuralComponents& a, const StructuralComponents& b) {
  const double m = static_cast<double>(a.v10.size()), n = static_cast<double>(a.v01.size());
  DelongResult r;
  r.auc_a = a.auc;
  r.auc_b = b.auc;
  r.var_a = detail::cov(a.v10, a.v10) / m + detail::cov(a.v01, a.v01) / n;
  r.var_b = detail::cov(b.v10, b.v10) / m + detail::cov(b.v01, b.v01) / n;
  r.cov_ab = detail::cov(a.v10, b.v10) / m + detail::cov(a.v01, b.v01) / n;
  const double var_diff = r.var_a + r.var_b - 2.0 * r.cov_ab;
  const double diff = r.auc_a - r.auc_b;
  if (!(var_diff > 1e-15)) {
    r.degenerate = true;
    r.z = 0.0;
    r.p_value = 1.0;
    return r;
  }
  r.z = diff / std::sqrt(var_diff);
  r.p_value = std::erfc(std::abs(r.z) / std::sqrt(2.0));
  return r;
}

/// Paired DeLong comparison of two score vectors over the same cases.
/// `labels[i]` is true for positive cases.
inline DelongResult delong_compare(std::span<const double> scores_a, std::span<const double> scores_b,
                                   const std::vector<bool>& labels) {
  if (scores_a.size() != scores_b.size() || scores_a.size() != labels.size())
    throw InvalidInput("DeLong inputs must be paired over the same cases");
  std::vector<double> pa, na, pb, nb;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] ? pa : na).push_back(scores_a[i]);
    (labels[i] ? pb : nb).push_back(scores_b[i]);
  }
  return delong_from_components(structural_components(pa, na), structural_components(pb, nb));
}

/// Case list for detection-level DeLong: positives are lesions scored by the
/// best overlapping prediction (0 when missed); negatives are each image's
/// false positives, top `fppi_cap` by score, zero-padded to exactly
/// `fppi_cap` slots so two models always share the same cases.
struct DelongCases {
  std::vector<std::string> case_ids;
  std::vector<double> scores;
  std::vector<bool> labels;
};

inline DelongCases delong_cases(const PredictionMap& preds, const GroundTruthMap& truth,
                                double iou_threshold = kDefaultIouThreshold, std::size_t fppi_cap = 10) {
  validate_scores(preds, truth);
  DelongCases out;
  static const std::vector<ScoredBox> kNone;
  for (const auto& [id, lesions] : truth) {
    auto it = preds.find(id);
    const auto& boxes = it == preds.end() ? kNone : it->second;
    for (std::size_t l = 0; l < lesions.size(); ++l) {
      double best = 0.0;
      for (const auto& b : boxes)
        if (iou(b.box, lesions[l]) > iou_threshold) best = std::max(best, b.score);
      out.case_ids.push_back("lesion:" + id + ":" + std::to_string(l));
      out.scores.push_back(best);
      out.labels.push_back(true);
    }
    const auto match = greedy_match(boxes, lesions, iou_threshold);
    std::vector<double> fps;
    for (std::size_t p : match.order)
      if (match.matched_lesion[p] < 0) fps.push_back(boxes[p].score);
    fps.resize(std::min(fps.size(), fppi_cap));
    fps.resize(fppi_cap, 0.0);
    for (std::size_t k = 0; k < fppi_cap; ++k) {
      out.case_ids.push_back("fp:" + id + ":" + std::to_string(k));
      out.scores.push_back(fps[k]);
      out.labels.push_back(false);
    }
  }
  return out;
}

inline DelongResult delong_compare(const DelongCases& a, const DelongCases& b) {
  if (a.case_ids != b.case_ids || a.labels != b.labels)
    throw InvalidInput("DeLong case lists differ between the two models");
  return delong_compare(a.scores, b.scores, a.labels);
}

/// Per-case mean over seeds; every run must share the same case list.
inline DelongCases average_cases(std::span<const DelongCases> runs) {
  if (runs.empty()) throw InvalidInput("average_cases: no runs");
  DelongCases out = runs[0];
  for (std::size_t k = 1; k < runs.size(); ++k) {
    if (runs[k].case_ids != out.case_ids || runs[k].labels != out.labels)
      throw InvalidInput("average_cases: case lists differ between seeds");
    for (std::size_t i = 0; i < out.scores.size(); ++i) out.scores[i] += runs[k].scores[i];
  }
  for (double& v : out.scores) v /= static_cast<double>(runs.size());
  return out;
}

}  // namespace densesynth::eval
