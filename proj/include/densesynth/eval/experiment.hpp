#pragma once

#include <string>
#include <utility>
#include <vector>

#include "densesynth/core/error.hpp"
#include "densesynth/eval/delong.hpp"
#include "densesynth/eval/froc.hpp"
#include "densesynth/eval/report.hpp"
#include "densesynth/eval/seeds.hpp"

namespace densesynth::eval {

/// Predictions of one strategy on one test set, one map per training seed.
struct StrategyRuns {
  std::string strategy;
  std::vector<PredictionMap> per_seed;
};

/// Scores every strategy against the first one: FROC AUC per seed, seed
/// aggregate, and DeLong on seed-averaged case scores.
inline ReportGroup evaluate_group(const std::string& test_set, const std::string& scenario,
                                  const std::vector<StrategyRuns>& strategies, const GroundTruthMap& truth,
                                  double iou_threshold = kDefaultIouThreshold) {
  if (strategies.empty()) throw InvalidInput("evaluate_group: no strategies");
  ReportGroup g{test_set, scenario, {}};
  std::vector<DelongCases> averaged;
  for (const auto& s : strategies) {
    if (s.per_seed.empty()) throw InvalidInput("strategy " + s.strategy + " has no runs");
    std::vector<double> aucs;
    std::vector<DelongCases> cases;
    for (const auto& preds : s.per_seed) {
      aucs.push_back(froc_curve(preds, truth, iou_threshold).auc_percent);
      cases.push_back(delong_cases(preds, truth, iou_threshold));
    }
    averaged.push_back(average_cases(cases));
    StrategyResult r{s.strategy, aggregate_seeds(aucs), std::nullopt};
    if (!g.rows.empty()) r.vs_baseline = delong_compare(averaged.front(), averaged.back());
    g.rows.push_back(std::move(r));
  }
  return g;
}

}  // namespace densesynth::eval
