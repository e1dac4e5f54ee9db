#pragma once

#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "densesynth/core/error.hpp"

namespace densesynth::eval {

/// Mean across seeds with a normal-approximation 95% interval
/// mean +/- 1.96 * sd / sqrt(n), sd with n - 1 denominator.
struct SeedAggregate {
  std::vector<double> values;
  double mean = 0.0;
  double sd = 0.0;
  /// Undefined for a single seed.
  std::optional<double> ci_low;
  std::optional<double> ci_high;

  [[nodiscard]] bool ci_defined() const noexcept { return ci_low.has_value(); }
};

inline SeedAggregate aggregate_seeds(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("aggregate_seeds: no values");
  SeedAggregate a;
  a.values.assign(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return a;
  double sq = 0.0;
  for (double v : values) sq += (v - a.mean) * (v - a.mean);
  a.sd = std::sqrt(sq / (n - 1.0));
  const double half = 1.96 * a.sd / std::sqrt(n);
  a.ci_low = a.mean - half;
  a.ci_high = a.mean + half;
  return a;
}

}  // namespace densesynth::eval
