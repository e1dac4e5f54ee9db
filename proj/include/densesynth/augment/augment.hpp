#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "densesynth/core/density.hpp"
#include "densesynth/core/error.hpp"
#include "densesynth/core/hash.hpp"
#include "densesynth/core/manifest.hpp"
#include "densesynth/core/types.hpp"

namespace densesynth::augment {

/// Supplies synthetic high-density companions for real records.
class SyntheticSource {
 public:
  virtual ~SyntheticSource() = default;
  /// Model families available, e.g. {"BC", "CS", "OP"}.
  [[nodiscard]] virtual std::vector<std::string> families() const = 0;
  /// Key of the model of `family` serving `view`, or nullopt when there is none.
  [[nodiscard]] virtual std::optional<std::string> model_for(std::string_view family, View view) const = 0;
  /// Translation of `real` by model `key`. Must carry provenance and the source boxes.
  virtual MammogramRecord synthesize(const MammogramRecord& real, const std::string& key) = 0;
};

enum class Strategy { BASELINE, SINGLE_SOURCE, COMBINED_ALL };

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::BASELINE: return "BASELINE";
    case Strategy::SINGLE_SOURCE: return "SINGLE_SOURCE";
    case Strategy::COMBINED_ALL: return "COMBINED_ALL";
  }
  return "";
}

inline Strategy parse_strategy(std::string_view s) {
  if (s == "BASELINE") return Strategy::BASELINE;
  if (s == "SINGLE_SOURCE") return Strategy::SINGLE_SOURCE;
  if (s == "COMBINED_ALL") return Strategy::COMBINED_ALL;
  throw InvalidInput("unknown augmentation strategy: " + std::string(s));
}

/// JSON form:
///   {"strategy": "SINGLE_SOURCE", "family": "OP", "ratio": [1, 1],
///    "include_real_D": true, "real_D_train_fraction": 0.25, "seed": 1}
struct AugmentationPlan {
  Strategy strategy = Strategy::BASELINE;
  std::string family;  ///< SINGLE_SOURCE only
  int ratio_real = 1;
  int ratio_synthetic = 1;
  bool include_real_D = true;
  double real_D_train_fraction = 0.25;
  std::uint64_t seed = 0;

  static AugmentationPlan baseline(bool include_d = true) {
    AugmentationPlan p;
    p.include_real_D = include_d;
    return p;
  }
  static AugmentationPlan single(std::string fam, bool include_d = true) {
    AugmentationPlan p;
    p.strategy = Strategy::SINGLE_SOURCE;
    p.family = std::move(fam);
    p.include_real_D = include_d;
    return p;
  }
  static AugmentationPlan combined(bool include_d = true) {
    AugmentationPlan p;
    p.strategy = Strategy::COMBINED_ALL;
    p.ratio_synthetic = 3;
    p.include_real_D = include_d;
    return p;
  }

  void validate() const {
    const bool one_one = ratio_real == 1 && ratio_synthetic == 1;
    const bool one_three = ratio_real == 1 && ratio_synthetic == 3;
    if (!one_one && !one_three) throw InvalidInput("augmentation ratio must be 1:1 or 1:3");
    if (!(real_D_train_fraction >= 0.0 && real_D_train_fraction <= 1.0))
      throw InvalidInput("real_D_train_fraction must lie in [0, 1]");
    if (strategy == Strategy::SINGLE_SOURCE) {
      if (family.empty()) throw InvalidInput("SINGLE_SOURCE plan needs a model family");
      if (!one_one) throw InvalidInput("SINGLE_SOURCE plan uses a 1:1 ratio");
    }
    if (strategy == Strategy::COMBINED_ALL && !one_three) throw InvalidInput("COMBINED_ALL plan uses a 1:3 ratio");
  }

  /// "Baseline", "OP-Aug", or the combined name over `families` ("OP-CS-BC-Aug").
  [[nodiscard]] std::string name(const std::vector<std::string>& families = {}) const {
    switch (strategy) {
      case Strategy::BASELINE: return "Baseline";
      case Strategy::SINGLE_SOURCE: return family + "-Aug";
      case Strategy::COMBINED_ALL: {
        std::string s;
        for (const auto& f : families) s += f + "-";
        return (s.empty() ? std::string("All-") : s) + "Aug";
      }
    }
    return "";
  }
};

inline json plan_to_json(const AugmentationPlan& p) {
  json j = {{"strategy", to_string(p.strategy)},
            {"ratio", {p.ratio_real, p.ratio_synthetic}},
            {"include_real_D", p.include_real_D},
            {"real_D_train_fraction", p.real_D_train_fraction},
            {"seed", p.seed}};
  if (!p.family.empty()) j["family"] = p.family;
  return j;
}

inline AugmentationPlan plan_from_json(const json& j) {
  AugmentationPlan p;
  p.strategy = parse_strategy(j.at("strategy").get<std::string>());
  p.family = j.value("family", std::string());
  if (j.contains("ratio")) {
    const auto& r = j.at("ratio");
    if (!r.is_array() || r.size() != 2) throw InvalidInput("plan ratio must be [real, synthetic]");
    p.ratio_real = r[0].get<int>();
    p.ratio_synthetic = r[1].get<int>();
  } else {
    p.ratio_synthetic = p.strategy == Strategy::COMBINED_ALL ? 3 : 1;
  }
  p.include_real_D = j.value("include_real_D", p.include_real_D);
  p.real_D_train_fraction = j.value("real_D_train_fraction", p.real_D_train_fraction);
  p.seed = j.value("seed", p.seed);
  p.validate();
  return p;
}

struct AugmentedSet {
  Manifest train;
  /// Real D records held out of training for test and validation.
  Manifest reserved_d;
  std::size_t n_real = 0;
  std::size_t n_synthetic = 0;
};

/// Splits real D records into (train, reserved) per the plan's D policy.
/// The train part has exactly floor(fraction * |D|) records when D is included.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_real_d(
    const std::vector<std::size_t>& d_indices, const AugmentationPlan& plan) {
  if (!plan.include_real_D) return {{}, d_indices};
  const auto n_train = static_cast<std::size_t>(std::floor(plan.real_D_train_fraction * d_indices.size() + 1e-9));
  std::vector<std::size_t> order(d_indices.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix_seed(plan.seed, 0x4455));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> train, reserved;
  std::vector<bool> chosen(d_indices.size(), false);
  for (std::size_t i = 0; i < n_train; ++i) chosen[order[i]] = true;
  for (std::size_t i = 0; i < d_indices.size(); ++i) (chosen[i] ? train : reserved).push_back(d_indices[i]);
  return {train, reserved};
}

/// Real training records, each followed by its synthetic companions.
inline AugmentedSet build_augmented_set(const Manifest& real, SyntheticSource* source, const AugmentationPlan& plan) {
  plan.validate();
  std::vector<std::size_t> kept, d_indices;
  for (std::size_t i = 0; i < real.records.size(); ++i) {
    const auto& r = real.records[i];
    if (r.is_synthetic()) throw InvalidInput("augmentation input must be real; got synthetic record " + r.id);
    if (!r.density) throw InvalidInput("record " + r.id + " has no density measure");
    (map_density(*r.density) == DensityCategory::D ? d_indices : kept).push_back(i);
  }
  auto [d_train, d_reserved] = split_real_d(d_indices, plan);
  kept.insert(kept.end(), d_train.begin(), d_train.end());
  std::sort(kept.begin(), kept.end());

  std::vector<std::string> families;
  if (plan.strategy == Strategy::SINGLE_SOURCE) families = {plan.family};
  if (plan.strategy == Strategy::COMBINED_ALL) {
    if (!source) throw InvalidInput("COMBINED_ALL plan needs a synthetic source");
    families = source->families();
    if (static_cast<int>(families.size()) != plan.ratio_synthetic)
      throw InvalidInput("COMBINED_ALL 1:" + std::to_string(plan.ratio_synthetic) + " needs " +
                         std::to_string(plan.ratio_synthetic) + " model families, source has " +
                         std::to_string(families.size()));
  }
  if (!families.empty() && !source) throw InvalidInput("plan " + plan.name() + " needs a synthetic source");

  // Resolve every (family, view) before producing anything.
  std::map<std::pair<std::string, View>, std::string> keys;
  for (std::size_t i : kept)
    for (const auto& f : families) {
      const auto cell = std::make_pair(f, real.records[i].view);
      if (keys.count(cell)) continue;
      auto key = source->model_for(f, cell.second);
      if (!key) throw InvalidInput("no translator for family " + f + " view " + to_string(cell.second));
      keys[cell] = *key;
    }

  AugmentedSet out;
  out.train.split = real.split;
  out.reserved_d.split = real.split;
  for (std::size_t i : kept) {
    const auto& r = real.records[i];
    out.train.records.push_back(r);
    ++out.n_real;
    for (const auto& f : families) {
      const auto& key = keys.at({f, r.view});
      auto syn = source->synthesize(r, key);
      if (!syn.provenance || syn.provenance->source_id != r.id || syn.provenance->model_key != key)
        throw Error("synthetic source returned record without matching provenance for " + r.id);
      if (syn.annotations != r.annotations)
        throw Error("synthetic source altered the annotations of " + r.id);
      out.train.records.push_back(std::move(syn));
      ++out.n_synthetic;
    }
  }
  for (std::size_t i : d_reserved) out.reserved_d.records.push_back(real.records[i]);
  out.train.provenance = {{"plan", plan_to_json(plan)},
                          {"name", plan.name(families)},
                          {"n_real", out.n_real},
                          {"n_synthetic", out.n_synthetic},
                          {"n_real_d_train", d_train.size()},
                          {"n_real_d_reserved", d_reserved.size()}};
  out.reserved_d.provenance = {{"reserved_for", "test_validation"}, {"plan", plan_to_json(plan)}};
  return out;
}

}  // namespace densesynth::augment
