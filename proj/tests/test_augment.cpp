#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "densesynth/augment/augment.hpp"
#include "fixtures.hpp"

using namespace densesynth;
using namespace densesynth::augment;
using namespace fixture;

TEST(Augment, BaselineKeepsRealSet) {
  const auto real = mixed_corpus({40, 30, 30, 0});
  const auto out = build_augmented_set(real, nullptr, AugmentationPlan::baseline());
  EXPECT_EQ(out.train.size(), 100u);
  EXPECT_EQ(out.n_synthetic, 0u);
  for (std::size_t i = 0; i < real.size(); ++i) EXPECT_EQ(out.train.records[i].id, real.records[i].id);
}

TEST(Augment, SingleSourceOneToOne) {
  const auto real = mixed_corpus({40, 30, 30, 0});
  FakeSource src;
  const auto out = build_augmented_set(real, &src, AugmentationPlan::single("OP"));
  EXPECT_EQ(out.train.size(), 200u);
  EXPECT_EQ(out.n_synthetic, 100u);
  EXPECT_EQ(out.train.provenance["name"], "OP-Aug");
  for (std::size_t i = 0; i < out.train.size(); i += 2) {
    const auto& r = out.train.records[i];
    const auto& s = out.train.records[i + 1];
    ASSERT_FALSE(r.is_synthetic());
    ASSERT_TRUE(s.is_synthetic());
    EXPECT_EQ(s.provenance->source_id, r.id);
    EXPECT_EQ(s.provenance->model_key, "OP-" + to_string(r.view));
    EXPECT_EQ(s.annotations, r.annotations);
  }
}

TEST(Augment, CombinedOneToThree) {
  const auto real = mixed_corpus({40, 30, 30, 0});
  FakeSource src;
  const auto out = build_augmented_set(real, &src, AugmentationPlan::combined());
  EXPECT_EQ(out.train.size(), 400u);
  EXPECT_EQ(out.n_synthetic, 300u);
  EXPECT_EQ(out.train.provenance["name"], "BC-CS-OP-Aug");
  std::map<std::string, int> per_family;
  for (const auto& r : out.train.records) {
    if (!r.is_synthetic()) continue;
    per_family[model_family(r.provenance->model_key)]++;
    const auto& key = r.provenance->model_key;
    if (key != "BC-All") EXPECT_EQ(key.substr(3), to_string(r.view));
  }
  EXPECT_EQ(per_family, (std::map<std::string, int>{{"BC", 100}, {"CS", 100}, {"OP", 100}}));
}

TEST(Augment, ExcludingRealDRemovesEveryRealD) {
  const auto real = mixed_corpus({30, 30, 20, 20});
  FakeSource src;
  const auto out = build_augmented_set(real, &src, AugmentationPlan::single("CS", false));
  EXPECT_EQ(count_real_d(out.train), 0u);
  EXPECT_EQ(out.reserved_d.size(), 20u);
  EXPECT_EQ(out.train.size(), 160u);
}

TEST(Augment, IncludedRealDFractionIsExactAndDisjoint) {
  const auto real = mixed_corpus({30, 30, 20, 22});
  auto plan = AugmentationPlan::baseline(true);
  plan.seed = 11;
  const auto a = build_augmented_set(real, nullptr, plan);
  const auto b = build_augmented_set(real, nullptr, plan);
  EXPECT_EQ(count_real_d(a.train), 5u);  // floor(0.25 * 22)
  EXPECT_EQ(a.reserved_d.size(), 17u);
  std::set<std::string> train_ids, reserved_ids;
  for (const auto& r : a.train.records) train_ids.insert(r.id);
  for (const auto& r : a.reserved_d.records) {
    reserved_ids.insert(r.id);
    EXPECT_EQ(map_density(*r.density), DensityCategory::D);
    EXPECT_FALSE(train_ids.count(r.id));
  }
  EXPECT_EQ(train_ids.size() - 80 + reserved_ids.size(), 22u);
  ASSERT_EQ(a.train.size(), b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) EXPECT_EQ(a.train.records[i].id, b.train.records[i].id);

  plan.seed = 12;
  const auto c = build_augmented_set(real, nullptr, plan);
  std::set<std::string> other;
  for (const auto& r : c.reserved_d.records) other.insert(r.id);
  EXPECT_NE(other, reserved_ids);
}

TEST(Augment, CountsPropertyOverRandomCompositions) {
  std::mt19937 rng(5);
  FakeSource src;
  for (int trial = 0; trial < 50; ++trial) {
    std::array<int, 4> n{};
    for (int& x : n) x = std::uniform_int_distribution<int>(0, 25)(rng);
    const auto real = mixed_corpus(n);
    const double frac = std::uniform_int_distribution<int>(0, 4)(rng) / 4.0;
    for (int s = 0; s < 3; ++s) {
      AugmentationPlan plan = s == 0 ? AugmentationPlan::baseline(trial % 2 == 0)
                              : s == 1 ? AugmentationPlan::single("BC", trial % 2 == 0)
                                       : AugmentationPlan::combined(trial % 2 == 0);
      plan.real_D_train_fraction = frac;
      plan.seed = trial;
      const auto out = build_augmented_set(real, &src, plan);
      const std::size_t d_train = plan.include_real_D ? static_cast<std::size_t>(std::floor(frac * n[3])) : 0;
      const std::size_t reals = n[0] + n[1] + n[2] + d_train;
      const std::size_t companions = s == 0 ? 0 : s == 1 ? 1 : 3;
      EXPECT_EQ(out.n_real, reals);
      EXPECT_EQ(out.train.size(), reals * (1 + companions));
      EXPECT_EQ(out.reserved_d.size(), n[3] - d_train);
      EXPECT_EQ(count_real_d(out.train), d_train);
      for (const auto& r : out.train.records)
        if (r.is_synthetic()) EXPECT_FALSE(r.provenance->source_id.empty());
    }
  }
}

TEST(Augment, MissingModelNamesTheGap) {
  const auto real = mixed_corpus({4, 0, 0, 0});
  FakeSource src;
  src.keys.erase("OP-MLO");
  try {
    build_augmented_set(real, &src, AugmentationPlan::single("OP"));
    FAIL() << "expected an error";
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("family OP view MLO"), std::string::npos) << e.what();
  }
  EXPECT_EQ(src.calls, 0);
  EXPECT_THROW(build_augmented_set(real, &src, AugmentationPlan::single("XX")), InvalidInput);
}

TEST(Augment, RejectsSyntheticOrUnlabelledInput) {
  auto real = mixed_corpus({2, 0, 0, 0});
  real.records[0].provenance = Provenance{"x", "OP-CC"};
  EXPECT_THROW(build_augmented_set(real, nullptr, AugmentationPlan::baseline()), InvalidInput);
  real = mixed_corpus({2, 0, 0, 0});
  real.records[1].density.reset();
  EXPECT_THROW(build_augmented_set(real, nullptr, AugmentationPlan::baseline()), InvalidInput);
}

TEST(AugmentPlan, JsonRoundTripAndValidation) {
  auto p = AugmentationPlan::single("OP", false);
  p.seed = 9;
  p.real_D_train_fraction = 0.5;
  const auto q = plan_from_json(plan_to_json(p));
  EXPECT_EQ(q.strategy, Strategy::SINGLE_SOURCE);
  EXPECT_EQ(q.family, "OP");
  EXPECT_EQ(q.include_real_D, false);
  EXPECT_EQ(q.real_D_train_fraction, 0.5);
  EXPECT_EQ(q.seed, 9u);
  EXPECT_EQ(plan_from_json(json{{"strategy", "COMBINED_ALL"}}).ratio_synthetic, 3);

  EXPECT_THROW(plan_from_json(json{{"strategy", "SINGLE_SOURCE"}, {"family", "OP"}, {"ratio", {1, 3}}}),
               InvalidInput);
  EXPECT_THROW(plan_from_json(json{{"strategy", "BASELINE"}, {"ratio", {1, 2}}}), InvalidInput);
  EXPECT_THROW(plan_from_json(json{{"strategy", "BASELINE"}, {"real_D_train_fraction", 1.5}}), InvalidInput);
  EXPECT_THROW(plan_from_json(json{{"strategy", "SINGLE_SOURCE"}}), InvalidInput);
  EXPECT_THROW(plan_from_json(json{{"strategy", "RANDOM"}}), InvalidInput);
}
