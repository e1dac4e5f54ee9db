#include <random>

#include <gtest/gtest.h>

#include "densesynth/core/density.hpp"

using namespace densesynth;

namespace {

DensityCategory map(DensityKind k, double v) { return map_density({k, v}); }

constexpr auto VBD = DensityKind::VOLPARA_VBD_PERCENT;
constexpr auto LIBRA = DensityKind::LIBRA_PERCENT;
constexpr auto ACR = DensityKind::ACR_CLASS;
constexpr auto DIRECT = DensityKind::BIRADS_DIRECT;

}  // namespace

TEST(MapDensity, TableExamples) {
  EXPECT_EQ(map(VBD, 16.0), DensityCategory::D);
  EXPECT_EQ(map(ACR, 1), DensityCategory::A);
  EXPECT_EQ(map(LIBRA, 2.8), DensityCategory::A);
  EXPECT_EQ(map(LIBRA, 50.0), DensityCategory::C);
}

// Boundary table shipped with the library doc comment.
TEST(MapDensity, BoundaryTable) {
  struct Row {
    DensityKind kind;
    double value;
    DensityCategory expected;
  };
  const Row rows[] = {
      {VBD, 0.0, DensityCategory::A},   {VBD, 3.5, DensityCategory::A},
      {VBD, 3.5000001, DensityCategory::B}, {VBD, 7.5, DensityCategory::B},
      {VBD, 7.5000001, DensityCategory::C}, {VBD, 15.4999, DensityCategory::C},
      {VBD, 15.5, DensityCategory::D},  {VBD, 100.0, DensityCategory::D},
      {LIBRA, 0.0, DensityCategory::A}, {LIBRA, 2.8, DensityCategory::A},
      {LIBRA, 2.8000001, DensityCategory::B}, {LIBRA, 24.9999, DensityCategory::B},
      {LIBRA, 25.0, DensityCategory::C}, {LIBRA, 74.9999, DensityCategory::C},
      {LIBRA, 75.0, DensityCategory::D}, {LIBRA, 100.0, DensityCategory::D},
      {ACR, 1, DensityCategory::A},     {ACR, 2, DensityCategory::B},
      {ACR, 3, DensityCategory::C},     {ACR, 4, DensityCategory::D},
      {DIRECT, 1, DensityCategory::A},  {DIRECT, 4, DensityCategory::D},
  };
  for (const auto& r : rows) {
    EXPECT_EQ(map(r.kind, r.value), r.expected) << to_string(r.kind) << " " << r.value;
  }
}

TEST(MapDensity, RejectsOutOfRange) {
  EXPECT_THROW(map(VBD, -0.1), InvalidDensity);
  EXPECT_THROW(map(LIBRA, 100.5), InvalidDensity);
  EXPECT_THROW(map(ACR, 0), InvalidDensity);
  EXPECT_THROW(map(ACR, 5), InvalidDensity);
  EXPECT_THROW(map(ACR, 2.5), InvalidDensity);
  EXPECT_THROW(map(LIBRA, std::nan("")), InvalidDensity);
  try {
    map(LIBRA, 120.0);
    FAIL();
  } catch (const InvalidDensity& e) {
    EXPECT_EQ(e.kind(), LIBRA);
    EXPECT_DOUBLE_EQ(e.value(), 120.0);
  }
}

TEST(MapDensity, MonotoneInValue) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> pct(0.0, 100.0);
  for (auto kind : {VBD, LIBRA}) {
    for (int i = 0; i < 2000; ++i) {
      double a = pct(rng), b = pct(rng);
      if (a > b) std::swap(a, b);
      EXPECT_LE(static_cast<int>(map(kind, a)), static_cast<int>(map(kind, b)));
    }
  }
}
