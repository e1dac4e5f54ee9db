#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "densesynth/eval/fid.hpp"
#include "densesynth/phantom/phantom.hpp"

using namespace densesynth;
using namespace densesynth::eval;

namespace {

// Symmetric-form reference: Tr((S1 S2)^{1/2}) = Tr((sqrt(S1) S2 sqrt(S1))^{1/2})
// using only self-adjoint eigendecompositions.
double fid_oracle(const Eigen::VectorXd& m1, const Eigen::MatrixXd& s1, const Eigen::VectorXd& m2,
                  const Eigen::MatrixXd& s2) {
  auto psd_sqrt = [](const Eigen::MatrixXd& s) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return Eigen::MatrixXd(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
  };
  const Eigen::MatrixXd r1 = psd_sqrt(s1);
  const Eigen::MatrixXd inner = r1 * s2 * r1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double tr_root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return (m1 - m2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * tr_root;
}

Eigen::MatrixXd random_spd(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(d, d + 3);
  for (int i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
  return a * a.transpose() / (d + 3.0);
}

Manifest phantoms(DensityCategory cat, int n, std::uint64_t seed) {
  phantom::CorpusConfig cfg;
  cfg.seed = seed;
  cfg.height = 128;
  cfg.width = 80;
  cfg.counts[static_cast<int>(cat)].normal = n;
  return phantom::generate_corpus(cfg);
}

}  // namespace

TEST(Frechet, IdenticalGaussiansIsZero) {
  std::mt19937_64 rng(1);
  auto s = random_spd(rng, 6);
  Eigen::VectorXd m = Eigen::VectorXd::LinSpaced(6, -1, 1);
  EXPECT_NEAR(frechet_distance(m, s, m, s), 0.0, 1e-9);
}

TEST(Frechet, OneDimensionalClosedForm) {
  auto v = [](double x) { return Eigen::VectorXd::Constant(1, x); };
  auto m = [](double x) { return Eigen::MatrixXd::Constant(1, 1, x); };
  EXPECT_NEAR(frechet_distance(v(0), m(1), v(1), m(1)), 1.0, 1e-9);
  // (mu1 - mu2)^2 + (sigma1 - sigma2)^2
  EXPECT_NEAR(frechet_distance(v(2), m(4), v(-1), m(0.25)), 9.0 + 2.25, 1e-9);
}

TEST(Frechet, MatchesSymmetricOracleAndIsSymmetric) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 2 + trial % 12;
    auto s1 = random_spd(rng, d), s2 = random_spd(rng, d);
    Eigen::VectorXd m1(d), m2(d);
    for (int i = 0; i < d; ++i) m1[i] = g(rng), m2[i] = g(rng);
    const double ab = frechet_distance(m1, s1, m2, s2);
    EXPECT_NEAR(ab, fid_oracle(m1, s1, m2, s2), 1e-8);
    EXPECT_NEAR(ab, frechet_distance(m2, s2, m1, s1), 1e-9);
    EXPECT_GE(ab, 0.0);
  }
}

TEST(Frechet, RejectsBadInput) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd bad = s;
  bad(0, 0) = std::nan("");
  EXPECT_THROW(frechet_distance(m, bad, m, s), InvalidInput);
  EXPECT_THROW(frechet_distance(m, s, Eigen::VectorXd::Zero(3), s), InvalidInput);
}

TEST(GaussianFit, RegularizesRankDeficientCovariance) {
  Eigen::MatrixXd x(3, 5);
  x << 1, 2, 3, 4, 5, 2, 2, 3, 1, 0, 0, 1, 0, 1, 0;
  auto g = fit_gaussian(x);
  EXPECT_TRUE(g.regularized);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.cov);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd full(100, 4);
  for (int i = 0; i < full.size(); ++i) full.data()[i] = n01(rng);
  EXPECT_FALSE(fit_gaussian(full).regularized);
}

TEST(ReferenceEmbedder, DeterministicAndConstantImageInOneBin) {
  ReferenceEmbedder e;
  EXPECT_EQ(e.dim(), 32);
  Image flat(20, 20, 0.5f);
  auto f = e.embed(flat);
  ASSERT_EQ(f.size(), 32u);
  double intensity_mass = 0;
  int occupied = 0;
  for (int k = 0; k < ReferenceEmbedder::kIntensityBins; ++k) {
    intensity_mass += f[k];
    occupied += f[k] > 0;
  }
  EXPECT_DOUBLE_EQ(intensity_mass, 1.0);
  EXPECT_EQ(occupied, 1);
  EXPECT_DOUBLE_EQ(f[ReferenceEmbedder::kIntensityBins], 1.0);  // zero gradient everywhere

  auto p = phantom::generate_phantom({.seed = 9, .density = 0.5});
  EXPECT_EQ(e.embed(p.image), e.embed(p.image));
}

TEST(Embeddings, CacheRoundTrip) {
  auto m = phantoms(DensityCategory::B, 6, 3);
  ReferenceEmbedder e;
  auto set = embed(m, e, {"PHANTOM", "B", true, "PH-CC"});
  const auto dir = std::filesystem::temp_directory_path() / "densesynth_emb_test";
  write_embeddings(set, dir / "b.emb");
  auto back = read_embeddings(dir / "b.emb");
  EXPECT_EQ(back.features, set.features);
  EXPECT_EQ(back.embedder, "reference-v1");
  EXPECT_EQ(back.source.model_key, "PH-CC");
  EXPECT_TRUE(back.source.synthetic);
  std::filesystem::remove_all(dir);
}

TEST(FidBounds, PhantomLowerBelowUpper) {
  ReferenceEmbedder e;
  auto a = embed(phantoms(DensityCategory::A, 100, 1), e, {"PHANTOM", "A"});
  auto d = embed(phantoms(DensityCategory::D, 100, 2), e, {"PHANTOM", "D"});
  auto fresh = embed(phantoms(DensityCategory::D, 100, 5), e, {"PHANTOM", "D", true, "fresh"});
  auto r = fid_bounds_protocol(a, d, {{"PHANTOM", "same", d}, {"PHANTOM", "fresh", fresh}, {"PHANTOM", "low", a}}, 7);
  EXPECT_LT(r.lower_bound, r.upper_bound);
  EXPECT_GE(r.lower_bound, 0.0);
  ASSERT_EQ(r.synthetic.size(), 3u);
  // The real set itself reproduces the lower bound exactly.
  EXPECT_DOUBLE_EQ(r.synthetic[0].value, r.lower_bound);
  EXPECT_TRUE(r.synthetic[0].within_bounds);
  // A fresh draw from the same distribution sits at the lower bound's order.
  EXPECT_LT(r.synthetic[1].value, 3.0 * r.lower_bound);
  EXPECT_LT(r.synthetic[1].value, 0.1 * r.upper_bound);
  // Untranslated low-density images land near the upper bound.
  EXPECT_GT(r.synthetic[2].value, 0.5 * r.upper_bound);

  auto again = fid_bounds_protocol(a, d, {{"PHANTOM", "fresh", fresh}}, 7);
  EXPECT_EQ(again.lower_bound, r.lower_bound);
  EXPECT_EQ(again.synthetic[0].value, r.synthetic[1].value);
  auto other = fid_bounds_protocol(a, d, {}, 8, 3);
  EXPECT_NE(other.lower_bound, r.lower_bound);
}

TEST(FidBounds, DegenerateWhenLowEqualsHigh) {
  ReferenceEmbedder e;
  auto d = embed(phantoms(DensityCategory::D, 40, 2), e);
  auto r = fid_bounds_protocol(d, d, {}, 1);
  EXPECT_NEAR(r.upper_bound, 0.0, 1e-9);
  EXPECT_TRUE(r.degenerate());
  EXPECT_FALSE(r.warnings.empty());
}

TEST(FidBounds, CsvShape) {
  FidBoundsResult r;
  r.dataset = "OPTIMAM";
  r.view = "CC";
  r.lower_bound = 34.17;
  r.upper_bound = 107.99;
  r.synthetic.push_back({"OPTIMAM Hologic", "OP-CC", 73.16, true});
  EXPECT_EQ(emit_fid_csv({r}),
            "dataset,view,lower_bound,source,model,fid,upper_bound,within_bounds\n"
            "OPTIMAM,CC,34.17,OPTIMAM Hologic,OP-CC,73.16,107.99,true\n");
}
