#include <random>

#include <gtest/gtest.h>

#include "densesynth/core/geometry.hpp"
#include "densesynth/phantom/phantom.hpp"

using namespace densesynth;

TEST(CropToBreast, UniformZeroImageFails) {
  Image blank(40, 30, 0.0f);
  EXPECT_THROW(crop_to_breast(blank), InvalidInput);
}

TEST(CropToBreast, FullFrameForegroundIsIdentity) {
  Image full(40, 30, 0.5f);
  full.at(3, 4) = 0.9f;
  auto res = crop_to_breast(full);
  EXPECT_EQ(res.region, (Rect{0, 0, 30, 40}));
  EXPECT_EQ(res.image, full);
  EXPECT_EQ(res.transform.crop_x, 0);
  EXPECT_EQ(res.transform.crop_y, 0);
}

TEST(CropToBreast, KeepsLargestComponent) {
  Image img(50, 50, 0.0f);
  for (int r = 10; r < 30; ++r)
    for (int c = 5; c < 25; ++c) img.at(r, c) = 0.4f;
  img.at(45, 45) = 1.0f;  // small bright speck, separate component
  auto res = crop_to_breast(img);
  EXPECT_EQ(res.region, (Rect{5, 10, 20, 20}));
}

TEST(CropToBreast, PhantomMaskBoundingRect) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    phantom::PhantomSpec spec;
    spec.seed = seed;
    spec.view = seed % 2 ? View::MLO : View::CC;
    spec.laterality = seed % 3 ? Laterality::L : Laterality::R;
    spec.density = (seed % 5) / 4.0;
    auto ph = phantom::render_phantom(spec);
    EXPECT_EQ(crop_to_breast(ph.record.image).region, ph.geometry.bounding_rect()) << seed;
  }
}

TEST(ResizeKeepAspect, IdentityAtTarget) {
  Image img(1332, 800, 0.25f);
  std::vector<MassBox> boxes{{10, 20, 30, 40}};
  auto res = resize_keep_aspect(img, boxes);
  EXPECT_DOUBLE_EQ(res.transform.scale, 1.0);
  EXPECT_EQ(res.image, img);
  EXPECT_EQ(res.boxes[0], boxes[0]);
}

TEST(ResizeKeepAspect, ExactHalf) {
  Image img(2664, 1600, 0.5f);
  auto res = resize_keep_aspect(img, {});
  EXPECT_DOUBLE_EQ(res.transform.scale, 0.5);
  EXPECT_EQ(res.content_height, 1332);
  EXPECT_EQ(res.content_width, 800);
  EXPECT_NEAR(res.image.at(1331, 799), 0.5f, 1e-6);  // no padding
}

TEST(ResizeKeepAspect, FullFieldDetectorFrame) {
  // 3328 wide x 4084 high: ratios 1332/4084 = 0.32615 and 800/3328 = 0.24038.
  const double expected_scale = std::min(1332.0 / 4084.0, 800.0 / 3328.0);
  EXPECT_NEAR(expected_scale, 0.24038, 1e-5);
  Image img(4084, 3328, 0.6f);
  std::vector<MassBox> boxes{{1000, 2000, 200, 150}};
  auto res = resize_keep_aspect(img, boxes);
  EXPECT_DOUBLE_EQ(res.transform.scale, expected_scale);
  EXPECT_EQ(res.image.height, 1332);
  EXPECT_EQ(res.image.width, 800);
  EXPECT_EQ(res.content_width, 800);
  EXPECT_EQ(res.content_height, 982);  // round(4084 * 0.240385)
  // Width binds, so the zero padding lands below the content.
  EXPECT_FLOAT_EQ(res.image.at(1331, 400), 0.0f);
  EXPECT_NEAR(res.image.at(900, 799), 0.6f, 1e-5);
  const MassBox back = res.transform.invert(res.boxes[0]);
  EXPECT_NEAR(back.x, 1000, 1e-9);
  EXPECT_NEAR(back.y, 2000, 1e-9);
  EXPECT_NEAR(back.w, 200, 1e-9);
  EXPECT_NEAR(back.h, 150, 1e-9);
}

TEST(ResizeKeepAspect, RejectsBadInput) {
  EXPECT_THROW(resize_keep_aspect(Image{}, {}), InvalidInput);
  EXPECT_THROW(resize_keep_aspect(Image(10, 10, 1.0f), {}, 0, 5), InvalidInput);
}

TEST(Geometry, CropResizeRoundTripOnPhantoms) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    phantom::CorpusConfig cfg;
    cfg.seed = rng();
    cfg.height = 96 + static_cast<int>(rng() % 160);
    cfg.width = 64 + static_cast<int>(rng() % 100);
    cfg.counts[i % 4].with_masses = 1;
    auto corpus = phantom::generate_corpus(cfg);
    const auto& rec = corpus.records.at(0);
    auto crop = crop_to_breast(rec.image);
    const int th = i % 2 ? 256 : kTargetHeight, tw = i % 2 ? 160 : kTargetWidth;
    auto res = resize_keep_aspect(crop.image, rec.annotations, th, tw, &crop.transform);
    ASSERT_EQ(res.image.height, th);
    ASSERT_EQ(res.image.width, tw);
    const double aspect_in = static_cast<double>(crop.image.width) / crop.image.height;
    EXPECT_NEAR(res.content_width, res.content_height * aspect_in, 1.0);
    for (std::size_t k = 0; k < rec.annotations.size(); ++k) {
      const MassBox back = res.transform.invert(res.boxes[k]);
      const MassBox& orig = rec.annotations[k];
      EXPECT_LE(std::abs(back.x - orig.x), 1.0);
      EXPECT_LE(std::abs(back.y - orig.y), 1.0);
      EXPECT_LE(std::abs(back.right() - orig.right()), 1.0);
      EXPECT_LE(std::abs(back.bottom() - orig.bottom()), 1.0);
    }
  }
}

TEST(Resample, PreservesConstantField) {
  Image img(37, 23, 0.3f);
  auto out = resample(img, 11, 50);
  for (float v : out.pixels) EXPECT_NEAR(v, 0.3f, 1e-6);
}
