#include <random>

#include <gtest/gtest.h>

#include "bindet/mock_backends.hpp"
#include "bindet/preprocess.hpp"
#include "planted.hpp"

namespace bindet {
namespace {

class ShrinkingEnhancer final : public Enhancer {
 public:
  ShrinkingEnhancer() : Enhancer({BackendKind::kEnhancer, Implementation::kMock, {}, "shrink", 1}) {}

 protected:
  RgbImage do_run(const RgbImage& image) const override {
    return RgbImage(image.width() - 1, image.height());
  }
};

TEST(MeanIntensity, Examples) {
  EXPECT_DOUBLE_EQ(mean_intensity(RgbImage(3, 2, 0)), 0.0);
  EXPECT_DOUBLE_EQ(mean_intensity(RgbImage(3, 2, 255)), 255.0);
  RgbImage two(2, 1);
  set_rgb(two, 0, 0, {90, 30, 0});   // luma 40
  set_rgb(two, 1, 0, {60, 60, 60});  // luma 60
  EXPECT_DOUBLE_EQ(mean_intensity(two), 50.0);
  EXPECT_THROW((void)mean_intensity(RgbImage()), Error);
}

TEST(BrightnessGate, StrictlyBelowThreshold) {
  const PreprocessConfig cfg;
  EXPECT_TRUE(brightness_gate(49.999, cfg));
  EXPECT_FALSE(brightness_gate(50.0, cfg));
  EXPECT_FALSE(brightness_gate(50.001, cfg));
  EXPECT_TRUE(brightness_gate(RgbImage(4, 4, 49), cfg));
  EXPECT_FALSE(brightness_gate(RgbImage(4, 4, 50), cfg));
}

TEST(EnhanceIfDark, BrightImagePassesThroughUntouched) {
  const mock::GainEnhancer gain(2.0);
  const RgbImage img(5, 4, 120);
  const auto r = enhance_if_dark(img, {}, &gain);
  EXPECT_FALSE(r.gate_fired);
  EXPECT_EQ(r.image, img);
  EXPECT_DOUBLE_EQ(r.mean_intensity, 120.0);
}

TEST(EnhanceIfDark, GainDoublesAndSaturates) {
  const mock::GainEnhancer gain(2.0);
  RgbImage img(4, 4, 10);
  set_rgb(img, 0, 0, {200, 0, 0});
  const auto r = enhance_if_dark(img, {}, &gain);
  EXPECT_TRUE(r.gate_fired);
  EXPECT_EQ(rgb_at(r.image, 0, 0), (Rgb{255, 0, 0}));
  EXPECT_EQ(rgb_at(r.image, 1, 1), (Rgb{20, 20, 20}));
}

TEST(EnhanceIfDark, IdentityEnhancerKeepsPixels) {
  const mock::IdentityEnhancer id;
  const RgbImage img(4, 4, 3);
  const auto r = enhance_if_dark(img, {}, &id);
  EXPECT_TRUE(r.gate_fired);
  EXPECT_EQ(r.image, img);
}

TEST(EnhanceIfDark, DisabledNeverFires) {
  PreprocessConfig cfg;
  cfg.enhancement_enabled = false;
  const RgbImage img(4, 4, 0);
  const auto r = enhance_if_dark(img, cfg, nullptr);
  EXPECT_FALSE(r.gate_fired);
  EXPECT_EQ(r.image, img);
}

TEST(EnhanceIfDark, MissingEnhancerIsConfigError) {
  try {
    (void)enhance_if_dark(RgbImage(2, 2, 0), {}, nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
}

TEST(EnhanceIfDark, SizeChangeIsContractViolation) {
  const ShrinkingEnhancer shrink;
  try {
    (void)enhance_if_dark(RgbImage(6, 6, 0), {}, &shrink);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kContractViolation);
    EXPECT_EQ(e.stage(), "enhancer");
  }
}

TEST(Pseudocolor, WindowEndpointsAndOutside) {
  const PreprocessConfig cfg;  // 1500..2000
  DepthMap d(5, 1);
  d.at(0, 0) = 1500.0F;
  d.at(1, 0) = 2000.0F;
  d.at(2, 0) = 1400.0F;
  d.at(3, 0) = 0.0F;
  d.at(4, 0) = 1750.0F;
  const auto img = depth_to_pseudocolor(d, cfg);
  const auto& lut = plasma_lut();
  EXPECT_EQ(rgb_at(img, 0, 0), lut[0]);
  EXPECT_EQ(rgb_at(img, 1, 0), lut[255]);
  EXPECT_EQ(rgb_at(img, 2, 0), (Rgb{0, 0, 0}));
  EXPECT_EQ(rgb_at(img, 3, 0), (Rgb{0, 0, 0}));
  EXPECT_EQ(rgb_at(img, 4, 0), lut[128]);  // round(127.5)
}

TEST(Pseudocolor, PlasmaEndpoints) {
  EXPECT_EQ(plasma_lut()[0], (Rgb{13, 8, 135}));
  EXPECT_EQ(plasma_lut()[255], (Rgb{240, 249, 33}));
}

TEST(Pseudocolor, BakedTableMatchesAsset) {
  const auto path = std::filesystem::path(BINDET_ASSET_DIR) / "plasma.lut";
  EXPECT_EQ(load_lut(path), plasma_lut());
}

TEST(Pseudocolor, MonotoneIndexAlongDepth) {
  // Distinct LUT entries are hit in order as depth grows through the window.
  const PreprocessConfig cfg;
  DepthMap d(501, 1);
  for (int x = 0; x <= 500; ++x) {
    d.at(x, 0) = static_cast<float>(1500 + x);
  }
  const auto img = depth_to_pseudocolor(d, cfg);
  const auto& lut = plasma_lut();
  int prev = -1;
  for (int x = 0; x <= 500; ++x) {
    const Rgb c = rgb_at(img, x, 0);
    int idx = -1;
    for (int i = std::max(prev, 0); i < 256; ++i) {
      if (lut[static_cast<std::size_t>(i)] == c) {
        idx = i;
        break;
      }
    }
    ASSERT_GE(idx, prev) << "x=" << x;
    prev = idx;
  }
  EXPECT_EQ(prev, 255);
}

TEST(Preprocess, GateDecisionIsIdempotentOnEnhancedOutput) {
  // Once an image clears the gate, running the stage again is a no-op.
  const mock::GainEnhancer gain(2.0);
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> v(0, 60);
  for (int trial = 0; trial < 50; ++trial) {
    RgbImage img(8, 8);
    for (auto& p : img.data()) {
      p = static_cast<std::uint8_t>(v(rng));
    }
    const auto once = enhance_if_dark(img, {}, &gain);
    if (!brightness_gate(once.image, {})) {
      const auto twice = enhance_if_dark(once.image, {}, &gain);
      EXPECT_FALSE(twice.gate_fired);
      EXPECT_EQ(twice.image, once.image);
    }
  }
}

TEST(PreprocessConfig, Validation) {
  PreprocessConfig cfg;
  cfg.intensity_threshold = 300;
  EXPECT_THROW(validate(cfg), Error);
  cfg = {};
  cfg.depth_near_mm = 2000;
  EXPECT_THROW(validate(cfg), Error);
}

}  // namespace
}  // namespace bindet
