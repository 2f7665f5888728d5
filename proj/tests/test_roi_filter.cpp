#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "bindet/mock_backends.hpp"
#include "bindet/roi_filter.hpp"

namespace bindet {
namespace {

const CameraIntrinsics kK{500, 510, 320, 240};

TEST(DetectRoi, ClipsAndDropsLowConfidence) {
  const mock::ScriptedRoiDetector det({
      {{-10, -5, 50, 40}, 0.9},   // clipped to (0,0,40,35)
      {{100, 100, 20, 20}, 0.8},  // entirely outside a 64x48 image
      {{5, 5, 10, 10}, 0.2},      // below 0.25
      {{5, 5, 10, 10}, 0.25},     // boundary is kept
  });
  const auto boxes = detect_roi(RgbImage(64, 48), RoiConfig{}, det);
  ASSERT_EQ(boxes.size(), 2U);
  EXPECT_EQ(boxes[0].box, (BoundingBox{0, 0, 40, 35}));
  EXPECT_EQ(boxes[1].confidence, 0.25);
}

TEST(SelectRoi, HighestConfidenceWins) {
  const auto roi = select_roi({{{0, 0, 30, 30}, 0.5}, {{10, 10, 5, 5}, 0.9}}, {}, 100, 100, kK);
  EXPECT_EQ(roi.box, (BoundingBox{10, 10, 5, 5}));
}

TEST(SelectRoi, TiesGoToLargerAreaThenTopLeft) {
  const auto by_area =
      select_roi({{{0, 0, 10, 10}, 0.7}, {{20, 20, 30, 30}, 0.7}}, {}, 100, 100, kK);
  EXPECT_EQ(by_area.box, (BoundingBox{20, 20, 30, 30}));
  const auto by_x = select_roi({{{40, 0, 10, 10}, 0.7}, {{30, 50, 10, 10}, 0.7}}, {}, 100, 100, kK);
  EXPECT_EQ(by_x.box.x, 30);
  const auto by_y = select_roi({{{30, 40, 10, 10}, 0.7}, {{30, 20, 10, 10}, 0.7}}, {}, 100, 100, kK);
  EXPECT_EQ(by_y.box.y, 20);
}

TEST(SelectRoi, SnapsOutwardToWholePixels) {
  const auto roi = select_roi({{{10.4, 5.6, 20.2, 10.1}, 0.9}}, {}, 100, 100, kK);
  EXPECT_EQ(roi.box, (BoundingBox{10, 5, 21, 11}));
  EXPECT_TRUE(satisfies_shift_invariant(roi));
  EXPECT_EQ(roi.adjusted, (CameraIntrinsics{500, 510, 310, 235}));
}

TEST(SelectRoi, EmptyListFallsBackToFullImage) {
  const auto roi = select_roi({}, {}, 64, 48, kK);
  EXPECT_EQ(roi.box, (BoundingBox{0, 0, 64, 48}));
  EXPECT_EQ(roi.adjusted, kK);
  EXPECT_EQ(roi, full_image_crop(64, 48, kK));
}

TEST(SelectRoi, EmptyListWithErrorFallbackThrows) {
  RoiConfig cfg;
  cfg.fallback = RoiFallback::kError;
  try {
    (void)select_roi({}, cfg, 64, 48, kK);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoRoi);
  }
}

TEST(SelectRoi, OrderOfCandidatesDoesNotMatter) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(0, 80);
  std::uniform_real_distribution<double> size(1, 40);
  std::uniform_int_distribution<int> conf(1, 4);  // coarse so ties happen
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ScoredBox> c;
    for (int i = 0; i < 6; ++i) {
      c.push_back({{std::round(pos(rng)), std::round(pos(rng)), std::round(size(rng)), std::round(size(rng))},
                   conf(rng) / 4.0});
    }
    const auto ref = select_roi(c, {}, 100, 100, kK);
    std::shuffle(c.begin(), c.end(), rng);
    EXPECT_EQ(select_roi(c, {}, 100, 100, kK), ref);
  }
}

TEST(ApplyCrop, CoRegistersRgbDepthAndIntrinsics) {
  SceneFrame f;
  f.rgb = RgbImage(20, 10);
  f.depth = DepthMap(20, 10);
  f.intrinsics = kK;
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 20; ++x) {
      set_rgb(f.rgb, x, y, {static_cast<std::uint8_t>(x), static_cast<std::uint8_t>(y), 0});
      f.depth->at(x, y) = static_cast<float>(100 * x + y);
    }
  }
  const RoiCrop roi = make_roi_crop({4, 2, 8, 5}, kK);
  const SceneFrame c = apply_crop(f, roi);
  ASSERT_EQ(c.rgb.width(), 8);
  ASSERT_EQ(c.rgb.height(), 5);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 8; ++x) {
      EXPECT_EQ(rgb_at(c.rgb, x, y), rgb_at(f.rgb, x + 4, y + 2));
      EXPECT_EQ(c.depth->at(x, y), f.depth->at(x + 4, y + 2));
    }
  }
  EXPECT_EQ(c.intrinsics, (CameraIntrinsics{500, 510, 316, 238}));
  // A pixel keeps its ray: back-projection through either camera agrees.
  const double u = 7;
  const double v = 3;
  EXPECT_DOUBLE_EQ((u - c.intrinsics.cx) / c.intrinsics.fx, (u + 4 - kK.cx) / kK.fx);
  EXPECT_DOUBLE_EQ((v - c.intrinsics.cy) / c.intrinsics.fy, (v + 2 - kK.cy) / kK.fy);
}

TEST(ApplyCrop, RejectsFractionalBox) {
  SceneFrame f;
  f.rgb = RgbImage(20, 10);
  f.intrinsics = kK;
  EXPECT_THROW((void)apply_crop(f, make_roi_crop({0.5, 0, 4, 4}, kK)), Error);
}

TEST(RoiConfig, Validation) {
  RoiConfig cfg;
  cfg.prompt.clear();
  EXPECT_THROW(validate(cfg), Error);
  cfg = {};
  cfg.min_confidence = 1.5;
  EXPECT_THROW(validate(cfg), Error);
  EXPECT_EQ(RoiConfig{}.prompt, "Parts frame where multiple parts inside it");
}

}  // namespace
}  // namespace bindet
