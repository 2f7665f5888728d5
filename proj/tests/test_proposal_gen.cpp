#include <random>

#include <gtest/gtest.h>

#include "bindet/mock_backends.hpp"
#include "bindet/proposal_gen.hpp"
#include "oracles.hpp"

namespace bindet {
namespace {

MaskProposal make(int w, int h, int x, int y, int bw, int bh, double conf) {
  MaskProposal p;
  p.mask = BinaryMask(w, h);
  p.mask.fill_rect(x, y, bw, bh);
  p.confidence = conf;
  p.bbox = mask_to_bbox(p.mask);
  return p;
}

TEST(GridPoints, CellCenters) {
  const auto pts = sample_grid_points(100, 50, 2);
  ASSERT_EQ(pts.size(), 4U);
  EXPECT_EQ(pts[0], Eigen::Vector2d(25, 12.5));
  EXPECT_EQ(pts[1], Eigen::Vector2d(75, 12.5));
  EXPECT_EQ(pts[2], Eigen::Vector2d(25, 37.5));
  EXPECT_EQ(pts[3], Eigen::Vector2d(75, 37.5));
  EXPECT_EQ(sample_grid_points(640, 480, 32).size(), 1024U);
  EXPECT_THROW((void)sample_grid_points(0, 5, 3), Error);
}

TEST(ConfidenceFilter, InclusiveBoundary) {
  std::vector<MaskProposal> ps{make(4, 4, 0, 0, 1, 1, 0.87), make(4, 4, 0, 0, 1, 1, 0.88),
                               make(4, 4, 0, 0, 1, 1, 0.89)};
  const auto kept = filter_by_confidence(ps, 0.88);
  ASSERT_EQ(kept.size(), 2U);
  EXPECT_EQ(kept[0].confidence, 0.88);
  EXPECT_EQ(kept[1].confidence, 0.89);
}

TEST(MaskNms, SuppressesOverlapAtThreshold) {
  // 10x10 vs 10x10 shifted by 2 columns: IoU 80/120.
  auto a = make(20, 20, 0, 0, 10, 10, 0.9);
  auto b = make(20, 20, 2, 0, 10, 10, 0.95);
  const auto kept = mask_nms({a, b}, 0.6);
  ASSERT_EQ(kept.size(), 1U);
  EXPECT_EQ(kept[0].confidence, 0.95);
  EXPECT_EQ(mask_nms({a, b}, 0.7).size(), 2U);
  // Exactly at the threshold the lower one is suppressed.
  auto c = make(20, 20, 0, 0, 10, 10, 0.9);
  auto d = make(20, 20, 0, 0, 10, 5, 0.8);  // IoU 0.5
  EXPECT_EQ(mask_nms({c, d}, 0.5).size(), 1U);
}

TEST(MaskNms, ConfidenceTieKeepsLargerArea) {
  auto small = make(20, 20, 0, 0, 6, 6, 0.9);
  auto large = make(20, 20, 0, 0, 7, 7, 0.9);
  const auto kept = mask_nms({small, large}, 0.5);
  ASSERT_EQ(kept.size(), 1U);
  EXPECT_EQ(kept[0].mask.count(), 49U);
}

TEST(MaskNms, FullTieKeepsEarlierInput) {
  auto a = make(20, 20, 0, 0, 5, 5, 0.9);
  auto b = make(20, 20, 1, 0, 5, 5, 0.9);
  const auto kept = mask_nms({b, a}, 0.5);
  ASSERT_EQ(kept.size(), 1U);
  EXPECT_EQ(kept[0].bbox.x, 1);
}

TEST(MaskNms, EmptyInput) { EXPECT_TRUE(mask_nms({}, 0.7).empty()); }

TEST(MaskNms, MatchesOracleOnRandomSets) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> count(1, 15);
  std::uniform_int_distribution<int> conf(80, 100);
  std::uniform_real_distribution<double> thr(0.3, 0.9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<MaskProposal> ps;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      MaskProposal p;
      p.mask = testing::random_rect_mask(rng, 24, 18);
      p.confidence = conf(rng) / 100.0;
      p.bbox = mask_to_bbox(p.mask);
      ps.push_back(std::move(p));
    }
    const double t = thr(rng);
    const auto got = mask_nms(ps, t);
    const auto want = testing::oracle_nms(ps, t);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].mask, want[i].mask);
      EXPECT_EQ(got[i].confidence, want[i].confidence);
    }
    // Survivors are pairwise below the threshold.
    for (std::size_t i = 0; i < got.size(); ++i) {
      for (std::size_t j = i + 1; j < got.size(); ++j) {
        EXPECT_LT(mask_iou(got[i].mask, got[j].mask), t);
      }
    }
  }
}

TEST(Propose, FindsPlantedBlobsOnce) {
  RgbImage img(64, 48);
  const std::vector<std::array<int, 4>> blobs{{4, 4, 12, 10}, {30, 8, 20, 20}, {10, 30, 8, 8}};
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    const auto [x0, y0, w, h] = blobs[i];
    for (int y = y0; y < y0 + h; ++y) {
      for (int x = x0; x < x0 + w; ++x) {
        set_rgb(img, x, y, {static_cast<std::uint8_t>(50 + 60 * i), 10, 10});
      }
    }
  }
  set_rgb(img, 60, 40, {255, 255, 255});  // a single-pixel speck falls under min area
  const mock::FloodFillSegmenter seg;
  ProposalConfig cfg;
  cfg.points_per_side = 16;
  const auto ps = propose(img, cfg, seg);
  ASSERT_EQ(ps.size(), blobs.size());
  std::vector<BoundingBox> got;
  for (const auto& p : ps) {
    got.push_back(p.bbox);
  }
  for (const auto& [x0, y0, w, h] : blobs) {
    const BoundingBox want{static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(w),
                           static_cast<double>(h)};
    EXPECT_NE(std::find(got.begin(), got.end(), want), got.end());
  }
  // Larger blobs come first at equal confidence.
  EXPECT_EQ(ps[0].bbox.w, 20);
}

TEST(GenerateProposals, AreaFilterBoundary) {
  RgbImage img(20, 20);
  for (int x = 0; x < 5; ++x) {
    for (int y = 0; y < 5; ++y) {
      set_rgb(img, x, y, {9, 9, 9});  // exactly 25 px
    }
  }
  const mock::FloodFillSegmenter seg;
  ProposalConfig cfg;
  cfg.points_per_side = 8;
  cfg.min_mask_area = 25;
  EXPECT_FALSE(generate_proposals(img, cfg, seg).empty());
  cfg.min_mask_area = 26;
  EXPECT_TRUE(generate_proposals(img, cfg, seg).empty());
}

TEST(GenerateProposals, ResultCountMismatchIsContractViolation) {
  class Short final : public Segmenter {
   public:
    Short() : Segmenter({BackendKind::kSegmenter, Implementation::kMock, {}, "short", 1}) {}

   protected:
    std::vector<SegmentResult> do_run(const RgbImage&, std::span<const Eigen::Vector2d>) const override {
      return {};
    }
  };
  const Short seg;
  try {
    (void)generate_proposals(RgbImage(8, 8), ProposalConfig{}, seg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kContractViolation);
    EXPECT_EQ(e.stage(), "segmenter");
  }
}

}  // namespace
}  // namespace bindet
