#include "bindet/proposal_gen.hpp"

#include <algorithm>
#include <numeric>

namespace bindet {

void validate(const ProposalConfig& cfg) {
  if (cfg.points_per_side < 1) {
    throw Error(ErrorCode::kConfig, "proposals.points_per_side must be >= 1");
  }
  if (!(cfg.min_confidence >= 0.0 && cfg.min_confidence <= 1.0) ||
      !(cfg.nms_iou >= 0.0 && cfg.nms_iou <= 1.0)) {
    throw Error(ErrorCode::kConfig, "proposal thresholds must be in [0,1]");
  }
  if (cfg.min_mask_area < 0) {
    throw Error(ErrorCode::kConfig, "proposals.min_mask_area must be >= 0");
  }
}

std::vector<Eigen::Vector2d> sample_grid_points(int width, int height, int points_per_side) {
  if (width < 1 || height < 1 || points_per_side < 1) {
    throw Error(ErrorCode::kInvalidArgument, "grid sampling needs positive sizes");
  }
  const double n = points_per_side;
  std::vector<Eigen::Vector2d> out;
  out.reserve(static_cast<std::size_t>(points_per_side) * points_per_side);
  for (int j = 0; j < points_per_side; ++j) {
    for (int i = 0; i < points_per_side; ++i) {
      out.emplace_back((i + 0.5) * width / n, (j + 0.5) * height / n);
    }
  }
  return out;
}

std::vector<MaskProposal> generate_proposals(const RgbImage& image, const ProposalConfig& cfg,
                                             const Segmenter& segmenter) {
  const auto points = sample_grid_points(image.width(), image.height(), cfg.points_per_side);
  std::vector<SegmentResult> results;
  try {
    results = segmenter.run(image, points);
  } catch (const Error& e) {
    throw Error(e.code(), "segmentation failed: " + e.detail(), e.stage()).with_attempts(e.attempts());
  }
  if (results.size() != points.size()) {
    throw Error(ErrorCode::kContractViolation,
                "segmenter returned " + std::to_string(results.size()) + " results for " +
                    std::to_string(points.size()) + " points",
                "segmenter");
  }
  std::vector<MaskProposal> out;
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto& r = results[i];
    if (r.mask.width() != image.width() || r.mask.height() != image.height()) {
      throw Error(ErrorCode::kContractViolation, "segmenter mask size differs from image",
                  "segmenter");
    }
    if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) {
      throw Error(ErrorCode::kContractViolation, "segmenter confidence outside [0,1]", "segmenter");
    }
    const auto area = r.mask.count();
    if (area == 0 || area < static_cast<std::size_t>(cfg.min_mask_area)) {
      continue;
    }
    MaskProposal p;
    p.bbox = mask_to_bbox(r.mask);
    p.mask = std::move(r.mask);
    p.confidence = r.confidence;
    p.source_point = points[i];
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<MaskProposal> filter_by_confidence(std::vector<MaskProposal> proposals,
                                               double min_confidence) {
  std::erase_if(proposals, [&](const MaskProposal& p) { return p.confidence < min_confidence; });
  return proposals;
}

namespace {

// Same value as mask_iou, but only the overlap of the two tight boxes is
// scanned; outside it the intersection is empty and the union is the areas.
double bounded_mask_iou(const MaskProposal& a, std::size_t area_a, const MaskProposal& b, std::size_t area_b) {
  if (area_a == area_b && a.bbox == b.bbox && area_a > 0 &&
      std::equal(a.mask.bits().begin(), a.mask.bits().end(), b.mask.bits().begin())) {
    return 1.0;  // duplicate prompts into the same segment are common
  }
  const int x0 = static_cast<int>(std::max(a.bbox.x, b.bbox.x));
  const int y0 = static_cast<int>(std::max(a.bbox.y, b.bbox.y));
  const int x1 = static_cast<int>(std::min(a.bbox.right(), b.bbox.right()));
  const int y1 = static_cast<int>(std::min(a.bbox.bottom(), b.bbox.bottom()));
  std::size_t inter = 0;
  const auto ba = a.mask.bits();
  const auto bb = b.mask.bits();
  const auto width = static_cast<std::size_t>(a.mask.width());
  for (int y = y0; y < y1; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * width;
    std::uint32_t partial = 0;
    for (std::size_t i = row + x0; i < row + x1; ++i) {
      partial += ba[i] & bb[i];
    }
    inter += partial;
  }
  const std::size_t uni = area_a + area_b - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

std::vector<MaskProposal> mask_nms(std::vector<MaskProposal> proposals, double nms_iou) {
  std::vector<std::size_t> areas(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    if (proposals[i].mask.width() != proposals[0].mask.width() ||
        proposals[i].mask.height() != proposals[0].mask.height()) {
      throw Error(ErrorCode::kDimensionMismatch, "NMS over masks of different sizes");
    }
    areas[i] = proposals[i].mask.count();
  }
  std::vector<std::size_t> order(proposals.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (proposals[a].confidence != proposals[b].confidence) {
      return proposals[a].confidence > proposals[b].confidence;
    }
    return areas[a] > areas[b];
  });

  // The bounded IoU relies on tight boxes, so recompute them rather than trust the caller.
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    proposals[i].bbox = areas[i] == 0 ? BoundingBox{} : mask_to_bbox(proposals[i].mask);
  }

  std::vector<std::size_t> kept;
  for (const auto idx : order) {
    bool keep = true;
    for (const auto k : kept) {
      if (bounded_mask_iou(proposals[idx], areas[idx], proposals[k], areas[k]) >= nms_iou) {
        keep = false;
        break;
      }
    }
    if (keep) {
      kept.push_back(idx);
    }
  }
  std::vector<MaskProposal> out;
  out.reserve(kept.size());
  for (const auto k : kept) {
    out.push_back(std::move(proposals[k]));
  }
  return out;
}

std::vector<MaskProposal> propose(const RgbImage& image, const ProposalConfig& cfg,
                                  const Segmenter& segmenter) {
  return mask_nms(filter_by_confidence(generate_proposals(image, cfg, segmenter), cfg.min_confidence),
                  cfg.nms_iou);
}

}  // namespace bindet
