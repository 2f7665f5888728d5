#pragma once

#include <vector>

#include <Eigen/Core>

#include "bindet/backends.hpp"
#include "bindet/geometry.hpp"

namespace bindet {

struct MaskProposal {
  BinaryMask mask;  // crop coordinates
  double confidence = 0.0;
  BoundingBox bbox;  // tight box of mask
  Eigen::Vector2d source_point = Eigen::Vector2d::Zero();
};

struct ProposalConfig {
  int points_per_side = 32;
  double min_confidence = 0.88;
  double nms_iou = 0.7;
  int min_mask_area = 25;
};

void validate(const ProposalConfig& cfg);

/// Centers of an n x n grid: ((i+0.5)*w/n, (j+0.5)*h/n), row by row.
std::vector<Eigen::Vector2d> sample_grid_points(int width, int height, int points_per_side);

/// Prompts the segmenter with the grid and keeps nonempty masks with at least
/// min_mask_area pixels. Confidence filtering and NMS are separate steps.
std::vector<MaskProposal> generate_proposals(const RgbImage& image, const ProposalConfig& cfg,
                                             const Segmenter& segmenter);

/// Keeps confidence >= min_confidence, preserving order.
std::vector<MaskProposal> filter_by_confidence(std::vector<MaskProposal> proposals,
                                               double min_confidence);

/// Greedy mask NMS. Order: confidence desc, then area desc, then input
/// position. A proposal survives iff its IoU with every kept one is < nms_iou.
std::vector<MaskProposal> mask_nms(std::vector<MaskProposal> proposals, double nms_iou);

/// generate -> confidence filter -> NMS.
std::vector<MaskProposal> propose(const RgbImage& image, const ProposalConfig& cfg,
                                  const Segmenter& segmenter);

}  // namespace bindet
