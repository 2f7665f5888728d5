#pragma once

#include <random>
#include <vector>

#include "bindet/evaluation.hpp"
#include "bindet/proposal_gen.hpp"
#include "bindet/template_match.hpp"

namespace bindet::testing {

// Reference implementations written from the definitions, sharing no code
// with the library beyond its data types.

/// Pixel-count IoU; 0 for two empty masks.
double oracle_mask_iou(const BinaryMask& a, const BinaryMask& b);

/// O(n^2) greedy suppression over an explicit ranking.
std::vector<MaskProposal> oracle_nms(const std::vector<MaskProposal>& proposals, double nms_iou);

/// Per det (rows already in score order): unmatched gt with the highest IoU
/// >= t, lowest index on ties.
std::vector<int> oracle_match(const std::vector<std::vector<double>>& iou, double t);

/// COCO AP from the definition: interpolated precision at recall r is the
/// maximum precision over ranks whose recall is >= r. Returns per-object AP
/// and their mean.
struct OracleAp {
  std::map<int, double> per_object;
  double mean = 0.0;
};
OracleAp oracle_average_precision(const std::vector<DetectionRecord>& dets, const GroundTruthSet& gts,
                                  const EvalConfig& cfg);

double oracle_cosine_clamped(const Embedding& a, const Embedding& b);
/// Max over templates of the clamped cosine, first index on ties.
std::pair<double, int> oracle_semantic(const Embedding& proposal, const TemplateBank& bank);
double oracle_appearance(const std::vector<Embedding>& proposal_patches, const Template& tmpl);

// ---- random instance helpers ----------------------------------------------

BinaryMask random_rect_mask(std::mt19937_64& rng, int width, int height);
BinaryMask random_blob_mask(std::mt19937_64& rng, int width, int height, double density);
Embedding random_embedding(std::mt19937_64& rng, int dim, bool nonnegative);
TemplateBank random_bank(std::mt19937_64& rng, int object_id, int views, int dim, int grid);

}  // namespace bindet::testing
