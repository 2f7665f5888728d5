#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bindet/backends.hpp"
#include "bindet/dataset_io.hpp"
#include "bindet/proposal_gen.hpp"

namespace bindet {

struct Template {
  int object_id = 0;
  int view_index = 0;
  Embedding global_embedding;  // unit norm
  std::vector<Embedding> patch_embeddings;  // grid_h * grid_w, row-major
  int grid_h = 0;
  int grid_w = 0;
  BoundingBox silhouette_bbox;  // render canvas coordinates
  double render_distance_mm = 0.0;
  CameraIntrinsics render_intrinsics;

  friend bool operator==(const Template&, const Template&) = default;
};

struct TemplateBank {
  int object_id = 0;
  int embedding_dim = 0;
  std::vector<Template> templates;  // ordered by view_index

  friend bool operator==(const TemplateBank&, const TemplateBank&) = default;
};

/// Throws kValidation when a bank breaks its invariants (empty, mixed ids or
/// dims, non-unit global embeddings, wrong patch counts).
void validate(const TemplateBank& bank);

struct TemplateRenderConfig {
  int width = 128;
  int height = 128;
  CameraIntrinsics intrinsics{160.0, 160.0, 64.0, 64.0};
  /// Camera distance; when unset the object diameter fills ~60% of the canvas.
  std::optional<double> distance_mm;
};

struct MatchConfig {
  double w_sem = 1.0 / 3.0;
  double w_appe = 1.0 / 3.0;
  double w_geo = 1.0 / 3.0;
  double accept_threshold = 0.4;
  int view_count = 42;
  /// Appearance and geometry are scored against this many top semantic views.
  int appearance_top_k = 1;
  /// Minimum fraction of a patch cell covered by the proposal mask for the
  /// patch to count as part of the proposal.
  double patch_coverage = 0.5;
  TemplateRenderConfig render;
};

void validate(const MatchConfig& cfg);

struct MatchScore {
  double s_sem = 0.0;
  double s_appe = 0.0;
  double s_geo = 0.0;
  double aggregate = 0.0;
  int best_template = 0;
};

/// Labeled proposal in original-frame coordinates.
struct Detection {
  int object_id = 0;
  double score = 0.0;
  BinaryMask mask;
  BoundingBox bbox;
  MatchScore match;
};

/// View directions at the vertices of a subdivided icosahedron (12, 42, 162).
std::vector<Eigen::Vector3d> icosphere_directions(int view_count);

/// Object-to-camera rotations for cameras on the icosphere looking at the
/// origin. Throws kConfig for unsupported counts.
std::vector<Eigen::Matrix3d> sample_viewpoints(int view_count);

/// max(0, cos(a, b)); 0 when either vector is zero.
double clamped_cosine(std::span<const float> a, std::span<const float> b);

/// Scales to unit L2 norm; throws kContractViolation on a zero vector.
Embedding l2_normalized(Embedding v);

TemplateBank build_template_bank(int object_id, std::span<const Eigen::Vector3d> cad_vertices,
                                 const MatchConfig& cfg, const Renderer& renderer,
                                 const FeatureExtractor& features);

struct SemanticMatch {
  double score = 0.0;
  int best_template = 0;
};

/// Best clamped cosine between the proposal's global embedding and any
/// template; ties go to the lowest view index.
SemanticMatch semantic_score(std::span<const float> proposal_embedding, const TemplateBank& bank);

/// Mean over proposal patches of the best clamped cosine against the
/// template's patches; 0 for no proposal patches.
double appearance_score(std::span<const Embedding> proposal_patches, const Template& tmpl);

/// IoU between the proposal box and the template silhouette box rescaled by
/// (render_distance / depth) * (fx_crop / fx_render) and centered on the
/// proposal. Without depth the score is the neutral 0.5.
double geometric_score(const BoundingBox& proposal_bbox, const Template& tmpl,
                       std::optional<double> mean_depth_mm, const CameraIntrinsics& crop_intrinsics);

double aggregate_score(double s_sem, double s_appe, double s_geo, const MatchConfig& cfg);

/// Proposal-side descriptor: normalized global embedding plus the patches
/// whose cells are covered by the mask.
struct ProposalFeatures {
  Embedding global;
  std::vector<Embedding> patches;
};

ProposalFeatures describe_proposal(const RgbImage& image, const MaskProposal& proposal,
                                   const MatchConfig& cfg, const FeatureExtractor& features);

/// Mean of valid (> 0) depth under the mask, if any.
std::optional<double> mean_depth_under(const std::optional<DepthMap>& depth, const BinaryMask& mask);

MatchScore score_against_bank(const ProposalFeatures& features, const BoundingBox& proposal_bbox,
                              std::optional<double> mean_depth_mm,
                              const CameraIntrinsics& crop_intrinsics, const TemplateBank& bank,
                              const MatchConfig& cfg);

/// Labels every proposal with the bank of highest aggregate score (ties to
/// the lower object id), drops those under accept_threshold and maps the
/// survivors back into the original frame through `roi`.
std::vector<Detection> assign_labels(const std::vector<MaskProposal>& proposals,
                                     const std::vector<TemplateBank>& banks,
                                     const SceneFrame& cropped, const RoiCrop& roi,
                                     int original_width, int original_height,
                                     const MatchConfig& cfg, const FeatureExtractor& features);

// ---- template cache --------------------------------------------------------

struct TemplateCacheKey {
  int object_id = 0;
  int view_count = 0;
  std::string feature_tag;

  friend bool operator==(const TemplateCacheKey&, const TemplateCacheKey&) = default;
};

std::filesystem::path template_cache_path(const std::filesystem::path& cache_dir,
                                          const TemplateCacheKey& key);
void save_template_bank(const TemplateBank& bank, const TemplateCacheKey& key,
                        const std::filesystem::path& path);
/// nullopt when the file is missing, has another format version, or was
/// written under a different key.
std::optional<TemplateBank> load_template_bank(const std::filesystem::path& path,
                                               const TemplateCacheKey& key);

// ---- CAD input -------------------------------------------------------------

/// Vertex positions from an ASCII or binary little-endian PLY file.
std::vector<Eigen::Vector3d> read_ply_vertices(const std::filesystem::path& path);
void write_ply_vertices(const std::filesystem::path& path, std::span<const Eigen::Vector3d> vertices);

}  // namespace bindet
