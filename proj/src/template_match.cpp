#include "bindet/template_match.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bindet {
namespace {

constexpr double kUnitNormTol = 1e-6;

double l2_norm(std::span<const float> v) {
  double s = 0.0;
  for (const float x : v) {
    s += static_cast<double>(x) * static_cast<double>(x);
  }
  return std::sqrt(s);
}

// Whole-pixel box inside [0,w) x [0,h) covering b, or nullopt if empty.
std::optional<std::array<int, 4>> pixel_rect(const BoundingBox& b, int w, int h) {
  const int x0 = std::clamp(static_cast<int>(std::floor(b.x)), 0, w);
  const int y0 = std::clamp(static_cast<int>(std::floor(b.y)), 0, h);
  const int x1 = std::clamp(static_cast<int>(std::ceil(b.right())), 0, w);
  const int y1 = std::clamp(static_cast<int>(std::ceil(b.bottom())), 0, h);
  if (x1 <= x0 || y1 <= y0) {
    return std::nullopt;
  }
  return std::array<int, 4>{x0, y0, x1 - x0, y1 - y0};
}

}  // namespace

void validate(const MatchConfig& cfg) {
  if (cfg.w_sem < 0.0 || cfg.w_appe < 0.0 || cfg.w_geo < 0.0 ||
      std::abs(cfg.w_sem + cfg.w_appe + cfg.w_geo - 1.0) > 1e-9) {
    throw Error(ErrorCode::kConfig, "matching weights must be nonnegative and sum to 1");
  }
  if (!(cfg.accept_threshold >= 0.0 && cfg.accept_threshold <= 1.0)) {
    throw Error(ErrorCode::kConfig, "matching.accept_threshold must be in [0,1]");
  }
  if (cfg.appearance_top_k < 1) {
    throw Error(ErrorCode::kConfig, "matching.appearance_top_k must be >= 1");
  }
  if (!(cfg.patch_coverage > 0.0 && cfg.patch_coverage <= 1.0)) {
    throw Error(ErrorCode::kConfig, "matching.patch_coverage must be in (0,1]");
  }
  if (cfg.render.width <= 0 || cfg.render.height <= 0) {
    throw Error(ErrorCode::kConfig, "template render canvas must be positive");
  }
  validate(cfg.render.intrinsics);
  icosphere_directions(cfg.view_count);  // throws on unsupported counts
}

void validate(const TemplateBank& bank) {
  if (bank.templates.empty()) {
    throw Error(ErrorCode::kValidation, "template bank is empty");
  }
  for (const auto& t : bank.templates) {
    if (t.object_id != bank.object_id ||
        t.global_embedding.size() != static_cast<std::size_t>(bank.embedding_dim)) {
      throw Error(ErrorCode::kValidation, "template bank mixes objects or embedding dims");
    }
    if (std::abs(l2_norm(t.global_embedding) - 1.0) > kUnitNormTol) {
      throw Error(ErrorCode::kValidation, "template global embedding is not unit norm");
    }
    if (t.patch_embeddings.size() != static_cast<std::size_t>(t.grid_h) * t.grid_w) {
      throw Error(ErrorCode::kValidation, "template patch count does not match its grid");
    }
    for (const auto& p : t.patch_embeddings) {
      if (p.size() != static_cast<std::size_t>(bank.embedding_dim)) {
        throw Error(ErrorCode::kValidation, "template patch dim differs from bank dim");
      }
    }
    if (!(t.render_distance_mm > 0.0)) {
      throw Error(ErrorCode::kValidation, "template render distance must be positive");
    }
  }
}

double clamped_cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "embedding dims differ (" + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i];
    const double y = b[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) {
    return 0.0;
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

Embedding l2_normalized(Embedding v) {
  const double n = l2_norm(v);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorCode::kContractViolation, "cannot normalize a zero or non-finite embedding",
                "feature_extractor");
  }
  for (auto& x : v) {
    x = static_cast<float>(static_cast<double>(x) / n);
  }
  return v;
}

TemplateBank build_template_bank(int object_id, std::span<const Eigen::Vector3d> cad_vertices,
                                 const MatchConfig& cfg, const Renderer& renderer,
                                 const FeatureExtractor& features) {
  if (cad_vertices.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "object " + std::to_string(object_id) + " has no CAD vertices", "template_bank");
  }
  const auto rotations = sample_viewpoints(cfg.view_count);
  const auto& rc = cfg.render;

  double distance = 0.0;
  if (rc.distance_mm) {
    distance = *rc.distance_mm;
  } else {
    Eigen::Vector3d lo = cad_vertices.front();
    Eigen::Vector3d hi = lo;
    for (const auto& v : cad_vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    const double diameter = std::max((hi - lo).norm(), 1e-6);
    distance = diameter * rc.intrinsics.fx / (0.6 * rc.width) + diameter;
  }

  TemplateBank bank;
  bank.object_id = object_id;
  for (std::size_t i = 0; i < rotations.size(); ++i) {
    const std::string where =
        "object " + std::to_string(object_id) + " view " + std::to_string(i);
    try {
      RenderRequest req;
      req.object_id = object_id;
      req.vertices.assign(cad_vertices.begin(), cad_vertices.end());
      req.rotation = rotations[i];
      req.distance_mm = distance;
      req.intrinsics = rc.intrinsics;
      req.width = rc.width;
      req.height = rc.height;
      const RenderOutput render = renderer.run(req);

      const auto rect = pixel_rect(render.silhouette_bbox, render.image.width(), render.image.height());
      if (!rect) {
        throw Error(ErrorCode::kContractViolation, "silhouette lies outside the render canvas",
                    "renderer");
      }
      const RgbImage crop = render.image.crop((*rect)[0], (*rect)[1], (*rect)[2], (*rect)[3]);
      FeatureOutput f = features.run(crop);

      Template t;
      t.object_id = object_id;
      t.view_index = static_cast<int>(i);
      t.global_embedding = l2_normalized(std::move(f.global));
      t.patch_embeddings = std::move(f.patches);
      t.grid_h = f.grid_h;
      t.grid_w = f.grid_w;
      t.silhouette_bbox = render.silhouette_bbox;
      t.render_distance_mm = distance;
      t.render_intrinsics = rc.intrinsics;
      bank.templates.push_back(std::move(t));
    } catch (const Error& e) {
      // Keep the code: an unavailable backend must still abort the run.
      throw Error(e.code(), "template bank build failed at " + where + ": " + e.detail(),
                  e.stage().empty() ? "template_bank" : e.stage())
          .with_attempts(e.attempts());
    }
  }
  bank.embedding_dim = static_cast<int>(bank.templates.front().global_embedding.size());
  validate(bank);
  return bank;
}

SemanticMatch semantic_score(std::span<const float> proposal_embedding, const TemplateBank& bank) {
  SemanticMatch best{-1.0, 0};
  for (const auto& t : bank.templates) {
    const double s = clamped_cosine(proposal_embedding, t.global_embedding);
    if (s > best.score || (s == best.score && t.view_index < best.best_template)) {
      best = {s, t.view_index};
    }
  }
  if (best.score < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "semantic score against an empty bank");
  }
  return best;
}

double appearance_score(std::span<const Embedding> proposal_patches, const Template& tmpl) {
  if (proposal_patches.empty()) {
    return 0.0;
  }
  double total = 0.0;
  for (const auto& p : proposal_patches) {
    double best = 0.0;
    for (const auto& q : tmpl.patch_embeddings) {
      best = std::max(best, clamped_cosine(p, q));
    }
    total += best;
  }
  return total / static_cast<double>(proposal_patches.size());
}

double geometric_score(const BoundingBox& proposal_bbox, const Template& tmpl,
                       std::optional<double> mean_depth_mm, const CameraIntrinsics& crop_intrinsics) {
  if (!mean_depth_mm) {
    return 0.5;
  }
  if (!(*mean_depth_mm > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "mean depth under a proposal must be positive");
  }
  const double scale = (tmpl.render_distance_mm / *mean_depth_mm) *
                       (crop_intrinsics.fx / tmpl.render_intrinsics.fx);
  const double w = tmpl.silhouette_bbox.w * scale;
  const double h = tmpl.silhouette_bbox.h * scale;
  const Eigen::Vector2d c = proposal_bbox.center();
  return bbox_iou({c.x() - 0.5 * w, c.y() - 0.5 * h, w, h}, proposal_bbox);
}

double aggregate_score(double s_sem, double s_appe, double s_geo, const MatchConfig& cfg) {
  return std::clamp(cfg.w_sem * s_sem + cfg.w_appe * s_appe + cfg.w_geo * s_geo, 0.0, 1.0);
}

ProposalFeatures describe_proposal(const RgbImage& image, const MaskProposal& proposal,
                                   const MatchConfig& cfg, const FeatureExtractor& features) {
  const auto rect = pixel_rect(proposal.bbox, image.width(), image.height());
  if (!rect) {
    throw Error(ErrorCode::kInvalidArgument, "proposal box lies outside the image");
  }
  const auto [x0, y0, w, h] = *rect;
  RgbImage crop = image.crop(x0, y0, w, h);
  const BinaryMask mask = crop_mask(proposal.mask, {double(x0), double(y0), double(w), double(h)});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.get(x, y)) {
        set_rgb(crop, x, y, {});
      }
    }
  }
  FeatureOutput f = features.run(crop, &mask);

  ProposalFeatures out;
  out.global = l2_normalized(std::move(f.global));
  for (int r = 0; r < f.grid_h; ++r) {
    for (int c = 0; c < f.grid_w; ++c) {
      const int cx0 = c * w / f.grid_w;
      const int cx1 = (c + 1) * w / f.grid_w;
      const int cy0 = r * h / f.grid_h;
      const int cy1 = (r + 1) * h / f.grid_h;
      const int cell_pixels = (cx1 - cx0) * (cy1 - cy0);
      if (cell_pixels <= 0) {
        continue;
      }
      int covered = 0;
      for (int y = cy0; y < cy1; ++y) {
        for (int x = cx0; x < cx1; ++x) {
          covered += mask.get(x, y) ? 1 : 0;
        }
      }
      if (static_cast<double>(covered) >= cfg.patch_coverage * cell_pixels) {
        out.patches.push_back(std::move(f.patches[static_cast<std::size_t>(r) * f.grid_w + c]));
      }
    }
  }
  return out;
}

std::optional<double> mean_depth_under(const std::optional<DepthMap>& depth, const BinaryMask& mask) {
  if (!depth) {
    return std::nullopt;
  }
  if (depth->width() != mask.width() || depth->height() != mask.height()) {
    throw Error(ErrorCode::kDimensionMismatch, "depth and mask sizes differ");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      const float d = depth->at(x, y);
      if (mask.get(x, y) && d > 0.0f) {
        sum += d;
        ++n;
      }
    }
  }
  if (n == 0) {
    return std::nullopt;
  }
  return sum / static_cast<double>(n);
}

MatchScore score_against_bank(const ProposalFeatures& features, const BoundingBox& proposal_bbox,
                              std::optional<double> mean_depth_mm,
                              const CameraIntrinsics& crop_intrinsics, const TemplateBank& bank,
                              const MatchConfig& cfg) {
  if (bank.templates.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "scoring against an empty bank");
  }
  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(bank.templates.size());
  for (std::size_t i = 0; i < bank.templates.size(); ++i) {
    ranked.emplace_back(clamped_cosine(features.global, bank.templates[i].global_embedding), i);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) {
      return a.first > b.first;
    }
    return bank.templates[a.second].view_index < bank.templates[b.second].view_index;
  });

  const std::size_t k = std::min(ranked.size(), static_cast<std::size_t>(cfg.appearance_top_k));
  MatchScore best;
  best.aggregate = -1.0;
  for (std::size_t i = 0; i < k; ++i) {
    const Template& t = bank.templates[ranked[i].second];
    MatchScore s;
    s.s_sem = ranked[i].first;
    s.s_appe = appearance_score(features.patches, t);
    s.s_geo = geometric_score(proposal_bbox, t, mean_depth_mm, crop_intrinsics);
    s.aggregate = aggregate_score(s.s_sem, s.s_appe, s.s_geo, cfg);
    s.best_template = t.view_index;
    if (s.aggregate > best.aggregate) {
      best = s;
    }
  }
  return best;
}

std::vector<Detection> assign_labels(const std::vector<MaskProposal>& proposals,
                                     const std::vector<TemplateBank>& banks,
                                     const SceneFrame& cropped, const RoiCrop& roi,
                                     int original_width, int original_height,
                                     const MatchConfig& cfg, const FeatureExtractor& features) {
  if (banks.empty()) {
    throw Error(ErrorCode::kConfig, "label assignment needs at least one template bank");
  }
  std::vector<const TemplateBank*> ordered;
  for (const auto& b : banks) {
    ordered.push_back(&b);
  }
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto* a, const auto* b) { return a->object_id < b->object_id; });

  std::vector<Detection> out;
  for (const auto& p : proposals) {
    ProposalFeatures pf;
    try {
      pf = describe_proposal(cropped.rgb, p, cfg, features);
    } catch (const Error& e) {
      throw Error(e.code(), "matching failed: " + e.detail(),
                  e.stage().empty() ? "template_match" : e.stage())
          .with_attempts(e.attempts());
    }
    const auto depth = mean_depth_under(cropped.depth, p.mask);

    const TemplateBank* winner = nullptr;
    MatchScore best;
    for (const auto* bank : ordered) {
      const MatchScore s = score_against_bank(pf, p.bbox, depth, cropped.intrinsics, *bank, cfg);
      if (winner == nullptr || s.aggregate > best.aggregate) {
        winner = bank;
        best = s;
      }
    }
    if (best.aggregate < cfg.accept_threshold) {
      continue;
    }
    Detection d;
    d.object_id = winner->object_id;
    d.score = best.aggregate;
    d.match = best;
    d.mask = remap_mask(p.mask, roi, original_width, original_height);
    d.bbox = remap_bbox(p.bbox, roi);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace bindet
