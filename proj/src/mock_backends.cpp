#include "bindet/mock_backends.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace bindet::mock {
namespace {

BackendDescriptor mock_descriptor(BackendKind kind, std::string tag) {
  BackendDescriptor d;
  d.kind = kind;
  d.implementation = Implementation::kMock;
  d.model_tag = std::move(tag);
  d.max_in_flight = 64;
  return d;
}

std::uint32_t pack(Rgb c) {
  return (static_cast<std::uint32_t>(c.r) << 16) | (static_cast<std::uint32_t>(c.g) << 8) | c.b;
}

Rgb unpack(std::uint32_t v) {
  return {static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 8),
          static_cast<std::uint8_t>(v)};
}

// Most frequent color over masked pixels in [x0,x1) x [y0,y1); ties go to the
// smallest packed value. Empty optional when nothing is masked.
std::optional<Rgb> dominant_color(const RgbImage& image, const BinaryMask* mask, int x0, int y0,
                                  int x1, int y1) {
  std::map<std::uint32_t, std::size_t> hist;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      if (mask == nullptr || mask->get(x, y)) {
        ++hist[pack(rgb_at(image, x, y))];
      }
    }
  }
  if (hist.empty()) {
    return std::nullopt;
  }
  auto best = hist.begin();
  for (auto it = hist.begin(); it != hist.end(); ++it) {
    if (it->second > best->second) {
      best = it;
    }
  }
  return unpack(best->first);
}

std::uint64_t fnv1a(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffU;
    h *= 1099511628211ULL;
  }
  return h;
}

Embedding random_embedding(std::uint64_t seed, int dim) {
  std::mt19937_64 rng(seed);
  Embedding out(static_cast<std::size_t>(dim));
  for (auto& v : out) {
    // top 24 bits -> exact float in [-1, 1)
    v = static_cast<float>(static_cast<double>(rng() >> 40) / double(1 << 23) - 1.0);
  }
  return out;
}

// Cell (r, c) of an n x m grid over a w x h image covers
// [c*w/m, (c+1)*w/m) x [r*h/n, (r+1)*h/n).
struct Cell {
  int x0, y0, x1, y1;
};

Cell grid_cell(int w, int h, int grid, int r, int c) {
  return {c * w / grid, r * h / grid, (c + 1) * w / grid, (r + 1) * h / grid};
}

}  // namespace

IdentityEnhancer::IdentityEnhancer()
    : Enhancer(mock_descriptor(BackendKind::kEnhancer, "mock-identity")) {}

GainEnhancer::GainEnhancer(double gain)
    : Enhancer(mock_descriptor(BackendKind::kEnhancer, "mock-gain")), gain_(gain) {}

RgbImage GainEnhancer::do_run(const RgbImage& image) const {
  RgbImage out = image;
  for (auto& v : out.data()) {
    v = static_cast<std::uint8_t>(std::clamp(std::lround(v * gain_), 0L, 255L));
  }
  return out;
}

ScriptedRoiDetector::ScriptedRoiDetector(std::vector<ScoredBox> default_boxes,
                                         std::map<std::uint64_t, std::vector<ScoredBox>> by_hash)
    : RoiDetector(mock_descriptor(BackendKind::kRoiDetector, "mock-scripted-roi")),
      default_boxes_(std::move(default_boxes)),
      by_hash_(std::move(by_hash)) {}

std::vector<ScoredBox> ScriptedRoiDetector::do_run(const RgbImage& image,
                                                   const std::string& /*prompt*/) const {
  if (!by_hash_.empty()) {
    if (auto it = by_hash_.find(image_hash(image)); it != by_hash_.end()) {
      return it->second;
    }
  }
  return default_boxes_;
}

FloodFillSegmenter::FloodFillSegmenter(Rgb background, double confidence)
    : Segmenter(mock_descriptor(BackendKind::kSegmenter, "mock-floodfill")),
      background_(background),
      confidence_(confidence) {}

std::vector<SegmentResult> FloodFillSegmenter::do_run(
    const RgbImage& image, std::span<const Eigen::Vector2d> points) const {
  // Label every same-color 4-connected component once; each prompt then just
  // selects its component. Background pixels keep label 0.
  const int w = image.width();
  const int h = image.height();
  std::vector<std::uint32_t> labels(static_cast<std::size_t>(w) * h, 0);
  auto at = [&](int x, int y) -> std::uint32_t& { return labels[static_cast<std::size_t>(y) * w + x]; };
  std::uint32_t next = 0;
  std::vector<std::pair<int, int>> stack;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      const Rgb seed = rgb_at(image, x0, y0);
      if (at(x0, y0) != 0 || seed == background_) {
        continue;
      }
      at(x0, y0) = ++next;
      stack.assign(1, {x0, y0});
      while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        constexpr int kDx[] = {1, -1, 0, 0};
        constexpr int kDy[] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = x + kDx[k];
          const int ny = y + kDy[k];
          if (image.contains(nx, ny) && at(nx, ny) == 0 && rgb_at(image, nx, ny) == seed) {
            at(nx, ny) = next;
            stack.emplace_back(nx, ny);
          }
        }
      }
    }
  }

  std::map<std::uint32_t, BinaryMask> masks;
  masks.emplace(0, BinaryMask(w, h));
  std::vector<SegmentResult> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const int px = static_cast<int>(std::floor(p.x()));
    const int py = static_cast<int>(std::floor(p.y()));
    const std::uint32_t label = image.contains(px, py) ? at(px, py) : 0;
    auto it = masks.find(label);
    if (it == masks.end()) {
      std::vector<std::uint8_t> bits(labels.size());
      std::transform(labels.begin(), labels.end(), bits.begin(),
                     [label](std::uint32_t l) { return static_cast<std::uint8_t>(l == label); });
      it = masks.emplace(label, BinaryMask(w, h, std::move(bits))).first;
    }
    out.push_back({it->second, confidence_});
  }
  return out;
}

OneHotFeatureExtractor::OneHotFeatureExtractor(std::vector<Rgb> palette, int dim, int grid)
    : FeatureExtractor(mock_descriptor(BackendKind::kFeatureExtractor, "mock-onehot")),
      palette_(std::move(palette)),
      dim_(dim),
      grid_(grid) {
  if (dim_ < static_cast<int>(palette_.size()) + 1 || grid_ < 1) {
    throw Error(ErrorCode::kConfig, "one-hot dim must exceed palette size and grid must be >= 1",
                "feature_extractor");
  }
}

std::size_t OneHotFeatureExtractor::index_of(Rgb c) const {
  const auto it = std::find(palette_.begin(), palette_.end(), c);
  return it == palette_.end() ? static_cast<std::size_t>(dim_ - 1)
                              : static_cast<std::size_t>(it - palette_.begin());
}

FeatureOutput OneHotFeatureExtractor::do_run(const RgbImage& image, const BinaryMask* mask) const {
  FeatureOutput out;
  out.global.assign(static_cast<std::size_t>(dim_), 0.0f);
  if (auto c = dominant_color(image, mask, 0, 0, image.width(), image.height())) {
    out.global[index_of(*c)] = 1.0f;
  }
  out.grid_h = grid_;
  out.grid_w = grid_;
  for (int r = 0; r < grid_; ++r) {
    for (int c = 0; c < grid_; ++c) {
      const Cell cell = grid_cell(image.width(), image.height(), grid_, r, c);
      Embedding patch(static_cast<std::size_t>(dim_), 0.0f);
      if (auto col = dominant_color(image, mask, cell.x0, cell.y0, cell.x1, cell.y1)) {
        patch[index_of(*col)] = 1.0f;
      }
      out.patches.push_back(std::move(patch));
    }
  }
  return out;
}

HashFeatureExtractor::HashFeatureExtractor(int dim, int grid)
    : FeatureExtractor(mock_descriptor(BackendKind::kFeatureExtractor, "mock-hash")),
      dim_(dim),
      grid_(grid) {
  if (dim_ < 1 || grid_ < 1) {
    throw Error(ErrorCode::kConfig, "hash features need dim >= 1 and grid >= 1",
                "feature_extractor");
  }
}

FeatureOutput HashFeatureExtractor::do_run(const RgbImage& image, const BinaryMask* mask) const {
  auto region_hash = [&](const Cell& cell) {
    std::uint64_t h = 1469598103934665603ULL;
    for (int y = cell.y0; y < cell.y1; ++y) {
      for (int x = cell.x0; x < cell.x1; ++x) {
        if (mask == nullptr || mask->get(x, y)) {
          h = fnv1a(h, (static_cast<std::uint64_t>(x) << 40) ^ (static_cast<std::uint64_t>(y) << 24) ^
                           pack(rgb_at(image, x, y)));
        }
      }
    }
    return h;
  };
  FeatureOutput out;
  out.global = random_embedding(region_hash({0, 0, image.width(), image.height()}), dim_);
  out.grid_h = grid_;
  out.grid_w = grid_;
  for (int r = 0; r < grid_; ++r) {
    for (int c = 0; c < grid_; ++c) {
      out.patches.push_back(
          random_embedding(region_hash(grid_cell(image.width(), image.height(), grid_, r, c)), dim_));
    }
  }
  return out;
}

ProjectionRenderer::ProjectionRenderer(std::map<int, Rgb> object_colors, Rgb background)
    : Renderer(mock_descriptor(BackendKind::kRenderer, "mock-projection")),
      object_colors_(std::move(object_colors)),
      background_(background) {}

Rgb ProjectionRenderer::color_for(int object_id) const {
  if (auto it = object_colors_.find(object_id); it != object_colors_.end()) {
    return it->second;
  }
  const auto h = fnv1a(1469598103934665603ULL, static_cast<std::uint64_t>(object_id));
  return {static_cast<std::uint8_t>(64 + (h & 0x7f)), static_cast<std::uint8_t>(64 + ((h >> 8) & 0x7f)),
          static_cast<std::uint8_t>(64 + ((h >> 16) & 0x7f))};
}

RenderOutput ProjectionRenderer::do_run(const RenderRequest& request) const {
  const Eigen::Vector3d offset(0.0, 0.0, request.distance_mm);
  double u0 = std::numeric_limits<double>::infinity();
  double v0 = u0;
  double u1 = -u0;
  double v1 = -u0;
  for (const auto& v : request.vertices) {
    const Eigen::Vector2d uv = project_point(request.intrinsics, request.rotation * v + offset);
    u0 = std::min(u0, uv.x());
    v0 = std::min(v0, uv.y());
    u1 = std::max(u1, uv.x());
    v1 = std::max(v1, uv.y());
  }
  RenderOutput out;
  out.silhouette_bbox = {u0, v0, std::max(u1 - u0, 1.0), std::max(v1 - v0, 1.0)};
  out.image = RgbImage(request.width, request.height);
  const Rgb color = color_for(request.object_id);
  const auto& b = out.silhouette_bbox;
  for (int y = 0; y < request.height; ++y) {
    for (int x = 0; x < request.width; ++x) {
      const double cx = x + 0.5;
      const double cy = y + 0.5;
      const bool inside = cx >= b.x && cx < b.right() && cy >= b.y && cy < b.bottom();
      set_rgb(out.image, x, y, inside ? color : background_);
    }
  }
  return out;
}

BackendSet make_default_set(const std::vector<Rgb>& palette, int feature_dim, Rgb background,
                            std::vector<ScoredBox> roi_boxes, std::map<int, Rgb> object_colors) {
  BackendSet set;
  set.enhancer = std::make_shared<GainEnhancer>(2.0);
  set.roi_detector = std::make_shared<ScriptedRoiDetector>(std::move(roi_boxes));
  set.segmenter = std::make_shared<FloodFillSegmenter>(background);
  set.feature_extractor = std::make_shared<OneHotFeatureExtractor>(palette, feature_dim);
  set.renderer = std::make_shared<ProjectionRenderer>(std::move(object_colors), background);
  return set;
}

}  // namespace bindet::mock
