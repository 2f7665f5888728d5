#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "bindet/template_match.hpp"

namespace bindet {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kCacheFormatVersion = 1;

std::string sanitize(const std::string& tag) {
  std::string out;
  for (const char c : tag) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out;
}

json key_json(const TemplateCacheKey& key) {
  return {{"object_id", key.object_id}, {"view_count", key.view_count}, {"feature_tag", key.feature_tag}};
}

}  // namespace

fs::path template_cache_path(const fs::path& cache_dir, const TemplateCacheKey& key) {
  return cache_dir /
         fmt::format("obj_{:06d}_v{}_{}.json", key.object_id, key.view_count, sanitize(key.feature_tag));
}

void save_template_bank(const TemplateBank& bank, const TemplateCacheKey& key, const fs::path& path) {
  json templates = json::array();
  for (const auto& t : bank.templates) {
    const auto& k = t.render_intrinsics;
    const auto& b = t.silhouette_bbox;
    templates.push_back({
        {"view_index", t.view_index},
        {"global", t.global_embedding},
        {"patches", t.patch_embeddings},
        {"grid", {t.grid_h, t.grid_w}},
        {"silhouette_bbox", {b.x, b.y, b.w, b.h}},
        {"render_distance_mm", t.render_distance_mm},
        {"render_intrinsics", {k.fx, k.fy, k.cx, k.cy}},
    });
  }
  const json doc = {
      {"version", kCacheFormatVersion},
      {"key", key_json(key)},
      {"object_id", bank.object_id},
      {"embedding_dim", bank.embedding_dim},
      {"templates", std::move(templates)},
  };
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kIo, "cannot write template cache " + path.string());
  }
  out << doc.dump();
}

std::optional<TemplateBank> load_template_bank(const fs::path& path, const TemplateCacheKey& key) {
  std::ifstream in(path);
  if (!in) {
    return std::nullopt;
  }
  json doc;
  try {
    doc = json::parse(in);
    if (doc.at("version").get<int>() != kCacheFormatVersion || doc.at("key") != key_json(key)) {
      return std::nullopt;
    }
    TemplateBank bank;
    bank.object_id = doc.at("object_id").get<int>();
    bank.embedding_dim = doc.at("embedding_dim").get<int>();
    for (const auto& jt : doc.at("templates")) {
      Template t;
      t.object_id = bank.object_id;
      t.view_index = jt.at("view_index").get<int>();
      t.global_embedding = jt.at("global").get<Embedding>();
      t.patch_embeddings = jt.at("patches").get<std::vector<Embedding>>();
      t.grid_h = jt.at("grid").at(0).get<int>();
      t.grid_w = jt.at("grid").at(1).get<int>();
      const auto b = jt.at("silhouette_bbox").get<std::vector<double>>();
      const auto k = jt.at("render_intrinsics").get<std::vector<double>>();
      if (b.size() != 4 || k.size() != 4) {
        throw Error(ErrorCode::kMalformedInput, "bad bbox/intrinsics arity");
      }
      t.silhouette_bbox = {b[0], b[1], b[2], b[3]};
      t.render_intrinsics = {k[0], k[1], k[2], k[3]};
      t.render_distance_mm = jt.at("render_distance_mm").get<double>();
      bank.templates.push_back(std::move(t));
    }
    validate(bank);
    return bank;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedInput, "template cache " + path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::kMalformedInput, "template cache " + path.string() + ": " + e.detail());
  }
}

}  // namespace bindet
