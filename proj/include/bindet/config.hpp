#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bindet/backends.hpp"
#include "bindet/evaluation.hpp"
#include "bindet/preprocess.hpp"
#include "bindet/proposal_gen.hpp"
#include "bindet/remote_backends.hpp"
#include "bindet/roi_filter.hpp"
#include "bindet/template_match.hpp"

namespace bindet {

enum class TimingMode { kWall, kNone };

/// Parameters of the deterministic mock backend set.
struct MockSettings {
  std::string enhancer = "gain";  // "gain" | "identity"
  double gain = 2.0;
  std::vector<ScoredBox> roi_boxes;
  std::map<std::uint64_t, std::vector<ScoredBox>> roi_boxes_by_hash;
  Rgb background{0, 0, 0};
  double segmenter_confidence = 0.95;
  std::string features = "one_hot";  // "one_hot" | "hash"
  std::vector<Rgb> palette;
  int feature_dim = 8;
  int feature_grid = 4;
  std::map<int, Rgb> object_colors;
  /// Per-kind injected call latency in milliseconds.
  std::map<BackendKind, double> latency_ms;
};

struct PipelineConfig {
  std::filesystem::path dataset_root;
  /// Holds obj_XXXXXX.ply; defaults to <dataset_root>/../models.
  std::filesystem::path models_dir;
  /// Empty means every obj_*.ply in models_dir.
  std::vector<int> object_ids;
  std::filesystem::path output_dir = "out";
  /// Defaults to <output_dir>/templates.
  std::filesystem::path cache_dir;

  PreprocessConfig preprocess;
  RoiConfig roi;
  ProposalConfig proposals;
  MatchConfig matching;
  EvalConfig eval;

  Implementation backend_set = Implementation::kMock;
  std::map<BackendKind, BackendDescriptor> remote;
  remote::ClientOptions client;
  MockSettings mock;

  int workers = 1;
  TimingMode timing = TimingMode::kWall;

  /// Hash of every setting that affects template banks; part of the cache key.
  std::string template_fingerprint;
};

/// Parses a JSON config. Relative paths resolve against the file's directory.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig config_from_json(const std::string& text, const std::filesystem::path& base_dir = {});

/// Overrides remote endpoints from BINDET_<KIND>_ENDPOINT variables
/// (e.g. BINDET_SEGMENTER_ENDPOINT). Nothing else is read from the environment.
void apply_endpoint_env(PipelineConfig& cfg);

/// Fills defaulted paths, recomputes the fingerprint and checks every nested
/// invariant plus the existence of the dataset root. Throws kConfig.
void finalize(PipelineConfig& cfg);

/// Instantiates the configured backend set.
BackendSet make_backends(const PipelineConfig& cfg);

}  // namespace bindet
