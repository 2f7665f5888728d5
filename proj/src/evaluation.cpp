#include "bindet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

namespace bindet {
namespace {

constexpr const char* kStage = "evaluation";

struct ScoredMatch {
  double score = 0.0;
  std::vector<std::uint8_t> tp;  // one flag per threshold
};

// Everything one frame contributes, keyed by object id.
struct FrameResult {
  std::map<int, std::vector<ScoredMatch>> matches;
  std::map<int, std::size_t> num_gt;
};

double instance_iou(const DetectionRecord& det, const BinaryMask* det_mask,
                    const GroundTruthInstance& gt, IouKind kind) {
  if (kind == IouKind::kBbox) {
    return bbox_iou(det.bbox, gt.bbox);
  }
  if (det_mask->width() != gt.mask.width() || det_mask->height() != gt.mask.height()) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("detection mask {}x{} vs ground truth {}x{} at scene {} image {}",
                            det_mask->width(), det_mask->height(), gt.mask.width(),
                            gt.mask.height(), det.scene_id, det.image_id),
                kStage);
  }
  return mask_iou(*det_mask, gt.mask);
}

FrameResult evaluate_frame(const std::vector<const DetectionRecord*>& frame_dets,
                           const std::vector<GroundTruthInstance>& frame_gts, const EvalConfig& cfg) {
  FrameResult out;
  std::map<int, std::vector<const GroundTruthInstance*>> gts_by_obj;
  for (const auto& g : frame_gts) {
    gts_by_obj[g.object_id].push_back(&g);
    ++out.num_gt[g.object_id];
  }
  std::map<int, std::vector<const DetectionRecord*>> dets_by_obj;
  for (const auto* d : frame_dets) {
    dets_by_obj[d->object_id].push_back(d);
  }
  for (auto& [obj, dets] : dets_by_obj) {
    std::stable_sort(dets.begin(), dets.end(),
                     [](const DetectionRecord* a, const DetectionRecord* b) { return a->score > b->score; });
    if (dets.size() > static_cast<std::size_t>(cfg.max_dets_per_image)) {
      dets.resize(static_cast<std::size_t>(cfg.max_dets_per_image));
    }
    const auto git = gts_by_obj.find(obj);
    const std::vector<const GroundTruthInstance*> no_gts;
    const auto& gts = git == gts_by_obj.end() ? no_gts : git->second;

    std::vector<std::vector<double>> iou(dets.size(), std::vector<double>(gts.size(), 0.0));
    for (std::size_t i = 0; i < dets.size(); ++i) {
      std::optional<BinaryMask> mask;
      if (cfg.iou_kind == IouKind::kMask && !gts.empty()) {
        mask = rle_decode(dets[i]->mask_rle);
      }
      for (std::size_t j = 0; j < gts.size(); ++j) {
        iou[i][j] = instance_iou(*dets[i], mask ? &*mask : nullptr, *gts[j], cfg.iou_kind);
      }
    }
    auto& bucket = out.matches[obj];
    for (const auto* d : dets) {
      bucket.push_back({d->score, std::vector<std::uint8_t>(cfg.iou_thresholds.size(), 0)});
    }
    const std::size_t first = bucket.size() - dets.size();
    for (std::size_t t = 0; t < cfg.iou_thresholds.size(); ++t) {
      const auto assignment = match_greedy(iou, cfg.iou_thresholds[t]);
      for (std::size_t i = 0; i < dets.size(); ++i) {
        bucket[first + i].tp[t] = assignment[i] >= 0 ? 1 : 0;
      }
    }
  }
  return out;
}

double interpolated_ap(const std::vector<ScoredMatch>& sorted, std::size_t t, std::size_t num_gt) {
  const std::size_t n = sorted.size();
  std::vector<double> recall(n);
  std::vector<double> precision(n);
  double tp = 0.0;
  double fp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    (sorted[i].tp[t] ? tp : fp) += 1.0;
    recall[i] = tp / static_cast<double>(num_gt);
    precision[i] = tp / (tp + fp);
  }
  for (std::size_t i = n; i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double sum = 0.0;
  for (int r = 0; r < kRecallPoints; ++r) {
    const double level = static_cast<double>(r) / (kRecallPoints - 1);
    const auto it = std::lower_bound(recall.begin(), recall.end(), level);
    if (it != recall.end()) {
      sum += precision[static_cast<std::size_t>(it - recall.begin())];
    }
  }
  return sum / kRecallPoints;
}

}  // namespace

void validate(const EvalConfig& cfg) {
  if (cfg.iou_thresholds.empty()) {
    throw Error(ErrorCode::kConfig, "eval.iou_thresholds is empty");
  }
  for (std::size_t i = 0; i < cfg.iou_thresholds.size(); ++i) {
    const double t = cfg.iou_thresholds[i];
    if (!(t > 0.0 && t <= 1.0)) {
      throw Error(ErrorCode::kConfig, fmt::format("eval.iou_thresholds[{}] = {} outside (0, 1]", i, t));
    }
    if (i > 0 && !(t > cfg.iou_thresholds[i - 1])) {
      throw Error(ErrorCode::kConfig, "eval.iou_thresholds must be strictly increasing");
    }
  }
  if (cfg.max_dets_per_image < 1) {
    throw Error(ErrorCode::kConfig, "eval.max_dets_per_image must be >= 1");
  }
}

std::vector<int> match_greedy(const std::vector<std::vector<double>>& iou, double iou_threshold) {
  const std::size_t num_gt = iou.empty() ? 0 : iou.front().size();
  std::vector<bool> taken(num_gt, false);
  std::vector<int> out(iou.size(), -1);
  for (std::size_t d = 0; d < iou.size(); ++d) {
    if (iou[d].size() != num_gt) {
      throw Error(ErrorCode::kDimensionMismatch, "ragged IoU matrix", kStage);
    }
    int best = -1;
    double best_iou = iou_threshold;
    for (std::size_t g = 0; g < num_gt; ++g) {
      // Strict > keeps the lowest index on ties; the first candidate only
      // needs to reach the threshold.
      if (taken[g] || iou[d][g] < iou_threshold) {
        continue;
      }
      if (best < 0 || iou[d][g] > best_iou) {
        best = static_cast<int>(g);
        best_iou = iou[d][g];
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = true;
      out[d] = best;
    }
  }
  return out;
}

ApReport average_precision(const std::vector<DetectionRecord>& dets, const GroundTruthSet& gts,
                           const EvalConfig& cfg) {
  validate(cfg);
  std::size_t total_gt = 0;
  for (const auto& [_, v] : gts) {
    total_gt += v.size();
  }
  if (total_gt == 0) {
    throw Error(ErrorCode::kUndefinedAp, "ground truth is empty; AP is undefined", kStage);
  }
  for (const auto& d : dets) {
    if (!std::isfinite(d.score)) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("non-finite score at scene {} image {}", d.scene_id, d.image_id), kStage);
    }
  }

  std::vector<FrameKey> frames;
  for (const auto& [key, _] : gts) {
    frames.push_back(key);
  }
  std::map<FrameKey, std::vector<const DetectionRecord*>> dets_by_frame;
  for (const auto& d : dets) {
    const FrameKey key{d.scene_id, d.image_id};
    if (gts.count(key) != 0) {
      dets_by_frame[key].push_back(&d);
    }
  }

  // Frames are independent; fold the results back in frame order.
  std::vector<FrameResult> results(frames.size());
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), frames.size()));
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      static const std::vector<const DetectionRecord*> kNone;
      for (std::size_t i = w; i < frames.size(); i += workers) {
        const auto it = dets_by_frame.find(frames[i]);
        results[i] = evaluate_frame(it == dets_by_frame.end() ? kNone : it->second, gts.at(frames[i]), cfg);
      }
    }));
  }
  for (auto& j : jobs) {
    j.get();
  }

  std::map<int, std::vector<ScoredMatch>> matches;
  std::map<int, std::size_t> num_gt;
  for (auto& r : results) {
    for (auto& [obj, m] : r.matches) {
      auto& dst = matches[obj];
      dst.insert(dst.end(), std::make_move_iterator(m.begin()), std::make_move_iterator(m.end()));
    }
    for (const auto& [obj, n] : r.num_gt) {
      num_gt[obj] += n;
    }
  }

  ApReport report;
  report.thresholds = cfg.iou_thresholds;
  report.num_ground_truth = total_gt;
  for (const auto& [obj, n] : num_gt) {
    auto& list = matches[obj];
    report.num_detections += list.size();
    std::stable_sort(list.begin(), list.end(),
                     [](const ScoredMatch& a, const ScoredMatch& b) { return a.score > b.score; });
    std::vector<double> per_t;
    for (std::size_t t = 0; t < cfg.iou_thresholds.size(); ++t) {
      per_t.push_back(interpolated_ap(list, t, n));
    }
    report.per_object[obj] = std::accumulate(per_t.begin(), per_t.end(), 0.0) / static_cast<double>(per_t.size());
    report.per_threshold[obj] = std::move(per_t);
  }
  double sum = 0.0;
  for (const auto& [_, ap] : report.per_object) {
    sum += ap;
  }
  report.mean_ap = sum / static_cast<double>(report.per_object.size());
  return report;
}

std::string report_to_json(const ApReport& report) {
  nlohmann::ordered_json j;
  j["mean_ap"] = report.mean_ap;
  j["iou_thresholds"] = report.thresholds;
  j["num_detections"] = report.num_detections;
  j["num_ground_truth"] = report.num_ground_truth;
  auto& objs = j["per_object"] = nlohmann::ordered_json::array();
  for (const auto& [obj, ap] : report.per_object) {
    objs.push_back({{"object_id", obj}, {"ap", ap}, {"ap_per_threshold", report.per_threshold.at(obj)}});
  }
  return j.dump(2) + "\n";
}

std::string report_to_table(const ApReport& report) {
  std::string out = fmt::format("{:>10}  {:>8}\n", "object_id", "AP");
  for (const auto& [obj, ap] : report.per_object) {
    out += fmt::format("{:>10}  {:>8.4f}\n", obj, ap);
  }
  out += fmt::format("{:>10}  {:>8.4f}\n", "mean", report.mean_ap);
  return out;
}

StageTiming make_stage_timing(double preprocessing_s, double proposal_matching_s) {
  return {preprocessing_s, proposal_matching_s, preprocessing_s + proposal_matching_s};
}

BenchmarkReport summarize_timings(std::vector<FrameTiming> rows) {
  BenchmarkReport report;
  report.rows = std::move(rows);
  if (report.rows.empty()) {
    return report;
  }
  double pre = 0.0;
  double pm = 0.0;
  for (const auto& r : report.rows) {
    pre += r.timing.preprocessing_s;
    pm += r.timing.proposal_matching_s;
  }
  const double n = static_cast<double>(report.rows.size());
  report.mean = make_stage_timing(pre / n, pm / n);
  return report;
}

std::string benchmark_to_json(const BenchmarkReport& report) {
  auto timing_json = [](const StageTiming& t) {
    return nlohmann::ordered_json{{kBenchmarkColumns[0], t.preprocessing_s},
                                  {kBenchmarkColumns[1], t.proposal_matching_s},
                                  {kBenchmarkColumns[2], t.total_s}};
  };
  nlohmann::ordered_json j;
  j["unit"] = "s";
  j["columns"] = {kBenchmarkColumns[0], kBenchmarkColumns[1], kBenchmarkColumns[2]};
  j["frames"] = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    auto row = timing_json(r.timing);
    row["scene_id"] = r.scene_id;
    row["image_id"] = r.image_id;
    j["frames"].push_back(std::move(row));
  }
  j["mean"] = report.mean ? timing_json(*report.mean) : nlohmann::ordered_json(nullptr);
  return j.dump(2) + "\n";
}

std::string benchmark_to_table(const BenchmarkReport& report) {
  constexpr auto kRow = "{:<16}{:>16}{:>22}{:>12}\n";
  std::string out = fmt::format("{:<16}{:^50}\n", "", "Runtime (s)");
  out += fmt::format(kRow, "Frame", kBenchmarkColumns[0], kBenchmarkColumns[1], kBenchmarkColumns[2]);
  auto cells = [&](const std::string& label, const StageTiming& t) {
    return fmt::format("{:<16}{:>16.4f}{:>22.4f}{:>12.4f}\n", label, t.preprocessing_s,
                       t.proposal_matching_s, t.total_s);
  };
  for (const auto& r : report.rows) {
    out += cells(fmt::format("{:06d}/{:06d}", r.scene_id, r.image_id), r.timing);
  }
  if (report.mean) {
    out += cells("mean", *report.mean);
  }
  return out;
}

}  // namespace bindet
