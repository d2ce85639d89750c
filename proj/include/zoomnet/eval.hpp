#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "zoomnet/relationship.hpp"
#include "zoomnet/roi.hpp"

namespace zoomnet {

double iou(const RoiBox& a, const RoiBox& b);

/// Label indices ordered by descending score; ties go to the lower index.
std::vector<std::size_t> rank_indices(std::span<const double> scores);

/// Per-instance H0 rankings for the three branches.
struct BranchRanking {
  std::vector<std::size_t> subject;
  std::vector<std::size_t> predicate;
  std::vector<std::size_t> object;
};

/// Gold H0 indices; std::nullopt marks a label outside the vocabulary,
/// which never counts as a hit.
struct GoldTriple {
  std::optional<std::size_t> subject;
  std::optional<std::size_t> predicate;
  std::optional<std::size_t> object;
};

enum class AccMode { Joint, Mean };

struct AccResult {
  double subject = 0;
  double predicate = 0;
  double object = 0;
  double relationship_joint = 0;
  double relationship_mean = 0;
  std::size_t count = 0;

  double relationship(AccMode mode) const { return mode == AccMode::Joint ? relationship_joint : relationship_mean; }
};

/// Branch Acc@N = fraction of instances whose gold label is in the top N.
/// Joint relationship accuracy needs all three hits on the same instance;
/// mean mode averages the three branch accuracies. Empty input gives zeros.
AccResult acc_at_n(std::span<const BranchRanking> ranks, std::span<const GoldTriple> gold, std::size_t n);

/// Greedy triplet NMS: candidates are visited by descending score (stable),
/// and one is dropped when a kept candidate has the same label triple and
/// both subject and object IoU reach the threshold.
std::vector<RankedPrediction> triplet_nms(const std::vector<RankedPrediction>& cands, double iou_thresh = 0.5);

enum class RecallTask { Predicate, Phrase, Relationship };

std::string to_string(RecallTask task);
RecallTask parse_recall_task(const std::string& name);

/// True when `pred` may cover `gold` under `task`.
bool triplet_matches(const RankedPrediction& pred, const RelationshipInstance& gold, RecallTask task,
                     double iou_thresh = 0.5);

struct RecallCount {
  std::size_t covered = 0;
  std::size_t total = 0;
  double recall() const { return total == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(total); }
};

/// Number of gold instances of one image covered by its top-N predictions.
/// Predictions are visited by descending score and each covers at most one
/// gold instance; a later prediction may displace an earlier claim along an
/// augmenting path, so the count is the largest one-to-one cover.
std::size_t covered_in_image(const std::vector<RankedPrediction>& preds, const std::vector<RelationshipInstance>& gold,
                             std::size_t n, RecallTask task, double iou_thresh = 0.5);

/// Micro-averaged Rec@N over every image that has gold annotations.
/// Predictions are expected to be limited to top-k predicates per pair
/// already. The predicate task requires every prediction to reuse gold boxes
/// of its image; otherwise ConfigError.
RecallCount rec_at_n(const std::vector<RankedPrediction>& preds, const std::vector<RelationshipInstance>& gold,
                     std::size_t n, RecallTask task, double iou_thresh = 0.5);

using LabelTriple = std::tuple<std::string, std::string, std::string>;

std::set<LabelTriple> label_triples(const std::vector<RelationshipInstance>& items);

/// Test instances whose label triple never occurs in `train`.
std::vector<RelationshipInstance> zero_shot_filter(const std::vector<RelationshipInstance>& test,
                                                   const std::set<LabelTriple>& train);

/// Directed graph: unique (label, box) entities as nodes sorted by
/// (label, box), one edge per prediction.
nlohmann::json scene_graph(const std::vector<RankedPrediction>& preds);
void export_scene_graph(const std::vector<RankedPrediction>& preds, const std::filesystem::path& path);

struct EvalSettings {
  std::vector<std::size_t> acc_n{1, 5};
  std::vector<std::size_t> rec_n{50, 100};
  std::size_t k = 1;
  double iou_thresh = 0.5;
  bool nms = true;
  double nms_iou = 0.5;
  bool zero_shot = false;
  AccMode acc_mode = AccMode::Joint;

  nlohmann::json to_json() const;
};

struct EvalReport {
  EvalSettings settings;
  std::map<std::size_t, AccResult> acc;  // N -> accuracies
  // task -> N -> counts
  std::map<RecallTask, std::map<std::size_t, RecallCount>> rec;
  std::size_t gold_instances = 0;
  std::size_t predictions = 0;
  nlohmann::json provenance;

  nlohmann::json to_json() const;
  std::string table() const;
};

}  // namespace zoomnet
