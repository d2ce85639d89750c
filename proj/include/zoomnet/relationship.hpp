#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "zoomnet/roi.hpp"

namespace zoomnet {

struct LabeledBox {
  std::string label;
  RoiBox box;
  friend bool operator==(const LabeledBox&, const LabeledBox&) = default;
};

/// One gold ⟨subject, predicate, object⟩ annotation.
struct RelationshipInstance {
  std::string image;
  LabeledBox subject;
  std::string predicate;
  LabeledBox object;
  friend bool operator==(const RelationshipInstance&, const RelationshipInstance&) = default;
};

struct ScoredBox {
  std::string label;
  RoiBox box;
  double prob = 0;
};

struct ScoredLabel {
  std::string label;
  double prob = 0;
};

/// One scored triplet; score is the product of the three probabilities.
struct RankedPrediction {
  std::string image;
  ScoredBox subject;
  ScoredLabel predicate;
  ScoredBox object;
  double score = 0;
};

nlohmann::json to_json(const RelationshipInstance& r);
nlohmann::json to_json(const RankedPrediction& p);
RelationshipInstance instance_from_json(const nlohmann::json& j);
RankedPrediction prediction_from_json(const nlohmann::json& j);

/// Reads a JSON-lines annotation file, validating every box. Errors name
/// the line and field.
std::vector<RelationshipInstance> load_annotations(const std::filesystem::path& path);
void save_annotations(const std::filesystem::path& path, const std::vector<RelationshipInstance>& items);

std::vector<RankedPrediction> load_predictions(const std::filesystem::path& path);
void save_predictions(const std::filesystem::path& path, const std::vector<RankedPrediction>& items);

}  // namespace zoomnet
