#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "zoomnet/eval.hpp"
#include "zoomnet/ihtree.hpp"
#include "zoomnet/model.hpp"
#include "zoomnet/synth.hpp"

namespace zoomnet {

/// Directory holding catalog.json, taxonomy.tsv, lexicon.tsv and
/// exceptions.tsv: $ZOOMNET_RESOURCES when set, else the source tree copy.
std::filesystem::path resource_dir();

/// A generated (or imported) dataset directory.
struct Dataset {
  std::filesystem::path dir;
  DatasetManifest manifest;
  std::vector<RelationshipInstance> instances;

  /// "train", "test" or "all". Throws ConfigError when the manifest has no split.
  std::vector<std::string> split_ids(const std::string& split) const;
  std::vector<RelationshipInstance> split_instances(const std::string& split) const;
  Tensor<float> image(const std::string& id) const;
  std::vector<EncodedImage> encode(const std::string& split, const IHTree& object_tree,
                                   const IHTree& predicate_tree) const;
};

Dataset load_dataset(const std::filesystem::path& dir);

struct TreePair {
  IHTree object;
  IHTree predicate;
  NormalizeDiagnostics object_diagnostics;
  NormalizeDiagnostics predicate_diagnostics;
};

/// Trees over the sorted, de-duplicated labels of `instances`.
TreePair build_trees(const std::vector<RelationshipInstance>& instances, const Lexicon& lex, const Taxonomy& tax,
                     double threshold = kDefaultClusterThreshold);

/// Every ordered pair of distinct annotated boxes of one image, in first
/// appearance order.
std::vector<std::pair<RoiBox, RoiBox>> candidate_pairs(const std::vector<RelationshipInstance>& image_gold);

/// Accuracy on gold boxes plus Rec@N for the three tasks, using the
/// annotated boxes of each image as candidates. With settings.zero_shot
/// the gold set is reduced to triples absent from `train_instances`.
EvalReport evaluate(const Model<float>& model, const IHTree& object_tree, const IHTree& predicate_tree,
                    const Dataset& data, const std::string& split, const EvalSettings& settings,
                    const std::vector<RelationshipInstance>& train_instances,
                    std::vector<RankedPrediction>* predictions = nullptr);

}  // namespace zoomnet
