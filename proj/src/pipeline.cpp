#include "zoomnet/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <set>

#include "zoomnet/error.hpp"

#ifndef ZOOMNET_DEFAULT_RESOURCES
#define ZOOMNET_DEFAULT_RESOURCES "resources"
#endif

namespace zoomnet {

std::filesystem::path resource_dir() {
  if (const char* env = std::getenv("ZOOMNET_RESOURCES"); env && *env) return env;
  return ZOOMNET_DEFAULT_RESOURCES;
}

std::vector<std::string> Dataset::split_ids(const std::string& split) const {
  if (split == "all") return manifest.image_ids;
  if (!manifest.split) throw ConfigError("dataset " + dir.string() + " has no train/test split");
  if (split == "train") return manifest.split->train;
  if (split == "test") return manifest.split->test;
  throw ConfigError("unknown split '" + split + "' (expected train, test or all)");
}

std::vector<RelationshipInstance> Dataset::split_instances(const std::string& split) const {
  const auto ids = split_ids(split);
  const std::set<std::string> keep(ids.begin(), ids.end());
  std::vector<RelationshipInstance> out;
  for (const auto& r : instances) {
    if (keep.count(r.image)) out.push_back(r);
  }
  return out;
}

Tensor<float> Dataset::image(const std::string& id) const {
  for (std::size_t i = 0; i < manifest.image_ids.size(); ++i) {
    if (manifest.image_ids[i] == id) return read_ppm(dir / manifest.images[i]).to_tensor();
  }
  throw LookupError("image '" + id + "' is not listed in " + (dir / "manifest.json").string());
}

std::vector<EncodedImage> Dataset::encode(const std::string& split, const IHTree& object_tree,
                                          const IHTree& predicate_tree) const {
  std::map<std::string, std::filesystem::path> paths;
  for (std::size_t i = 0; i < manifest.image_ids.size(); ++i) paths[manifest.image_ids[i]] = dir / manifest.images[i];
  return encode_images(split_ids(split), instances, object_tree, predicate_tree,
                       [&](const std::string& id) { return read_ppm(paths.at(id)).to_tensor(); });
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset d;
  d.dir = dir;
  d.manifest = load_manifest(dir / "manifest.json");
  d.instances = load_annotations(dir / d.manifest.annotations);
  return d;
}

TreePair build_trees(const std::vector<RelationshipInstance>& instances, const Lexicon& lex, const Taxonomy& tax,
                     double threshold) {
  std::set<std::string> objects, predicates;
  for (const auto& r : instances) {
    objects.insert(r.subject.label);
    objects.insert(r.object.label);
    predicates.insert(r.predicate);
  }
  TreePair t;
  t.object = build_object_tree({objects.begin(), objects.end()}, lex, tax, threshold, true, &t.object_diagnostics);
  t.predicate = build_predicate_tree({predicates.begin(), predicates.end()}, lex, &t.predicate_diagnostics);
  return t;
}

std::vector<std::pair<RoiBox, RoiBox>> candidate_pairs(const std::vector<RelationshipInstance>& image_gold) {
  std::vector<RoiBox> boxes;
  auto add = [&](const RoiBox& b) {
    if (std::find(boxes.begin(), boxes.end(), b) == boxes.end()) boxes.push_back(b);
  };
  for (const auto& r : image_gold) {
    add(r.subject.box);
    add(r.object.box);
  }
  std::vector<std::pair<RoiBox, RoiBox>> out;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    for (std::size_t j = 0; j < boxes.size(); ++j) {
      if (i != j) out.emplace_back(boxes[i], boxes[j]);
    }
  }
  return out;
}

EvalReport evaluate(const Model<float>& model, const IHTree& object_tree, const IHTree& predicate_tree,
                    const Dataset& data, const std::string& split, const EvalSettings& settings,
                    const std::vector<RelationshipInstance>& train_instances,
                    std::vector<RankedPrediction>* predictions) {
  EvalReport report;
  report.settings = settings;
  const auto ids = data.split_ids(split);
  const auto all_gold = data.split_instances(split);
  const auto gold = settings.zero_shot ? zero_shot_filter(all_gold, label_triples(train_instances)) : all_gold;
  report.gold_instances = gold.size();

  // Accuracy on gold boxes.
  std::map<std::string, std::vector<RelationshipInstance>> gold_by, boxes_by;
  for (const auto& r : gold) gold_by[r.image].push_back(r);
  for (const auto& r : all_gold) boxes_by[r.image].push_back(r);
  std::vector<std::string> gold_ids;
  for (const auto& id : ids) {
    if (gold_by.count(id)) gold_ids.push_back(id);
  }
  auto encoded = encode_images(gold_ids, gold, object_tree, predicate_tree,
                               [&](const std::string& id) { return data.image(id); });
  const auto ranks = rank_instances(model, encoded);
  const auto golds = gold_triples(encoded);
  for (auto n : settings.acc_n) report.acc[n] = acc_at_n(ranks, golds, n);

  // Recall with the annotated boxes as candidates.
  std::vector<RankedPrediction> preds;
  for (std::size_t i = 0; i < gold_ids.size(); ++i) {
    const auto& id = gold_ids[i];
    auto p = predict(model, id, encoded[i].image, candidate_pairs(boxes_by[id]), settings.k, object_tree,
                     predicate_tree);
    if (settings.nms) p = triplet_nms(p, settings.nms_iou);
    preds.insert(preds.end(), p.begin(), p.end());
  }
  report.predictions = preds.size();
  // The predicate task only sees pairs built from boxes of the scored gold set.
  std::vector<RankedPrediction> on_gold;
  for (const auto& p : preds) {
    const auto& g = gold_by[p.image];
    auto known = [&](const RoiBox& b) {
      return std::any_of(g.begin(), g.end(), [&](const auto& r) { return r.subject.box == b || r.object.box == b; });
    };
    if (known(p.subject.box) && known(p.object.box)) on_gold.push_back(p);
  }
  for (auto task : {RecallTask::Predicate, RecallTask::Phrase, RecallTask::Relationship}) {
    const auto& scored = task == RecallTask::Predicate ? on_gold : preds;
    for (auto n : settings.rec_n) report.rec[task][n] = rec_at_n(scored, gold, n, task, settings.iou_thresh);
  }
  if (predictions) *predictions = std::move(preds);
  return report;
}

}  // namespace zoomnet
