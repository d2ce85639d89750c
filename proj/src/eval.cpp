#include "zoomnet/eval.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "zoomnet/error.hpp"

namespace zoomnet {

using nlohmann::json;

double iou(const RoiBox& a, const RoiBox& b) {
  const double iw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double ih = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

std::vector<std::size_t> rank_indices(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

AccResult acc_at_n(std::span<const BranchRanking> ranks, std::span<const GoldTriple> gold, std::size_t n) {
  if (n < 1) throw ConfigError("Acc@N needs N >= 1");
  if (ranks.size() != gold.size()) {
    throw ContractError("acc_at_n: " + std::to_string(ranks.size()) + " rankings for " + std::to_string(gold.size()) +
                        " gold instances");
  }
  AccResult r;
  r.count = gold.size();
  if (gold.empty()) return r;
  auto hit = [n](const std::vector<std::size_t>& order, const std::optional<std::size_t>& g) {
    if (!g) return false;
    const auto end = order.begin() + static_cast<std::ptrdiff_t>(std::min(n, order.size()));
    return std::find(order.begin(), end, *g) != end;
  };
  std::size_t s = 0, p = 0, o = 0, joint = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool hs = hit(ranks[i].subject, gold[i].subject);
    const bool hp = hit(ranks[i].predicate, gold[i].predicate);
    const bool ho = hit(ranks[i].object, gold[i].object);
    s += hs;
    p += hp;
    o += ho;
    joint += hs && hp && ho;
  }
  const double total = static_cast<double>(gold.size());
  r.subject = s / total;
  r.predicate = p / total;
  r.object = o / total;
  r.relationship_joint = joint / total;
  r.relationship_mean = (r.subject + r.predicate + r.object) / 3.0;
  return r;
}

namespace {

bool same_labels(const RankedPrediction& a, const RankedPrediction& b) {
  return a.subject.label == b.subject.label && a.predicate.label == b.predicate.label &&
         a.object.label == b.object.label;
}

std::vector<std::size_t> by_score(const std::vector<RankedPrediction>& preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
  return order;
}

}  // namespace

std::vector<RankedPrediction> triplet_nms(const std::vector<RankedPrediction>& cands, double iou_thresh) {
  std::vector<RankedPrediction> kept;
  for (auto i : by_score(cands)) {
    const auto& c = cands[i];
    bool suppressed = false;
    for (const auto& k : kept) {
      if (k.image == c.image && same_labels(k, c) && iou(k.subject.box, c.subject.box) >= iou_thresh &&
          iou(k.object.box, c.object.box) >= iou_thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(c);
  }
  return kept;
}

std::string to_string(RecallTask task) {
  switch (task) {
    case RecallTask::Predicate: return "predicate";
    case RecallTask::Phrase: return "phrase";
    case RecallTask::Relationship: return "relationship";
  }
  return "?";
}

RecallTask parse_recall_task(const std::string& name) {
  if (name == "predicate") return RecallTask::Predicate;
  if (name == "phrase") return RecallTask::Phrase;
  if (name == "relationship") return RecallTask::Relationship;
  throw ConfigError("unknown recall task '" + name + "' (expected predicate, phrase or relationship)");
}

bool triplet_matches(const RankedPrediction& pred, const RelationshipInstance& gold, RecallTask task,
                     double iou_thresh) {
  if (pred.subject.label != gold.subject.label || pred.predicate.label != gold.predicate ||
      pred.object.label != gold.object.label) {
    return false;
  }
  switch (task) {
    case RecallTask::Predicate:
      return pred.subject.box == gold.subject.box && pred.object.box == gold.object.box;
    case RecallTask::Phrase:
      return iou(union_box(pred.subject.box, pred.object.box), union_box(gold.subject.box, gold.object.box)) >=
             iou_thresh;
    case RecallTask::Relationship:
      return iou(pred.subject.box, gold.subject.box) >= iou_thresh &&
             iou(pred.object.box, gold.object.box) >= iou_thresh;
  }
  return false;
}

std::size_t covered_in_image(const std::vector<RankedPrediction>& preds, const std::vector<RelationshipInstance>& gold,
                             std::size_t n, RecallTask task, double iou_thresh) {
  auto order = by_score(preds);
  if (order.size() > n) order.resize(n);
  std::vector<std::vector<std::size_t>> edges(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t g = 0; g < gold.size(); ++g) {
      if (triplet_matches(preds[order[i]], gold[g], task, iou_thresh)) edges[i].push_back(g);
    }
  }
  constexpr std::size_t kFree = static_cast<std::size_t>(-1);
  std::vector<std::size_t> owner(gold.size(), kFree);
  std::vector<char> seen;
  std::function<bool(std::size_t)> claim = [&](std::size_t i) {
    for (auto g : edges[i]) {
      if (seen[g]) continue;
      seen[g] = 1;
      if (owner[g] == kFree || claim(owner[g])) {
        owner[g] = i;
        return true;
      }
    }
    return false;
  };
  std::size_t covered = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    seen.assign(gold.size(), 0);
    covered += claim(i);
  }
  return covered;
}

RecallCount rec_at_n(const std::vector<RankedPrediction>& preds, const std::vector<RelationshipInstance>& gold,
                     std::size_t n, RecallTask task, double iou_thresh) {
  if (n < 1) throw ConfigError("Rec@N needs N >= 1");
  std::map<std::string, std::vector<RelationshipInstance>> gold_by;
  std::map<std::string, std::vector<RankedPrediction>> pred_by;
  for (const auto& g : gold) gold_by[g.image].push_back(g);
  for (const auto& p : preds) pred_by[p.image].push_back(p);

  if (task == RecallTask::Predicate) {
    for (const auto& [image, ps] : pred_by) {
      auto it = gold_by.find(image);
      for (const auto& p : ps) {
        auto known = [&](const RoiBox& b) {
          if (it == gold_by.end()) return false;
          return std::any_of(it->second.begin(), it->second.end(),
                             [&](const RelationshipInstance& g) { return g.subject.box == b || g.object.box == b; });
        };
        if (!known(p.subject.box) || !known(p.object.box)) {
          throw ConfigError("predicate task needs gold boxes, but image '" + image +
                            "' has a prediction on a box that is not annotated");
        }
      }
    }
  }

  RecallCount out;
  out.total = gold.size();
  for (const auto& [image, gs] : gold_by) {
    auto it = pred_by.find(image);
    if (it == pred_by.end()) continue;
    out.covered += covered_in_image(it->second, gs, n, task, iou_thresh);
  }
  return out;
}

std::set<LabelTriple> label_triples(const std::vector<RelationshipInstance>& items) {
  std::set<LabelTriple> out;
  for (const auto& r : items) out.emplace(r.subject.label, r.predicate, r.object.label);
  return out;
}

std::vector<RelationshipInstance> zero_shot_filter(const std::vector<RelationshipInstance>& test,
                                                   const std::set<LabelTriple>& train) {
  std::vector<RelationshipInstance> out;
  for (const auto& r : test) {
    if (!train.count({r.subject.label, r.predicate, r.object.label})) out.push_back(r);
  }
  return out;
}

json scene_graph(const std::vector<RankedPrediction>& preds) {
  using Entity = std::pair<std::string, RoiBox>;
  std::set<Entity> entities;
  for (const auto& p : preds) {
    entities.emplace(p.subject.label, p.subject.box);
    entities.emplace(p.object.label, p.object.box);
  }
  std::map<Entity, std::size_t> id;
  json nodes = json::array();
  for (const auto& e : entities) {
    id[e] = id.size();
    nodes.push_back({{"id", id[e]}, {"label", e.first}, {"box", {e.second.x0, e.second.y0, e.second.x1, e.second.y1}}});
  }
  json edges = json::array();
  for (auto i : by_score(preds)) {
    const auto& p = preds[i];
    edges.push_back({{"src", id.at({p.subject.label, p.subject.box})},
                     {"dst", id.at({p.object.label, p.object.box})},
                     {"predicate", p.predicate.label},
                     {"score", p.score}});
  }
  return {{"nodes", nodes}, {"edges", edges}};
}

void export_scene_graph(const std::vector<RankedPrediction>& preds, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write scene graph " + path.string());
  os << scene_graph(preds).dump(2) << '\n';
  if (!os) throw IoError("failed writing scene graph " + path.string());
}

json EvalSettings::to_json() const {
  return {{"acc_n", acc_n},
          {"rec_n", rec_n},
          {"k", k},
          {"iou_thresh", iou_thresh},
          {"nms", nms},
          {"nms_iou", nms_iou},
          {"zero_shot", zero_shot},
          {"acc_mode", acc_mode == AccMode::Joint ? "joint" : "mean"},
          {"recall_average", "micro"}};
}

json EvalReport::to_json() const {
  json j;
  j["settings"] = settings.to_json();
  j["counts"] = {{"gold_instances", gold_instances}, {"predictions", predictions}};
  j["acc"] = json::object();
  for (const auto& [n, a] : acc) {
    j["acc"]["@" + std::to_string(n)] = {{"subject", a.subject},
                                         {"predicate", a.predicate},
                                         {"object", a.object},
                                         {"relationship_joint", a.relationship_joint},
                                         {"relationship_mean", a.relationship_mean},
                                         {"relationship", a.relationship(settings.acc_mode)},
                                         {"count", a.count}};
  }
  j["rec"] = json::object();
  for (const auto& [task, by_n] : rec) {
    json t = json::object();
    for (const auto& [n, c] : by_n) t["@" + std::to_string(n)] = {{"recall", c.recall()}, {"covered", c.covered}, {"total", c.total}};
    j["rec"][to_string(task)] = t;
  }
  if (!provenance.is_null()) j["provenance"] = provenance;
  return j;
}

std::string EvalReport::table() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << std::left << std::setw(10) << "metric" << std::right << std::setw(10) << "subject" << std::setw(10)
     << "predicate" << std::setw(10) << "object" << std::setw(10) << "rel" << '\n';
  for (const auto& [n, a] : acc) {
    os << std::left << std::setw(10) << ("Acc@" + std::to_string(n)) << std::right << std::setw(10)
       << 100 * a.subject << std::setw(10) << 100 * a.predicate << std::setw(10) << 100 * a.object << std::setw(10)
       << 100 * a.relationship(settings.acc_mode) << '\n';
  }
  if (!rec.empty()) {
    os << '\n' << std::left << std::setw(14) << "task";
    for (auto n : settings.rec_n) os << std::right << std::setw(10) << ("Rec@" + std::to_string(n));
    os << '\n';
    for (const auto& [task, by_n] : rec) {
      os << std::left << std::setw(14) << to_string(task);
      for (auto n : settings.rec_n) {
        auto it = by_n.find(n);
        os << std::right << std::setw(10) << (it == by_n.end() ? 0.0 : 100 * it->second.recall());
      }
      os << '\n';
    }
  }
  os << "\nrelationship accuracy: " << (settings.acc_mode == AccMode::Joint ? "joint" : "mean")
     << "; recall: micro-averaged over " << gold_instances << " gold instances\n";
  return os.str();
}

}  // namespace zoomnet
