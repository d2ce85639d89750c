// zoomnet: data generation, tree building, training, evaluation, prediction,
// gradient checks and module benchmarks from one executable.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "zoomnet/checkpoint.hpp"
#include "zoomnet/error.hpp"
#include "zoomnet/eval.hpp"
#include "zoomnet/ihtree.hpp"
#include "zoomnet/model.hpp"
#include "zoomnet/pipeline.hpp"
#include "zoomnet/relationship.hpp"
#include "zoomnet/rng.hpp"
#include "zoomnet/synth.hpp"
#include "zoomnet/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace zoomnet;

namespace {

// ---------------------------------------------------------------------------
// Config files. Accepts a plain JSON document ({"train": {"epochs": 5}, ...},
// top-level scalars address global options), any JSON artifact carrying a
// "provenance" block, or a checkpoint whose header line carries one. The
// provenance replays the producing command's options.

void add_items(std::vector<CLI::ConfigItem>& out, const std::vector<std::string>& parents, const json& section) {
  for (const auto& [key, value] : section.items()) {
    CLI::ConfigItem item;
    item.parents = parents;
    item.name = key;
    auto scalar = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    if (value.is_array()) {
      for (const auto& v : value) item.inputs.push_back(scalar(v));
    } else {
      item.inputs.push_back(scalar(value));
    }
    out.push_back(std::move(item));
  }
}

class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool, bool, std::string) const override {
    json j;
    for (const auto* opt : app->get_options()) {
      if (opt->get_lnames().empty() || opt->count() == 0) continue;
      j[opt->get_lnames().front()] = opt->results();
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) {
      // Checkpoints: one JSON header line followed by binary payload.
      doc = json::parse(text.substr(0, text.find('\n')), nullptr, false);
      if (doc.is_discarded() || !doc.is_object()) throw CLI::ConversionError("config file is neither JSON nor a checkpoint");
    }
    if (!doc.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    if (doc.value("format", std::string{}) == kCheckpointFormat && doc.contains("meta")) doc = doc["meta"];
    std::vector<CLI::ConfigItem> items;
    if (doc.contains("provenance") && doc["provenance"].is_object() && doc["provenance"].contains("run_config")) {
      const auto& p = doc["provenance"];
      add_items(items, {p.at("command").get<std::string>()}, p.at("run_config"));
      return items;
    }
    for (const auto& [key, value] : doc.items()) {
      if (value.is_object()) {
        add_items(items, {key}, value);
      } else {
        add_items(items, {}, json{{key, value}});
      }
    }
    return items;
  }
};

// ---------------------------------------------------------------------------
// Run configuration captured from the parsed options of one subcommand.
// Output locations and worker counts are left out so that replaying the
// configuration elsewhere yields byte-identical artifacts.

const std::set<std::string> kNotRecorded{"out", "metrics", "report", "predictions", "scene-graphs", "workers"};

json run_config_of(const CLI::App* sub) {
  json cfg = json::object();
  for (const auto* opt : sub->get_options()) {
    if (opt->get_lnames().empty()) continue;
    const auto& name = opt->get_lnames().front();
    if (name == "help" || kNotRecorded.count(name)) continue;
    std::vector<std::string> values;
    if (opt->count() > 0) {
      values = opt->results();
    } else if (const auto& d = opt->get_default_str(); !d.empty() && d != "[]" && d != "{}") {
      values = {opt->get_default_str()};
    } else {
      continue;
    }
    if (opt->get_expected_max() > 1 || opt->get_items_expected_max() > 1) {
      // Vector options keep their list shape; defaults arrive as "[a,b]".
      if (opt->count() == 0) {
        std::string s = values.front();
        values.clear();
        if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
        std::stringstream ss(s);
        for (std::string part; std::getline(ss, part, ',');) values.push_back(part);
      }
      cfg[name] = values;
    } else {
      cfg[name] = values.back();
    }
  }
  return cfg;
}

json provenance(const CLI::App* sub, std::optional<std::uint64_t> seed) {
  const json cfg = run_config_of(sub);
  json p;
  p["tool_version"] = ZOOMNET_VERSION;
  p["command"] = sub->get_name();
  p["run_config"] = cfg;
  p["config_hash"] = hash_hex(fnv1a(cfg.dump()));
  p["seed"] = seed ? json(*seed) : json(nullptr);
  return p;
}

// ---------------------------------------------------------------------------
// Helpers.

struct Context {
  fs::path workdir = ".";
  bool quiet = false;

  fs::path path(const std::string& p) const {
    const fs::path q(p);
    return q.is_absolute() ? q : workdir / q;
  }
  fs::path resource(const std::string& given, const char* file) const {
    return given.empty() ? resource_dir() / file : path(given);
  }
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::pair<IHTree, IHTree> load_trees(const fs::path& dir) {
  return {load_tree(dir / "object_tree.json"), load_tree(dir / "predicate_tree.json")};
}

std::vector<RoiBox> parse_boxes(const std::string& spec) {
  std::vector<RoiBox> boxes;
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, ';');) {
    if (item.empty()) continue;
    double v[4];
    if (std::sscanf(item.c_str(), "%lf,%lf,%lf,%lf", &v[0], &v[1], &v[2], &v[3]) != 4)
      throw ConfigError("--boxes: cannot parse '" + item + "' (expected x0,y0,x1,y1)");
    const RoiBox b{v[0], v[1], v[2], v[3]};
    if (!(b.x0 >= 0 && b.y0 >= 0 && b.x1 <= 1 && b.y1 <= 1 && b.x0 < b.x1 && b.y0 < b.y1))
      throw ConfigError("--boxes: '" + item + "' is not a normalized box with x0 < x1, y0 < y1");
    boxes.push_back(b);
  }
  if (boxes.size() < 2) throw ConfigError("--boxes: need at least two boxes");
  return boxes;
}

void sort_by_score(std::vector<RankedPrediction>& preds) {
  std::stable_sort(preds.begin(), preds.end(),
                   [](const RankedPrediction& a, const RankedPrediction& b) { return a.score > b.score; });
}

// ---------------------------------------------------------------------------
// gen-data

struct GenDataOpts {
  std::string out = "data";
  std::size_t count = 500;
  std::uint64_t seed = 0;
  double noise = 0.0;
  std::string catalog;
  double split_ratio = 0.8;
  std::optional<std::uint64_t> split_seed;
  std::size_t workers = 1;
};

int cmd_gen_data(const Context& ctx, const GenDataOpts& o, const CLI::App* sub) {
  const auto catalog = SceneCatalog::load(ctx.resource(o.catalog, "catalog.json"));
  const fs::path dir = ctx.path(o.out);
  DatasetConfig cfg{o.count, o.seed, o.noise};
  auto manifest = generate_dataset(cfg, catalog, dir, std::max<std::size_t>(1, o.workers));
  const auto instances = load_annotations(dir / manifest.annotations);
  manifest.split = split_dataset(manifest, instances, o.split_ratio, o.split_seed.value_or(o.seed));
  manifest.provenance = provenance(sub, o.seed);
  save_manifest(dir / "manifest.json", manifest);

  std::map<std::string, std::size_t> per_predicate;
  for (const auto& r : instances) per_predicate[r.predicate]++;
  if (!ctx.quiet) {
    std::cout << "dataset      " << dir.string() << "\n"
              << "images       " << manifest.image_ids.size() << " (train " << manifest.split->train.size()
              << ", test " << manifest.split->test.size() << ")\n"
              << "instances    " << instances.size() << "\n"
              << "labels       " << per_predicate.size() << " predicate surface forms\n"
              << "annotations  " << manifest.annotations_hash << "\n"
              << "config_hash  " << manifest.config_hash << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// build-trees

struct BuildTreesOpts {
  std::string dataset = "data";
  std::string out = "trees";
  std::string split = "train";
  std::string taxonomy;
  std::string lexicon;
  std::string exceptions;
  double threshold = kDefaultClusterThreshold;
};

void print_diagnostics(const char* what, const NormalizeDiagnostics& d) {
  std::map<std::string, std::size_t> counts;
  for (const auto& l : d.unresolved_labels) counts[l]++;
  std::cout << what << ": " << d.unresolved << " unresolved";
  if (d.multi_verb) std::cout << ", " << d.multi_verb << " with several verbs";
  std::cout << "\n";
  for (const auto& [label, n] : counts) std::cout << "  unknown keyword in '" << label << "' x" << n << "\n";
}

int cmd_build_trees(const Context& ctx, const BuildTreesOpts& o, const CLI::App* sub) {
  const auto data = load_dataset(ctx.path(o.dataset));
  const auto tax = Taxonomy::load(ctx.resource(o.taxonomy, "taxonomy.tsv"));
  const auto lex = Lexicon::load(ctx.resource(o.lexicon, "lexicon.tsv"), ctx.resource(o.exceptions, "exceptions.tsv"));
  auto trees = build_trees(data.split_instances(o.split), lex, tax, o.threshold);
  const auto prov = provenance(sub, std::nullopt);
  trees.object.provenance = prov;
  trees.predicate.provenance = prov;
  const fs::path dir = ctx.path(o.out);
  ensure_dir(dir);
  save_tree(trees.object, dir / "object_tree.json");
  save_tree(trees.predicate, dir / "predicate_tree.json");

  json report;
  report["classes"] = class_count_report(trees.object, trees.predicate);
  report["diagnostics"] = {
      {"object", {{"unresolved", trees.object_diagnostics.unresolved},
                  {"labels", trees.object_diagnostics.unresolved_labels}}},
      {"predicate", {{"unresolved", trees.predicate_diagnostics.unresolved},
                     {"multi_verb", trees.predicate_diagnostics.multi_verb},
                     {"labels", trees.predicate_diagnostics.unresolved_labels}}}};
  report["provenance"] = prov;
  write_json(dir / "class_counts.json", report);
  if (!ctx.quiet) {
    std::cout << class_count_table(trees.object, trees.predicate);
    print_diagnostics("object labels", trees.object_diagnostics);
    print_diagnostics("predicate labels", trees.predicate_diagnostics);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string dataset = "data";
  std::string trees = "trees";
  std::string out = "model.ckpt";
  std::string metrics = "metrics.jsonl";
  std::string val_split = "test";
  std::string module = "sca";
  std::size_t stacks = 2;
  std::size_t appearance_convs = 2;
  std::string fusion = "single";
  std::size_t fusion_convs = 1;
  std::string label_levels = "full";
  std::vector<std::size_t> trunk_channels{8, 16, 32};
  std::vector<std::size_t> trunk_strides{2, 2, 1};
  std::size_t pooled = 8;
  double alpha = 1, beta = 1, gamma = 1;
  double lr = 0.001, momentum = 0.9;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  bool freeze_trunk = false;
  std::size_t pairs_per_image = 0;
  std::vector<std::string> sweep;
};

ModelConfig model_config(const TrainOpts& o) {
  ModelConfig c;
  c.trunk_channels = o.trunk_channels;
  c.trunk_strides = o.trunk_strides;
  c.pooled = o.pooled;
  c.interaction = parse_interaction_kind(o.module);
  c.stacks = o.stacks;
  c.appearance_convs = o.appearance_convs;
  c.fusion = parse_fusion_mode(o.fusion);
  c.fusion_convs = o.fusion_convs;
  c.label_levels = parse_label_levels(o.label_levels);
  c.alpha = o.alpha;
  c.beta = o.beta;
  c.gamma = o.gamma;
  c.lr = o.lr;
  c.momentum = o.momentum;
  c.epochs = o.epochs;
  c.seed = o.seed;
  c.freeze_trunk = o.freeze_trunk;
  c.pairs_per_image = o.pairs_per_image;
  c.validate();
  return c;
}

struct SweepAxis {
  std::string key;  // ModelConfig field name
  std::vector<json> values;
};

std::vector<SweepAxis> parse_sweep(const std::vector<std::string>& specs) {
  static const std::set<std::string> allowed{"alpha", "beta",  "gamma",  "lr",           "momentum",
                                             "epochs", "seed", "stacks", "label_levels", "interaction",
                                             "module", "fusion", "fusion_convs", "pairs_per_image"};
  std::vector<SweepAxis> axes;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
      throw ConfigError("--sweep: expected key=v1,v2,... but got '" + spec + "'");
    SweepAxis axis;
    axis.key = spec.substr(0, eq);
    std::replace(axis.key.begin(), axis.key.end(), '-', '_');
    if (axis.key == "module") axis.key = "interaction";
    if (!allowed.count(axis.key)) throw ConfigError("--sweep: '" + axis.key + "' cannot be swept");
    std::stringstream ss(spec.substr(eq + 1));
    for (std::string v; std::getline(ss, v, ',');) {
      const json parsed = json::parse(v, nullptr, false);
      axis.values.push_back(parsed.is_discarded() || parsed.is_string() ? json(v) : parsed);
    }
    axes.push_back(std::move(axis));
  }
  return axes;
}

struct TrainedModel {
  Model<float> model;
  std::vector<EpochMetrics> history;
};

TrainedModel train_one(const ModelConfig& cfg, const IHTree& obj, const IHTree& pred,
                       const std::vector<EncodedImage>& train, const std::vector<EncodedImage>& val,
                       const std::function<void(const EpochMetrics&)>& on_epoch) {
  TrainedModel t{build_model<float>(cfg, obj, pred), {}};
  t.history = train_model(t.model, train, val, on_epoch);
  return t;
}

int cmd_train(const Context& ctx, const TrainOpts& o, const CLI::App* sub) {
  const auto base = model_config(o);
  const auto data = load_dataset(ctx.path(o.dataset));
  const auto [obj, pred] = load_trees(ctx.path(o.trees));
  const auto train = data.encode("train", obj, pred);
  const auto val = o.val_split == "none" ? std::vector<EncodedImage>{} : data.encode(o.val_split, obj, pred);
  const auto prov = provenance(sub, o.seed);
  const json extra{{"provenance", prov}, {"dataset_config_hash", data.manifest.config_hash},
                   {"annotations_hash", data.manifest.annotations_hash}};

  if (o.sweep.empty()) {
    std::ofstream metrics;
    const fs::path metrics_path = ctx.path(o.metrics);
    if (!o.metrics.empty()) {
      if (metrics_path.has_parent_path()) ensure_dir(metrics_path.parent_path());
      metrics.open(metrics_path, std::ios::binary);
      if (!metrics) throw IoError("cannot write " + metrics_path.string());
      metrics << json{{"provenance", prov}}.dump() << "\n";
    }
    auto t = train_one(base, obj, pred, train, val, [&](const EpochMetrics& m) {
      if (metrics.is_open()) metrics << m.to_json().dump() << "\n" << std::flush;
      if (!ctx.quiet) std::cout << m.to_json().dump() << std::endl;
    });
    const fs::path out = ctx.path(o.out);
    if (out.has_parent_path()) ensure_dir(out.parent_path());
    save_model(out, t.model, obj, pred, extra);
    if (!ctx.quiet) std::cout << "checkpoint " << out.string() << " (" << t.model.parameter_count() << " parameters)\n";
    return 0;
  }

  // Sweep: cartesian grid over the axes; --out names a directory.
  const auto axes = parse_sweep(o.sweep);
  const fs::path dir = ctx.path(o.out);
  ensure_dir(dir);
  std::vector<std::size_t> idx(axes.size(), 0);
  json cells = json::array();
  const auto train_instances = data.split_instances("train");
  std::ostringstream table;
  char buf[256];
  std::string header;
  for (const auto& a : axes) header += a.key + " ";
  std::snprintf(buf, sizeof buf, "%-24s %8s %8s %8s %8s %10s\n", header.c_str(), "Acc@1 S", "Acc@1 P", "Acc@1 O",
                "Acc@1 R", "Rec@50 R");
  table << buf;
  for (std::size_t cell = 0;; ++cell) {
    json cj = base.to_json();
    json assignment = json::object();
    std::string label;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      cj[axes[a].key] = axes[a].values[idx[a]];
      assignment[axes[a].key] = axes[a].values[idx[a]];
      label += (axes[a].values[idx[a]].is_string() ? axes[a].values[idx[a]].get<std::string>()
                                                   : axes[a].values[idx[a]].dump()) + " ";
    }
    const auto cfg = ModelConfig::from_json(cj);
    cfg.validate();
    auto t = train_one(cfg, obj, pred, train, {}, [&](const EpochMetrics& m) {
      if (!ctx.quiet) std::cout << "[" << label << "] " << m.to_json().dump() << std::endl;
    });
    const auto report = evaluate(t.model, obj, pred, data, "test", EvalSettings{}, train_instances);
    const auto ckpt = dir / ("cell-" + std::to_string(cell) + ".ckpt");
    save_model(ckpt, t.model, obj, pred, extra);
    const auto& acc = report.acc.at(1);
    const double rec50 = report.rec.at(RecallTask::Relationship).at(50).recall();
    cells.push_back({{"cell", cell}, {"assignment", assignment}, {"checkpoint", ckpt.filename().string()},
                     {"acc1_subject", acc.subject}, {"acc1_predicate", acc.predicate}, {"acc1_object", acc.object},
                     {"acc1_relationship", acc.relationship_joint}, {"rec50_relationship", rec50}});
    std::snprintf(buf, sizeof buf, "%-24s %8.2f %8.2f %8.2f %8.2f %10.2f\n", label.c_str(), 100 * acc.subject,
                  100 * acc.predicate, 100 * acc.object, 100 * acc.relationship_joint, 100 * rec50);
    table << buf;
    std::size_t a = 0;
    for (; a < axes.size(); ++a) {
      if (++idx[a] < axes[a].values.size()) break;
      idx[a] = 0;
    }
    if (a == axes.size()) break;
  }
  write_json(dir / "sweep.json", {{"cells", cells}, {"provenance", prov}});
  write_text(dir / "sweep.txt", table.str());
  if (!ctx.quiet) std::cout << table.str();
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
  std::string checkpoint = "model.ckpt";
  std::string dataset = "data";
  std::string split = "test";
  std::string report = "report.json";
  std::string predictions;
  std::size_t k = 1;
  std::vector<std::size_t> acc_n{1, 5};
  std::vector<std::size_t> rec_n{50, 100};
  double iou = 0.5;
  bool nms = true;
  double nms_iou = 0.5;
  bool zero_shot = false;
  std::string acc_mode = "joint";
};

int cmd_eval(const Context& ctx, const EvalOpts& o, const CLI::App* sub) {
  EvalSettings s;
  s.acc_n = o.acc_n;
  s.rec_n = o.rec_n;
  s.k = o.k;
  s.iou_thresh = o.iou;
  s.nms = o.nms;
  s.nms_iou = o.nms_iou;
  s.zero_shot = o.zero_shot;
  if (o.acc_mode == "joint") s.acc_mode = AccMode::Joint;
  else if (o.acc_mode == "mean") s.acc_mode = AccMode::Mean;
  else throw ConfigError("--acc-mode must be joint or mean");
  if (s.k < 1) throw ConfigError("--k must be at least 1");
  for (auto n : s.rec_n) {
    if (n < 1) throw ConfigError("--rec-n values must be at least 1");
  }

  const auto loaded = load_model(ctx.path(o.checkpoint));
  const auto data = load_dataset(ctx.path(o.dataset));
  std::vector<RankedPrediction> preds;
  auto report = evaluate(loaded.model, loaded.object_tree, loaded.predicate_tree, data, o.split, s,
                         data.split_instances("train"), o.predictions.empty() ? nullptr : &preds);
  report.provenance = provenance(sub, loaded.model.config.seed);
  report.provenance["model_config_hash"] = loaded.model.config.hash();
  report.provenance["dataset_config_hash"] = data.manifest.config_hash;

  const fs::path out = ctx.path(o.report);
  write_json(out, report.to_json());
  fs::path txt = out;
  txt.replace_extension(".txt");
  write_text(txt, report.table());
  if (!o.predictions.empty()) {
    sort_by_score(preds);
    save_predictions(ctx.path(o.predictions), preds);
  }
  if (!ctx.quiet) std::cout << report.table();
  return 0;
}

// ---------------------------------------------------------------------------
// predict

struct PredictOpts {
  std::string checkpoint = "model.ckpt";
  std::string dataset;
  std::string split = "test";
  std::string image;
  std::string boxes;
  std::string out = "predictions.jsonl";
  std::string scene_graphs;
  std::size_t k = 1;
  bool nms = true;
  double nms_iou = 0.5;
};

int cmd_predict(const Context& ctx, const PredictOpts& o, const CLI::App*) {
  if (o.dataset.empty() == o.image.empty()) throw ConfigError("predict needs exactly one of --dataset or --image");
  if (o.k < 1) throw ConfigError("--k must be at least 1");
  const auto loaded = load_model(ctx.path(o.checkpoint));
  const auto& obj = loaded.object_tree;
  const auto& pred = loaded.predicate_tree;
  std::vector<std::vector<RankedPrediction>> per_image;

  auto finish = [&](std::vector<RankedPrediction> p) {
    if (o.nms) p = triplet_nms(p, o.nms_iou);
    sort_by_score(p);
    per_image.push_back(std::move(p));
  };
  if (!o.image.empty()) {
    if (o.boxes.empty()) throw ConfigError("--image requires --boxes");
    const auto boxes = parse_boxes(o.boxes);
    std::vector<std::pair<RoiBox, RoiBox>> pairs;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      for (std::size_t j = 0; j < boxes.size(); ++j) {
        if (i != j) pairs.emplace_back(boxes[i], boxes[j]);
      }
    }
    const fs::path img = ctx.path(o.image);
    const auto image = read_ppm(img);
    const auto side = static_cast<int>(loaded.model.config.image_size);
    if (image.width != side || image.height != side)
      throw ConfigError("image " + img.string() + " is " + std::to_string(image.width) + "x" +
                        std::to_string(image.height) + "; the model expects " +
                        std::to_string(loaded.model.config.image_size) + " square");
    finish(predict(loaded.model, img.stem().string(), image.to_tensor(), pairs, o.k, obj, pred));
  } else {
    const auto data = load_dataset(ctx.path(o.dataset));
    std::map<std::string, std::vector<RelationshipInstance>> by_image;
    for (const auto& r : data.split_instances(o.split)) by_image[r.image].push_back(r);
    for (const auto& id : data.split_ids(o.split)) {
      const auto it = by_image.find(id);
      if (it == by_image.end()) continue;
      finish(predict(loaded.model, id, data.image(id), candidate_pairs(it->second), o.k, obj, pred));
    }
  }

  std::vector<RankedPrediction> all;
  for (const auto& p : per_image) all.insert(all.end(), p.begin(), p.end());
  save_predictions(ctx.path(o.out), all);
  if (!o.scene_graphs.empty()) {
    const fs::path dir = ctx.path(o.scene_graphs);
    ensure_dir(dir);
    for (const auto& p : per_image) {
      if (!p.empty()) export_scene_graph(p, dir / (p.front().image + ".json"));
    }
  }
  if (!ctx.quiet)
    std::cout << all.size() << " predictions for " << per_image.size() << " images -> " << ctx.path(o.out).string()
              << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck / bench

struct GradcheckCliOpts {
  std::vector<std::string> ops;
  std::size_t seeds = 20;
  std::uint64_t first_seed = 0;
  double eps = 1e-5;
  int dtype = 64;
  double tol = 0;
  std::string report;
};

int cmd_gradcheck(const Context& ctx, const GradcheckCliOpts& o, const CLI::App* sub) {
  GradcheckOptions g;
  g.ops = o.ops;
  g.seeds = o.seeds;
  g.first_seed = o.first_seed;
  g.eps = o.eps;
  g.bits = o.dtype;
  g.tolerance = o.tol;
  const auto rows = run_gradcheck(g);
  std::cout << gradcheck_table(rows);
  const bool ok = std::all_of(rows.begin(), rows.end(), [](const GradcheckRow& r) { return r.pass; });
  if (!o.report.empty()) {
    json j{{"rows", json::array()}, {"pass", ok}, {"provenance", provenance(sub, o.first_seed)}};
    for (const auto& r : rows) j["rows"].push_back(to_json(r));
    write_json(ctx.path(o.report), j);
  }
  std::cout << (ok ? "all operators pass\n" : "gradient check FAILED\n");
  return ok ? 0 : 1;
}

struct BenchCliOpts {
  BenchOptions bench;
  std::string report;
};

int cmd_bench(const Context& ctx, const BenchCliOpts& o, const CLI::App* sub) {
  const auto rows = run_bench(o.bench);
  std::cout << bench_table(rows);
  if (!o.report.empty()) {
    json j{{"rows", json::array()}, {"provenance", provenance(sub, o.bench.seed)}};
    for (const auto& r : rows) j["rows"].push_back(to_json(r));
    write_json(ctx.path(o.report), j);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relationship detection with spatiality-aware interaction modules and label hierarchies", "zoomnet"};
  app.set_version_flag("--version", std::string(ZOOMNET_VERSION));
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file or any artifact with an embedded run configuration");

  Context ctx;
  std::string workdir = ".";
  app.add_option("--workdir", workdir, "Base directory for every relative path");
  app.add_flag("-q,--quiet", ctx.quiet, "Suppress summaries");

  GenDataOpts gd;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset with a train/test split");
  gen->add_option("--out", gd.out, "Output directory");
  gen->add_option("--count", gd.count, "Number of images")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gd.seed, "Generator seed");
  gen->add_option("--noise", gd.noise, "Probability of a non-canonical surface form")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--catalog", gd.catalog, "Scene catalog (default: bundled)");
  gen->add_option("--split-ratio", gd.split_ratio, "Train fraction")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--split-seed", gd.split_seed, "Split seed (default: --seed)");
  gen->add_option("--workers", gd.workers, "Generator threads");

  BuildTreesOpts bt;
  auto* trees = app.add_subcommand("build-trees", "Build the object and predicate label hierarchies");
  trees->add_option("--dataset", bt.dataset, "Dataset directory");
  trees->add_option("--out", bt.out, "Output directory");
  trees->add_option("--split", bt.split, "Split whose labels define the trees")->check(CLI::IsMember({"train", "test", "all"}));
  trees->add_option("--taxonomy", bt.taxonomy, "Taxonomy TSV (default: bundled)");
  trees->add_option("--lexicon", bt.lexicon, "Lexicon TSV (default: bundled)");
  trees->add_option("--exceptions", bt.exceptions, "Lemma exceptions TSV (default: bundled)");
  trees->add_option("--threshold", bt.threshold, "Normalized LCH clustering threshold")->check(CLI::Range(0.0, 1.0));

  TrainOpts tr;
  auto* train = app.add_subcommand("train", "Train a model (or a grid of models with --sweep)");
  train->add_option("--dataset", tr.dataset, "Dataset directory");
  train->add_option("--trees", tr.trees, "Directory with object_tree.json and predicate_tree.json");
  train->add_option("--out", tr.out, "Checkpoint path (directory with --sweep)");
  train->add_option("--metrics", tr.metrics, "Per-epoch metrics JSONL");
  train->add_option("--val-split", tr.val_split, "Split scored after each epoch")->check(CLI::IsMember({"train", "test", "none"}));
  train->add_option("--module", tr.module, "Interaction module: am, ca or sca");
  train->add_option("--stacks", tr.stacks, "Number of interaction stages");
  train->add_option("--appearance-convs", tr.appearance_convs, "Appearance convs per branch and stage");
  train->add_option("--fusion", tr.fusion, "SCA-M predicate fusion: single or pairwise");
  train->add_option("--fusion-convs", tr.fusion_convs, "Convs per fusion stack");
  train->add_option("--label-levels", tr.label_levels, "Supervised tree levels: full, h0h1 or h0");
  train->add_option("--trunk-channels", tr.trunk_channels, "Trunk conv widths")->delimiter(',');
  train->add_option("--trunk-strides", tr.trunk_strides, "Trunk conv strides")->delimiter(',');
  train->add_option("--pooled", tr.pooled, "ROI pooling resolution");
  train->add_option("--alpha", tr.alpha, "Subject loss weight");
  train->add_option("--beta", tr.beta, "Predicate loss weight");
  train->add_option("--gamma", tr.gamma, "Object loss weight");
  train->add_option("--lr", tr.lr, "SGD learning rate");
  train->add_option("--momentum", tr.momentum, "SGD momentum");
  train->add_option("--epochs", tr.epochs, "Training epochs");
  train->add_option("--seed", tr.seed, "Initialization and sampling seed");
  train->add_flag("--freeze-trunk", tr.freeze_trunk, "Keep trunk weights fixed");
  train->add_option("--pairs-per-image", tr.pairs_per_image, "Pairs sampled per image and step (0 = all)");
  train->add_option("--sweep", tr.sweep, "Grid axis key=v1,v2,... (repeatable)");

  EvalOpts ev;
  auto* eval = app.add_subcommand("eval", "Score a checkpoint: Acc@N on gold boxes and Rec@N for three tasks");
  eval->add_option("--checkpoint", ev.checkpoint, "Model checkpoint");
  eval->add_option("--dataset", ev.dataset, "Dataset directory");
  eval->add_option("--split", ev.split, "Split to score")->check(CLI::IsMember({"train", "test", "all"}));
  eval->add_option("--report", ev.report, "Report JSON path (a .txt table is written alongside)");
  eval->add_option("--predictions", ev.predictions, "Also write ranked predictions (JSONL)");
  eval->add_option("--k", ev.k, "Predicate candidates per pair");
  eval->add_option("--acc-n", ev.acc_n, "Acc@N cut-offs")->delimiter(',');
  eval->add_option("--rec-n", ev.rec_n, "Rec@N cut-offs")->delimiter(',');
  eval->add_option("--iou", ev.iou, "IoU threshold for recall matching")->check(CLI::Range(0.0, 1.0));
  eval->add_flag("--nms,!--no-nms", ev.nms, "Triplet NMS before recall");
  eval->add_option("--nms-iou", ev.nms_iou, "Triplet NMS IoU threshold")->check(CLI::Range(0.0, 1.0));
  eval->add_flag("--zero-shot", ev.zero_shot, "Only score triples unseen in training");
  eval->add_option("--acc-mode", ev.acc_mode, "Relationship accuracy: joint or mean");

  PredictOpts pr;
  auto* pred = app.add_subcommand("predict", "Rank relationship triplets for a dataset split or one image");
  pred->add_option("--checkpoint", pr.checkpoint, "Model checkpoint");
  pred->add_option("--dataset", pr.dataset, "Dataset directory");
  pred->add_option("--split", pr.split, "Split to predict")->check(CLI::IsMember({"train", "test", "all"}));
  pred->add_option("--image", pr.image, "Single PPM image");
  pred->add_option("--boxes", pr.boxes, "Boxes for --image: x0,y0,x1,y1;...");
  pred->add_option("--out", pr.out, "Predictions JSONL");
  pred->add_option("--scene-graphs", pr.scene_graphs, "Write one scene graph JSON per image here");
  pred->add_option("--k", pr.k, "Predicate candidates per pair");
  pred->add_flag("--nms,!--no-nms", pr.nms, "Triplet NMS");
  pred->add_option("--nms-iou", pr.nms_iou, "Triplet NMS IoU threshold");

  GradcheckCliOpts gc;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable operator");
  grad->add_option("--ops", gc.ops, "Operators (default: all)")->delimiter(',');
  grad->add_option("--seeds", gc.seeds, "Random fixtures per operator");
  grad->add_option("--first-seed", gc.first_seed, "First fixture seed");
  grad->add_option("--eps", gc.eps, "Central-difference step");
  grad->add_option("--dtype", gc.dtype, "Float width: 64 or 32")->check(CLI::IsMember({64, 32}));
  grad->add_option("--tol", gc.tol, "Tolerance (default 1e-3 for 64-bit, 1e-2 for 32-bit)");
  grad->add_option("--report", gc.report, "Write the table as JSON");

  BenchCliOpts bn;
  auto* bench = app.add_subcommand("bench", "Forward wall time of the interaction modules");
  bench->add_option("--channels", bn.bench.channels, "Feature channels");
  bench->add_option("--pooled", bn.bench.pooled, "Pooled resolution");
  bench->add_option("--fusion-convs", bn.bench.fusion_convs, "Convs per fusion stack");
  bench->add_option("--repeats", bn.bench.repeats, "Timed forwards per module");
  bench->add_option("--seed", bn.bench.seed, "Input seed");
  bench->add_option("--report", bn.report, "Write the table as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::FileError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 1;
  }

  ctx.workdir = workdir;
  try {
    if (*gen) return cmd_gen_data(ctx, gd, gen);
    if (*trees) return cmd_build_trees(ctx, bt, trees);
    if (*train) return cmd_train(ctx, tr, train);
    if (*eval) return cmd_eval(ctx, ev, eval);
    if (*pred) return cmd_predict(ctx, pr, pred);
    if (*grad) return cmd_gradcheck(ctx, gc, grad);
    if (*bench) return cmd_bench(ctx, bn, bench);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
