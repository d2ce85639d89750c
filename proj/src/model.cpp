#include "zoomnet/model.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "zoomnet/checkpoint.hpp"
#include "zoomnet/error.hpp"
#include "zoomnet/optim.hpp"
#include "zoomnet/rng.hpp"
#include "zoomnet/synth.hpp"

namespace zoomnet {

using nlohmann::json;

std::string to_string(LabelLevels levels) {
  switch (levels) {
    case LabelLevels::Full: return "full";
    case LabelLevels::H0H1: return "h0h1";
    case LabelLevels::H0: return "h0";
  }
  return "?";
}

LabelLevels parse_label_levels(const std::string& name) {
  if (name == "full") return LabelLevels::Full;
  if (name == "h0h1") return LabelLevels::H0H1;
  if (name == "h0" || name == "flat") return LabelLevels::H0;
  throw ConfigError("unknown label levels '" + name + "' (expected full, h0h1 or h0)");
}

// --- Config -----------------------------------------------------------------

void ModelConfig::validate() const {
  if (trunk_channels.empty()) throw ConfigError("trunk_channels: need at least one trunk stage");
  if (trunk_channels.size() != trunk_strides.size()) {
    throw ConfigError("trunk_strides: " + std::to_string(trunk_strides.size()) + " strides for " +
                      std::to_string(trunk_channels.size()) + " trunk stages");
  }
  for (auto c : trunk_channels) {
    if (c == 0) throw ConfigError("trunk_channels: channel counts must be positive");
  }
  for (auto s : trunk_strides) {
    if (s == 0) throw ConfigError("trunk_strides: strides must be positive");
  }
  if (image_size == 0) throw ConfigError("image_size must be positive");
  if (pooled == 0) throw ConfigError("pooled must be positive");
  if (stacks < 1) throw ConfigError("stacks must be at least 1");
  if (fusion_convs < 1) throw ConfigError("fusion_convs must be at least 1");
  if (!(alpha > 0) || !(beta > 0) || !(gamma > 0)) throw ConfigError("alpha, beta and gamma must be positive");
  if (!(lr > 0)) throw ConfigError("lr must be positive");
  if (momentum < 0 || momentum >= 1) throw ConfigError("momentum must lie in [0, 1)");
}

json ModelConfig::to_json() const {
  return {{"trunk_channels", trunk_channels},
          {"trunk_strides", trunk_strides},
          {"image_size", image_size},
          {"pooled", pooled},
          {"interaction", to_string(interaction)},
          {"stacks", stacks},
          {"appearance_convs", appearance_convs},
          {"fusion", to_string(fusion)},
          {"fusion_convs", fusion_convs},
          {"label_levels", to_string(label_levels)},
          {"alpha", alpha},
          {"beta", beta},
          {"gamma", gamma},
          {"lr", lr},
          {"momentum", momentum},
          {"epochs", epochs},
          {"seed", seed},
          {"freeze_trunk", freeze_trunk},
          {"pairs_per_image", pairs_per_image}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("model config must be an object");
  ModelConfig c;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "trunk_channels") c.trunk_channels = v.get<std::vector<std::size_t>>();
      else if (key == "trunk_strides") c.trunk_strides = v.get<std::vector<std::size_t>>();
      else if (key == "image_size") c.image_size = v.get<std::size_t>();
      else if (key == "pooled") c.pooled = v.get<std::size_t>();
      else if (key == "interaction") c.interaction = parse_interaction_kind(v.get<std::string>());
      else if (key == "stacks") c.stacks = v.get<std::size_t>();
      else if (key == "appearance_convs") c.appearance_convs = v.get<std::size_t>();
      else if (key == "fusion") c.fusion = parse_fusion_mode(v.get<std::string>());
      else if (key == "fusion_convs") c.fusion_convs = v.get<std::size_t>();
      else if (key == "label_levels") c.label_levels = parse_label_levels(v.get<std::string>());
      else if (key == "alpha") c.alpha = v.get<double>();
      else if (key == "beta") c.beta = v.get<double>();
      else if (key == "gamma") c.gamma = v.get<double>();
      else if (key == "lr") c.lr = v.get<double>();
      else if (key == "momentum") c.momentum = v.get<double>();
      else if (key == "epochs") c.epochs = v.get<std::size_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "freeze_trunk") c.freeze_trunk = v.get<bool>();
      else if (key == "pairs_per_image") c.pairs_per_image = v.get<std::size_t>();
      else throw ConfigError("unknown model config key '" + key + "'");
    } catch (const json::exception& e) {
      throw ConfigError("model config key '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

std::string ModelConfig::hash() const { return hash_hex(fnv1a(to_json().dump())); }

// --- Model ------------------------------------------------------------------

namespace {

std::vector<std::size_t> segments_of(const IHTree& tree, LabelLevels levels) {
  auto sizes = tree.level_sizes();
  const std::size_t keep = levels == LabelLevels::Full ? sizes.size() : levels == LabelLevels::H0H1 ? 2 : 1;
  if (sizes.size() < keep) {
    throw ConfigError(to_string(tree.kind) + " tree has " + std::to_string(sizes.size()) + " levels, need " +
                      std::to_string(keep));
  }
  sizes.resize(keep);
  for (auto s : sizes) {
    if (s == 0) throw ConfigError(to_string(tree.kind) + " tree has an empty level");
  }
  return sizes;
}

std::size_t total(std::span<const std::size_t> v) { return std::accumulate(v.begin(), v.end(), std::size_t{0}); }

std::size_t conv_params(std::size_t in, std::size_t out) { return out * in * 9 + out; }

}  // namespace

template <typename T>
Model<T> build_model(const ModelConfig& cfg, const IHTree& object_tree, const IHTree& predicate_tree) {
  cfg.validate();
  if (object_tree.kind != TreeKind::Object) throw ConfigError("build_model: first tree must be an object tree");
  if (predicate_tree.kind != TreeKind::Predicate) throw ConfigError("build_model: second tree must be a predicate tree");
  Model<T> m;
  m.config = cfg;
  m.object_segments = segments_of(object_tree, cfg.label_levels);
  m.predicate_segments = segments_of(predicate_tree, cfg.label_levels);

  Rng rng(cfg.seed);
  std::size_t in = 3;
  for (std::size_t i = 0; i < cfg.trunk_channels.size(); ++i) {
    m.trunk.emplace_back(in, cfg.trunk_channels[i], 3, cfg.trunk_strides[i], rng);
    in = cfg.trunk_channels[i];
  }
  const std::size_t c = in;
  m.appearance.resize(cfg.stacks);
  for (std::size_t s = 0; s < cfg.stacks; ++s) {
    for (auto& branch : m.appearance[s]) {
      for (std::size_t l = 0; l < cfg.appearance_convs; ++l) branch.emplace_back(c, c, 3, 1, rng);
    }
    m.stacks.push_back(make_interaction<T>(cfg.interaction, c, cfg.fusion, cfg.fusion_convs, rng));
  }
  const std::size_t flat = c * cfg.pooled * cfg.pooled;
  m.head_subject = LinearLayer<T>(flat, total(m.object_segments), rng);
  m.head_predicate = LinearLayer<T>(flat, total(m.predicate_segments), rng);
  m.head_object = LinearLayer<T>(flat, total(m.object_segments), rng);
  return m;
}

std::size_t expected_parameter_count(const ModelConfig& cfg, std::size_t object_width, std::size_t predicate_width) {
  std::size_t n = 0;
  std::size_t in = 3;
  for (auto ch : cfg.trunk_channels) {
    n += conv_params(in, ch);
    in = ch;
  }
  const std::size_t c = in;
  const std::size_t rest = (cfg.fusion_convs - 1) * conv_params(c, c);
  std::size_t module = 0;
  switch (cfg.interaction) {
    case InteractionKind::AM: module = 3 * (conv_params(c, c) + rest); break;
    case InteractionKind::CAM: module = 2 * conv_params(2 * c, c) + conv_params(3 * c, c) + 3 * rest; break;
    case InteractionKind::SCAM:
      module = cfg.fusion == FusionMode::Pairwise ? 5 * conv_params(2 * c, c) + 3 * rest
                                                  : 2 * conv_params(2 * c, c) + conv_params(3 * c, c) + 3 * rest;
      break;
  }
  n += cfg.stacks * (3 * cfg.appearance_convs * conv_params(c, c) + module);
  const std::size_t flat = c * cfg.pooled * cfg.pooled;
  n += 2 * (flat * object_width + object_width) + flat * predicate_width + predicate_width;
  return n;
}

template <typename T>
std::vector<NamedParam<T>> Model<T>::parameters() const {
  std::vector<NamedParam<T>> out;
  for (std::size_t i = 0; i < trunk.size(); ++i) trunk[i].collect("trunk." + std::to_string(i), out);
  static const char* kBranch[3] = {"subject", "predicate", "object"};
  for (std::size_t s = 0; s < appearance.size(); ++s) {
    const std::string stage = "stage" + std::to_string(s);
    for (std::size_t b = 0; b < 3; ++b) {
      for (std::size_t l = 0; l < appearance[s][b].size(); ++l) {
        appearance[s][b][l].collect(stage + ".appearance." + kBranch[b] + "." + std::to_string(l), out);
      }
    }
    stacks[s].collect(stage + ".interaction", out);
  }
  head_subject.collect("head.subject", out);
  head_predicate.collect("head.predicate", out);
  head_object.collect("head.object", out);
  return out;
}

template <typename T>
std::size_t Model<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

template <typename T>
Tensor<T> Model<T>::features(const Tensor<T>& image) const {
  if (image.rank() != 4 || image.dim(1) != 3) {
    throw ContractError("model input must be 1x3xHxW, got " + shape_str(image.shape()));
  }
  Tensor<T> x = image;
  for (const auto& layer : trunk) x = layer(x);
  return x;
}

template <typename T>
TripletLogits<T> Model<T>::forward_features(const Tensor<T>& f, const RoiTriple& rois) const {
  const std::size_t p = config.pooled;
  std::array<Tensor<T>, 3> x = {roi_pool(f, rois.subject, p, p), roi_pool(f, rois.predicate, p, p),
                                roi_pool(f, rois.object, p, p)};
  for (std::size_t s = 0; s < stacks.size(); ++s) {
    for (std::size_t b = 0; b < 3; ++b) {
      for (const auto& layer : appearance[s][b]) x[b] = layer(x[b]);
    }
    auto t = interact(FeatureTriple<T>{x[0], x[1], x[2]}, rois, stacks[s]);
    x = {t.subject, t.predicate, t.object};
  }
  return {head_subject(flatten(x[0])), head_predicate(flatten(x[1])), head_object(flatten(x[2]))};
}

template <typename T>
TripletLogits<T> Model<T>::forward(const Tensor<T>& image, const RoiTriple& rois) const {
  return forward_features(features(image), rois);
}

template <typename T>
Tensor<T> compute_loss(const TripletLogits<T>& logits, const MultiLevelTarget& target,
                       std::span<const std::size_t> object_segments, std::span<const std::size_t> predicate_segments,
                       double alpha, double beta, double gamma, LossParts* parts) {
  auto branch = [](const Tensor<T>& lg, const std::vector<std::size_t>& tgt, std::span<const std::size_t> segs,
                   const char* name) {
    if (lg.rank() != 2 || lg.dim(0) != 1 || lg.dim(1) != total(segs)) {
      throw ContractError(std::string(name) + " logits " + shape_str(lg.shape()) + " do not match segment total " +
                          std::to_string(total(segs)));
    }
    if (tgt.size() < segs.size()) {
      throw ContractError(std::string(name) + " target has " + std::to_string(tgt.size()) + " levels, need " +
                          std::to_string(segs.size()));
    }
    Tensor<T> loss;
    std::size_t off = 0;
    for (std::size_t l = 0; l < segs.size(); ++l) {
      if (tgt[l] >= segs[l]) {
        throw ContractError(std::string(name) + " target " + std::to_string(tgt[l]) + " out of range for level " +
                            std::to_string(l) + " of size " + std::to_string(segs[l]));
      }
      const std::size_t t = tgt[l];
      auto term = softmax_cross_entropy(slice_columns(lg, off, off + segs[l]), std::span<const std::size_t>(&t, 1));
      loss = loss.defined() ? add(loss, term) : term;
      off += segs[l];
    }
    return loss;
  };
  auto ls = branch(logits.subject, target.subject, object_segments, "subject");
  auto lp = branch(logits.predicate, target.predicate, predicate_segments, "predicate");
  auto lo = branch(logits.object, target.object, object_segments, "object");
  if (parts) *parts = {static_cast<double>(ls.item()), static_cast<double>(lp.item()), static_cast<double>(lo.item())};
  return add(add(scale(ls, static_cast<T>(alpha)), scale(lp, static_cast<T>(beta))), scale(lo, static_cast<T>(gamma)));
}

template <typename T>
InferenceGuard<T>::InferenceGuard(const Model<T>& model) {
  for (auto& p : model.parameters()) {
    saved_.emplace_back(p.tensor, p.tensor.requires_grad());
    saved_.back().first.set_requires_grad(false);
  }
}

template <typename T>
InferenceGuard<T>::~InferenceGuard() {
  for (auto& [t, on] : saved_) t.set_requires_grad(on);
}

template struct Model<float>;
template struct Model<double>;
template class InferenceGuard<float>;
template class InferenceGuard<double>;
template Model<float> build_model(const ModelConfig&, const IHTree&, const IHTree&);
template Model<double> build_model(const ModelConfig&, const IHTree&, const IHTree&);
template Tensor<float> compute_loss(const TripletLogits<float>&, const MultiLevelTarget&, std::span<const std::size_t>,
                                    std::span<const std::size_t>, double, double, double, LossParts*);
template Tensor<double> compute_loss(const TripletLogits<double>&, const MultiLevelTarget&, std::span<const std::size_t>,
                                     std::span<const std::size_t>, double, double, double, LossParts*);

// --- Encoding ---------------------------------------------------------------

MultiLevelTarget encode_target(const RelationshipInstance& r, const IHTree& object_tree, const IHTree& predicate_tree) {
  return {object_tree.encode(r.subject.label), predicate_tree.encode(r.predicate), object_tree.encode(r.object.label)};
}

std::vector<EncodedImage> encode_images(const std::vector<std::string>& image_ids,
                                        const std::vector<RelationshipInstance>& instances,
                                        const IHTree& object_tree, const IHTree& predicate_tree,
                                        const std::function<Tensor<float>(const std::string&)>& load) {
  std::vector<EncodedImage> out;
  std::map<std::string, std::size_t> index;
  for (const auto& id : image_ids) {
    if (index.count(id)) throw ContractError("image id '" + id + "' listed twice");
    index[id] = out.size();
    out.push_back({id, load(id), {}});
  }
  for (const auto& r : instances) {
    auto it = index.find(r.image);
    if (it == index.end()) continue;
    EncodedInstance e;
    e.source = r;
    e.rois = RoiTriple::from_pair(r.subject.box, r.object.box);
    e.gold = {object_tree.find(0, r.subject.label), predicate_tree.find(0, r.predicate),
              object_tree.find(0, r.object.label)};
    e.trainable = e.gold.subject && e.gold.predicate && e.gold.object;
    if (e.trainable) e.target = encode_target(r, object_tree, predicate_tree);
    out[it->second].instances.push_back(std::move(e));
  }
  return out;
}

// --- Training ---------------------------------------------------------------

json EpochMetrics::to_json() const {
  return {{"epoch", epoch}, {"loss", loss}, {"acc_s", acc_s}, {"acc_p", acc_p}, {"acc_o", acc_o}, {"acc_rel", acc_rel}};
}

namespace {

std::vector<double> h0_probs(const Tensor<float>& logits, std::size_t width) {
  auto v = logits.values().subspan(0, width);
  auto p = softmax(std::span<const float>(v.data(), v.size()));
  return {p.begin(), p.end()};
}

}  // namespace

std::vector<BranchRanking> rank_instances(const Model<float>& model, const std::vector<EncodedImage>& images) {
  InferenceGuard guard(model);
  std::vector<BranchRanking> out;
  for (const auto& img : images) {
    if (img.instances.empty()) continue;
    const auto f = model.features(img.image);
    for (const auto& inst : img.instances) {
      const auto lg = model.forward_features(f, inst.rois);
      out.push_back({rank_indices(h0_probs(lg.subject, model.object_segments[0])),
                     rank_indices(h0_probs(lg.predicate, model.predicate_segments[0])),
                     rank_indices(h0_probs(lg.object, model.object_segments[0]))});
    }
  }
  return out;
}

std::vector<GoldTriple> gold_triples(const std::vector<EncodedImage>& images) {
  std::vector<GoldTriple> out;
  for (const auto& img : images) {
    for (const auto& inst : img.instances) out.push_back(inst.gold);
  }
  return out;
}

std::vector<EpochMetrics> train_model(Model<float>& model, const std::vector<EncodedImage>& train,
                                      const std::vector<EncodedImage>& validation,
                                      const std::function<void(const EpochMetrics&)>& on_epoch) {
  const auto& cfg = model.config;
  std::vector<Tensor<float>> params;
  std::set<const void*> frozen;
  if (cfg.freeze_trunk) {
    for (const auto& layer : model.trunk) {
      for (auto t : {layer.weight, layer.bias}) {
        t.set_requires_grad(false);
        frozen.insert(t.node().get());
      }
    }
  }
  for (auto& p : model.parameters()) {
    if (!frozen.count(p.tensor.node().get())) params.push_back(p.tensor);
  }
  for (auto& p : params) p.zero_grad();

  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (std::any_of(train[i].instances.begin(), train[i].instances.end(),
                    [](const EncodedInstance& e) { return e.trainable; })) {
      usable.push_back(i);
    }
  }
  if (usable.empty() && cfg.epochs > 0) throw ContractError("training set has no trainable instances");

  const auto gold = gold_triples(validation);
  SgdState<float> state;
  std::vector<EpochMetrics> log;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, 0x5eed0000ULL + epoch));
    auto order = usable;
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0;
    for (auto i : order) {
      const auto& img = train[i];
      std::vector<const EncodedInstance*> picks;
      for (const auto& e : img.instances) {
        if (e.trainable) picks.push_back(&e);
      }
      if (cfg.pairs_per_image > 0 && picks.size() > cfg.pairs_per_image) {
        rng.shuffle(std::span<const EncodedInstance*>(picks));
        picks.resize(cfg.pairs_per_image);
      }
      const auto f = model.features(img.image);
      Tensor<float> loss;
      for (const auto* e : picks) {
        auto term = compute_loss(model.forward_features(f, e->rois), e->target, model.object_segments,
                                 model.predicate_segments, cfg.alpha, cfg.beta, cfg.gamma);
        loss = loss.defined() ? add(loss, term) : term;
      }
      loss = scale(loss, 1.0f / static_cast<float>(picks.size()));
      backward(loss);
      sgd_step(std::span<Tensor<float>>(params), state, static_cast<float>(cfg.lr), static_cast<float>(cfg.momentum));
      loss_sum += loss.item();
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.loss = loss_sum / static_cast<double>(order.size());
    if (!gold.empty()) {
      const auto ranks = rank_instances(model, validation);
      const auto acc = acc_at_n(ranks, gold, 1);
      m.acc_s = acc.subject;
      m.acc_p = acc.predicate;
      m.acc_o = acc.object;
      m.acc_rel = acc.relationship_joint;
    }
    log.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return log;
}

std::vector<RankedPrediction> predict(const Model<float>& model, const std::string& image_id,
                                      const Tensor<float>& image, const std::vector<std::pair<RoiBox, RoiBox>>& pairs,
                                      std::size_t k, const IHTree& object_tree, const IHTree& predicate_tree) {
  if (k < 1) throw ConfigError("predict needs k >= 1");
  std::vector<RankedPrediction> out;
  if (pairs.empty()) return out;
  InferenceGuard guard(model);
  const auto f = model.features(image);
  for (const auto& [s, o] : pairs) {
    const auto lg = model.forward_features(f, RoiTriple::from_pair(s, o));
    const auto ps = h0_probs(lg.subject, model.object_segments[0]);
    const auto pp = h0_probs(lg.predicate, model.predicate_segments[0]);
    const auto po = h0_probs(lg.object, model.object_segments[0]);
    const auto rs = rank_indices(ps), rp = rank_indices(pp), ro = rank_indices(po);
    const std::size_t kk = std::min(k, rp.size());
    for (std::size_t i = 0; i < kk; ++i) {
      RankedPrediction r;
      r.image = image_id;
      r.subject = {object_tree.levels[0].at(rs[0]), s, ps[rs[0]]};
      r.predicate = {predicate_tree.levels[0].at(rp[i]), pp[rp[i]]};
      r.object = {object_tree.levels[0].at(ro[0]), o, po[ro[0]]};
      r.score = r.subject.prob * r.predicate.prob * r.object.prob;
      out.push_back(std::move(r));
    }
  }
  return out;
}

// --- Checkpoints ------------------------------------------------------------

void save_model(const std::filesystem::path& path, const Model<float>& model, const IHTree& object_tree,
                const IHTree& predicate_tree, const json& extra_meta) {
  std::vector<NamedTensor> tensors;
  for (const auto& p : model.parameters()) tensors.push_back({p.name, p.tensor});
  json meta = extra_meta.is_object() ? extra_meta : json::object();
  meta["tool_version"] = ZOOMNET_VERSION;
  meta["model_config"] = model.config.to_json();
  meta["config_hash"] = model.config.hash();
  meta["seed"] = model.config.seed;
  meta["parameter_count"] = model.parameter_count();
  meta["object_tree"] = object_tree.to_json();
  meta["predicate_tree"] = predicate_tree.to_json();
  save_checkpoint(path, tensors, meta);
}

LoadedModel load_model(const std::filesystem::path& path) {
  auto ckpt = load_checkpoint(path);
  const auto& meta = ckpt.meta;
  for (const char* key : {"model_config", "object_tree", "predicate_tree"}) {
    if (!meta.contains(key)) throw ParseError(path.string() + ": checkpoint meta lacks '" + key + "'");
  }
  LoadedModel out{Model<float>{}, IHTree::from_json(meta.at("object_tree")),
                  IHTree::from_json(meta.at("predicate_tree")), meta};
  out.model = build_model<float>(ModelConfig::from_json(meta.at("model_config")), out.object_tree, out.predicate_tree);
  std::map<std::string, const Tensor<float>*> stored;
  for (const auto& t : ckpt.tensors) stored[t.name] = &t.tensor;
  for (auto& p : out.model.parameters()) {
    auto it = stored.find(p.name);
    if (it == stored.end()) throw ParseError(path.string() + ": missing tensor '" + p.name + "'");
    if (it->second->shape() != p.tensor.shape()) {
      throw ParseError(path.string() + ": tensor '" + p.name + "' has shape " + shape_str(it->second->shape()) +
                       ", model expects " + shape_str(p.tensor.shape()));
    }
    auto src = it->second->values();
    std::copy(src.begin(), src.end(), p.tensor.values().begin());
    stored.erase(it);
  }
  if (!stored.empty()) throw ParseError(path.string() + ": unexpected tensor '" + stored.begin()->first + "'");
  return out;
}

}  // namespace zoomnet
