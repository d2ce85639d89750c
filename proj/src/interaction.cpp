#include "zoomnet/interaction.hpp"

namespace zoomnet {

std::string to_string(InteractionKind kind) {
  switch (kind) {
    case InteractionKind::AM: return "am";
    case InteractionKind::CAM: return "ca";
    case InteractionKind::SCAM: return "sca";
  }
  return "?";
}

InteractionKind parse_interaction_kind(const std::string& name) {
  if (name == "am" || name == "A-M") return InteractionKind::AM;
  if (name == "ca" || name == "cam" || name == "CA-M") return InteractionKind::CAM;
  if (name == "sca" || name == "scam" || name == "SCA-M") return InteractionKind::SCAM;
  throw ConfigError("unknown interaction module '" + name + "' (expected am, ca or sca)");
}

std::string to_string(FusionMode mode) { return mode == FusionMode::Single ? "single" : "pairwise"; }

FusionMode parse_fusion_mode(const std::string& name) {
  if (name == "single") return FusionMode::Single;
  if (name == "pairwise") return FusionMode::Pairwise;
  throw ConfigError("unknown fusion mode '" + name + "' (expected single or pairwise)");
}

template <typename T>
FusionStack<T>::FusionStack(std::size_t in, std::size_t channels, std::size_t depth, Rng& rng) {
  if (depth == 0) throw ConfigError("fusion stack needs at least one conv");
  layers.emplace_back(in, channels, 3, 1, rng);
  for (std::size_t i = 1; i < depth; ++i) layers.emplace_back(channels, channels, 3, 1, rng);
}

template <typename T>
Tensor<T> FusionStack<T>::operator()(const Tensor<T>& x) const {
  return finish(layers.front().conv(x));
}

template <typename T>
Tensor<T> FusionStack<T>::finish(const Tensor<T>& pre) const {
  Tensor<T> y = relu(pre);
  for (std::size_t i = 1; i < layers.size(); ++i) y = layers[i](y);
  return y;
}

template <typename T>
void FusionStack<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const {
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(prefix + "." + std::to_string(i), out);
}

template <typename T>
void InteractionParams<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const {
  subject.collect(prefix + ".subject", out);
  predicate.collect(prefix + ".predicate", out);
  object.collect(prefix + ".object", out);
  if (kind == InteractionKind::SCAM && mode == FusionMode::Pairwise) {
    pair_so.collect(prefix + ".pair_so", out);
    pair_po.collect(prefix + ".pair_po", out);
  }
}

template <typename T>
InteractionParams<T> make_interaction(InteractionKind kind, std::size_t channels, FusionMode mode,
                                      std::size_t fusion_convs, Rng& rng) {
  if (channels == 0) throw ConfigError("interaction module needs a positive channel count");
  if (kind != InteractionKind::SCAM) mode = FusionMode::Single;
  InteractionParams<T> p;
  p.kind = kind;
  p.mode = mode;
  p.channels = channels;
  const std::size_t c = channels;
  switch (kind) {
    case InteractionKind::AM:
      p.subject = FusionStack<T>(c, c, fusion_convs, rng);
      p.predicate = FusionStack<T>(c, c, fusion_convs, rng);
      p.object = FusionStack<T>(c, c, fusion_convs, rng);
      break;
    case InteractionKind::CAM:
    case InteractionKind::SCAM:
      p.subject = FusionStack<T>(2 * c, c, fusion_convs, rng);
      p.predicate = FusionStack<T>(mode == FusionMode::Pairwise ? 2 * c : 3 * c, c, fusion_convs, rng);
      p.object = FusionStack<T>(2 * c, c, fusion_convs, rng);
      if (mode == FusionMode::Pairwise) {
        p.pair_so = ConvLayer<T>(2 * c, c, 3, 1, rng);
        p.pair_po = ConvLayer<T>(2 * c, c, 3, 1, rng);
      }
      break;
  }
  return p;
}

template <typename T>
FeatureTriple<T> am_forward(const FeatureTriple<T>& t, const InteractionParams<T>& p) {
  return {p.subject(t.subject), p.predicate(t.predicate), p.object(t.object)};
}

template <typename T>
FeatureTriple<T> cam_forward(const FeatureTriple<T>& t, const InteractionParams<T>& p) {
  return {p.subject(concat_channels({t.subject, t.predicate})),
          p.predicate(concat_channels({t.predicate, t.subject, t.object})),
          p.object(concat_channels({t.object, t.predicate}))};
}

template <typename T>
FeatureTriple<T> scam_forward(const FeatureTriple<T>& t, const RoiTriple& rois, const InteractionParams<T>& p) {
  Tensor<T> predicate;
  if (p.mode == FusionMode::Single) {
    predicate = p.predicate(contrastive_fuse(t.subject, t.object, t.predicate, rois));
  } else {
    auto pairs = contrastive_pairs(t.subject, t.object, t.predicate, rois);
    auto pre = add(add(p.predicate.layers.front().conv(pairs.subject_predicate), p.pair_so.conv(pairs.subject_object)),
                   p.pair_po.conv(pairs.predicate_object));
    predicate = p.predicate.finish(pre);
  }
  return {p.subject(pyramid_fuse(t.subject, t.predicate, rois.subject_in_predicate())), predicate,
          p.object(pyramid_fuse(t.object, t.predicate, rois.object_in_predicate()))};
}

template <typename T>
FeatureTriple<T> interact(const FeatureTriple<T>& t, const RoiTriple& rois, const InteractionParams<T>& p) {
  switch (p.kind) {
    case InteractionKind::AM: return am_forward(t, p);
    case InteractionKind::CAM: return cam_forward(t, p);
    case InteractionKind::SCAM: return scam_forward(t, rois, p);
  }
  throw ContractError("interact: unknown kind");
}

#define ZN_INSTANTIATE_INTERACTION(T)                                                                     \
  template struct FusionStack<T>;                                                                         \
  template struct InteractionParams<T>;                                                                   \
  template InteractionParams<T> make_interaction(InteractionKind, std::size_t, FusionMode, std::size_t, Rng&); \
  template FeatureTriple<T> am_forward(const FeatureTriple<T>&, const InteractionParams<T>&);             \
  template FeatureTriple<T> cam_forward(const FeatureTriple<T>&, const InteractionParams<T>&);            \
  template FeatureTriple<T> scam_forward(const FeatureTriple<T>&, const RoiTriple&, const InteractionParams<T>&); \
  template FeatureTriple<T> interact(const FeatureTriple<T>&, const RoiTriple&, const InteractionParams<T>&);

ZN_INSTANTIATE_INTERACTION(float)
ZN_INSTANTIATE_INTERACTION(double)

}  // namespace zoomnet
