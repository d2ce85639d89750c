#pragma once

#include <string>
#include <vector>

#include "zoomnet/layers.hpp"
#include "zoomnet/roi.hpp"

namespace zoomnet {

/// The three message-passing variants: appearance only, spatially agnostic
/// context fusion, and spatiality-aware context fusion.
enum class InteractionKind { AM, CAM, SCAM };

/// How SCA-M fuses into the predicate branch: one conv over [f_p, ŝ, ô], or
/// one conv per pairwise stack (SP, SO, PO) with the results summed.
enum class FusionMode { Single, Pairwise };

std::string to_string(InteractionKind kind);
InteractionKind parse_interaction_kind(const std::string& name);
std::string to_string(FusionMode mode);
FusionMode parse_fusion_mode(const std::string& name);

template <typename T>
struct FeatureTriple {
  Tensor<T> subject;
  Tensor<T> predicate;
  Tensor<T> object;
};

/// Per-branch fusion stack: a conv from the fused width back to C, then
/// `depth - 1` further C→C convs. All 3×3, stride 1, same padding.
template <typename T>
struct FusionStack {
  std::vector<ConvLayer<T>> layers;

  FusionStack() = default;
  FusionStack(std::size_t in, std::size_t channels, std::size_t depth, Rng& rng);
  Tensor<T> operator()(const Tensor<T>& x) const;
  /// Skips the first layer's ReLU-conv and applies the rest to `pre`, the
  /// first layer's pre-activation.
  Tensor<T> finish(const Tensor<T>& pre) const;
  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;
};

/// Parameters of one interaction module. Parameters are never shared between
/// branches; CA-M and SCA-M (single fusion) have identical parameter shapes.
template <typename T>
struct InteractionParams {
  InteractionKind kind = InteractionKind::SCAM;
  FusionMode mode = FusionMode::Single;
  std::size_t channels = 0;
  FusionStack<T> subject;
  FusionStack<T> predicate;
  FusionStack<T> object;
  // Pairwise SCA-M only: first-layer convs for the SO and PO stacks; the SP
  // stack uses predicate.layers[0].
  ConvLayer<T> pair_so;
  ConvLayer<T> pair_po;

  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const;
};

template <typename T>
InteractionParams<T> make_interaction(InteractionKind kind, std::size_t channels, FusionMode mode,
                                      std::size_t fusion_convs, Rng& rng);

/// Branches evolve independently.
template <typename T>
FeatureTriple<T> am_forward(const FeatureTriple<T>& t, const InteractionParams<T>& p);

/// Subject/object fuse with the predicate feature, the predicate fuses with
/// both, all by plain channel concatenation at the pooled resolution.
template <typename T>
FeatureTriple<T> cam_forward(const FeatureTriple<T>& t, const InteractionParams<T>& p);

/// Contrastive ROI pooling into the predicate palette, pyramid ROI pooling
/// back into subject/object.
template <typename T>
FeatureTriple<T> scam_forward(const FeatureTriple<T>& t, const RoiTriple& rois, const InteractionParams<T>& p);

/// Dispatches on p.kind.
template <typename T>
FeatureTriple<T> interact(const FeatureTriple<T>& t, const RoiTriple& rois, const InteractionParams<T>& p);

}  // namespace zoomnet
