#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "zoomnet/eval.hpp"
#include "zoomnet/ihtree.hpp"
#include "zoomnet/interaction.hpp"
#include "zoomnet/relationship.hpp"

namespace zoomnet {

/// Which tree levels feed the heads: all of them, H0+H1, or H0 alone.
enum class LabelLevels { Full, H0H1, H0 };

std::string to_string(LabelLevels levels);
LabelLevels parse_label_levels(const std::string& name);

struct ModelConfig {
  std::vector<std::size_t> trunk_channels{8, 16, 32};
  std::vector<std::size_t> trunk_strides{2, 2, 1};
  std::size_t image_size = 64;
  std::size_t pooled = 8;
  InteractionKind interaction = InteractionKind::SCAM;
  std::size_t stacks = 2;
  std::size_t appearance_convs = 2;
  FusionMode fusion = FusionMode::Single;
  std::size_t fusion_convs = 1;
  LabelLevels label_levels = LabelLevels::Full;
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double lr = 0.001;
  double momentum = 0.9;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  bool freeze_trunk = false;
  /// Pairs drawn per image and step; 0 trains on every annotated pair.
  std::size_t pairs_per_image = 0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static ModelConfig from_json(const nlohmann::json& j);
  std::string hash() const;
};

/// Gold indices per tree level for the three branches.
struct MultiLevelTarget {
  std::vector<std::size_t> subject;
  std::vector<std::size_t> predicate;
  std::vector<std::size_t> object;
};

/// One row of logits per branch; columns are the concatenated level segments.
template <typename T>
struct TripletLogits {
  Tensor<T> subject;
  Tensor<T> predicate;
  Tensor<T> object;
};

template <typename T>
struct Model {
  ModelConfig config;
  std::vector<std::size_t> object_segments;
  std::vector<std::size_t> predicate_segments;

  std::vector<ConvLayer<T>> trunk;
  // appearance[stage][branch][layer]; branches ordered subject, predicate, object.
  std::vector<std::array<std::vector<ConvLayer<T>>, 3>> appearance;
  std::vector<InteractionParams<T>> stacks;
  LinearLayer<T> head_subject;
  LinearLayer<T> head_predicate;
  LinearLayer<T> head_object;

  std::vector<NamedParam<T>> parameters() const;
  std::size_t parameter_count() const;
  /// Channel count of the trunk output, which is also the branch width.
  std::size_t channels() const { return config.trunk_channels.back(); }

  /// Shared trunk on a 1×3×H×W image.
  Tensor<T> features(const Tensor<T>& image) const;
  /// Branch pooling, stacked interaction modules and heads on trunk features.
  TripletLogits<T> forward_features(const Tensor<T>& features, const RoiTriple& rois) const;
  TripletLogits<T> forward(const Tensor<T>& image, const RoiTriple& rois) const;
};

/// Segment sizes are the tree level cardinalities truncated to cfg.label_levels.
template <typename T>
Model<T> build_model(const ModelConfig& cfg, const IHTree& object_tree, const IHTree& predicate_tree);

/// Parameter count implied by the configuration and segment sizes.
std::size_t expected_parameter_count(const ModelConfig& cfg, std::size_t object_width, std::size_t predicate_width);

struct LossParts {
  double subject = 0;
  double predicate = 0;
  double object = 0;
};

/// αL_s + βL_p + γL_o where each branch loss sums one softmax cross-entropy
/// per level segment.
template <typename T>
Tensor<T> compute_loss(const TripletLogits<T>& logits, const MultiLevelTarget& target,
                       std::span<const std::size_t> object_segments, std::span<const std::size_t> predicate_segments,
                       double alpha, double beta, double gamma, LossParts* parts = nullptr);

/// Model parameters, in parameters() order, with gradient tracking turned
/// off for the guard's lifetime.
template <typename T>
class InferenceGuard {
 public:
  explicit InferenceGuard(const Model<T>& model);
  ~InferenceGuard();
  InferenceGuard(const InferenceGuard&) = delete;
  InferenceGuard& operator=(const InferenceGuard&) = delete;

 private:
  std::vector<std::pair<Tensor<T>, bool>> saved_;
};

// ---------------------------------------------------------------------------
// Data encoding.

struct EncodedInstance {
  RelationshipInstance source;
  RoiTriple rois;
  MultiLevelTarget target;  // empty vectors when a label is outside the trees
  GoldTriple gold;          // H0 indices for accuracy
  bool trainable = false;
};

struct EncodedImage {
  std::string id;
  Tensor<float> image;
  std::vector<EncodedInstance> instances;
};

/// Groups instances by image (in `image_ids` order) and encodes their labels.
/// `load` supplies the image tensor for an id.
std::vector<EncodedImage> encode_images(const std::vector<std::string>& image_ids,
                                        const std::vector<RelationshipInstance>& instances,
                                        const IHTree& object_tree, const IHTree& predicate_tree,
                                        const std::function<Tensor<float>(const std::string&)>& load);

MultiLevelTarget encode_target(const RelationshipInstance& r, const IHTree& object_tree, const IHTree& predicate_tree);

// ---------------------------------------------------------------------------
// Training and inference.

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0;
  double acc_s = 0;
  double acc_p = 0;
  double acc_o = 0;
  double acc_rel = 0;
  nlohmann::json to_json() const;
};

/// H0 rankings of every instance of `images`, in order.
std::vector<BranchRanking> rank_instances(const Model<float>& model, const std::vector<EncodedImage>& images);
std::vector<GoldTriple> gold_triples(const std::vector<EncodedImage>& images);

/// Epochs of per-image SGD over `train`; after every epoch the validation
/// set (when non-empty) is scored at Acc@1 and `on_epoch` is called.
std::vector<EpochMetrics> train_model(Model<float>& model, const std::vector<EncodedImage>& train,
                                      const std::vector<EncodedImage>& validation,
                                      const std::function<void(const EpochMetrics&)>& on_epoch = {});

/// Scores every candidate pair: top-k H0 predicates, top-1 H0 subject and
/// object, score = product of the three probabilities. Output is unsorted.
std::vector<RankedPrediction> predict(const Model<float>& model, const std::string& image_id,
                                      const Tensor<float>& image, const std::vector<std::pair<RoiBox, RoiBox>>& pairs,
                                      std::size_t k, const IHTree& object_tree, const IHTree& predicate_tree);

// ---------------------------------------------------------------------------
// Checkpoints carry the config and both trees so they can be reloaded alone.

void save_model(const std::filesystem::path& path, const Model<float>& model, const IHTree& object_tree,
                const IHTree& predicate_tree, const nlohmann::json& extra_meta = {});

struct LoadedModel {
  Model<float> model;
  IHTree object_tree;
  IHTree predicate_tree;
  nlohmann::json meta;
};

LoadedModel load_model(const std::filesystem::path& path);

}  // namespace zoomnet
