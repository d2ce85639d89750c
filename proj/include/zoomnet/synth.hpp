#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "zoomnet/relationship.hpp"
#include "zoomnet/tensor.hpp"

namespace zoomnet {

struct ShapeCategory {
  std::string name;
  /// variants[0] is canonical; "{color}" and "{size}" are substituted.
  std::vector<std::string> variants;
};

struct PredicateSpec {
  std::string name;
  std::string rule;  // left_of, right_of, above, below, inside, overlapping, touching
  std::vector<std::string> variants;
};

struct NamedColor {
  std::string name;
  std::array<std::uint8_t, 3> rgb;
};

/// Shapes, colours and predicates with their noisy surface forms.
struct SceneCatalog {
  int image_size = 64;
  int min_shapes = 2;
  int max_shapes = 4;
  std::vector<NamedColor> colors;
  std::vector<ShapeCategory> categories;
  std::vector<PredicateSpec> predicates;

  static SceneCatalog from_json(const nlohmann::json& j);
  static SceneCatalog load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  const PredicateSpec* predicate_for_rule(const std::string& rule) const;
  /// Every surface form in the catalog; objects expand {color} and {size}.
  std::vector<std::string> object_surface_forms() const;
  std::vector<std::string> predicate_surface_forms() const;
};

/// Geometry rule that holds for the ordered pair (subject, object), if any.
/// Decided from the boxes alone, in priority order: inside, overlapping,
/// touching, then the dominant axis of separation (left/right or above/below).
/// A subject that strictly contains the object yields no rule.
std::optional<std::string> geometric_relation(const RoiBox& subject, const RoiBox& object);

/// Packed 8-bit RGB raster.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  /// 1×3×H×W with values in [0, 1].
  Tensor<float> to_tensor() const;
};

void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);

struct PlacedShape {
  std::size_t category = 0;
  std::size_t color = 0;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // pixel box, half-open

  RoiBox box(int image_size) const;
  int area() const { return (x1 - x0) * (y1 - y0); }
};

struct Scene {
  std::string id;
  Image image;
  std::vector<PlacedShape> shapes;
  std::vector<RelationshipInstance> instances;
};

/// Renders 2–4 shapes and annotates every ordered pair whose geometry
/// matches a catalog predicate. When `required_predicate` is given the first
/// two shapes are placed so that predicate holds between them.
Scene generate_scene(std::uint64_t seed, const SceneCatalog& catalog, double noise, const std::string& image_id,
                     std::optional<std::size_t> required_predicate = std::nullopt);

struct DatasetConfig {
  std::size_t count = 100;
  std::uint64_t seed = 0;
  double noise = 0.0;
  nlohmann::json to_json() const;
};

struct DatasetSplit {
  double ratio = 0.8;
  std::uint64_t seed = 0;
  std::vector<std::string> train;
  std::vector<std::string> test;
};

inline constexpr const char* kDatasetFormat = "zoomnet-dataset/1";

struct DatasetManifest {
  DatasetConfig config;
  std::string config_hash;
  std::string tool_version;
  std::vector<std::string> image_ids;
  std::vector<std::string> images;  // paths relative to the dataset directory
  std::string annotations = "annotations.jsonl";
  std::string annotations_hash;
  std::optional<DatasetSplit> split;
  nlohmann::json provenance;  // run configuration of the producing command

  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);
};

/// Writes images/<id>.ppm, annotations.jsonl and manifest.json under `dir`.
/// Scene i uses seed derive_seed(seed, i) and is forced to contain catalog
/// predicate i mod |predicates|, so every predicate is covered.
DatasetManifest generate_dataset(const DatasetConfig& config, const SceneCatalog& catalog,
                                 const std::filesystem::path& dir, std::size_t workers = 1);

/// Random split of the manifest's images at `ratio` (rounded), followed by a
/// swap-based repair so that every object and predicate H0 label appears on
/// both sides. Throws ConfigError listing labels that occur in a single image.
DatasetSplit split_dataset(const DatasetManifest& manifest, const std::vector<RelationshipInstance>& instances,
                           double ratio, std::uint64_t seed);

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);

std::string hash_hex(std::uint64_t h);
std::string hash_file(const std::filesystem::path& path);

}  // namespace zoomnet
