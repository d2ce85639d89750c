#include "zoomnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "zoomnet/error.hpp"
#include "zoomnet/rng.hpp"

namespace zoomnet {

using nlohmann::json;

// --- Catalog ----------------------------------------------------------------

namespace {

const std::set<std::string> kRules = {"left_of", "right_of", "above", "below", "inside", "overlapping", "touching"};

std::vector<std::string> string_list(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw ParseError("catalog: '" + field + "' must be a non-empty array");
  std::vector<std::string> out;
  for (const auto& v : j) out.push_back(v.get<std::string>());
  return out;
}

std::string substitute(std::string form, const std::string& key, const std::string& value) {
  const std::string token = "{" + key + "}";
  for (auto pos = form.find(token); pos != std::string::npos; pos = form.find(token)) form.replace(pos, token.size(), value);
  return form;
}

constexpr int kBigArea = 200;
const char* size_word(int area) { return area >= kBigArea ? "big" : "small"; }

}  // namespace

SceneCatalog SceneCatalog::from_json(const json& j) {
  try {
    SceneCatalog c;
    c.image_size = j.value("image_size", 64);
    c.min_shapes = j.value("min_shapes", 2);
    c.max_shapes = j.value("max_shapes", 4);
    if (c.image_size < 32) throw ConfigError("catalog: image_size must be at least 32");
    if (c.min_shapes < 2 || c.max_shapes < c.min_shapes) throw ConfigError("catalog: need 2 <= min_shapes <= max_shapes");
    for (const auto& col : j.at("colors")) {
      const auto rgb = col.at("rgb");
      if (!rgb.is_array() || rgb.size() != 3) throw ParseError("catalog: color rgb must have 3 entries");
      c.colors.push_back({col.at("name").get<std::string>(),
                          {rgb[0].get<std::uint8_t>(), rgb[1].get<std::uint8_t>(), rgb[2].get<std::uint8_t>()}});
    }
    for (const auto& cat : j.at("categories")) {
      c.categories.push_back({cat.at("name").get<std::string>(), string_list(cat.at("variants"), "variants")});
    }
    for (const auto& p : j.at("predicates")) {
      PredicateSpec spec{p.at("name").get<std::string>(), p.at("rule").get<std::string>(),
                         string_list(p.at("variants"), "variants")};
      if (!kRules.count(spec.rule)) throw ParseError("catalog: unknown geometry rule '" + spec.rule + "'");
      if (c.predicate_for_rule(spec.rule)) throw ParseError("catalog: rule '" + spec.rule + "' listed twice");
      c.predicates.push_back(std::move(spec));
    }
    if (c.colors.empty() || c.categories.empty() || c.predicates.empty()) {
      throw ParseError("catalog: colors, categories and predicates must be non-empty");
    }
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("catalog: ") + e.what());
  }
}

SceneCatalog SceneCatalog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open catalog " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

json SceneCatalog::to_json() const {
  json j;
  j["image_size"] = image_size;
  j["min_shapes"] = min_shapes;
  j["max_shapes"] = max_shapes;
  j["colors"] = json::array();
  for (const auto& c : colors) j["colors"].push_back({{"name", c.name}, {"rgb", {c.rgb[0], c.rgb[1], c.rgb[2]}}});
  j["categories"] = json::array();
  for (const auto& c : categories) j["categories"].push_back({{"name", c.name}, {"variants", c.variants}});
  j["predicates"] = json::array();
  for (const auto& p : predicates) j["predicates"].push_back({{"name", p.name}, {"rule", p.rule}, {"variants", p.variants}});
  return j;
}

const PredicateSpec* SceneCatalog::predicate_for_rule(const std::string& rule) const {
  for (const auto& p : predicates) {
    if (p.rule == rule) return &p;
  }
  return nullptr;
}

std::vector<std::string> SceneCatalog::object_surface_forms() const {
  std::vector<std::string> out;
  auto push = [&](const std::string& s) {
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  };
  for (const auto& cat : categories) {
    for (const auto& v : cat.variants) {
      if (v.find("{color}") != std::string::npos) {
        for (const auto& col : colors) push(substitute(v, "color", col.name));
      } else if (v.find("{size}") != std::string::npos) {
        push(substitute(v, "size", "big"));
        push(substitute(v, "size", "small"));
      } else {
        push(v);
      }
    }
  }
  return out;
}

std::vector<std::string> SceneCatalog::predicate_surface_forms() const {
  std::vector<std::string> out;
  for (const auto& p : predicates) out.insert(out.end(), p.variants.begin(), p.variants.end());
  return out;
}

// --- Geometry ---------------------------------------------------------------

std::optional<std::string> geometric_relation(const RoiBox& s, const RoiBox& o) {
  const bool s_in_o = o.x0 <= s.x0 && s.x1 <= o.x1 && o.y0 <= s.y0 && s.y1 <= o.y1;
  const bool o_in_s = s.x0 <= o.x0 && o.x1 <= s.x1 && s.y0 <= o.y0 && o.y1 <= s.y1;
  if (s_in_o && !o_in_s) return "inside";
  if (o_in_s) return std::nullopt;
  const double ox = std::min(s.x1, o.x1) - std::max(s.x0, o.x0);
  const double oy = std::min(s.y1, o.y1) - std::max(s.y0, o.y0);
  if (ox > 0 && oy > 0) return "overlapping";
  if ((ox == 0 && oy > 0) || (oy == 0 && ox > 0)) return "touching";
  const double gap_x = -ox;
  const double gap_y = -oy;
  if (gap_x >= gap_y) return s.x1 <= o.x0 ? "left_of" : "right_of";
  return s.y1 <= o.y0 ? "above" : "below";
}

// --- Images -----------------------------------------------------------------

Tensor<float> Image::to_tensor() const {
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  std::vector<float> v(3 * plane);
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < 3; ++c) v[c * plane + p] = rgb[3 * p + c] / 255.0f;
  }
  return Tensor<float>({1, 3, static_cast<std::size_t>(height), static_cast<std::size_t>(width)}, std::move(v));
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  Image img;
  int maxval = 0;
  in >> magic >> img.width >> img.height >> maxval;
  if (!in || magic != "P6" || img.width <= 0 || img.height <= 0 || maxval != 255) {
    throw ParseError(path.string() + ": not an 8-bit binary PPM");
  }
  in.get();
  img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.rgb.size())) throw ParseError(path.string() + ": truncated pixel data");
  return img;
}

// --- Scenes -----------------------------------------------------------------

RoiBox PlacedShape::box(int image_size) const {
  const double s = image_size;
  return {x0 / s, y0 / s, x1 / s, y1 / s};
}

namespace {

constexpr std::array<std::uint8_t, 3> kBackground = {24, 24, 24};

struct Extent {
  int w, h;
};

Extent sample_extent(const std::string& category, Rng& rng, int lo, int hi) {
  if (category == "bar") {
    const int len = rng.between(lo + lo / 2, hi + hi / 2);
    const int thick = std::max(3, rng.between(lo / 2, lo / 2 + 3));
    return rng.bernoulli(0.5) ? Extent{len, thick} : Extent{thick, len};
  }
  const int side = rng.between(lo, hi);
  return {side, side};
}

bool in_frame(const PlacedShape& s, int size) { return s.x0 >= 0 && s.y0 >= 0 && s.x1 <= size && s.y1 <= size; }

PlacedShape place_at(std::size_t category, std::size_t color, int x0, int y0, Extent e) {
  return {category, color, x0, y0, x0 + e.w, y0 + e.h};
}

PlacedShape random_shape(const SceneCatalog& cat, Rng& rng, int lo, int hi) {
  const std::size_t category = rng.below(cat.categories.size());
  const std::size_t color = rng.below(cat.colors.size());
  const Extent e = sample_extent(cat.categories[category].name, rng, lo, hi);
  const int n = cat.image_size;
  const int w = std::min(e.w, n - 2), h = std::min(e.h, n - 2);
  return place_at(category, color, rng.between(1, n - w - 1), rng.between(1, n - h - 1), {w, h});
}

// Places a pair (a, b) so that `rule` holds for a relative to b.
std::optional<std::pair<PlacedShape, PlacedShape>> place_pair(const SceneCatalog& cat, const std::string& rule,
                                                              Rng& rng) {
  const int n = cat.image_size;
  if (rule == "inside") {
    PlacedShape outer = random_shape(cat, rng, n * 2 / 5, n * 3 / 5);
    if (cat.categories[outer.category].name == "bar") return std::nullopt;
    const int ow = outer.x1 - outer.x0, oh = outer.y1 - outer.y0;
    const std::size_t category = rng.below(cat.categories.size());
    const std::size_t color = rng.below(cat.colors.size());
    const Extent e = sample_extent(cat.categories[category].name, rng, 5, 8);
    const int mx = ow / 4, my = oh / 4;
    if (e.w > ow - 2 * mx || e.h > oh - 2 * my) return std::nullopt;
    PlacedShape inner = place_at(category, color, outer.x0 + rng.between(mx, ow - mx - e.w),
                                 outer.y0 + rng.between(my, oh - my - e.h), e);
    return std::pair{inner, outer};
  }
  PlacedShape a = random_shape(cat, rng, n / 8, n / 4);
  PlacedShape b = random_shape(cat, rng, n / 8, n / 4);
  const int bw = b.x1 - b.x0, bh = b.y1 - b.y0;
  if (rule == "touching") {
    int x0 = b.x0, y0 = b.y0;
    switch (rng.below(4)) {
      case 0: x0 = a.x1; y0 = rng.between(a.y0 - bh + 1, a.y1 - 1); break;
      case 1: x0 = a.x0 - bw; y0 = rng.between(a.y0 - bh + 1, a.y1 - 1); break;
      case 2: y0 = a.y1; x0 = rng.between(a.x0 - bw + 1, a.x1 - 1); break;
      default: y0 = a.y0 - bh; x0 = rng.between(a.x0 - bw + 1, a.x1 - 1); break;
    }
    b = place_at(b.category, b.color, x0, y0, {bw, bh});
  } else if (rule == "overlapping") {
    b = place_at(b.category, b.color, rng.between(a.x0 - bw + 2, a.x1 - 2), rng.between(a.y0 - bh + 2, a.y1 - 2),
                 {bw, bh});
  }
  return std::pair{a, b};
}

void draw(Image& img, const PlacedShape& s, const std::string& category, const std::array<std::uint8_t, 3>& rgb) {
  const double cx = (s.x0 + s.x1) / 2.0, cy = (s.y0 + s.y1) / 2.0;
  const double rx = (s.x1 - s.x0) / 2.0, ry = (s.y1 - s.y0) / 2.0;
  for (int y = s.y0; y < s.y1; ++y) {
    for (int x = s.x0; x < s.x1; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      bool fill = true;
      if (category == "circle") {
        const double dx = (px - cx) / rx, dy = (py - cy) / ry;
        fill = dx * dx + dy * dy <= 1.0;
      } else if (category == "triangle") {
        const double t = (py - s.y0) / (s.y1 - s.y0);
        fill = std::abs(px - cx) <= t * rx;
      }
      if (!fill) continue;
      auto* p = &img.rgb[3 * (static_cast<std::size_t>(y) * img.width + x)];
      p[0] = rgb[0];
      p[1] = rgb[1];
      p[2] = rgb[2];
    }
  }
}

std::string object_label(const SceneCatalog& cat, const PlacedShape& s, double noise, Rng& rng) {
  const auto& variants = cat.categories[s.category].variants;
  std::size_t pick = 0;
  const bool noisy = rng.bernoulli(noise);
  const std::size_t alt = variants.size() > 1 ? 1 + rng.below(variants.size() - 1) : 0;
  if (noisy) pick = alt;
  std::string form = substitute(variants[pick], "color", cat.colors[s.color].name);
  return substitute(form, "size", size_word(s.area()));
}

std::string predicate_label(const PredicateSpec& p, double noise, Rng& rng) {
  const bool noisy = rng.bernoulli(noise);
  const std::size_t alt = p.variants.size() > 1 ? 1 + rng.below(p.variants.size() - 1) : 0;
  return p.variants[noisy ? alt : 0];
}

double overlap_ratio(const PlacedShape& a, const PlacedShape& b) {
  const int ix = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const int iy = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  if (ix <= 0 || iy <= 0) return 0.0;
  return static_cast<double>(ix * iy) / std::min(a.area(), b.area());
}

}  // namespace

Scene generate_scene(std::uint64_t seed, const SceneCatalog& cat, double noise, const std::string& image_id,
                     std::optional<std::size_t> required_predicate) {
  if (required_predicate) ZN_REQUIRE(*required_predicate < cat.predicates.size(), "required predicate out of range");
  Rng rng(seed);
  const int n = cat.image_size;
  Scene scene;
  scene.id = image_id;

  const std::string rule =
      cat.predicates[required_predicate ? *required_predicate : rng.below(cat.predicates.size())].rule;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 10000) throw ContractError("scene " + image_id + ": could not place rule " + rule);
    auto pair = place_pair(cat, rule, rng);
    if (!pair || !in_frame(pair->first, n) || !in_frame(pair->second, n)) continue;
    if (geometric_relation(pair->first.box(n), pair->second.box(n)) != rule) continue;
    scene.shapes = {pair->first, pair->second};
    break;
  }

  const int target = rng.between(cat.min_shapes, cat.max_shapes);
  for (int attempt = 0; static_cast<int>(scene.shapes.size()) < target && attempt < 200; ++attempt) {
    PlacedShape s = random_shape(cat, rng, n / 8, n / 4);
    bool ok = true;
    for (const auto& other : scene.shapes) {
      if (overlap_ratio(s, other) > 0.25 || s.box(n) == other.box(n)) ok = false;
    }
    if (ok) scene.shapes.push_back(s);
  }

  scene.image.width = scene.image.height = n;
  scene.image.rgb.assign(static_cast<std::size_t>(n) * n * 3, 0);
  for (std::size_t p = 0; p < scene.image.rgb.size(); p += 3) {
    std::copy(kBackground.begin(), kBackground.end(), scene.image.rgb.begin() + static_cast<std::ptrdiff_t>(p));
  }
  std::vector<std::size_t> order(scene.shapes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scene.shapes[a].area() > scene.shapes[b].area(); });
  for (auto i : order) {
    const auto& s = scene.shapes[i];
    draw(scene.image, s, cat.categories[s.category].name, cat.colors[s.color].rgb);
  }

  std::vector<std::string> labels;
  for (const auto& s : scene.shapes) labels.push_back(object_label(cat, s, noise, rng));
  for (std::size_t i = 0; i < scene.shapes.size(); ++i) {
    for (std::size_t j = 0; j < scene.shapes.size(); ++j) {
      if (i == j) continue;
      const RoiBox bs = scene.shapes[i].box(n), bo = scene.shapes[j].box(n);
      const auto r = geometric_relation(bs, bo);
      if (!r) continue;
      const PredicateSpec* p = cat.predicate_for_rule(*r);
      if (!p) continue;
      scene.instances.push_back({image_id, {labels[i], bs}, predicate_label(*p, noise, rng), {labels[j], bo}});
    }
  }
  return scene;
}

// --- Datasets ---------------------------------------------------------------

std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

std::string hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return hash_hex(fnv1a(ss.str()));
}

json DatasetConfig::to_json() const { return {{"count", count}, {"seed", seed}, {"noise", noise}}; }

json DatasetManifest::to_json() const {
  json j;
  j["format"] = kDatasetFormat;
  j["tool_version"] = tool_version;
  j["config"] = config.to_json();
  j["config_hash"] = config_hash;
  j["seed"] = config.seed;
  j["image_ids"] = image_ids;
  j["images"] = images;
  j["annotations"] = annotations;
  j["annotations_hash"] = annotations_hash;
  if (split) {
    j["split"] = {{"ratio", split->ratio}, {"seed", split->seed}, {"train", split->train}, {"test", split->test}};
  }
  if (!provenance.is_null()) j["provenance"] = provenance;
  return j;
}

DatasetManifest DatasetManifest::from_json(const json& j) {
  try {
    if (j.value("format", std::string{}) != kDatasetFormat) {
      throw ParseError("manifest: unsupported format '" + j.value("format", std::string{}) + "'");
    }
    DatasetManifest m;
    m.tool_version = j.value("tool_version", std::string{});
    const auto& c = j.at("config");
    m.config.count = c.at("count").get<std::size_t>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.config.noise = c.at("noise").get<double>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.image_ids = j.at("image_ids").get<std::vector<std::string>>();
    m.images = j.at("images").get<std::vector<std::string>>();
    m.annotations = j.at("annotations").get<std::string>();
    m.annotations_hash = j.value("annotations_hash", std::string{});
    if (m.images.size() != m.image_ids.size()) throw ParseError("manifest: images and image_ids differ in length");
    if (j.contains("split")) {
      const auto& s = j.at("split");
      m.split = DatasetSplit{s.at("ratio").get<double>(), s.at("seed").get<std::uint64_t>(),
                             s.at("train").get<std::vector<std::string>>(), s.at("test").get<std::vector<std::string>>()};
    }
    if (j.contains("provenance")) m.provenance = j.at("provenance");
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << manifest.to_json().dump(2) << '\n';
  if (!os) throw IoError("failed writing " + path.string());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  try {
    return DatasetManifest::from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

DatasetManifest generate_dataset(const DatasetConfig& config, const SceneCatalog& catalog,
                                 const std::filesystem::path& dir, std::size_t workers) {
  if (config.count < 1) throw ConfigError("dataset count must be at least 1");
  if (config.noise < 0 || config.noise > 1) throw ConfigError("noise rate must lie in [0, 1]");
  std::error_code ec;
  std::filesystem::create_directories(dir / "images", ec);
  if (ec) throw IoError("cannot create " + (dir / "images").string() + ": " + ec.message());

  const std::size_t width = std::to_string(config.count - 1).size();
  auto id_of = [&](std::size_t i) {
    std::string s = std::to_string(i);
    return "img" + std::string(std::max<std::size_t>(width, 5) - s.size(), '0') + s;
  };

  std::vector<Scene> scenes(config.count);
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < config.count; i += step) {
      scenes[i] = generate_scene(derive_seed(config.seed, i), catalog, config.noise, id_of(i),
                                 i % catalog.predicates.size());
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, config.count));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    for (auto& t : pool) t.join();
  }

  DatasetManifest m;
  m.config = config;
  json hashed = {{"dataset", config.to_json()}, {"catalog", catalog.to_json()}};
  m.config_hash = hash_hex(fnv1a(hashed.dump()));
  m.tool_version = ZOOMNET_VERSION;
  std::vector<RelationshipInstance> all;
  for (const auto& s : scenes) {
    const std::string rel = "images/" + s.id + ".ppm";
    write_ppm(dir / rel, s.image);
    m.image_ids.push_back(s.id);
    m.images.push_back(rel);
    all.insert(all.end(), s.instances.begin(), s.instances.end());
  }
  save_annotations(dir / m.annotations, all);
  m.annotations_hash = hash_file(dir / m.annotations);
  save_manifest(dir / "manifest.json", m);
  return m;
}

DatasetSplit split_dataset(const DatasetManifest& manifest, const std::vector<RelationshipInstance>& instances,
                           double ratio, std::uint64_t seed) {
  if (!(ratio > 0 && ratio < 1)) throw ConfigError("split ratio must lie in (0, 1)");
  const std::size_t n = manifest.image_ids.size();
  std::map<std::string, std::size_t> image_index;
  for (std::size_t i = 0; i < n; ++i) image_index[manifest.image_ids[i]] = i;

  // Label -> images containing it; image -> labels.
  std::map<std::string, std::set<std::size_t>> images_of;
  std::vector<std::set<std::string>> labels_of(n);
  for (const auto& r : instances) {
    auto it = image_index.find(r.image);
    if (it == image_index.end()) throw LookupError("annotation refers to unknown image '" + r.image + "'");
    for (const auto& key : {"object:" + r.subject.label, "object:" + r.object.label, "predicate:" + r.predicate}) {
      images_of[key].insert(it->second);
      labels_of[it->second].insert(key);
    }
  }
  std::vector<std::string> lonely;
  for (const auto& [key, imgs] : images_of) {
    if (imgs.size() < 2) lonely.push_back(key);
  }
  if (!lonely.empty()) {
    std::string msg = "split coverage unsatisfiable; labels occurring in a single image:";
    for (const auto& l : lonely) msg += " '" + l + "'";
    throw ConfigError(msg);
  }

  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratio));
  if (n_train == 0 || n_train == n) throw ConfigError("split leaves one side empty for " + std::to_string(n) + " images");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<char> in_train(n, 0);
  for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = 1;

  // Per label, number of images on each side.
  std::map<std::string, std::array<std::size_t, 2>> count;
  for (const auto& [key, imgs] : images_of) {
    for (auto i : imgs) ++count[key][in_train[i]];
  }
  auto missing = [&]() -> std::optional<std::pair<std::string, int>> {
    for (const auto& [key, c] : count) {
      if (c[1] == 0) return std::pair{key, 1};
      if (c[0] == 0) return std::pair{key, 0};
    }
    return std::nullopt;
  };
  auto move = [&](std::size_t img, int side) {
    for (const auto& key : labels_of[img]) {
      --count[key][in_train[img]];
      ++count[key][side];
    }
    in_train[img] = static_cast<char>(side);
  };
  // A swap is accepted when it fixes the missing label without uncovering another one.
  auto safe_to_leave = [&](std::size_t img) {
    for (const auto& key : labels_of[img]) {
      if (count[key][in_train[img]] < 2) return false;
    }
    return true;
  };
  for (std::size_t guard = 0; auto gap = missing(); ++guard) {
    if (guard > 4 * n) throw ConfigError("split coverage repair did not converge for label '" + gap->first + "'");
    const auto& [key, need] = *gap;
    const int other = 1 - need;
    std::optional<std::size_t> donor, partner;
    for (auto i : images_of[key]) {
      if (in_train[i] == other && safe_to_leave(i)) {
        donor = i;
        break;
      }
    }
    if (!donor) {
      for (auto i : images_of[key]) {
        if (in_train[i] == other) {
          donor = i;
          break;
        }
      }
    }
    move(*donor, need);
    for (auto i : order) {
      if (in_train[i] == need && i != *donor && !labels_of[i].count(key) && safe_to_leave(i)) {
        partner = i;
        break;
      }
    }
    if (!partner) {
      for (auto i : order) {
        if (in_train[i] == need && i != *donor && !labels_of[i].count(key)) {
          partner = i;
          break;
        }
      }
    }
    if (!partner) throw ConfigError("split coverage repair found no swap partner for label '" + key + "'");
    move(*partner, other);
  }

  DatasetSplit out{ratio, seed, {}, {}};
  for (std::size_t i = 0; i < n; ++i) (in_train[i] ? out.train : out.test).push_back(manifest.image_ids[i]);
  return out;
}

}  // namespace zoomnet
