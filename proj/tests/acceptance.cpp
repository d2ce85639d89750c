// Acceptance suite: one pass/fail line per criterion.
//
//   zoomnet_acceptance [--criterion N]... [--workdir DIR] [--zoomnet PATH]
//
// Training criteria share one synthetic dataset and memoize finished runs
// under <workdir>/runs, keyed by model and dataset configuration hashes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zoomnet/error.hpp"
#include "zoomnet/eval.hpp"
#include "zoomnet/ihtree.hpp"
#include "zoomnet/pipeline.hpp"
#include "zoomnet/rng.hpp"
#include "zoomnet/roi.hpp"
#include "zoomnet/verify.hpp"

using namespace zoomnet;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Pinned settings.
constexpr double kGradTol = 1e-3;
constexpr double kGradEps = 1e-5;
constexpr std::size_t kGradSeeds = 20;
constexpr double kGradSeconds = 120;
constexpr std::size_t kDeroiConfigs = 1000;
constexpr double kDeroiSeconds = 30;
constexpr std::size_t kDataCount = 2500;  // 2000 train / 500 test
constexpr std::uint64_t kDataSeed = 2024;
constexpr double kCleanNoise = 0.0;  // ablation ladder
constexpr double kNoisyNoise = 0.3;  // tree and loss-weight comparisons
constexpr std::size_t kEpochs = 8;
constexpr double kLr = 5e-4;
constexpr std::size_t kPairsPerImage = 2;
const std::vector<std::uint64_t> kSeeds{0, 1, 2};
constexpr double kAblationGap = 0.10;
constexpr double kAblationSeconds = 30 * 60;
constexpr double kTreeTie = 0.005;
constexpr double kLchSibling = 0.3869;
constexpr double kLchTol = 1e-4;
constexpr std::size_t kOracleFixtures = 200;
constexpr std::size_t kSharedFixtures = 100;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path workdir;
  fs::path zoomnet;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

std::string pct(double v) { return fmt(100 * v, 2); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// ---------------------------------------------------------------------------
// 1. Gradient suite

Outcome gradient_suite(const Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  GradcheckOptions opts;
  opts.seeds = kGradSeeds;
  opts.eps = kGradEps;
  opts.bits = 64;
  opts.tolerance = kGradTol;
  const auto rows = run_gradcheck(opts);
  const double secs = seconds_since(t0);
  bool pass = secs < kGradSeconds;
  double worst = 0;
  std::string worst_op, failed;
  for (const auto& r : rows) {
    if (!r.pass) failed += " " + r.op;
    pass = pass && r.pass;
    if (r.max_error >= worst) {
      worst = r.max_error;
      worst_op = r.op;
    }
  }
  std::ostringstream os;
  os << rows.size() << " ops x " << kGradSeeds << " seeds, worst " << std::scientific << std::setprecision(2) << worst
     << " (" << worst_op << ") <= " << kGradTol << std::defaultfloat << ", " << fmt(secs, 1) << "s < " << kGradSeconds << "s";
  if (!failed.empty()) os << "; failed:" << failed;
  return {pass, os.str()};
}

// ---------------------------------------------------------------------------
// 2. deROI invariants

Outcome deroi_invariants(const Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(7);
  std::size_t exterior_bad = 0, roundtrip_bad = 0;
  for (std::size_t t = 0; t < kDeroiConfigs; ++t) {
    // Integer-aligned rectangle whose size is a multiple of the local grid.
    const std::size_t h = 1 + rng.below(6), w = 1 + rng.below(6);
    const std::size_t mh = 1 + rng.below(3), mw = 1 + rng.below(3);
    const std::size_t rh = h * mh, rw = w * mw;
    const std::size_t ph = rh + rng.below(8), pw = rw + rng.below(8);
    const std::size_t y0 = rng.below(ph - rh + 1), x0 = rng.below(pw - rw + 1);
    const RoiBox roi{double(x0) / double(pw), double(y0) / double(ph), double(x0 + rw) / double(pw),
                     double(y0 + rh) / double(ph)};
    const std::size_t n = 1 + rng.below(2), c = 1 + rng.below(3);
    std::vector<double> v(n * c * h * w);
    for (auto& x : v) x = rng.uniform(-2, 2);
    Tensor<double> local(Shape{n, c, h, w}, v);
    auto pal = deroi_pool(local, roi, ph, pw);
    for (std::size_t b = 0; b < n * c; ++b)
      for (std::size_t y = 0; y < ph; ++y)
        for (std::size_t x = 0; x < pw; ++x) {
          const bool inside = y >= y0 && y < y0 + rh && x >= x0 && x < x0 + rw;
          if (!inside && pal[(b * ph + y) * pw + x] != 0.0) ++exterior_bad;
        }
    auto back = roi_pool(pal, roi, h, w);
    for (std::size_t i = 0; i < local.numel(); ++i)
      if (back[i] != local[i]) {
        ++roundtrip_bad;
        break;
      }
  }
  // Arbitrary boxes: the rectangle comes from an independent rounding rule.
  std::size_t random_checked = 0;
  for (std::size_t t = 0; t < kDeroiConfigs; ++t) {
    const double ax = rng.uniform(), bx = rng.uniform(), ay = rng.uniform(), by = rng.uniform();
    const RoiBox roi{std::min(ax, bx), std::min(ay, by), std::max(ax, bx), std::max(ay, by)};
    const std::size_t ph = 2 + rng.below(14), pw = 2 + rng.below(14);
    const long y0 = std::lround(roi.y0 * double(ph)), y1 = std::lround(roi.y1 * double(ph));
    const long x0 = std::lround(roi.x0 * double(pw)), x1 = std::lround(roi.x1 * double(pw));
    if (y1 <= y0 || x1 <= x0) continue;  // degenerate rectangles are widened by design
    ++random_checked;
    const std::size_t h = 1 + rng.below(4), w = 1 + rng.below(4);
    Tensor<double> local(Shape{1, 2, h, w}, 0.0);
    for (std::size_t i = 0; i < local.numel(); ++i) local[i] = rng.uniform(0.5, 2);
    auto pal = deroi_pool(local, roi, ph, pw);
    for (std::size_t c = 0; c < 2; ++c)
      for (long y = 0; y < long(ph); ++y)
        for (long x = 0; x < long(pw); ++x) {
          const bool inside = y >= y0 && y < y1 && x >= x0 && x < x1;
          const double cell = pal[(c * ph + std::size_t(y)) * pw + std::size_t(x)];
          if (inside != (cell != 0.0)) ++exterior_bad;
        }
  }
  const double secs = seconds_since(t0);
  const bool pass = exterior_bad == 0 && roundtrip_bad == 0 && secs < kDeroiSeconds;
  return {pass, std::to_string(kDeroiConfigs) + " aligned + " + std::to_string(random_checked) + " arbitrary configs, " + std::to_string(exterior_bad) +
                    " nonzero exterior cells, " + std::to_string(roundtrip_bad) + " round-trip mismatches, " +
                    fmt(secs, 2) + "s < " + fmt(kDeroiSeconds, 0) + "s"};
}

// ---------------------------------------------------------------------------
// Shared training harness for 3, 4 and 7.

struct Corpus {
  std::string name;
  Dataset data;
  TreePair trees;
  std::vector<EncodedImage> train, test;
};

const Corpus& corpus(const Context& ctx, double noise) {
  static std::map<double, std::unique_ptr<Corpus>> cache;
  if (auto it = cache.find(noise); it != cache.end()) return *it->second;
  const std::string name = "data-noise" + fmt(noise, 2);
  const fs::path dir = ctx.workdir / name;
  const DatasetConfig cfg{kDataCount, kDataSeed, noise};
  bool fresh = true;
  if (fs::exists(dir / "manifest.json")) {
    auto m = load_manifest(dir / "manifest.json");
    fresh = m.config.to_json() != cfg.to_json() || !m.split;
  }
  if (fresh) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto m = generate_dataset(cfg, SceneCatalog::load(resource_dir() / "catalog.json"), dir);
    m.split = split_dataset(m, load_annotations(dir / m.annotations), 0.8, kDataSeed);
    save_manifest(dir / "manifest.json", m);
  }
  auto c = std::make_unique<Corpus>();
  c->name = name;
  c->data = load_dataset(dir);
  const auto res = resource_dir();
  c->trees = build_trees(c->data.split_instances("train"), Lexicon::load(res / "lexicon.tsv", res / "exceptions.tsv"),
                         Taxonomy::load(res / "taxonomy.tsv"));
  c->train = c->data.encode("train", c->trees.object, c->trees.predicate);
  c->test = c->data.encode("test", c->trees.object, c->trees.predicate);
  return *(cache[noise] = std::move(c));
}

ModelConfig base_config(std::uint64_t seed) {
  ModelConfig c;
  c.epochs = kEpochs;
  c.lr = kLr;
  c.pairs_per_image = kPairsPerImage;
  c.seed = seed;
  return c;
}

struct RunResult {
  AccResult acc;
  double seconds = 0;
  bool cached = false;
};

// Trains on the 2000-image split and scores Acc@1 on the 500 held-out images.
RunResult run(const Context& ctx, double noise, const ModelConfig& cfg) {
  const auto& c = corpus(ctx, noise);
  const fs::path runs = ctx.workdir / "runs";
  fs::create_directories(runs);
  const fs::path file = runs / (cfg.hash() + "-" + c.data.manifest.annotations_hash + ".json");
  if (fs::exists(file)) {
    auto j = json::parse(slurp(file));
    RunResult r;
    r.acc.subject = j["subject"];
    r.acc.predicate = j["predicate"];
    r.acc.object = j["object"];
    r.acc.relationship_joint = j["relationship_joint"];
    r.acc.relationship_mean = j["relationship_mean"];
    r.seconds = j["seconds"];
    r.cached = true;
    return r;
  }
  const auto t0 = std::chrono::steady_clock::now();
  auto model = build_model<float>(cfg, c.trees.object, c.trees.predicate);
  train_model(model, c.train, {});
  RunResult r;
  r.acc = acc_at_n(rank_instances(model, c.test), gold_triples(c.test), 1);
  r.seconds = seconds_since(t0);
  std::ofstream(file) << json{{"config", cfg.to_json()},
                              {"subject", r.acc.subject},
                              {"predicate", r.acc.predicate},
                              {"object", r.acc.object},
                              {"relationship_joint", r.acc.relationship_joint},
                              {"relationship_mean", r.acc.relationship_mean},
                              {"seconds", r.seconds}}
                              .dump(2)
                       << '\n';
  return r;
}

struct Arm {
  std::string name;
  std::function<void(ModelConfig&)> tweak;
};

// Held-out Acc@1 of every arm and seed; `seconds` accumulates training time.
std::map<std::string, std::vector<AccResult>> run_arms(const Context& ctx, double noise, const std::vector<Arm>& arms,
                                                       double* seconds = nullptr) {
  std::map<std::string, std::vector<AccResult>> out;
  for (const auto& arm : arms) {
    for (auto seed : kSeeds) {
      auto cfg = base_config(seed);
      arm.tweak(cfg);
      auto r = run(ctx, noise, cfg);
      if (seconds) *seconds += r.seconds;
      out[arm.name].push_back(r.acc);
      std::cerr << "  " << arm.name << " seed " << seed << ": subject " << pct(r.acc.subject) << " predicate "
                << pct(r.acc.predicate) << " object " << pct(r.acc.object) << " joint "
                << pct(r.acc.relationship_joint) << (r.cached ? " (memoized)" : "") << " " << fmt(r.seconds, 1)
                << "s\n";
    }
  }
  return out;
}

double median_of(const std::vector<AccResult>& runs, double AccResult::*field) {
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(r.*field);
  return median(v);
}

const Arm kScam2{"2xSCA-M", [](ModelConfig& c) { c.interaction = InteractionKind::SCAM; c.stacks = 2; }};
const Arm kScam1{"SCA-M", [](ModelConfig& c) { c.interaction = InteractionKind::SCAM; c.stacks = 1; }};
const Arm kCam{"CA-M", [](ModelConfig& c) { c.interaction = InteractionKind::CAM; c.stacks = 1; }};
const Arm kAm{"A-M", [](ModelConfig& c) { c.interaction = InteractionKind::AM; c.stacks = 1; }};

// ---------------------------------------------------------------------------
// 3. Ablation ordering

Outcome ablation_ordering(const Context& ctx) {
  double secs = 0;
  auto m = run_arms(ctx, kCleanNoise, {kScam2, kScam1, kCam, kAm}, &secs);
  const auto j = &AccResult::relationship_joint;
  const double s2 = median_of(m["2xSCA-M"], j), s1 = median_of(m["SCA-M"], j), ca = median_of(m["CA-M"], j),
               am = median_of(m["A-M"], j);
  const bool order = s2 >= s1 && s1 >= ca && ca >= am;
  const bool gap = s1 - am >= kAblationGap;
  const bool fast = secs < kAblationSeconds;
  return {order && gap && fast, "median joint Rel Acc@1 2xSCA-M " + pct(s2) + " >= SCA-M " + pct(s1) + " >= CA-M " +
                                    pct(ca) + " >= A-M " + pct(am) + (order ? "" : " [order violated]") +
                                    "; SCA-M - A-M = " + pct(s1 - am) + " pts (need >= " + pct(kAblationGap) +
                                    ", label noise " + fmt(kCleanNoise, 1) + "); training " + fmt(secs / 60, 1) + " min (need < 30)"};
}

// ---------------------------------------------------------------------------
// 4. IH-tree ablation direction

Outcome tree_ablation(const Context& ctx) {
  const Arm flat{"H0", [](ModelConfig& c) { c.label_levels = LabelLevels::H0; }};
  const Arm full{"full", [](ModelConfig&) {}};
  auto m = run_arms(ctx, kNoisyNoise, {full, flat});
  const double f = median_of(m["full"], &AccResult::predicate), h = median_of(m["H0"], &AccResult::predicate);
  const bool pass = f >= h - kTreeTie;
  return {pass, "median H0 predicate Acc@1 full tree " + pct(f) + " vs H0-only " + pct(h) +
                    " (tie tolerance " + pct(kTreeTie) + " pts, label noise " + fmt(kNoisyNoise, 1) + ")"};
}

// ---------------------------------------------------------------------------
// 5. IH-tree golden tests

Outcome tree_goldens(const Context&) {
  const auto res = resource_dir();
  const auto lex = Lexicon::load(res / "lexicon.tsv", res / "exceptions.tsv");
  std::vector<std::string> bad;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) bad.push_back(what);
  };
  expect(normalize_object_label("old man", lex) == "man", "old man");
  expect(normalize_object_label("men", lex) == "man", "men");
  const auto wears = normalize_predicate_label("wears a", lex);
  expect(wears.verb == std::optional<std::string>("wear") && !wears.prep && !wears.adj, "wears a");
  const auto wearing = normalize_predicate_label("wearing a hat", lex);
  expect(wearing.verb == std::optional<std::string>("wear"), "wearing a hat");
  const auto walking = normalize_predicate_label("walking on a", lex);
  expect(walking.verb == std::optional<std::string>("walk") && walking.prep == std::optional<std::string>("on") &&
             !walking.adj,
         "walking on a");

  std::istringstream toy("entity\t-\tentity\nclothing\tentity\tclothing\nshirt\tclothing\tshirt\njacket\tclothing\tjacket\n");
  const auto tax = Taxonomy::parse(toy, "toy");
  expect(tax.depth() == 3, "toy depth");
  const auto shirt = *tax.find_id("shirt"), jacket = *tax.find_id("jacket");
  const double ident_raw = lch_similarity(shirt, shirt, tax, false);
  const double ident = lch_similarity(shirt, shirt, tax, true);
  const double sib = lch_similarity(shirt, jacket, tax, true);
  expect(std::abs(ident_raw - std::log(6.0)) < 1e-12, "identical raw = ln 2D");
  expect(std::abs(ident - 1.0) < 1e-12, "identical normalized = 1");
  expect(std::abs(sib - kLchSibling) <= kLchTol, "siblings normalized");

  const auto o = build_object_tree({"old man", "men", "dog"}, lex, Taxonomy::load(res / "taxonomy.tsv"));
  const auto p = build_predicate_tree({"are standing on", "stands on", "on"}, lex);
  const auto report = class_count_report(o, p);
  std::vector<std::string> levels;
  for (const auto& row : report["rows"]) {
    expect(row.contains("tree") && row.contains("level") && row.contains("classes"), "row fields");
    levels.push_back(row.value("level", std::string{}));
  }
  expect(report.value("title", std::string{}) == "Number of classes in each layer", "report title");
  expect(levels == std::vector<std::string>{"H0", "H1", "H2", "H0", "H1", "H2-1", "H2-2"}, "report levels");

  // Trees over the synthetic label set against the checked-in goldens.
  const auto catalog = SceneCatalog::load(res / "catalog.json");
  const fs::path tmp = fs::temp_directory_path() / "zoomnet_acceptance_golden";
  fs::create_directories(tmp);
  save_tree(build_object_tree(catalog.object_surface_forms(), lex, Taxonomy::load(res / "taxonomy.tsv")),
            tmp / "object_tree.json");
  save_tree(build_predicate_tree(catalog.predicate_surface_forms(), lex), tmp / "predicate_tree.json");
  for (const char* f : {"object_tree.json", "predicate_tree.json"})
    expect(slurp(tmp / f) == slurp(fs::path(ZOOMNET_GOLDEN_DIR) / f), std::string("golden ") + f);

  std::string detail = "5 normalizations, LCH identical raw " + fmt(ident_raw) + " / normalized " + fmt(ident) +
                       ", siblings " + fmt(sib) + " (expect " + fmt(kLchSibling) + " +- 1e-4), class-count schema " +
                       std::to_string(levels.size()) + " rows, golden trees";
  if (!bad.empty()) {
    detail += "; mismatches:";
    for (const auto& b : bad) detail += " [" + b + "]";
  }
  return {bad.empty(), detail};
}

// ---------------------------------------------------------------------------
// 6. Metrics oracle

RankedPrediction make_pred(const std::string& img, const LabeledBox& s, const std::string& p, const LabeledBox& o,
                           double score) {
  RankedPrediction r;
  r.image = img;
  r.subject = {s.label, s.box, 1.0};
  r.predicate = {p, 1.0};
  r.object = {o.label, o.box, 1.0};
  r.score = score;
  return r;
}

std::size_t exhaustive(const std::vector<RankedPrediction>& preds, const std::vector<RelationshipInstance>& gold,
                       std::size_t n, RecallTask task) {
  std::vector<std::size_t> order(preds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return preds[a].score > preds[b].score; });
  if (order.size() > n) order.resize(n);
  std::vector<char> used(order.size(), 0);
  std::function<std::size_t(std::size_t)> go = [&](std::size_t g) -> std::size_t {
    if (g == gold.size()) return 0;
    std::size_t best = go(g + 1);
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (used[i] || !triplet_matches(preds[order[i]], gold[g], task)) continue;
      used[i] = 1;
      best = std::max(best, 1 + go(g + 1));
      used[i] = 0;
    }
    return best;
  };
  return go(0);
}

struct OracleFixture {
  std::vector<RelationshipInstance> gold;
  std::vector<RankedPrediction> preds;
};

// A synthetic scene supplies up to 5 gold triplets; predictions are up to 20
// scored candidates over ordered pairs of its annotated boxes with labels
// drawn from the scene's own label set, so label collisions are frequent.
OracleFixture oracle_fixture(std::uint64_t seed, const SceneCatalog& catalog) {
  Rng rng(seed);
  OracleFixture f;
  Scene scene;
  do {
    scene = generate_scene(seed * 7919 + rng.below(1000), catalog, 0.0, "img");
  } while (scene.instances.empty());
  f.gold = scene.instances;
  if (f.gold.size() > 5) f.gold.resize(5);
  std::vector<LabeledBox> boxes;
  std::vector<std::string> preds;
  for (const auto& g : f.gold) {
    for (const auto& lb : {g.subject, g.object})
      if (std::find(boxes.begin(), boxes.end(), lb) == boxes.end()) boxes.push_back(lb);
    preds.push_back(g.predicate);
  }
  const auto np = rng.below(21);
  for (std::size_t i = 0; i < np; ++i) {
    auto s = boxes[rng.below(boxes.size())], o = boxes[rng.below(boxes.size())];
    if (rng.bernoulli(0.3)) s.label = boxes[rng.below(boxes.size())].label;
    f.preds.push_back(make_pred("img", s, preds[rng.below(preds.size())], o, std::round(rng.uniform() * 10) / 10));
  }
  return f;
}

Outcome metrics_oracle(const Context&) {
  const auto catalog = SceneCatalog::load(resource_dir() / "catalog.json");
  const std::vector<std::size_t> ns{1, 5, 50, 100};
  std::size_t oracle_checks = 0, oracle_bad = 0, mono_bad = 0, order_checks = 0, order_bad = 0;
  std::vector<RelationshipInstance> all_gold;
  std::vector<RankedPrediction> all_preds;
  for (std::size_t fx = 0; fx < kOracleFixtures; ++fx) {
    auto f = oracle_fixture(fx, catalog);
    for (auto task : {RecallTask::Predicate, RecallTask::Phrase, RecallTask::Relationship}) {
      std::size_t prev = 0;
      for (auto n : ns) {
        const auto got = covered_in_image(f.preds, f.gold, n, task);
        ++oracle_checks;
        if (got != exhaustive(f.preds, f.gold, n, task)) ++oracle_bad;
        if (got < prev) ++mono_bad;
        prev = got;
      }
    }
    if (fx < kSharedFixtures) {
      for (auto n : ns) {
        ++order_checks;
        if (covered_in_image(f.preds, f.gold, n, RecallTask::Relationship) >
            covered_in_image(f.preds, f.gold, n, RecallTask::Phrase))
          ++order_bad;
      }
    }
    const std::string img = "img" + std::to_string(fx);
    for (auto g : f.gold) {
      g.image = img;
      all_gold.push_back(g);
    }
    for (auto p : f.preds) {
      p.image = img;
      all_preds.push_back(p);
    }
  }
  // Corpus-level recall and Acc@N monotonicity.
  for (auto task : {RecallTask::Predicate, RecallTask::Phrase, RecallTask::Relationship}) {
    double prev = -1;
    for (auto n : ns) {
      const double r = rec_at_n(all_preds, all_gold, n, task).recall();
      if (r < prev || r > 1) ++mono_bad;
      prev = r;
    }
  }
  Rng rng(99);
  std::vector<BranchRanking> ranks;
  std::vector<GoldTriple> golds;
  for (int i = 0; i < 500; ++i) {
    BranchRanking br;
    for (auto* v : {&br.subject, &br.predicate, &br.object}) {
      v->resize(8);
      for (std::size_t k = 0; k < 8; ++k) (*v)[k] = k;
      for (std::size_t k = 8; k > 1; --k) std::swap((*v)[k - 1], (*v)[rng.below(k)]);
    }
    ranks.push_back(br);
    golds.push_back({rng.below(8), rng.below(8), rng.below(8)});
  }
  AccResult prev;
  for (std::size_t n = 1; n <= 8; ++n) {
    auto a = acc_at_n(ranks, golds, n);
    if (a.subject < prev.subject || a.predicate < prev.predicate || a.object < prev.object ||
        a.relationship_joint < prev.relationship_joint || a.relationship_mean < prev.relationship_mean)
      ++mono_bad;
    prev = a;
  }
  const bool pass = oracle_bad == 0 && mono_bad == 0 && order_bad == 0;
  return {pass, std::to_string(kOracleFixtures) + " fixtures: " + std::to_string(oracle_checks - oracle_bad) + "/" +
                    std::to_string(oracle_checks) + " greedy == exhaustive; " + std::to_string(mono_bad) +
                    " monotonicity violations; relationship <= phrase on " +
                    std::to_string(order_checks - order_bad) + "/" + std::to_string(order_checks) +
                    " checks over " + std::to_string(kSharedFixtures) + " shared fixtures"};
}

// ---------------------------------------------------------------------------
// 7. Loss sanity

Outcome loss_balance(const Context& ctx) {
  const Arm b1{"beta=1", [](ModelConfig&) {}};
  const Arm b10{"beta=10", [](ModelConfig& c) { c.beta = 10; }};
  auto m = run_arms(ctx, kNoisyNoise, {b1, b10});
  const double s1 = median_of(m["beta=1"], &AccResult::subject), s10 = median_of(m["beta=10"], &AccResult::subject);
  const double o1 = median_of(m["beta=1"], &AccResult::object), o10 = median_of(m["beta=10"], &AccResult::object);
  return {s1 - s10 > 0 && o1 - o10 > 0, "median Acc@1 drop at beta=10: subject " + pct(s1 - s10) + " pts (" + pct(s1) +
                                            " -> " + pct(s10) + "), object " + pct(o1 - o10) + " pts (" + pct(o1) +
                                            " -> " + pct(o10) + "); need both > 0"};
}

// ---------------------------------------------------------------------------
// 8. Determinism

int sh(const std::string& cmd) {
  const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

Outcome determinism(const Context& ctx) {
  const fs::path root = ctx.workdir / "determinism";
  fs::remove_all(root);
  const fs::path a = root / "a", b = root / "b";
  fs::create_directories(a);
  fs::create_directories(b);
  const std::string z = "\"" + ctx.zoomnet.string() + "\" -q";
  auto in = [&](const fs::path& w) { return z + " --workdir \"" + w.string() + "\" "; };
  auto cfg = [&](const fs::path& p) { return "--config \"" + p.string() + "\" "; };
  const std::vector<std::pair<std::string, std::string>> steps{
      {"gen-data", "gen-data --out data --count 60 --seed 5 --noise 0"},
      {"build-trees", "build-trees --dataset data --out trees"},
      {"train",
       "train --dataset data --trees trees --out model.ckpt --metrics metrics.jsonl --epochs 2 "
       "--trunk-channels 4,8 --trunk-strides 2,2 --pooled 4 --appearance-convs 1 --lr 0.0005 "
       "--pairs-per-image 2 --seed 3"},
      {"eval", "eval --checkpoint model.ckpt --dataset data --report report.json --predictions predictions.jsonl"},
  };
  // Replays read only the artifact written by the original run.
  const std::vector<std::string> replays{
      cfg(a / "data" / "manifest.json") + "gen-data --out data",
      cfg(a / "trees" / "object_tree.json") + "build-trees --out trees",
      cfg(a / "model.ckpt") + "train --out model.ckpt --metrics metrics.jsonl",
      cfg(a / "report.json") + "eval --report report.json --predictions predictions.jsonl",
  };
  std::vector<std::string> failures;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (int rc = sh(in(a) + steps[i].second); rc != 0)
      failures.push_back(steps[i].first + " exited " + std::to_string(rc));
    if (int rc = sh(in(b) + replays[i]); rc != 0)
      failures.push_back(steps[i].first + " replay exited " + std::to_string(rc));
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), a));
  std::sort(files.begin(), files.end());
  std::size_t same = 0;
  for (const auto& f : files) {
    if (fs::exists(b / f) && slurp(a / f) == slurp(b / f)) ++same;
    else failures.push_back("differs: " + f.string());
  }
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file() && !fs::exists(a / fs::relative(e.path(), b)))
      failures.push_back("extra: " + fs::relative(e.path(), b).string());
  std::string detail = std::to_string(same) + "/" + std::to_string(files.size()) +
                       " artifacts byte-identical after replaying gen-data, build-trees, train, eval from their "
                       "embedded configs";
  for (std::size_t i = 0; i < failures.size() && i < 5; ++i) detail += "; " + failures[i];
  return {failures.empty() && files.size() >= 10, detail};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*fn)(const Context&);
};

const std::vector<Criterion> kCriteria{
    {1, "gradient suite", gradient_suite},   {2, "deROI invariants", deroi_invariants},
    {3, "ablation ordering", ablation_ordering}, {4, "IH-tree ablation direction", tree_ablation},
    {5, "IH-tree golden tests", tree_goldens}, {6, "metrics oracle", metrics_oracle},
    {7, "loss balance", loss_balance},       {8, "determinism", determinism},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zoomnet acceptance suite"};
  std::vector<int> selected;
  std::string workdir = "acceptance-work";
  std::string zoomnet = ZOOMNET_CLI_PATH;
  app.add_option("-c,--criterion", selected, "criterion number (repeatable; default all)")->check(CLI::Range(1, 8));
  app.add_option("--workdir", workdir, "scratch directory for datasets and memoized runs");
  app.add_option("--zoomnet", zoomnet, "path of the zoomnet executable");
  CLI11_PARSE(app, argc, argv);

  Context ctx{fs::absolute(workdir), fs::absolute(zoomnet)};
  fs::create_directories(ctx.workdir);
  int failed = 0;
  for (const auto& c : kCriteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.fn(ctx);
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    failed += !out.pass;
    std::cout << (out.pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name << "): " << out.detail
              << "  [" << fmt(seconds_since(t0), 1) << "s]" << std::endl;
  }
  return failed ? 1 : 0;
}
