#include "zoomnet/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "zoomnet/error.hpp"
#include "zoomnet/gradcheck.hpp"
#include "zoomnet/roi.hpp"

namespace zoomnet {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename T>
Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1, double hi = 1) {
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return Tensor<T>(std::move(shape), std::move(v));
}

// Values bounded away from zero so a central difference never straddles the ReLU kink.
template <typename T>
Tensor<T> kink_free_tensor(Shape shape, Rng& rng, double margin) {
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) {
    const double m = rng.uniform(margin, 1.0);
    x = static_cast<T>(rng.bernoulli(0.5) ? m : -m);
  }
  return Tensor<T>(std::move(shape), std::move(v));
}

RoiBox random_box(Rng& rng, double min_side = 0.25) {
  const double w = rng.uniform(min_side, 1.0), h = rng.uniform(min_side, 1.0);
  const double x0 = rng.uniform(0.0, 1.0 - w), y0 = rng.uniform(0.0, 1.0 - h);
  return {x0, y0, x0 + w, y0 + h};
}

// Weighted mean of an arbitrary-shaped output with fixed random weights.
template <typename T>
Tensor<T> probe(const Tensor<T>& out, std::uint64_t seed) {
  Rng rng(seed);
  const double bound = 1.0 / static_cast<double>(out.numel());
  return sum(mul(out, random_tensor<T>(out.shape(), rng, -bound, bound)));
}

template <typename T>
double check_op(const std::string& op, std::uint64_t seed, T eps) {
  Rng rng(derive_seed(seed, fnv1a(op)));
  const std::uint64_t probe_seed = rng.next();
  if (op == "conv2d") {
    const std::size_t stride = rng.bernoulli(0.5) ? 2 : 1;
    ScalarFn<T> fn = [&](std::span<const Tensor<T>> in) {
      return probe(conv2d(in[0], in[1], in[2], stride, 1), probe_seed);
    };
    return finite_difference_check<T>(
        fn, {random_tensor<T>({1, 2, 5, 5}, rng), random_tensor<T>({3, 2, 3, 3}, rng), random_tensor<T>({3}, rng)},
        eps);
  }
  if (op == "linear") {
    ScalarFn<T> fn = [&](std::span<const Tensor<T>> in) { return probe(linear(in[0], in[1], in[2]), probe_seed); };
    return finite_difference_check<T>(
        fn, {random_tensor<T>({3, 4}, rng), random_tensor<T>({4, 5}, rng), random_tensor<T>({5}, rng)}, eps);
  }
  if (op == "relu") {
    ScalarFn<T> fn = [&](std::span<const Tensor<T>> in) { return probe(relu(in[0]), probe_seed); };
    return finite_difference_check<T>(fn, {kink_free_tensor<T>({2, 3, 4}, rng, 10 * eps)}, eps);
  }
  if (op == "xent") {
    std::vector<std::size_t> targets(4);
    for (auto& t : targets) t = rng.below(6);
    ScalarFn<T> fn = [&](std::span<const Tensor<T>> in) { return softmax_cross_entropy(in[0], targets); };
    return finite_difference_check<T>(fn, {random_tensor<T>({4, 6}, rng, -3, 3)}, eps);
  }
  if (op == "roi_pool") {
    const RoiBox box = random_box(rng);
    const std::size_t bins = 2 + rng.below(3);
    ScalarFn<T> fn = [&](std::span<const Tensor<T>> in) { return probe(roi_pool(in[0], box, bins, bins), probe_seed); };
    return finite_difference_check<T>(fn, {random_tensor<T>({1, 2, 8, 8}, rng)}, eps);
  }
  if (op == "deroi_pool") {
    const RoiBox box = random_box(rng);
    ScalarFn<T> fn = [&](std::span<const Tensor<T>> in) { return probe(deroi_pool(in[0], box, 8, 8), probe_seed); };
    return finite_difference_check<T>(fn, {random_tensor<T>({1, 2, 3, 3}, rng)}, eps);
  }
  if (op == "contrastive_fuse") {
    const auto rois = RoiTriple::from_pair(random_box(rng, 0.15), random_box(rng, 0.15));
    ScalarFn<T> fn = [&](std::span<const Tensor<T>> in) {
      return probe(contrastive_fuse(in[0], in[1], in[2], rois), probe_seed);
    };
    return finite_difference_check<T>(fn,
                                      {random_tensor<T>({1, 2, 4, 4}, rng), random_tensor<T>({1, 2, 4, 4}, rng),
                                       random_tensor<T>({1, 2, 4, 4}, rng)},
                                      eps);
  }
  if (op == "pyramid_fuse") {
    const RoiBox box = random_box(rng);
    ScalarFn<T> fn = [&](std::span<const Tensor<T>> in) { return probe(pyramid_fuse(in[0], in[1], box), probe_seed); };
    return finite_difference_check<T>(fn, {random_tensor<T>({1, 2, 4, 4}, rng), random_tensor<T>({1, 2, 6, 6}, rng)},
                                      eps);
  }
  if (op == "sca_m_2stack") {
    // Two SCA-M stacks feeding three linear heads and a summed cross-entropy.
    constexpr std::size_t C = 3, P = 4;
    const auto rois = RoiTriple::from_pair(random_box(rng, 0.2), random_box(rng, 0.2));
    auto m1 = make_interaction<T>(InteractionKind::SCAM, C, FusionMode::Single, 1, rng);
    auto m2 = make_interaction<T>(InteractionKind::SCAM, C, FusionMode::Single, 1, rng);
    LinearLayer<T> hs(C * P * P, 4, rng), hp(C * P * P, 5, rng), ho(C * P * P, 4, rng);
    const std::vector<std::size_t> ts{rng.below(4)}, tp{rng.below(5)}, to{rng.below(4)};
    ScalarFn<T> fn = [&](std::span<const Tensor<T>> in) {
      auto f = interact(FeatureTriple<T>{in[0], in[1], in[2]}, rois, m1);
      f = interact(f, rois, m2);
      return add(add(softmax_cross_entropy(hs(flatten(f.subject)), ts),
                     softmax_cross_entropy(hp(flatten(f.predicate)), tp)),
                 softmax_cross_entropy(ho(flatten(f.object)), to));
    };
    return finite_difference_check<T>(fn,
                                      {random_tensor<T>({1, C, P, P}, rng), random_tensor<T>({1, C, P, P}, rng),
                                       random_tensor<T>({1, C, P, P}, rng), m1.predicate.layers[0].weight,
                                       m2.subject.layers[0].weight, hp.weight},
                                      eps);
  }
  throw ConfigError("unknown gradcheck operator '" + op + "'");
}

}  // namespace

const std::vector<std::string>& gradcheck_ops() {
  static const std::vector<std::string> ops{"conv2d",     "linear",           "relu",         "xent",
                                            "roi_pool",   "deroi_pool",       "contrastive_fuse",
                                            "pyramid_fuse", "sca_m_2stack"};
  return ops;
}

std::vector<GradcheckRow> run_gradcheck(const GradcheckOptions& opts) {
  if (opts.bits != 64 && opts.bits != 32) throw ConfigError("gradcheck dtype must be 64 or 32");
  if (opts.seeds == 0) throw ConfigError("gradcheck needs at least one seed");
  if (!(opts.eps > 0)) throw ConfigError("gradcheck eps must be positive");
  const auto& all = gradcheck_ops();
  const auto ops = opts.ops.empty() ? all : opts.ops;
  for (const auto& op : ops) {
    if (std::find(all.begin(), all.end(), op) == all.end())
      throw ConfigError("unknown gradcheck operator '" + op + "'");
  }
  const double tol = opts.tolerance > 0 ? opts.tolerance : (opts.bits == 64 ? 1e-3 : 1e-2);
  std::vector<GradcheckRow> rows;
  for (const auto& op : ops) {
    GradcheckRow row{op, opts.seeds, 0.0, tol, false, 0.0};
    const auto t0 = Clock::now();
    for (std::size_t s = 0; s < opts.seeds; ++s) {
      const auto seed = opts.first_seed + s;
      const double err = opts.bits == 64 ? check_op<double>(op, seed, opts.eps)
                                         : check_op<float>(op, seed, static_cast<float>(opts.eps));
      row.max_error = std::max(row.max_error, err);
    }
    row.seconds = seconds_since(t0);
    row.pass = row.max_error <= tol;
    rows.push_back(row);
  }
  return rows;
}

std::string gradcheck_table(const std::vector<GradcheckRow>& rows) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-18s %6s %12s %10s %6s\n", "operator", "seeds", "max_rel_err", "tolerance",
                "result");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-18s %6zu %12.3e %10.1e %6s\n", r.op.c_str(), r.seeds, r.max_error,
                  r.tolerance, r.pass ? "pass" : "FAIL");
    out << buf;
  }
  return out.str();
}

nlohmann::json to_json(const GradcheckRow& r) {
  return {{"op", r.op}, {"seeds", r.seeds}, {"max_error", r.max_error}, {"tolerance", r.tolerance},
          {"pass", r.pass}};
}

std::uint64_t interaction_macs(InteractionKind kind, FusionMode mode, std::size_t channels, std::size_t pooled,
                               std::size_t fusion_convs) {
  Rng rng(0);
  const auto p = make_interaction<float>(kind, channels, mode, fusion_convs, rng);
  std::vector<NamedParam<float>> params;
  p.collect("m", params);
  std::uint64_t macs = 0;
  for (const auto& np : params) {
    if (np.tensor.shape().size() == 4) macs += np.tensor.numel() * pooled * pooled;
  }
  return macs;
}

std::vector<BenchRow> run_bench(const BenchOptions& opts) {
  if (opts.channels == 0 || opts.pooled == 0 || opts.repeats == 0) throw ConfigError("bench sizes must be positive");
  struct Variant {
    const char* name;
    InteractionKind kind;
    std::size_t stacks;
  };
  const Variant variants[] = {{"A-M", InteractionKind::AM, 1},
                              {"CA-M", InteractionKind::CAM, 1},
                              {"SCA-M", InteractionKind::SCAM, 1},
                              {"2xSCA-M", InteractionKind::SCAM, 2}};
  Rng rng(opts.seed);
  const Shape shape{1, opts.channels, opts.pooled, opts.pooled};
  const FeatureTriple<float> input{random_tensor<float>(shape, rng), random_tensor<float>(shape, rng),
                                   random_tensor<float>(shape, rng)};
  const auto rois = RoiTriple::from_pair({0.1, 0.2, 0.45, 0.7}, {0.4, 0.3, 0.9, 0.8});
  std::vector<BenchRow> rows;
  for (const auto& v : variants) {
    Rng init(opts.seed + 1);
    std::vector<InteractionParams<float>> stacks;
    for (std::size_t s = 0; s < v.stacks; ++s)
      stacks.push_back(make_interaction<float>(v.kind, opts.channels, FusionMode::Single, opts.fusion_convs, init));
    BenchRow row;
    row.module = v.name;
    row.stacks = v.stacks;
    for (const auto& st : stacks) {
      std::vector<NamedParam<float>> params;
      st.collect("m", params);
      for (const auto& np : params) row.parameters += np.tensor.numel();
    }
    row.macs = v.stacks * interaction_macs(v.kind, FusionMode::Single, opts.channels, opts.pooled, opts.fusion_convs);
    row.pooled_cells = v.kind == InteractionKind::SCAM ? v.stacks * 4 * opts.channels * opts.pooled * opts.pooled : 0;
    std::vector<double> times;
    for (std::size_t r = 0; r < opts.repeats + 1; ++r) {
      const auto t0 = Clock::now();
      auto f = input;
      for (const auto& st : stacks) f = interact(f, rois, st);
      const double ms = seconds_since(t0) * 1e3;
      if (r > 0) times.push_back(ms);  // first run warms caches
    }
    std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
    row.ms_per_forward = times[times.size() / 2];
    rows.push_back(row);
  }
  return rows;
}

std::string bench_table(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-8s %6s %12s %10s %12s %10s %8s\n", "module", "stacks", "conv_MACs", "params",
                "pooled_cells", "ms/fwd", "rel");
  out << buf;
  const double base = rows.empty() ? 1.0 : rows.front().ms_per_forward;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-8s %6zu %12llu %10zu %12zu %10.3f %8.2f\n", r.module.c_str(), r.stacks,
                  static_cast<unsigned long long>(r.macs), r.parameters, r.pooled_cells, r.ms_per_forward,
                  base > 0 ? r.ms_per_forward / base : 0.0);
    out << buf;
  }
  return out.str();
}

nlohmann::json to_json(const BenchRow& r) {
  return {{"module", r.module},         {"stacks", r.stacks},
          {"macs", r.macs},             {"parameters", r.parameters},
          {"pooled_cells", r.pooled_cells}, {"ms_per_forward", r.ms_per_forward}};
}

}  // namespace zoomnet
