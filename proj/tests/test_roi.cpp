#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "zoomnet/gradcheck.hpp"
#include "zoomnet/ops.hpp"
#include "zoomnet/rng.hpp"
#include "zoomnet/roi.hpp"

using namespace zoomnet;

namespace {

Tensor<double> rand_t(Shape s, Rng& rng, bool grad = false) {
  std::vector<double> v(shape_numel(s));
  for (auto& x : v) x = rng.uniform(-1, 1);
  return Tensor<double>(std::move(s), std::move(v), grad);
}

Tensor<double> iota(Shape s) {
  std::vector<double> v(shape_numel(s));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i + 1);
  return Tensor<double>(std::move(s), std::move(v));
}

// Grid rectangle by the documented rule: scale, round half away from zero.
struct Rect {
  long y0, y1, x0, x1;
};
Rect rect_of(const RoiBox& b, long h, long w) {
  Rect r{std::lround(b.y0 * h), std::lround(b.y1 * h), std::lround(b.x0 * w), std::lround(b.x1 * w)};
  return r;
}

// Brute-force max pooling of one plane with boundaries floor(i*span/out).
std::vector<double> pool_oracle(const std::vector<double>& plane, long h, long w, const Rect& r, long oh, long ow) {
  (void)h;
  std::vector<double> out;
  const long sh = r.y1 - r.y0, sw = r.x1 - r.x0;
  for (long i = 0; i < oh; ++i)
    for (long j = 0; j < ow; ++j) {
      const long ya = r.y0 + i * sh / oh, yb = std::max(ya + 1, r.y0 + (i + 1) * sh / oh);
      const long xa = r.x0 + j * sw / ow, xb = std::max(xa + 1, r.x0 + (j + 1) * sw / ow);
      double m = -1e300;
      for (long y = ya; y < yb; ++y)
        for (long x = xa; x < xb; ++x) m = std::max(m, plane[y * w + x]);
      out.push_back(m);
    }
  return out;
}

}  // namespace

TEST(UnionBox, HandCaseAndAlgebra) {
  const RoiBox a{0.1, 0.1, 0.3, 0.3}, b{0.5, 0.2, 0.9, 0.6}, c{0.2, 0.0, 0.4, 0.5};
  EXPECT_EQ(union_box(a, b), (RoiBox{0.1, 0.1, 0.9, 0.6}));
  EXPECT_EQ(union_box(a, a), a);
  EXPECT_EQ(union_box(a, b), union_box(b, a));
  EXPECT_EQ(union_box(union_box(a, b), c), union_box(a, union_box(b, c)));
}

TEST(RoiPool, QuadrantMaxima) {
  auto f = iota({1, 1, 4, 4});
  auto y = roi_pool(f, RoiBox{0, 0, 1, 1}, 2, 2);
  const std::vector<double> want{6, 8, 14, 16};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(y[i], want[i]);
}

TEST(RoiPool, FullMapAtFullResolutionIsCopy) {
  Rng rng(2);
  auto f = rand_t({1, 2, 5, 6}, rng);
  auto y = roi_pool(f, RoiBox{0, 0, 1, 1}, 5, 6);
  for (std::size_t i = 0; i < f.numel(); ++i) EXPECT_EQ(y[i], f[i]);
}

TEST(RoiPool, GradientHitsArgmaxCellsOnly) {
  auto f = iota({1, 1, 4, 4});
  f.set_requires_grad(true);
  backward(sum(roi_pool(f, RoiBox{0, 0, 1, 1}, 2, 2)));
  for (std::size_t i = 0; i < 16; ++i) {
    const bool hit = i == 5 || i == 7 || i == 13 || i == 15;
    EXPECT_EQ(f.grad()[i], hit ? 1.0 : 0.0) << i;
  }
}

TEST(RoiPool, TiesGoToLowestIndex) {
  Tensor<double> f({1, 1, 2, 2}, 1.0, true);
  PoolRecord rec;
  backward(sum(roi_pool(f, RoiBox{0, 0, 1, 1}, 1, 1, &rec)));
  EXPECT_EQ(rec.source[0], 0u);
  EXPECT_EQ(f.grad()[0], 1.0);
  EXPECT_EQ(f.grad()[3], 0.0);
}

TEST(RoiPool, MatchesBruteForceOracle) {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const long H = 3 + static_cast<long>(rng.below(8)), W = 3 + static_cast<long>(rng.below(8));
    auto f = rand_t({1, 1, static_cast<std::size_t>(H), static_cast<std::size_t>(W)}, rng);
    double x0 = rng.uniform(0, 0.7), y0 = rng.uniform(0, 0.7);
    RoiBox b{x0, y0, rng.uniform(x0 + 0.3, 1.0), rng.uniform(y0 + 0.3, 1.0)};
    const Rect r = rect_of(b, H, W);
    if (r.y1 <= r.y0 || r.x1 <= r.x0) continue;
    const long oh = 1 + static_cast<long>(rng.below(4)), ow = 1 + static_cast<long>(rng.below(4));
    auto y = roi_pool(f, b, oh, ow);
    std::vector<double> plane(f.values().begin(), f.values().end());
    const auto want = pool_oracle(plane, H, W, r, oh, ow);
    for (std::size_t i = 0; i < want.size(); ++i) ASSERT_EQ(y[i], want[i]) << "trial " << t;
  }
}

TEST(RoiPool, MonotoneInInputs) {
  Rng rng(4);
  auto f = rand_t({1, 1, 6, 6}, rng);
  const RoiBox b{0.1, 0.2, 0.8, 0.9};
  auto before = roi_pool(f, b, 3, 3);
  auto g = f.detach();
  g[14] += 0.7;
  auto after = roi_pool(g, b, 3, 3);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_GE(after[i], before[i]);
}

TEST(RoiPool, DegenerateBoxIsWidenedAndCounted) {
  reset_degenerate_roi_count();
  Rng rng(5);
  auto f = rand_t({1, 1, 4, 4}, rng);
  PoolRecord rec;
  auto y = roi_pool(f, RoiBox{0.40, 0.40, 0.45, 0.45}, 2, 2, &rec);
  EXPECT_EQ(degenerate_roi_count(), 1u);
  EXPECT_TRUE(rec.rect.degenerate);
  EXPECT_EQ(rec.rect.height(), 1u);
  EXPECT_EQ(rec.rect.width(), 1u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_TRUE(std::isfinite(y[i]));
}

TEST(RoiPool, GradientCheck) {
  Rng rng(6);
  for (int s = 0; s < 5; ++s) {
    const RoiBox b{rng.uniform(0, 0.4), rng.uniform(0, 0.4), rng.uniform(0.6, 1), rng.uniform(0.6, 1)};
    ScalarFn<double> fn = [&](std::span<const Tensor<double>> in) {
      return sum(mul(roi_pool(in[0], b, 3, 2), in[1]));
    };
    auto probe = rand_t({1, 2, 3, 2}, rng);
    EXPECT_LE(finite_difference_check<double>(fn, {rand_t({1, 2, 7, 7}, rng), probe}, 1e-5), 1e-3);
  }
}

TEST(DeroiPool, IdentityPlacement) {
  Rng rng(7);
  auto x = rand_t({1, 2, 4, 4}, rng);
  auto y = deroi_pool(x, RoiBox{0, 0, 1, 1}, 4, 4);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(DeroiPool, SingleValueIntoCentre) {
  Tensor<double> x({1, 1, 1, 1}, 7.0);
  auto y = deroi_pool(x, RoiBox{0.25, 0.25, 0.75, 0.75}, 4, 4);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) {
      const bool inside = r >= 1 && r <= 2 && c >= 1 && c <= 2;
      EXPECT_EQ(y[r * 4 + c], inside ? 7.0 : 0.0);
    }
}

TEST(DeroiPool, GradientCountsPaletteCellsPerSource) {
  Rng rng(8);
  auto x = rand_t({1, 1, 2, 3}, rng, true);
  const RoiBox r{0.0, 0.2, 0.7, 1.0};
  PoolRecord rec;
  backward(sum(deroi_pool(x, r, 5, 7, &rec)));
  std::vector<double> counts(6, 0);
  for (auto s : rec.source)
    if (s != PoolRecord::kOutside) counts[s] += 1;
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(x.grad()[i], counts[i]);
  ScalarFn<double> fn = [&](std::span<const Tensor<double>> in) { return sum(mul(deroi_pool(in[0], r, 5, 7), in[1])); };
  EXPECT_LE(finite_difference_check<double>(fn, {rand_t({1, 1, 2, 3}, rng), rand_t({1, 1, 5, 7}, rng)}, 1e-5), 1e-3);
}

TEST(DeroiPool, NearestSourceRule) {
  // palette cell k of an m-cell rectangle reads floor((k + 0.5) * h / m)
  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    const std::size_t h = 1 + rng.below(4), w = 1 + rng.below(4), P = 4 + rng.below(6);
    auto x = rand_t({1, 1, h, w}, rng);
    const double x0 = rng.uniform(0, 0.5), y0 = rng.uniform(0, 0.5);
    const RoiBox r{x0, y0, rng.uniform(x0 + 0.3, 1.0), rng.uniform(y0 + 0.3, 1.0)};
    const Rect g = rect_of(r, static_cast<long>(P), static_cast<long>(P));
    if (g.y1 <= g.y0 || g.x1 <= g.x0) continue;
    auto y = deroi_pool(x, r, P, P);
    for (long py = 0; py < static_cast<long>(P); ++py)
      for (long px = 0; px < static_cast<long>(P); ++px) {
        double want = 0;
        if (py >= g.y0 && py < g.y1 && px >= g.x0 && px < g.x1) {
          const long sy = static_cast<long>(std::floor((py - g.y0 + 0.5) * h / double(g.y1 - g.y0)));
          const long sx = static_cast<long>(std::floor((px - g.x0 + 0.5) * w / double(g.x1 - g.x0)));
          want = x[sy * w + sx];
        }
        ASSERT_EQ(y[py * P + px], want);
      }
  }
}

TEST(DeroiPool, ZeroExteriorAndRoundTripOnRandomConfigs) {
  Rng rng(10);
  for (int t = 0; t < 300; ++t) {
    const std::size_t h = 1 + rng.below(4), w = 1 + rng.below(4);
    const std::size_t mh = 1 + rng.below(3), mw = 1 + rng.below(3);
    const std::size_t rh = h * mh, rw = w * mw;
    const std::size_t P = std::max(rh, rw) + rng.below(5);
    const std::size_t y0 = rng.below(P - rh + 1), x0 = rng.below(P - rw + 1);
    const RoiBox r{double(x0) / P, double(y0) / P, double(x0 + rw) / P, double(y0 + rh) / P};
    auto x = rand_t({1, 2, h, w}, rng, true);
    auto pal = deroi_pool(x, r, P, P);
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t py = 0; py < P; ++py)
        for (std::size_t px = 0; px < P; ++px) {
          const bool inside = py >= y0 && py < y0 + rh && px >= x0 && px < x0 + rw;
          if (!inside) ASSERT_EQ(pal[(c * P + py) * P + px], 0.0);
        }
    auto back = roi_pool(pal, r, h, w);
    for (std::size_t i = 0; i < x.numel(); ++i) ASSERT_EQ(back[i], x[i]);
  }
}

TEST(ContrastiveFuse, ZeroBranchesLeavePalette) {
  Rng rng(11);
  auto fp = rand_t({1, 2, 4, 4}, rng);
  Tensor<double> zs({1, 2, 2, 2}, 0.0), zo({1, 2, 2, 2}, 0.0);
  auto rois = RoiTriple::from_pair({0.1, 0.1, 0.4, 0.5}, {0.5, 0.3, 0.9, 0.8});
  auto y = contrastive_fuse(zs, zo, fp, rois);
  ASSERT_EQ(y.shape(), (Shape{1, 6, 4, 4}));
  for (std::size_t i = 0; i < 32; ++i) EXPECT_EQ(y[i], fp[i]);
  for (std::size_t i = 32; i < 96; ++i) EXPECT_EQ(y[i], 0.0);
}

TEST(ContrastiveFuse, SubjectEqualsUnionIsIdentityPlacement) {
  Rng rng(12);
  auto fs = rand_t({1, 1, 4, 4}, rng), fo = rand_t({1, 1, 4, 4}, rng), fp = rand_t({1, 1, 4, 4}, rng);
  auto rois = RoiTriple::from_pair({0.1, 0.1, 0.9, 0.9}, {0.3, 0.3, 0.5, 0.5});
  auto y = contrastive_fuse(fs, fo, fp, rois);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(y[16 + i], fs[i]);
}

TEST(ContrastiveFuse, HandAssembledPalette) {
  Tensor<double> fs({1, 1, 2, 2}, {1, 2, 3, 4}), fo({1, 1, 2, 2}, {5, 6, 7, 8});
  auto fp = iota({1, 1, 4, 4});
  // subject fills the left half of the union, object the right half
  auto rois = RoiTriple::from_pair({0.0, 0.0, 0.5, 1.0}, {0.5, 0.0, 1.0, 1.0});
  auto y = contrastive_fuse(fs, fo, fp, rois);
  const std::vector<double> s_pal{1, 2, 0, 0, 1, 2, 0, 0, 3, 4, 0, 0, 3, 4, 0, 0};
  const std::vector<double> o_pal{0, 0, 5, 6, 0, 0, 5, 6, 0, 0, 7, 8, 0, 0, 7, 8};
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_EQ(y[i], fp[i]);
    EXPECT_EQ(y[16 + i], s_pal[i]) << i;
    EXPECT_EQ(y[32 + i], o_pal[i]) << i;
  }
}

TEST(ContrastiveFuse, ChannelMismatch) {
  Tensor<double> fs({1, 2, 2, 2}), fo({1, 3, 2, 2}), fp({1, 2, 4, 4});
  EXPECT_THROW(contrastive_fuse(fs, fo, fp, RoiTriple::from_pair({0, 0, .5, .5}, {.5, .5, 1, 1})), ContractError);
}

TEST(ContrastiveFuse, PairwiseStacks) {
  Rng rng(13);
  auto fs = rand_t({1, 1, 2, 2}, rng), fo = rand_t({1, 1, 2, 2}, rng), fp = rand_t({1, 1, 4, 4}, rng);
  auto rois = RoiTriple::from_pair({0.0, 0.0, 0.5, 1.0}, {0.5, 0.0, 1.0, 1.0});
  auto single = contrastive_fuse(fs, fo, fp, rois);
  auto pairs = contrastive_pairs(fs, fo, fp, rois);
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_EQ(pairs.subject_predicate[i], single[16 + i]);
    EXPECT_EQ(pairs.subject_predicate[16 + i], single[i]);
    EXPECT_EQ(pairs.subject_object[i], single[16 + i]);
    EXPECT_EQ(pairs.subject_object[16 + i], single[32 + i]);
    EXPECT_EQ(pairs.predicate_object[i], single[i]);
    EXPECT_EQ(pairs.predicate_object[16 + i], single[32 + i]);
  }
}

TEST(PyramidFuse, FullPaletteCopiesPredicate) {
  Rng rng(14);
  auto fl = rand_t({1, 2, 3, 3}, rng), fp = rand_t({1, 2, 3, 3}, rng);
  auto y = pyramid_fuse(fl, fp, RoiBox{0, 0, 1, 1});
  ASSERT_EQ(y.shape(), (Shape{1, 4, 3, 3}));
  for (std::size_t i = 0; i < 18; ++i) {
    EXPECT_EQ(y[i], fl[i]);
    EXPECT_EQ(y[18 + i], fp[i]);
  }
}

TEST(PyramidFuse, ConstantPaletteGivesConstant) {
  Rng rng(15);
  auto fl = rand_t({1, 1, 2, 2}, rng);
  Tensor<double> fp({1, 1, 6, 6}, 2.5);
  auto y = pyramid_fuse(fl, fp, RoiBox{0.2, 0.1, 0.7, 0.6});
  for (std::size_t i = 4; i < 8; ++i) EXPECT_EQ(y[i], 2.5);
}

TEST(PyramidFuse, LeftHalfOfIota) {
  Rng rng(16);
  auto fl = rand_t({1, 1, 2, 2}, rng);
  auto fp = iota({1, 1, 4, 4});
  auto y = pyramid_fuse(fl, fp, RoiBox{0, 0, 0.5, 1});
  std::vector<double> plane(fp.values().begin(), fp.values().end());
  const auto want = pool_oracle(plane, 4, 4, Rect{0, 4, 0, 2}, 2, 2);
  EXPECT_EQ(want, (std::vector<double>{5, 6, 13, 14}));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(y[4 + i], want[i]);
}

TEST(PyramidFuse, GradientCheck) {
  Rng rng(17);
  const RoiBox r{0.1, 0.3, 0.6, 0.9};
  ScalarFn<double> fn = [&](std::span<const Tensor<double>> in) {
    return sum(mul(pyramid_fuse(in[0], in[1], r), in[2]));
  };
  EXPECT_LE(finite_difference_check<double>(
                fn, {rand_t({1, 2, 3, 3}, rng), rand_t({1, 2, 6, 6}, rng), rand_t({1, 4, 3, 3}, rng)}, 1e-5),
            1e-3);
}
