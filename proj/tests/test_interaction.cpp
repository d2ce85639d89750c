#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "zoomnet/gradcheck.hpp"
#include "zoomnet/interaction.hpp"
#include "zoomnet/verify.hpp"

using namespace zoomnet;

namespace {

Tensor<double> rand_t(Shape s, Rng& rng, bool grad = false) {
  std::vector<double> v(shape_numel(s));
  for (auto& x : v) x = rng.uniform(-1, 1);
  return Tensor<double>(std::move(s), std::move(v), grad);
}

FeatureTriple<double> rand_triple(Rng& rng, std::size_t c = 3, std::size_t p = 4) {
  return {rand_t({1, c, p, p}, rng), rand_t({1, c, p, p}, rng), rand_t({1, c, p, p}, rng)};
}

bool same(const Tensor<double>& a, const Tensor<double>& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.numel(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

std::size_t param_count(const InteractionParams<double>& p) {
  std::vector<NamedParam<double>> ps;
  p.collect("m", ps);
  std::size_t n = 0;
  for (const auto& np : ps) n += np.tensor.numel();
  return n;
}

const RoiTriple kRois = RoiTriple::from_pair({0.05, 0.1, 0.45, 0.6}, {0.5, 0.3, 0.95, 0.9});

}  // namespace

TEST(Interaction, ContractParityAcrossKinds) {
  Rng rng(1);
  auto t = rand_triple(rng);
  for (auto kind : {InteractionKind::AM, InteractionKind::CAM, InteractionKind::SCAM}) {
    for (auto mode : {FusionMode::Single, FusionMode::Pairwise}) {
      Rng init(2);
      auto p = make_interaction<double>(kind, 3, mode, 2, init);
      auto out = interact(t, kRois, p);
      EXPECT_EQ(out.subject.shape(), t.subject.shape());
      EXPECT_EQ(out.predicate.shape(), t.predicate.shape());
      EXPECT_EQ(out.object.shape(), t.object.shape());
    }
  }
}

TEST(Interaction, CamAndScamHaveIdenticalParameterShapes) {
  Rng a(3), b(3);
  auto cam = make_interaction<double>(InteractionKind::CAM, 4, FusionMode::Single, 1, a);
  auto scam = make_interaction<double>(InteractionKind::SCAM, 4, FusionMode::Single, 1, b);
  std::vector<NamedParam<double>> pc, ps;
  cam.collect("m", pc);
  scam.collect("m", ps);
  ASSERT_EQ(pc.size(), ps.size());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    EXPECT_EQ(pc[i].name, ps[i].name);
    EXPECT_EQ(pc[i].tensor.shape(), ps[i].tensor.shape());
  }
  EXPECT_EQ(param_count(cam), param_count(scam));
}

TEST(AppearanceModule, BranchesAreIsolated) {
  Rng rng(4);
  auto p = make_interaction<double>(InteractionKind::AM, 3, FusionMode::Single, 1, rng);
  auto t = rand_triple(rng);
  auto base = am_forward(t, p);
  auto t2 = t;
  t2.object = rand_t({1, 3, 4, 4}, rng);
  t2.predicate = rand_t({1, 3, 4, 4}, rng);
  EXPECT_TRUE(same(am_forward(t2, p).subject, base.subject));
}

TEST(AppearanceModule, ZeroSubjectGivesBiasResponse) {
  Rng rng(5);
  auto p = make_interaction<double>(InteractionKind::AM, 2, FusionMode::Single, 1, rng);
  for (std::size_t i = 0; i < 2; ++i) p.subject.layers[0].bias[i] = 0.25 * (i + 1) * (i == 0 ? 1 : -1);
  auto t = rand_triple(rng, 2);
  t.subject = Tensor<double>({1, 2, 4, 4}, 0.0);
  auto out = am_forward(t, p).subject;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(out[c * 16 + i], std::max(0.0, p.subject.layers[0].bias[c]));
}

TEST(AppearanceModule, NoCrossBranchGradient) {
  Rng rng(6);
  auto p = make_interaction<double>(InteractionKind::AM, 3, FusionMode::Single, 1, rng);
  auto t = rand_triple(rng);
  t.object.set_requires_grad(true);
  t.predicate.set_requires_grad(true);
  backward(sum(am_forward(t, p).subject));
  for (auto g : t.object.grad()) EXPECT_EQ(g, 0.0);
  for (auto g : p.object.layers[0].weight.grad()) EXPECT_EQ(g, 0.0);
  for (auto g : p.predicate.layers[0].weight.grad()) EXPECT_EQ(g, 0.0);
}

TEST(ContextAppearanceModule, ObjectReachesPredicate) {
  Rng rng(7);
  auto p = make_interaction<double>(InteractionKind::CAM, 3, FusionMode::Single, 1, rng);
  auto t = rand_triple(rng);
  auto base = cam_forward(t, p);
  auto t2 = t;
  t2.object = rand_t({1, 3, 4, 4}, rng);
  EXPECT_FALSE(same(cam_forward(t2, p).predicate, base.predicate));
}

TEST(ContextAppearanceModule, NullPredicateMessage) {
  Rng rng(8);
  auto p = make_interaction<double>(InteractionKind::CAM, 3, FusionMode::Single, 1, rng);
  auto t = rand_triple(rng);
  t.predicate = Tensor<double>({1, 3, 4, 4}, 0.0);
  auto want = p.subject(concat_channels({t.subject, Tensor<double>({1, 3, 4, 4}, 0.0)}));
  EXPECT_TRUE(same(cam_forward(t, p).subject, want));
}

TEST(ContextAppearanceModule, BlindToBoxPlacement) {
  Rng rng(9);
  auto p = make_interaction<double>(InteractionKind::CAM, 3, FusionMode::Single, 1, rng);
  auto t = rand_triple(rng);
  auto moved = RoiTriple::from_pair({0.05, 0.1, 0.45, 0.6}, {0.1, 0.5, 0.55, 1.0});
  auto a = interact(t, kRois, p), b = interact(t, moved, p);
  EXPECT_TRUE(same(a.subject, b.subject));
  EXPECT_TRUE(same(a.predicate, b.predicate));
  EXPECT_TRUE(same(a.object, b.object));
}

TEST(SpatialContextModule, SensitiveToBoxPlacement) {
  Rng rng(10);
  auto p = make_interaction<double>(InteractionKind::SCAM, 3, FusionMode::Single, 1, rng);
  auto t = rand_triple(rng);
  auto moved = RoiTriple::from_pair({0.05, 0.1, 0.45, 0.6}, {0.1, 0.5, 0.55, 1.0});
  EXPECT_FALSE(same(interact(t, kRois, p).predicate, interact(t, moved, p).predicate));
}

TEST(SpatialContextModule, FullFrameBoxesMatchContextModule) {
  Rng a(11), b(11), rng(12);
  auto scam = make_interaction<double>(InteractionKind::SCAM, 3, FusionMode::Single, 1, a);
  auto cam = make_interaction<double>(InteractionKind::CAM, 3, FusionMode::Single, 1, b);
  auto t = rand_triple(rng);
  const RoiBox full{0.2, 0.2, 0.8, 0.8};
  const RoiTriple rois{full, full, full};
  auto x = scam_forward(t, rois, scam), y = cam_forward(t, cam);
  EXPECT_TRUE(same(x.subject, y.subject));
  EXPECT_TRUE(same(x.predicate, y.predicate));
  EXPECT_TRUE(same(x.object, y.object));
}

TEST(SpatialContextModule, ZeroBranchesFusePaletteOnly) {
  Rng rng(13);
  auto p = make_interaction<double>(InteractionKind::SCAM, 2, FusionMode::Single, 1, rng);
  auto t = rand_triple(rng, 2);
  Tensor<double> z({1, 2, 4, 4}, 0.0);
  t.subject = z;
  t.object = z;
  auto want = p.predicate(concat_channels({t.predicate, z, z}));
  EXPECT_TRUE(same(scam_forward(t, kRois, p).predicate, want));
}

TEST(Interaction, CrossBranchGradientsNonzeroWithFusion) {
  for (auto kind : {InteractionKind::CAM, InteractionKind::SCAM}) {
    Rng rng(14);
    auto p = make_interaction<double>(kind, 3, FusionMode::Single, 1, rng);
    auto t = rand_triple(rng);
    t.object.set_requires_grad(true);
    backward(sum(interact(t, kRois, p).predicate));
    double mag = 0;
    for (auto g : t.object.grad()) mag += std::abs(g);
    EXPECT_GT(mag, 0.0) << to_string(kind);
  }
}

TEST(Interaction, PairwiseGradientCheck) {
  Rng rng(15);
  auto p = make_interaction<double>(InteractionKind::SCAM, 2, FusionMode::Pairwise, 2, rng);
  auto probe = rand_t({1, 2, 4, 4}, rng);
  ScalarFn<double> fn = [&](std::span<const Tensor<double>> in) {
    auto out = scam_forward(FeatureTriple<double>{in[0], in[1], in[2]}, kRois, p);
    return add(add(sum(mul(out.predicate, probe)), sum(mul(out.subject, probe))), sum(mul(out.object, probe)));
  };
  EXPECT_LE(finite_difference_check<double>(fn,
                                            {rand_t({1, 2, 4, 4}, rng), rand_t({1, 2, 4, 4}, rng),
                                             rand_t({1, 2, 4, 4}, rng), p.pair_so.weight},
                                            1e-5),
            1e-3);
}

TEST(Interaction, UnknownNames) {
  EXPECT_THROW(parse_interaction_kind("xyz"), ConfigError);
  EXPECT_THROW(parse_fusion_mode("triple"), ConfigError);
  EXPECT_EQ(parse_interaction_kind("SCA-M"), InteractionKind::SCAM);
}

TEST(GradcheckSuite, AllOperatorsPassQuickly) {
  GradcheckOptions o;
  o.seeds = 3;
  for (const auto& row : run_gradcheck(o)) EXPECT_TRUE(row.pass) << row.op << " " << row.max_error;
}

TEST(GradcheckSuite, UnknownOperator) {
  GradcheckOptions o;
  o.ops = {"softmax_dance"};
  EXPECT_THROW(run_gradcheck(o), ConfigError);
}

TEST(Bench, AnalyticMacsAndOrdering) {
  // A-M: three C->C 3x3 convs; CA-M/SCA-M: (2C + 3C + 2C) -> C.
  const std::size_t C = 8, P = 4;
  EXPECT_EQ(interaction_macs(InteractionKind::AM, FusionMode::Single, C, P, 1), 3 * C * C * 9 * P * P);
  EXPECT_EQ(interaction_macs(InteractionKind::CAM, FusionMode::Single, C, P, 1), 7 * C * C * 9 * P * P);
  EXPECT_EQ(interaction_macs(InteractionKind::SCAM, FusionMode::Single, C, P, 1), 7 * C * C * 9 * P * P);
  BenchOptions o;
  o.channels = C;
  o.pooled = P;
  o.repeats = 3;
  auto rows = run_bench(o);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[3].macs, 2 * rows[2].macs);
  EXPECT_GT(rows[2].pooled_cells, 0u);
  EXPECT_EQ(rows[0].pooled_cells, 0u);
}
