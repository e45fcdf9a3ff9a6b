// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#include "semvfi/flow_backbone.hpp"

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "semvfi/checkpoint.hpp"
#include "semvfi/errors.hpp"

namespace semvfi {
namespace {

using torch::Tensor;
namespace st = semvfi::testing;

IFNetConfig small_ifnet() {
  IFNetConfig c;
  c.widths = {32, 24, 16};
  c.teacher_width = 16;
  return c;
}

TEST(Padding, RoundsUpToTheModelStride) {
  const Padding p = Padding::to_multiple(70, 64);
  EXPECT_EQ(p.bottom, 26);
  EXPECT_EQ(p.right, 0);
  EXPECT_TRUE(p.active());
  const Tensor x = torch::rand({1, 3, 70, 64});
  const Tensor padded = p.pad(x);
  EXPECT_EQ(padded.size(2), 96);
  EXPECT_TRUE(torch::equal(p.crop(padded), x));
  EXPECT_FALSE(Padding::to_multiple(64, 32).active());
}

TEST(IFNet, ProducesFullResolutionFlowsAndMask) {
  torch::manual_seed(0);
  IFNet net(small_ifnet());
  net->eval();
  torch::NoGradGuard ng;
  const Tensor i0 = torch::rand({2, 3, 64, 64});
  const Tensor i1 = torch::rand({2, 3, 64, 64});
  const FlowBundle b = net->forward(i0, i1, 0.5);
  EXPECT_EQ(b.flow_t0.sizes(), (std::vector<int64_t>{2, 2, 64, 64}));
  EXPECT_EQ(b.flow_t1.sizes(), (std::vector<int64_t>{2, 2, 64, 64}));
  EXPECT_EQ(b.mask.sizes(), (std::vector<int64_t>{2, 1, 64, 64}));
  EXPECT_EQ(b.pyramid.size(), 3u);
  EXPECT_GE(b.mask.min().item<float>(), 0.0f);
  EXPECT_LE(b.mask.max().item<float>(), 1.0f);
  const Tensor blend = b.mask * b.warped0 + (1 - b.mask) * b.warped1;
  EXPECT_LT((blend - b.coarse).abs().max().item<float>(), 1e-6f);
}

TEST(IFNet, IsDeterministicInEvalMode) {
  torch::manual_seed(0);
  IFNet net(small_ifnet());
  net->eval();
  torch::NoGradGuard ng;
  const Tensor i0 = torch::rand({1, 3, 32, 64});
  const Tensor i1 = torch::rand({1, 3, 32, 64});
  EXPECT_TRUE(torch::equal(net->forward(i0, i1, 0.5).coarse, net->forward(i0, i1, 0.5).coarse));
}

TEST(Teacher, RefusesToRunInEvalMode) {
  torch::manual_seed(0);
  IFNet net(small_ifnet());
  Teacher teacher(16);
  const Tensor x = torch::rand({1, 3, 32, 32});
  const FlowBundle b = net->forward(x, x, 0.5);
  teacher->eval();
  EXPECT_THROW(teacher->refine(x, x, x, b, 0.5), ContractViolation);
  teacher->train();
  const TeacherOutput out = teacher->refine(x, x, x, b, 0.5);
  EXPECT_EQ(out.frame.sizes(), x.sizes());
}

TEST(ContextNet, PyramidStridesAndWidths) {
  ContextNet ctx(8);
  const auto feats = ctx->features(torch::rand({1, 3, 64, 64}));
  ASSERT_EQ(feats.size(), 4u);
  const std::array<int64_t, 4> widths = ctx->widths();
  for (size_t l = 0; l < 4; ++l) {
    EXPECT_EQ(feats[l].size(1), widths[l]);
    EXPECT_EQ(feats[l].size(2), 64 >> (l + 1));
  }
  EXPECT_EQ(widths, (std::array<int64_t, 4>{8, 16, 32, 64}));
}

TEST(ContextNet, ZeroFlowWarpEqualsUnwarpedFeatures) {
  ContextNet ctx(8);
  ctx->eval();
  torch::NoGradGuard ng;
  const Tensor img = torch::rand({1, 3, 32, 32});
  const auto a = ctx->features(img);
  const auto b = ctx->forward(img, torch::zeros({1, 2, 32, 32}));
  for (size_t l = 0; l < 4; ++l) EXPECT_TRUE(torch::allclose(a[l], b[l], 0.0, 1e-6));
}

TEST(FusionNet, ZeroInjectionEqualsEmptyPorts) {
  torch::manual_seed(0);
  IFNet net(small_ifnet());
  ContextNet ctx(8);
  FusionConfig fc;
  fc.widths = {16, 32, 64, 128};
  fc.out_width = 8;
  FusionNet fusion(fc, ctx->widths());
  fusion->eval();
  torch::NoGradGuard ng;
  const Tensor i0 = torch::rand({1, 3, 64, 64});
  const Tensor i1 = torch::rand({1, 3, 64, 64});
  const FlowBundle b = net->forward(i0, i1, 0.5);
  const auto c0 = ctx->forward(i0, b.flow_t0);
  const auto c1 = ctx->forward(i1, b.flow_t1);
  const FusionOutput base = fusion->forward(i0, i1, b, c0, c1);
  InjectionPorts ports{torch::zeros({1, 32, 16, 16}), torch::zeros({1, 64, 8, 8})};
  const FusionOutput injected = fusion->forward(i0, i1, b, c0, c1, ports);
  EXPECT_TRUE(torch::equal(base.final, injected.final));
  EXPECT_GE(base.final.min().item<float>(), 0.0f);
  EXPECT_LE(base.final.max().item<float>(), 1.0f);
}

TEST(FusionNet, RejectsMisShapedPorts) {
  torch::manual_seed(0);
  IFNet net(small_ifnet());
  ContextNet ctx(8);
  FusionConfig fc;
  fc.widths = {16, 32, 64, 128};
  fc.out_width = 8;
  FusionNet fusion(fc, ctx->widths());
  const Tensor x = torch::rand({1, 3, 64, 64});
  const FlowBundle b = net->forward(x, x, 0.5);
  const auto c = ctx->forward(x, b.flow_t0);
  InjectionPorts bad{torch::zeros({1, 31, 16, 16}), {}};
  EXPECT_THROW(fusion->forward(x, x, b, c, c, bad), ContractViolation);
}

TEST(RifeKeys, MapOntoThisLayout) {
  TensorDict upstream{{"module.block0.conv0.0.0.weight", torch::zeros(1)},
                      {"module.block_tea.lastconv.bias", torch::zeros(1)},
                      {"unet.down0.conv1.0.weight", torch::zeros(1)},
                      {"contextnet.conv1.conv1.0.weight", torch::zeros(1)},
                      {"module.mystery", torch::zeros(1)}};
  const TensorDict mapped = map_rife_keys(upstream);
  EXPECT_TRUE(mapped.count("ifnet.block0.conv0.0.0.weight"));
  EXPECT_TRUE(mapped.count("teacher.lastconv.bias"));
  EXPECT_TRUE(mapped.count("fusionnet.down0.conv1.0.weight"));
  EXPECT_TRUE(mapped.count("contextnet.conv1.conv1.0.weight"));
  EXPECT_TRUE(mapped.count("mystery"));
}

}  // namespace
}  // namespace semvfi
