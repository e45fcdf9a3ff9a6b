// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#include "semvfi/deform_conv.hpp"

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "semvfi/dsf.hpp"
#include "semvfi/errors.hpp"

namespace semvfi {
namespace {

using torch::Tensor;
namespace F = torch::nn::functional;
namespace st = semvfi::testing;

struct Instance {
  Tensor value, offsets, modulation, weight;
  int64_t groups;
};

Instance random_instance(torch::Generator& gen, int64_t b, int64_t c, int64_t h, int64_t w,
                         int64_t groups, double offset_scale) {
  Instance in;
  in.groups = groups;
  in.value = st::randn({b, c, h, w}, gen);
  in.offsets = offset_scale * st::randn({b, groups * 18, h, w}, gen);
  in.modulation = st::rand({b, groups * 9, h, w}, gen);
  in.weight = st::randn({c, c / groups, 3, 3}, gen) * 0.3;
  return in;
}

TEST(DeformConv, MatchesBruteForceOracle) {
  auto gen = st::make_generator(11);
  for (int trial = 0; trial < 12; ++trial) {
    const int64_t groups = trial % 2 ? 4 : 2;
    const Instance in = random_instance(gen, 1, 8, 5, 6, groups, 2.5);
    const Tensor fast =
        modulated_deform_conv(in.value, in.offsets, in.modulation, in.weight, in.groups);
    const Tensor slow = st::deform_oracle(in.value, in.offsets, in.modulation, in.weight, in.groups);
    EXPECT_LT((fast - slow).abs().max().item<double>(), 1e-10) << "trial " << trial;
  }
}

TEST(DeformConv, SampleColumnsFollowTheTapLayout) {
  auto gen = st::make_generator(12);
  const Instance in = random_instance(gen, 1, 4, 4, 4, 2, 1.5);
  const Tensor cols = deform_sample(in.value, in.offsets, in.modulation, in.groups);
  ASSERT_EQ(cols.sizes(), (std::vector<int64_t>{1, 4, 9, 4, 4}));
  const int64_t c = 3, g = 1, k = 5, y = 2, x = 1;
  const double dx = in.offsets[0][(g * 9 + k) * 2][y][x].item<double>();
  const double dy = in.offsets[0][(g * 9 + k) * 2 + 1][y][x].item<double>();
  const double expected = in.modulation[0][g * 9 + k][y][x].item<double>() *
                          st::tent_sample(in.value[0][c], x + (k % 3) - 1 + dx, y + (k / 3) - 1 + dy);
  EXPECT_NEAR(cols[0][c][k][y][x].item<double>(), expected, 1e-12);
}

TEST(DeformConv, ZeroOffsetUnitModulationIsGroupedConvolution) {
  auto gen = st::make_generator(13);
  for (int64_t groups : {1, 2, 4}) {
    const Instance in = random_instance(gen, 2, 8, 7, 9, groups, 0.0);
    const Tensor ones = torch::ones_like(in.modulation);
    const Tensor out = modulated_deform_conv(in.value, in.offsets, ones, in.weight, groups);
    const Tensor padded = F::pad(in.value, F::PadFuncOptions({1, 1, 1, 1}).mode(torch::kReplicate));
    const Tensor ref = F::conv2d(padded, in.weight, F::Conv2dFuncOptions().groups(groups));
    EXPECT_LT((out - ref).abs().max().item<double>(), 1e-10) << "groups " << groups;
  }
}

TEST(DeformConv, GradientsMatchFiniteDifferences) {
  auto gen = st::make_generator(14);
  Instance in = random_instance(gen, 1, 4, 3, 4, 2, 0.0);
  in.offsets = st::fractional_uniform(in.offsets.sizes(), -1.5, 1.5, gen);
  const Tensor probe = st::randn({1, 4, 3, 4}, gen);
  auto loss = [&](const Tensor& v, const Tensor& o, const Tensor& m, const Tensor& w) {
    return (modulated_deform_conv(v, o, m, w, in.groups) * probe).sum();
  };
  auto check = [&](const char* name, const Tensor& x, const std::function<Tensor(const Tensor&)>& f) {
    EXPECT_LT(st::relative_error(st::analytic_grad(f, x), st::numeric_grad(f, x)), 1e-4) << name;
  };
  check("value", in.value, [&](const Tensor& v) { return loss(v, in.offsets, in.modulation, in.weight); });
  check("offsets", in.offsets, [&](const Tensor& o) { return loss(in.value, o, in.modulation, in.weight); });
  check("modulation", in.modulation,
        [&](const Tensor& m) { return loss(in.value, in.offsets, m, in.weight); });
  check("weight", in.weight, [&](const Tensor& w) { return loss(in.value, in.offsets, in.modulation, w); });
}

TEST(DeformConv, RejectsNonFiniteOffsets) {
  auto gen = st::make_generator(15);
  Instance in = random_instance(gen, 1, 4, 3, 3, 2, 1.0);
  in.offsets[0][0][0][0] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(modulated_deform_conv(in.value, in.offsets, in.modulation, in.weight, 2),
               NonFiniteError);
}

TEST(DeformConv, RejectsBadLayouts) {
  auto gen = st::make_generator(16);
  const Instance in = random_instance(gen, 1, 8, 3, 3, 2, 1.0);
  EXPECT_THROW(modulated_deform_conv(in.value, in.offsets, in.modulation, in.weight, 4),
               ContractViolation);
  EXPECT_THROW(deform_sample(in.value, in.offsets.slice(1, 0, 10), in.modulation, 2),
               ContractViolation);
  EXPECT_THROW(modulated_deform_conv(in.value, in.offsets, in.modulation, in.weight, 3),
               ContractViolation);
}

TEST(DeformAlign, GateScalesTheOutputAndZeroGateVanishes) {
  auto gen = st::make_generator(17);
  const Instance in = random_instance(gen, 1, 64, 4, 5, 2, 2.0);
  DSFConfig cfg;
  cfg.channels = 64;
  cfg.groups = 2;
  DSFState state{in.offsets, in.modulation, torch::tensor(0.37, torch::kDouble)};
  const Tensor w = st::randn({64, 32, 3, 3}, gen) * 0.1;
  const Tensor out = deform_align(in.value, state, w, cfg);
  const Tensor ref = st::deform_oracle(in.value, in.offsets, in.modulation, w, 2, 0.37);
  EXPECT_LT((out - ref).abs().max().item<double>(), 1e-10);
  state.gate = torch::tensor(0.0, torch::kDouble);
  EXPECT_EQ(deform_align(in.value, state, w, cfg).abs().max().item<double>(), 0.0);
}

TEST(DeformAlign, GateGradientMatchesFiniteDifference) {
  auto gen = st::make_generator(18);
  Instance in = random_instance(gen, 1, 64, 3, 3, 2, 0.0);
  in.offsets = st::fractional_uniform(in.offsets.sizes(), -1.0, 1.0, gen);
  DSFConfig cfg;
  cfg.channels = 64;
  cfg.groups = 2;
  const Tensor w = st::randn({64, 32, 3, 3}, gen) * 0.1;
  auto f = [&](const Tensor& gate) {
    DSFState s{in.offsets, in.modulation, gate};
    return deform_align(in.value, s, w, cfg).square().sum();
  };
  const Tensor gate = torch::tensor(0.3, torch::kDouble);
  EXPECT_LT(st::relative_error(st::analytic_grad(f, gate), st::numeric_grad(f, gate)), 1e-4);
}

}  // namespace
}  // namespace semvfi
