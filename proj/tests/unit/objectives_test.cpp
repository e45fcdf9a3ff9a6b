// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#include "semvfi/objectives.hpp"

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "semvfi/errors.hpp"

namespace semvfi {
namespace {

using torch::Tensor;
namespace F = torch::nn::functional;
namespace st = semvfi::testing;

TEST(TotalLoss, UnitComponentsGiveTheWeightSumExactly) {
  const LossBreakdown b = total_loss(1, 1, 1, 1, 1);
  EXPECT_EQ(b.total, 0.7101);
}

TEST(TotalLoss, ZeroComponentsGiveZero) { EXPECT_EQ(total_loss(0, 0, 0, 0, 0).total, 0.0); }

TEST(TotalLoss, RejectsNegativeComponentsAndWeights) {
  EXPECT_THROW(total_loss(1, -1e-9, 0, 0, 0), ContractViolation);
  LossWeights w;
  w.sem = -0.5;
  EXPECT_THROW(w.validate(), ContractViolation);
}

TEST(TotalLoss, CombineMatchesTheScalarPath) {
  LossTerms t{torch::tensor(0.3), torch::tensor(0.2), torch::tensor(0.1), torch::tensor(0.05), {}};
  const auto [tensor, b] = combine(t);
  EXPECT_NEAR(tensor.item<double>(), b.total, 1e-7);
  EXPECT_EQ(b.reg, 0.0);
  EXPECT_DOUBLE_EQ(b.total, total_loss(b.rec, b.dis, b.tea, b.sem, 0.0).total);
}

TEST(LaplacianPyramid, LevelsHalveAndBandsOfAConstantVanish) {
  const Tensor img = torch::full({1, 3, 32, 32}, 0.7);
  const auto pyr = laplacian_pyramid(img, 5);
  ASSERT_EQ(pyr.size(), 5u);
  for (size_t l = 0; l + 1 < pyr.size(); ++l) {
    EXPECT_EQ(pyr[l].size(2), 32 >> l);
    EXPECT_LT(pyr[l].abs().max().item<float>(), 1e-6f) << "band " << l;
  }
  EXPECT_TRUE(torch::allclose(pyr.back(), torch::full({1, 3, 2, 2}, 0.7), 0.0, 1e-6));
}

TEST(LaplacianPyramid, MatchesADirectConvolutionOracle) {
  auto gen = st::make_generator(51);
  const Tensor img = st::rand({1, 1, 16, 16}, gen);
  const Tensor k1 = torch::tensor({1.0, 4.0, 6.0, 4.0, 1.0}, torch::kDouble) / 16.0;
  const Tensor k = torch::outer(k1, k1).view({1, 1, 5, 5});
  auto blur = [&](const Tensor& x) {
    return F::conv2d(F::pad(x, F::PadFuncOptions({2, 2, 2, 2}).mode(torch::kReflect)), k);
  };
  const Tensor down = blur(img).slice(2, 0, 16, 2).slice(3, 0, 16, 2);
  Tensor up = torch::zeros({1, 1, 16, 16}, torch::kDouble);
  up.slice(2, 0, 16, 2).slice(3, 0, 16, 2).copy_(down);
  up = 4.0 * blur(up);
  const auto pyr = laplacian_pyramid(img, 2);
  EXPECT_LT((pyr[0] - (img - up)).abs().max().item<double>(), 1e-12);
  EXPECT_LT((pyr[1] - down).abs().max().item<double>(), 1e-12);
}

TEST(LaplacianLoss, WeightsLevelsByPowersOfTwo) {
  auto gen = st::make_generator(52);
  const Tensor a = st::rand({1, 3, 32, 32}, gen);
  const Tensor b = st::rand({1, 3, 32, 32}, gen);
  const auto pa = laplacian_pyramid(a, 3);
  const auto pb = laplacian_pyramid(b, 3);
  double expected = 0;
  for (int l = 0; l < 3; ++l) expected += std::pow(2.0, l) * (pa[l] - pb[l]).abs().mean().item<double>();
  EXPECT_NEAR(laplacian_loss(a, b, 3).item<double>(), expected, 1e-12);
  EXPECT_EQ(laplacian_loss(a, a).item<double>(), 0.0);
}

TEST(PrivilegedMask, FlagsPixelsWhereTheTeacherIsClearlyBetter) {
  const Tensor gt = torch::zeros({1, 3, 1, 3});
  Tensor student = torch::zeros({1, 3, 1, 3});
  Tensor teacher = torch::zeros({1, 3, 1, 3});
  student.select(3, 0).fill_(0.5);   // much worse than teacher
  student.select(3, 1).fill_(0.005); // worse by less than the margin
  teacher.select(3, 2).fill_(0.2);   // teacher worse
  const Tensor m = privileged_mask(student, teacher, gt).view({3});
  EXPECT_EQ(m[0].item<float>(), 1.0f);
  EXPECT_EQ(m[1].item<float>(), 0.0f);
  EXPECT_EQ(m[2].item<float>(), 0.0f);
}

TEST(Distillation, AveragesMaskedErrorsOverLevelsAndDetachesTheTeacher) {
  const Tensor teacher = torch::ones({1, 4, 2, 2}).set_requires_grad(true);
  const Tensor s0 = torch::zeros({1, 4, 2, 2});
  const Tensor s1 = torch::full({1, 4, 2, 2}, 0.5);
  const Tensor loss = distillation_loss({s0, s1}, teacher);
  EXPECT_NEAR(loss.item<float>(), 0.75f, 1e-6f);
  Tensor mask = torch::zeros({1, 1, 2, 2});
  mask[0][0][0][0] = 1.0;
  EXPECT_NEAR(distillation_loss({s0}, teacher, {mask}).item<float>(), 0.25f, 1e-6f);
  EXPECT_FALSE(loss.requires_grad());
  EXPECT_THROW(distillation_loss({s0}, Tensor()), ContractViolation);
}

TEST(OffsetReg, SumsMeanAbsoluteOffsetsPerSite) {
  EXPECT_NEAR(offset_reg(torch::full({1, 18, 2, 2}, -2.0), torch::full({1, 36, 1, 1}, 0.5)).item<float>(),
              2.5f, 1e-6f);
  EXPECT_EQ(offset_reg(Tensor(), Tensor()).item<float>(), 0.0f);
}

}  // namespace
}  // namespace semvfi
