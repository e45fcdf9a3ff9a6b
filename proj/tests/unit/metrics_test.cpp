// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#include "semvfi/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "semvfi/errors.hpp"

namespace semvfi {
namespace {

using torch::Tensor;
namespace st = semvfi::testing;

Tensor gray3(const Tensor& plane) { return plane.unsqueeze(0).expand({3, -1, -1}).contiguous(); }

Tensor binary_pattern() {
  Tensor b = torch::zeros({16, 16}, torch::kDouble);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) b[y][x] = ((x * 7 + y * 3) % 5) > 2 ? 1.0 : 0.0;
  }
  return b;
}

TEST(Psnr, UniformErrorOfOneTenthIsTwentyDecibels) {
  const Tensor gt = torch::full({3, 8, 8}, 0.5, torch::kDouble);
  EXPECT_EQ(psnr(gt + 0.1, gt), 20.0);
}

TEST(Psnr, IdenticalImagesHitTheCap) {
  const Tensor x = torch::rand({3, 4, 4});
  EXPECT_EQ(psnr(x, x), kPsnrCap);
}

TEST(Psnr, MatchesTheDirectFormula) {
  auto gen = st::make_generator(61);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = st::rand({3, 9, 13}, gen);
    const Tensor b = st::rand({3, 9, 13}, gen);
    const auto pa = a.contiguous();
    const auto pb = b.contiguous();
    const double* da = pa.data_ptr<double>();
    const double* db = pb.data_ptr<double>();
    double sum = 0;
    for (int64_t i = 0; i < a.numel(); ++i) sum += (da[i] - db[i]) * (da[i] - db[i]);
    const double expected = 10.0 * std::log10(1.0 / (sum / static_cast<double>(a.numel())));
    EXPECT_NEAR(psnr(a, b), expected, 1e-9);
  }
}

TEST(Psnr, ShapeMismatchIsAContractViolation) {
  EXPECT_THROW(psnr(torch::zeros({3, 4, 4}), torch::zeros({3, 4, 5})), ContractViolation);
  EXPECT_THROW(psnr(torch::zeros({2, 3, 4, 4}), torch::zeros({2, 3, 4, 4})), ContractViolation);
}

TEST(Ssim, IdenticalImagesScoreOne) {
  const Tensor x = torch::rand({3, 24, 24}, torch::kDouble);
  EXPECT_NEAR(ssim(x, x), 1.0, 1e-12);
}

TEST(Ssim, InvertedBinaryImageMatchesAReferenceValue) {
  const Tensor b = gray3(binary_pattern());
  const double value = ssim(1.0 - b, b);
  EXPECT_NEAR(value, -0.919244005121248, 1e-6);
  EXPECT_NEAR(value, st::ssim_oracle(1.0 - b, b), 1e-10);
}

TEST(Ssim, SmoothPairMatchesAReferenceValue) {
  Tensor g = torch::zeros({16, 16}, torch::kDouble);
  Tensor h = torch::zeros({16, 16}, torch::kDouble);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const double v = (std::sin(x * 0.7) + std::cos(y * 0.45) + 2.0) / 4.0;
      g[y][x] = v;
      h[y][x] = std::clamp(v + 0.1 * std::sin(x * y * 0.3), 0.0, 1.0);
    }
  }
  EXPECT_NEAR(ssim(gray3(h), gray3(g)), 0.9250986641528337, 1e-6);
}

TEST(Ssim, AgreesWithTheLoopOracleAndIsSymmetric) {
  auto gen = st::make_generator(62);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor a = st::rand({3, 14, 19}, gen);
    const Tensor b = (a + 0.2 * st::randn({3, 14, 19}, gen)).clamp(0, 1);
    EXPECT_NEAR(ssim(a, b), st::ssim_oracle(a, b), 1e-10);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-14);
  }
}

TEST(Ssim, ImagesSmallerThanTheWindowAreRejected) {
  EXPECT_THROW(ssim(torch::zeros({3, 10, 20}), torch::zeros({3, 10, 20})), ContractViolation);
}

TEST(StableMean, IsOrderIndependent) {
  std::vector<double> v;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1e6);
  for (int i = 0; i < 1000; ++i) v.push_back(u(rng) * (i % 2 ? 1e-9 : 1.0));
  const double m = stable_mean(v);
  std::shuffle(v.begin(), v.end(), rng);
  EXPECT_EQ(stable_mean(v), m);
  EXPECT_EQ(stable_mean({}), 0.0);
  EXPECT_NEAR(stable_std({1.0, 3.0}), std::sqrt(2.0), 1e-15);
}

MetricReport sample_report() {
  MetricReport r;
  r.method = "semvfi";
  r.split = "easy";
  r.plugin_names = {"l1"};
  r.samples.push_back({"a", 30.5, 0.95, {{"l1", 0.01}}});
  r.samples.push_back({"b", 28.25, 0.90, {{"l1", 0.02}}});
  return r;
}

TEST(MetricsCsv, MatchesTheGoldenFile) {
  std::ifstream in(std::string(SEMVFI_TEST_DATA_DIR) + "/golden_metrics.csv");
  ASSERT_TRUE(in.good());
  const std::string golden((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(metrics_csv({sample_report()}), golden);
}

TEST(MetricReport, AggregateIsTheMeanOfTheSamples) {
  const MetricReport r = sample_report();
  EXPECT_DOUBLE_EQ(r.mean_psnr(), (30.5 + 28.25) / 2);
  EXPECT_DOUBLE_EQ(r.mean_plugin("l1"), 0.015);
}

TEST(MetricsTable, AnnotatesPluginDirection) {
  register_metric_plugin({"sharpness", MetricDirection::kHigherBetter,
                          [](const Tensor& p, const Tensor&) {
                            return std::vector<double>(static_cast<size_t>(p.size(0)), 1.0);
                          }});
  MetricReport r = sample_report();
  const std::string table = metrics_table({r});
  EXPECT_NE(table.find("l1↓"), std::string::npos) << table;
  EXPECT_NE(table.find("PSNR↑/SSIM↑"), std::string::npos);
  EXPECT_NE(table.find("29.375/0.9250"), std::string::npos) << table;
  r.plugin_names = {"sharpness"};
  for (auto& s : r.samples) s.plugins = {{"sharpness", 1.0}};
  EXPECT_NE(metrics_table({r}).find("sharpness↑"), std::string::npos);
}

TEST(MetricPlugins, BuiltInL1AndUnknownNames) {
  const auto& l1 = find_metric_plugin("l1");
  EXPECT_EQ(l1.direction, MetricDirection::kLowerBetter);
  const auto v = l1.evaluate(torch::full({2, 3, 4, 4}, 0.5), torch::zeros({2, 3, 4, 4}));
  ASSERT_EQ(v.size(), 2u);
  EXPECT_NEAR(v[1], 0.5, 1e-12);
  EXPECT_THROW(find_metric_plugin("lpips"), ContractViolation);
}

}  // namespace
}  // namespace semvfi
